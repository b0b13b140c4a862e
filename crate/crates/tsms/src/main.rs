use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use tsms::harness::{
    emit_explanation_report, load_dataset_csv, parse_config, prepare_dataset, report_to_text,
    run_experiment, run_variant, RunConfig, VariantChoice,
};
use tsms::selector::SelectionVariant;
use tsms::TsmsError;

/// Adaptive tree-based model selection for time-series forecasting.
#[derive(Parser)]
#[command(name = "tsms", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    All,
    Adaptive,
    Static,
    Periodic,
}

impl From<VariantArg> for VariantChoice {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::All => VariantChoice::All,
            VariantArg::Adaptive => VariantChoice::Adaptive,
            VariantArg::Static => VariantChoice::Static,
            VariantArg::Periodic => VariantChoice::Periodic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment described by a key=value config file.
    Run {
        /// Config file; `dataset` may repeat, unknown keys are rejected.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one dataset and emit a step-by-step explanation report.
    Explain {
        /// Dataset file (one value per line, optional header).
        dataset: PathBuf,
        /// Report destination.
        #[arg(long, default_value = "explanation.txt")]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = VariantArg::Adaptive)]
        variant: VariantArg,
    },
    /// Compare wall-clock runtime of the selection variants.
    Bench {
        /// Config file; the variant key is ignored, all variants run.
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<RunConfig, TsmsError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn explain_variant(choice: VariantArg, config: &RunConfig) -> Result<SelectionVariant, TsmsError> {
    Ok(match choice {
        VariantArg::Adaptive | VariantArg::All => SelectionVariant::Adaptive,
        VariantArg::Static => SelectionVariant::Static,
        VariantArg::Periodic => SelectionVariant::Periodic {
            updates: config.periodic_updates,
        },
    })
}

fn run(cli: Cli) -> Result<ExitCode, TsmsError> {
    match cli.command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            let report = run_experiment(&config)?;
            let text = report_to_text(&report);
            std::fs::create_dir_all(&config.output_dir)?;
            std::fs::write(config.output_dir.join("report.txt"), &text)?;
            print!("{text}");
            Ok(if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Explain {
            dataset,
            output,
            seed,
            variant,
        } => {
            let mut config = RunConfig {
                seed,
                datasets: vec![dataset.clone()],
                ..RunConfig::default()
            };
            config.variant = variant.into();
            config.validate()?;
            let name = dataset.display().to_string();
            let raw = load_dataset_csv(&dataset, seed)?;
            let prepared = prepare_dataset(&name, &raw, &config)?;
            let selection = explain_variant(variant, &config)?;
            let (result, secs) = run_variant(&prepared, selection, &config, true)?;
            emit_explanation_report(&result, &output)?;
            eprintln!(
                "wrote {} ({} steps, {} rebuilds, {} drifts, {secs:.2}s)",
                output.display(),
                result.records.len(),
                result.rebuilds.len(),
                result.drifts.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { config } => {
            let mut config = load_config(&config)?;
            config.variant = VariantChoice::All;
            let report = run_experiment(&config)?;
            println!("runtime comparison over {} datasets (seconds)", report.datasets.len());
            for (j, method) in report.methods.iter().enumerate() {
                let times: Vec<f64> = report.runtime_secs.iter().map(|row| row[j]).collect();
                if times.is_empty() {
                    continue;
                }
                let mean = times.iter().sum::<f64>() / times.len() as f64;
                let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
                    / times.len() as f64;
                println!("{method}\t{mean:.3} ± {:.3}", var.sqrt());
            }
            for (name, reason) in &report.failures {
                eprintln!("failed {name}: {reason}");
            }
            Ok(if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e @ TsmsError::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
