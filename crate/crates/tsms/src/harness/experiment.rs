//! End-to-end experiment orchestration: prepare each dataset (split,
//! normalize, train the pool, build initial Regions of Competence), run the
//! configured selection variants over the test region, and aggregate RMSE,
//! ranks and wins/losses across datasets.

use crate::drift::DriftState;
use crate::error::{Result, TsmsError};
use crate::harness::config::{RmseScale, RunConfig, VariantChoice};
use crate::harness::dataset::load_dataset_csv;
use crate::roc::{build_rocs, RegionOfCompetence, RoCConfig};
use crate::selector::{run_online, OnlineConfig, RunOutput, SelectionVariant};
use crate::series::{split_series, Normalizer, SeriesSplit, TimeSeries};
use crate::shapley::BackgroundSet;
use crate::tree::{build_model_pool_with, ModelPool};
use sha2::{Digest, Sha256};
use std::time::Instant;

/// Everything derived from one dataset before the online loop starts.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub name: String,
    /// The full series on the normalized scale.
    pub series: TimeSeries,
    pub split: SeriesSplit,
    pub normalizer: Normalizer,
    pub pool: ModelPool,
    pub background: BackgroundSet,
    pub initial_rocs: Vec<RegionOfCompetence>,
    /// Lowest validation-RMSE pool member; used when every RoC is empty.
    pub fallback_model: usize,
    /// Per-model one-step RMSE over the test region (normalized scale).
    pub model_test_rmse: Vec<f64>,
    /// Wall-clock seconds of each model's test-region forecast pass.
    pub model_test_secs: Vec<f64>,
}

impl PreparedDataset {
    pub fn roc_config(&self, config: &RunConfig) -> RoCConfig {
        RoCConfig {
            omega: config.omega,
            tau: config.tau,
            lags: config.lags,
            horizon: config.horizon,
        }
    }

    /// Fresh detector over the validation reference, with the training
    /// range as the value-range hint.
    pub fn detector(&self, config: &RunConfig) -> Result<DriftState> {
        let train = self.split.train.values();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in train {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let hint = if hi > lo { Some(hi - lo) } else { None };
        DriftState::init(&self.split.val, config.sigma, hint)
    }
}

/// One-step rolling RMSE over a region: for each target index the window is
/// the `lags` true values immediately before it.
fn rolling_model_rmse(
    model: &crate::tree::TreeEnsemble,
    values: &[f64],
    start: usize,
    end: usize,
    lags: usize,
) -> Result<f64> {
    let mut sum = 0.0;
    for target in start..end {
        let pred = model.predict(&values[target - lags..target])?;
        let err = pred - values[target];
        sum += err * err;
    }
    Ok((sum / (end - start) as f64).sqrt())
}

/// Split, normalize, train the 21-model pool, score it, and build the
/// initial RoCs over the validation region.
pub fn prepare_dataset(name: &str, raw: &TimeSeries, config: &RunConfig) -> Result<PreparedDataset> {
    config.validate_parameters()?;
    let raw_split = split_series(raw)?;
    let normalizer = Normalizer::fit(&raw_split.train)?;
    let series = normalizer.apply(raw);
    let split = split_series(&series)?;

    let windows = crate::series::make_training_windows(&split.train, config.lags, config.horizon)?;
    let pool = build_model_pool_with(&windows, config.seed, config.learning_rate)?;
    let background = BackgroundSet::from_windows(&windows, config.background_cap, config.seed)?;

    let roc_config = RoCConfig {
        omega: config.omega,
        tau: config.tau,
        lags: config.lags,
        horizon: config.horizon,
    };
    let initial_rocs = build_rocs(&pool, &split.val, &roc_config, &background, 0)?;

    let values = series.values();
    let (val_start, test_start) = split.boundaries;
    let mut fallback_model = 1;
    let mut best_val = f64::INFINITY;
    let mut model_test_rmse = Vec::with_capacity(pool.len());
    let mut model_test_secs = Vec::with_capacity(pool.len());
    for model in &pool.models {
        let val_rmse = rolling_model_rmse(model, values, val_start, test_start, config.lags)?;
        if val_rmse < best_val {
            best_val = val_rmse;
            fallback_model = model.model_id;
        }
        let started = Instant::now();
        let test_rmse = rolling_model_rmse(model, values, test_start, values.len(), config.lags)?;
        model_test_secs.push(started.elapsed().as_secs_f64());
        model_test_rmse.push(test_rmse);
    }

    Ok(PreparedDataset {
        name: name.to_string(),
        series,
        split,
        normalizer,
        pool,
        background,
        initial_rocs,
        fallback_model,
        model_test_rmse,
        model_test_secs,
    })
}

impl RunConfig {
    /// Validation that does not require dataset paths, for programmatic use.
    pub fn validate_parameters(&self) -> Result<()> {
        let mut probe = self.clone();
        if probe.datasets.is_empty() {
            probe.datasets.push(std::path::PathBuf::from("-"));
        }
        probe.validate()
    }
}

/// RMSE of the one-step forecasts in an online run, on the requested scale.
pub fn run_rmse(output: &RunOutput, normalizer: &Normalizer, scale: RmseScale) -> f64 {
    let mut sum = 0.0;
    for r in &output.records {
        let (f, a) = match scale {
            RmseScale::Normalized => (r.forecast[0], r.actual[0]),
            RmseScale::Original => (
                normalizer.invert_value(r.forecast[0]),
                normalizer.invert_value(r.actual[0]),
            ),
        };
        let err = f - a;
        sum += err * err;
    }
    (sum / output.records.len() as f64).sqrt()
}

/// Ascending-RMSE ranks per dataset (ties get the average of the positions
/// they span) and wins/losses of every method against the reference column,
/// counted per dataset by strict inequality.
pub fn rank_and_compare(
    table: &[Vec<f64>],
    reference: usize,
) -> Result<(Vec<f64>, Vec<(usize, usize)>)> {
    let Some(first) = table.first() else {
        return Err(TsmsError::IncompleteTable("empty table".into()));
    };
    let m = first.len();
    if m == 0 || reference >= m || table.iter().any(|row| row.len() != m) {
        return Err(TsmsError::IncompleteTable(
            "ragged rows or reference column out of range".into(),
        ));
    }
    let mut rank_sums = vec![0.0; m];
    let mut wins = vec![0usize; m];
    let mut losses = vec![0usize; m];
    for row in table {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(TsmsError::IncompleteTable("non-finite entry".into()));
        }
        for (j, &v) in row.iter().enumerate() {
            let below = row.iter().filter(|&&o| o < v).count();
            let equal = row.iter().filter(|&&o| o == v).count();
            // Positions below+1 ..= below+equal averaged.
            rank_sums[j] += below as f64 + (equal as f64 + 1.0) / 2.0;
            if v < row[reference] {
                wins[j] += 1;
            } else if v > row[reference] {
                losses[j] += 1;
            }
        }
    }
    let n = table.len() as f64;
    let avg_ranks = rank_sums.into_iter().map(|s| s / n).collect();
    let wins_losses = wins.into_iter().zip(losses).collect();
    Ok((avg_ranks, wins_losses))
}

#[derive(Clone, Debug)]
pub struct EvaluationReport {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `rmse[dataset][method]`.
    pub rmse: Vec<Vec<f64>>,
    /// Wall-clock seconds, same shape as `rmse`.
    pub runtime_secs: Vec<Vec<f64>>,
    pub avg_ranks: Vec<f64>,
    pub wins_losses: Vec<(usize, usize)>,
    /// Column index of the reference method for wins/losses.
    pub reference: usize,
    /// One-based id of the pool member with the lowest mean test RMSE
    /// across all evaluated datasets.
    pub best_single_id: usize,
    /// Datasets that failed to load or run, with the reason.
    pub failures: Vec<(String, String)>,
    pub seed: u64,
    pub config_hash: String,
}

fn configured_variants(config: &RunConfig) -> Vec<SelectionVariant> {
    match config.variant {
        VariantChoice::All => vec![
            SelectionVariant::Adaptive,
            SelectionVariant::Static,
            SelectionVariant::Periodic {
                updates: config.periodic_updates,
            },
        ],
        VariantChoice::Adaptive => vec![SelectionVariant::Adaptive],
        VariantChoice::Static => vec![SelectionVariant::Static],
        VariantChoice::Periodic => vec![SelectionVariant::Periodic {
            updates: config.periodic_updates,
        }],
    }
}

/// Run one variant over a prepared dataset, timing the online phase only.
pub fn run_variant(
    prepared: &PreparedDataset,
    variant: SelectionVariant,
    config: &RunConfig,
    explain: bool,
) -> Result<(RunOutput, f64)> {
    let online = OnlineConfig {
        variant,
        roc: prepared.roc_config(config),
        fallback_model: prepared.fallback_model,
        explain,
    };
    let detector = prepared.detector(config)?;
    let started = Instant::now();
    let output = run_online(
        &prepared.pool,
        &prepared.initial_rocs,
        &prepared.series,
        &prepared.split,
        &online,
        &prepared.background,
        detector,
    )?;
    Ok((output, started.elapsed().as_secs_f64()))
}

/// Run every configured variant plus the Best-Single baseline over every
/// dataset. Per-dataset failures are logged and excluded from aggregation;
/// they never abort the batch.
pub fn run_experiment(config: &RunConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let prepared: Vec<std::result::Result<PreparedDataset, (String, String)>> = config
        .datasets
        .iter()
        .map(|path| {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            load_dataset_csv(path, config.seed)
                .and_then(|raw| prepare_dataset(&name, &raw, config))
                .map_err(|e| (name, e.to_string()))
        })
        .collect();
    let mut ready = Vec::new();
    let mut failures = Vec::new();
    for p in prepared {
        match p {
            Ok(d) => ready.push(d),
            Err(f) => failures.push(f),
        }
    }
    run_experiment_prepared(&ready, failures, config)
}

/// The aggregation half of [`run_experiment`], reusable with datasets
/// prepared from in-memory series.
pub fn run_experiment_prepared(
    ready: &[PreparedDataset],
    mut failures: Vec<(String, String)>,
    config: &RunConfig,
) -> Result<EvaluationReport> {
    let variants = configured_variants(config);
    let mut methods: Vec<String> = variants.iter().map(|v| v.label().to_string()).collect();
    methods.push("Best-Single".to_string());
    let reference = variants
        .iter()
        .position(|v| matches!(v, SelectionVariant::Adaptive))
        .unwrap_or(0);

    let mut datasets = Vec::new();
    let mut rmse = Vec::new();
    let mut runtime_secs = Vec::new();
    let mut model_rows: Vec<&PreparedDataset> = Vec::new();
    for prepared in ready {
        let mut row = Vec::with_capacity(methods.len());
        let mut times = Vec::with_capacity(methods.len());
        let mut ok = true;
        for &variant in &variants {
            match run_variant(prepared, variant, config, false) {
                Ok((output, secs)) => {
                    row.push(run_rmse(&output, &prepared.normalizer, config.rmse_scale));
                    times.push(secs);
                }
                Err(e) => {
                    failures.push((prepared.name.clone(), e.to_string()));
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            datasets.push(prepared.name.clone());
            rmse.push(row);
            runtime_secs.push(times);
            model_rows.push(prepared);
        }
    }

    // Best-Single: the pool configuration with the lowest mean test RMSE
    // over the evaluated datasets, scored with that same configuration
    // everywhere.
    let mut best_single_id = 0;
    if let Some(first) = model_rows.first() {
        let n_models = first.model_test_rmse.len();
        let mut best_mean = f64::INFINITY;
        for m in 0..n_models {
            let mean: f64 = model_rows
                .iter()
                .map(|d| d.model_test_rmse[m])
                .sum::<f64>()
                / model_rows.len() as f64;
            if mean < best_mean {
                best_mean = mean;
                best_single_id = m + 1;
            }
        }
        for (i, prepared) in model_rows.iter().enumerate() {
            let norm_rmse = prepared.model_test_rmse[best_single_id - 1];
            let value = match config.rmse_scale {
                RmseScale::Normalized => norm_rmse,
                RmseScale::Original => norm_rmse * prepared.normalizer.std,
            };
            rmse[i].push(value);
            runtime_secs[i].push(prepared.model_test_secs[best_single_id - 1]);
        }
    }

    let (avg_ranks, wins_losses) = if rmse.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        rank_and_compare(&rmse, reference)?
    };

    let mut hasher = Sha256::new();
    hasher.update(config.canonical_string().as_bytes());
    let config_hash = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();

    Ok(EvaluationReport {
        methods,
        datasets,
        rmse,
        runtime_secs,
        avg_ranks,
        wins_losses,
        reference,
        best_single_id,
        failures,
        seed: config.seed,
        config_hash,
    })
}
