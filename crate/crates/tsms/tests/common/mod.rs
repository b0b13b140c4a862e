//! Shared synthetic series for the integration tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use tsms::series::TimeSeries;

/// A seeded univariate series with an optional level shift ("regime
/// change") injected at an absolute index. `family` selects the base
/// process so batches of datasets are not clones of one another.
pub fn regime_series(
    len: usize,
    family: usize,
    seed: u64,
    shift_at: Option<usize>,
    shift: f64,
) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fast-mixing processes: short periods and weak autocorrelation keep
    // windowed means near the reference mean, so the drift detector stays
    // quiet until the injected shift.
    let period = rng.gen_range(8.0..16.0);
    let mut ar = 0.0;
    let values: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64;
            let noise = rng.gen_range(-0.15..0.15);
            let base = match family % 4 {
                0 => (t * std::f64::consts::TAU / period).sin(),
                1 => {
                    ar = 0.5 * ar + rng.gen_range(-0.4..0.4);
                    ar
                }
                2 => (t * std::f64::consts::TAU / period).sin() + 0.001 * t,
                _ => {
                    (t * std::f64::consts::TAU / period).sin()
                        + 0.5 * (t * std::f64::consts::TAU / (period * 0.37)).sin()
                }
            };
            let level = match shift_at {
                Some(s) if i >= s => shift,
                _ => 0.0,
            };
            base + noise + level
        })
        .collect();
    TimeSeries::new(values).expect("generator always yields finite values")
}

/// Write a series as a one-value-per-line file and return its path.
#[allow(dead_code)]
pub fn write_series(dir: &std::path::Path, name: &str, series: &TimeSeries) -> PathBuf {
    let path = dir.join(name);
    let text: String = series
        .values()
        .iter()
        .map(|v| format!("{v}\n"))
        .collect();
    std::fs::write(&path, text).unwrap();
    path
}
