//! Hoeffding-bound concept drift detection.
//!
//! The detector tracks the running mean of observations arriving after the
//! reference range and fires when its deviation from the reference mean
//! exceeds the Hoeffding bound `sqrt(r^2 ln(2/sigma) / (2W))`, with `r` the
//! empirical data range and `W` the number of observations since the
//! reference ended. On a drift the reference mean becomes the running mean,
//! the reference range becomes the post-reference window and the running
//! statistics clear.

use crate::error::{Result, TsmsError};
use crate::series::TimeSeries;

/// Default confidence parameter.
pub const DEFAULT_SIGMA: f64 = 0.99;

/// The Hoeffding deviation bound after `w` observations of a variable with
/// range `r` at confidence `sigma`.
pub fn hoeffding_bound(r: f64, sigma: f64, w: usize) -> Result<f64> {
    if w < 1 || r <= 0.0 || !(0.0..1.0).contains(&sigma) || sigma <= 0.0 {
        return Err(TsmsError::InvalidParameters(format!(
            "hoeffding_bound requires w >= 1, r > 0, sigma in (0,1); got r={r}, sigma={sigma}, w={w}"
        )));
    }
    Ok((r * r * (2.0 / sigma).ln() / (2.0 * w as f64)).sqrt())
}

/// Emitted when the running mean deviates beyond the bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftEvent {
    /// `|running mean - reference mean|` at the firing step.
    pub delta: f64,
    /// Bound value at the firing step.
    pub bound: f64,
    /// Observations since the reference ended, inclusive.
    pub w: usize,
}

#[derive(Clone, Debug)]
pub struct DriftState {
    mu0: f64,
    r: f64,
    sigma: f64,
    range_hint: Option<f64>,
    running_sum: f64,
    /// Observations accumulated since the reference ended; kept so the
    /// range can be re-estimated over them after a drift.
    pending: Vec<f64>,
}

impl DriftState {
    /// Initialize from a reference window (typically the validation region).
    ///
    /// `range_hint` substitutes for the empirical range whenever the current
    /// reference window is constant.
    pub fn init(reference: &TimeSeries, sigma: f64, range_hint: Option<f64>) -> Result<Self> {
        if reference.len() < 2 {
            return Err(TsmsError::ReferenceTooShort {
                len: reference.len(),
            });
        }
        if !(0.0..1.0).contains(&sigma) || sigma <= 0.0 {
            return Err(TsmsError::InvalidParameters(format!(
                "sigma must be in (0,1), got {sigma}"
            )));
        }
        let values = reference.values();
        let mu0 = values.iter().sum::<f64>() / values.len() as f64;
        let r = Self::estimate_range(values, range_hint)?;
        Ok(Self {
            mu0,
            r,
            sigma,
            range_hint,
            running_sum: 0.0,
            pending: Vec::new(),
        })
    }

    fn estimate_range(values: &[f64], hint: Option<f64>) -> Result<f64> {
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let r = max - min;
        if r > 0.0 {
            Ok(r)
        } else {
            hint.filter(|h| *h > 0.0).ok_or(TsmsError::DegenerateRange)
        }
    }

    pub fn reference_mean(&self) -> f64 {
        self.mu0
    }

    pub fn range(&self) -> f64 {
        self.r
    }

    /// Number of observations accumulated since the reference ended.
    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    /// Feed one newly revealed observation; returns a [`DriftEvent`] when
    /// the deviation exceeds the bound, after resetting the state.
    pub fn observe(&mut self, value: f64) -> Result<Option<DriftEvent>> {
        if !value.is_finite() {
            return Err(TsmsError::NonFiniteObservation);
        }
        self.pending.push(value);
        self.running_sum += value;
        let w = self.pending.len();
        let mu_j = self.running_sum / w as f64;
        let delta = (mu_j - self.mu0).abs();
        let bound = hoeffding_bound(self.r, self.sigma, w)?;
        if delta > bound {
            self.mu0 = mu_j;
            // Re-estimate the range over the post-reference window; keep the
            // previous range when that window is constant and no hint exists.
            if let Ok(r) = Self::estimate_range(&self.pending, self.range_hint) {
                self.r = r;
            }
            self.pending.clear();
            self.running_sum = 0.0;
            Ok(Some(DriftEvent { delta, bound, w }))
        } else {
            Ok(None)
        }
    }
}
