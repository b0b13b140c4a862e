//! Time-series container, shift/window/chunk arithmetic, splitting and
//! z-score normalization.
//!
//! All indices are zero-based internally. The minimum ingestible length is
//! [`MIN_SERIES_LEN`]: the 50/25/25 split needs enough data on every segment.

use crate::error::{Result, TsmsError};
use serde::{Deserialize, Serialize};

/// Minimum series length accepted by [`split_series`].
pub const MIN_SERIES_LEN: usize = 250;

/// An ordered sequence of finite real observations.
///
/// `origin_index` records the offset of the first value inside the source
/// series, so slices keep track of where they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    origin_index: usize,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_origin(values, 0)
    }

    pub fn with_origin(values: Vec<f64>, origin_index: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(TsmsError::SeriesTooShort { len: 0, min: 1 });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(TsmsError::NonFiniteData { index });
        }
        Ok(Self {
            values,
            origin_index,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn origin_index(&self) -> usize {
        self.origin_index
    }

    /// A contiguous sub-series of `len` values starting at `start`
    /// (relative to this series), preserving absolute origin bookkeeping.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.values.len() {
            return Err(TsmsError::RegionTooShort {
                len: self.values.len().saturating_sub(start),
                min: len,
            });
        }
        Self::with_origin(
            self.values[start..start + len].to_vec(),
            self.origin_index + start,
        )
    }
}

/// The 50/25/25 partition of a source series.
#[derive(Clone, Debug)]
pub struct SeriesSplit {
    pub train: TimeSeries,
    pub val: TimeSeries,
    pub test: TimeSeries,
    /// `(end of train, end of validation)` as offsets into the source series.
    pub boundaries: (usize, usize),
}

/// Split a series into train (50%), validation (25%) and test (remainder).
///
/// Cut points are floored; whatever is left over goes to the test segment.
pub fn split_series(series: &TimeSeries) -> Result<SeriesSplit> {
    let n = series.len();
    if n < MIN_SERIES_LEN {
        return Err(TsmsError::SeriesTooShort {
            len: n,
            min: MIN_SERIES_LEN,
        });
    }
    let train_len = n / 2;
    let val_len = n / 4;
    let test_len = n - train_len - val_len;
    Ok(SeriesSplit {
        train: series.slice(0, train_len)?,
        val: series.slice(train_len, val_len)?,
        test: series.slice(train_len + val_len, test_len)?,
        boundaries: (train_len, train_len + val_len),
    })
}

/// Z-score transform fitted on the training segment only.
///
/// Uses the population standard deviation so the fit is deterministic and
/// free of bias-correction ambiguity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    pub fn fit(train: &TimeSeries) -> Result<Self> {
        if train.len() < 2 {
            return Err(TsmsError::SeriesTooShort {
                len: train.len(),
                min: 2,
            });
        }
        let n = train.len() as f64;
        let mean = train.values().iter().sum::<f64>() / n;
        let var = train
            .values()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        let std = var.sqrt();
        if std <= 0.0 {
            return Err(TsmsError::DegenerateSeries);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, series: &TimeSeries) -> TimeSeries {
        let values = series
            .values()
            .iter()
            .map(|v| (v - self.mean) / self.std)
            .collect();
        TimeSeries {
            values,
            origin_index: series.origin_index(),
        }
    }

    pub fn invert(&self, series: &TimeSeries) -> TimeSeries {
        TimeSeries {
            values: series
                .values()
                .iter()
                .map(|v| v * self.std + self.mean)
                .collect(),
            origin_index: series.origin_index(),
        }
    }

    pub fn invert_value(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// A lag window of `L` inputs and the `H` labels that immediately follow it.
#[derive(Clone, Debug, PartialEq)]
pub struct LagWindow {
    pub lags: Vec<f64>,
    pub label: Vec<f64>,
    /// Index of the last lag inside the source series (absolute, via origin).
    pub t_end: usize,
}

/// Step-size-one sliding windows over `series`.
///
/// Yields `|series| - L - H + 1` windows; window `p` has lags
/// `series[p .. p+L]` and label `series[p+L .. p+L+H]`.
pub fn make_training_windows(series: &TimeSeries, lags: usize, horizon: usize) -> Result<Vec<LagWindow>> {
    let n = series.len();
    if n < lags + horizon {
        return Err(TsmsError::SeriesTooShort {
            len: n,
            min: lags + horizon,
        });
    }
    let values = series.values();
    let count = n - lags - horizon + 1;
    let mut windows = Vec::with_capacity(count);
    for p in 0..count {
        windows.push(LagWindow {
            lags: values[p..p + lags].to_vec(),
            label: values[p + lags..p + lags + horizon].to_vec(),
            t_end: series.origin_index() + p + lags - 1,
        });
    }
    Ok(windows)
}

/// A validation chunk of `omega` values plus the `H` labels following it.
#[derive(Clone, Debug, PartialEq)]
pub struct Chunk {
    pub values: Vec<f64>,
    pub label: Vec<f64>,
    /// One-based chunk number within its region.
    pub chunk_index: usize,
    /// Absolute index of the first chunk value in the source series.
    pub start_index: usize,
}

/// Tile `region` into `floor((|region| - H) / omega)` non-overlapping chunks.
///
/// Each chunk's label lies inside the region; a trailing remainder shorter
/// than `omega + H` is discarded.
pub fn make_chunks(region: &TimeSeries, omega: usize, horizon: usize) -> Result<Vec<Chunk>> {
    let n = region.len();
    if omega == 0 {
        return Err(TsmsError::InvalidParameters("omega must be positive".into()));
    }
    if n < omega + horizon {
        return Err(TsmsError::RegionTooShort {
            len: n,
            min: omega + horizon,
        });
    }
    let count = (n - horizon) / omega;
    let values = region.values();
    let mut chunks = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * omega;
        chunks.push(Chunk {
            values: values[start..start + omega].to_vec(),
            label: values[start + omega..start + omega + horizon].to_vec(),
            chunk_index: k + 1,
            start_index: region.origin_index() + start,
        });
    }
    Ok(chunks)
}
