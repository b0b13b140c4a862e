//! Regions of Competence: per-model collections of salient validation
//! subsequences, built by decomposing each chunk winner's squared loss onto
//! its input lags and keeping the stretches that reduced the loss the most.

use crate::error::{Result, TsmsError};
use crate::series::{make_chunks, make_training_windows, Chunk, TimeSeries};
use crate::shapley::{shapley_values, BackgroundSet, Explanation, ValueKind};
use crate::tree::ModelPool;

/// Shortest pattern worth keeping; shorter stretches add noise, not shape.
pub const MIN_MEMBER_LEN: usize = 3;

/// A salient subsequence with provenance back into the source region.
#[derive(Clone, Debug, PartialEq)]
pub struct RoCMember {
    pub pattern: Vec<f64>,
    /// Absolute index of the first pattern value in the source series.
    pub series_offset: usize,
    /// One-based chunk number within the region it was extracted from.
    pub chunk_index: usize,
    /// Zero-based window position within that chunk.
    pub window_index: usize,
    /// Test-time step of creation; zero for the initial build.
    pub created_at: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionOfCompetence {
    pub model_id: usize,
    pub members: Vec<RoCMember>,
}

/// Parameters of the RoC creation process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoCConfig {
    /// Chunk size used to decide per-chunk winners.
    pub omega: usize,
    /// Saliency threshold on the negated loss attributions.
    pub tau: f64,
    pub lags: usize,
    pub horizon: usize,
}

impl RoCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.omega < self.lags + self.horizon {
            return Err(TsmsError::InvalidParameters(format!(
                "omega ({}) must be at least L + H ({})",
                self.omega,
                self.lags + self.horizon
            )));
        }
        if !(self.tau > 0.0) {
            return Err(TsmsError::InvalidParameters(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// The model with the smallest squared error forecasting the chunk label
/// from the chunk's last `L` values; ties go to the lowest model id.
pub fn best_forecaster_per_chunk(pool: &ModelPool, chunk: &Chunk, lags: usize) -> Result<usize> {
    if pool.is_empty() {
        return Err(TsmsError::NoModelsAvailable);
    }
    if chunk.values.len() < lags {
        return Err(TsmsError::DimensionMismatch {
            got: chunk.values.len(),
            expected: lags,
        });
    }
    let input = &chunk.values[chunk.values.len() - lags..];
    let mut best: Option<(usize, f64)> = None;
    for model in &pool.models {
        let forecast = model.predict(input)?;
        let err = chunk
            .label
            .iter()
            .map(|y| (forecast - y) * (forecast - y))
            .sum::<f64>();
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((model.model_id, err));
        }
    }
    Ok(best.expect("pool is non-empty").0)
}

/// A maximal salient stretch of a window.
#[derive(Clone, Debug, PartialEq)]
pub struct SalientSlice {
    /// Zero-based start offset within the explained window.
    pub start: usize,
    pub values: Vec<f64>,
}

/// Threshold the negated loss attributions and slice out maximal runs.
///
/// Sign inversion makes positive entries mean "reduced the loss". Entries
/// strictly below `tau` are zeroed (exact ties survive); maximal runs of
/// survivors of length at least [`MIN_MEMBER_LEN`] map back to slices of
/// `window`.
pub fn extract_salient_subsequences(
    window: &[f64],
    phi: &Explanation,
    tau: f64,
) -> Vec<SalientSlice> {
    debug_assert_eq!(window.len(), phi.phi.len());
    let survives: Vec<bool> = phi.phi.iter().map(|p| -p >= tau).collect();
    let mut slices = Vec::new();
    let mut run_start = None;
    for i in 0..=survives.len() {
        let alive = i < survives.len() && survives[i];
        match (run_start, alive) {
            (None, true) => run_start = Some(i),
            (Some(s), false) => {
                if i - s >= MIN_MEMBER_LEN {
                    slices.push(SalientSlice {
                        start: s,
                        values: window[s..i].to_vec(),
                    });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    slices
}

/// Build one RoC per pool member over a region.
///
/// Per chunk: find the winner, slide `L`-windows through the chunk with step
/// one (`omega - L - H + 1` of them), attribute the winner's squared loss on
/// each window via loss-kind Shapley values, and file the extracted salient
/// slices under the winner. Models that win no chunk get empty RoCs.
pub fn build_rocs(
    pool: &ModelPool,
    region: &TimeSeries,
    config: &RoCConfig,
    background: &BackgroundSet,
    created_at: usize,
) -> Result<Vec<RegionOfCompetence>> {
    config.validate()?;
    if pool.is_empty() {
        return Err(TsmsError::NoModelsAvailable);
    }
    let chunks = make_chunks(region, config.omega, config.horizon)?;
    let mut rocs: Vec<RegionOfCompetence> = pool
        .models
        .iter()
        .map(|m| RegionOfCompetence {
            model_id: m.model_id,
            members: Vec::new(),
        })
        .collect();
    for chunk in &chunks {
        let winner = best_forecaster_per_chunk(pool, chunk, config.lags)?;
        let model = pool.model(winner);
        let chunk_series = TimeSeries::with_origin(chunk.values.clone(), chunk.start_index)?;
        let windows = make_training_windows(&chunk_series, config.lags, config.horizon)?;
        for (p, w) in windows.iter().enumerate() {
            let phi = shapley_values(
                model,
                background,
                &w.lags,
                Some(w.label[0]),
                ValueKind::Loss,
            )?;
            for slice in extract_salient_subsequences(&w.lags, &phi, config.tau) {
                rocs[winner - 1].members.push(RoCMember {
                    series_offset: chunk.start_index + p + slice.start,
                    pattern: slice.values,
                    chunk_index: chunk.chunk_index,
                    window_index: p,
                    created_at,
                });
            }
        }
    }
    Ok(rocs)
}

/// Append newly built members to the existing RoCs; order preserved, no
/// deduplication.
pub fn enrich_rocs(
    old: &[RegionOfCompetence],
    new: &[RegionOfCompetence],
) -> Result<Vec<RegionOfCompetence>> {
    if old.len() != new.len() {
        return Err(TsmsError::PoolMismatch(format!(
            "{} vs {} regions",
            old.len(),
            new.len()
        )));
    }
    old.iter()
        .zip(new)
        .map(|(a, b)| {
            if a.model_id != b.model_id {
                return Err(TsmsError::PoolMismatch(format!(
                    "model id {} vs {}",
                    a.model_id, b.model_id
                )));
            }
            let mut members = a.members.clone();
            members.extend(b.members.iter().cloned());
            Ok(RegionOfCompetence {
                model_id: a.model_id,
                members,
            })
        })
        .collect()
}
