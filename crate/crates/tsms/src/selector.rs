//! The online forecasting loop: per-step DTW-based model selection,
//! drift-triggered RoC recreation and enrichment, and the static/periodic
//! variants.
//!
//! Models are never retrained at test time; only the Regions of Competence
//! change. The test-time window is always the `L` true observations
//! preceding the forecast target (one-step-ahead rolling evaluation).

use crate::drift::DriftState;
use crate::dtw::dtw_distance;
use crate::error::{Result, TsmsError};
use crate::roc::{build_rocs, enrich_rocs, RegionOfCompetence, RoCConfig, RoCMember};
use crate::series::{SeriesSplit, TimeSeries};
use crate::shapley::{shapley_prediction_linear, BackgroundSet, Explanation};
use crate::tree::{stability_intervals, ModelPool, StabilityIntervals};

pub const DEFAULT_PERIODIC_UPDATES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionVariant {
    /// Drift detection triggers RoC recreation.
    Adaptive,
    /// RoCs stay fixed after the initial build.
    Static,
    /// Blind rebuilds at equally spaced test indices.
    Periodic { updates: usize },
}

impl SelectionVariant {
    pub fn label(&self) -> &'static str {
        match self {
            SelectionVariant::Adaptive => "TSMS",
            SelectionVariant::Static => "TSMS-St",
            SelectionVariant::Periodic { .. } => "TSMS-Per",
        }
    }
}

/// Why a model won a selection step.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionEvidence {
    pub min_distance: f64,
    pub closest: Option<RoCMember>,
    /// Per-model minimum DTW distance; `None` for empty RoCs.
    pub per_model_min: Vec<Option<f64>>,
    pub runner_up: Option<(usize, f64)>,
    /// True when every RoC was empty and the fallback model was used.
    pub fallback: bool,
}

/// The model whose RoC holds the member closest (in DTW distance) to the
/// window; ties go to the lowest model id. With every RoC empty the
/// configured fallback is returned with the evidence flagged.
pub fn select_model(
    rocs: &[RegionOfCompetence],
    window: &[f64],
    fallback: Option<usize>,
) -> Result<(usize, SelectionEvidence)> {
    if rocs.is_empty() {
        return Err(TsmsError::NoModelsAvailable);
    }
    let mut per_model_min: Vec<Option<f64>> = Vec::with_capacity(rocs.len());
    let mut best: Option<(usize, f64, RoCMember)> = None;
    for roc in rocs {
        let mut model_min: Option<(f64, &RoCMember)> = None;
        for member in &roc.members {
            let d = dtw_distance(window, &member.pattern)?;
            if model_min.map_or(true, |(dm, _)| d < dm) {
                model_min = Some((d, member));
            }
        }
        per_model_min.push(model_min.map(|(d, _)| d));
        if let Some((d, member)) = model_min {
            if best.as_ref().map_or(true, |(_, bd, _)| d < *bd) {
                best = Some((roc.model_id, d, member.clone()));
            }
        }
    }
    match best {
        Some((model_id, min_distance, closest)) => {
            let runner_up = rocs
                .iter()
                .zip(&per_model_min)
                .filter(|(roc, d)| roc.model_id != model_id && d.is_some())
                .map(|(roc, d)| (roc.model_id, d.unwrap()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|(id, d)| (id, d));
            Ok((
                model_id,
                SelectionEvidence {
                    min_distance,
                    closest: Some(closest),
                    per_model_min,
                    runner_up,
                    fallback: false,
                },
            ))
        }
        None => {
            let id = fallback.ok_or(TsmsError::NoModelsAvailable)?;
            Ok((
                id,
                SelectionEvidence {
                    min_distance: f64::INFINITY,
                    closest: None,
                    per_model_min,
                    runner_up: None,
                    fallback: true,
                },
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RebuildTrigger {
    Drift,
    Periodic,
}

/// One attempted RoC recreation, performed or skipped.
#[derive(Clone, Debug)]
pub struct RebuildEvent {
    pub t: usize,
    pub trigger: RebuildTrigger,
    /// False when the accumulated region was shorter than `omega + H`.
    pub performed: bool,
    pub region_start: usize,
    pub region_len: usize,
    pub pre_sizes: Vec<usize>,
    pub post_sizes: Vec<usize>,
    /// Closest (model, distance) to the current window before/after.
    pub pre_closest: Option<(usize, f64)>,
    pub post_closest: Option<(usize, f64)>,
}

#[derive(Clone, Copy, Debug)]
pub struct DriftRecord {
    pub t: usize,
    pub delta: f64,
    pub bound: f64,
    pub w: usize,
}

/// Per-test-step log entry.
#[derive(Clone, Debug)]
pub struct SelectionRecord {
    pub t: usize,
    pub chosen_model: usize,
    pub min_distance: f64,
    pub closest_member: Option<RoCMember>,
    pub runner_up: Option<(usize, f64)>,
    pub per_model_min: Vec<Option<f64>>,
    pub fallback: bool,
    pub drift_fired: bool,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
    /// Prediction-kind lag attributions of the chosen model (explain mode).
    pub attributions: Option<Explanation>,
    pub stability: Option<StabilityIntervals>,
    /// Model whose closest member is furthest from the window.
    pub furthest: Option<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<SelectionRecord>,
    pub rebuilds: Vec<RebuildEvent>,
    pub drifts: Vec<DriftRecord>,
    pub final_rocs: Vec<RegionOfCompetence>,
}

#[derive(Clone, Debug)]
pub struct OnlineConfig {
    pub variant: SelectionVariant,
    pub roc: RoCConfig,
    /// One-based id of the model used when every RoC is empty (the lowest
    /// validation-RMSE pool member).
    pub fallback_model: usize,
    /// Compute per-step attributions, stability intervals and the furthest
    /// member for explanation reports.
    pub explain: bool,
}

/// Run the online loop over the test region.
///
/// Adaptive runs feed each revealed observation to the drift detector and
/// rebuild RoCs over the post-reference window when it fires (skipping, but
/// still logging, rebuilds whose region is shorter than `omega + H`).
/// Periodic runs attempt rebuilds at `updates` equally spaced test indices
/// over all observations since the last performed rebuild. Static runs
/// never rebuild.
pub fn run_online(
    pool: &ModelPool,
    initial_rocs: &[RegionOfCompetence],
    series: &TimeSeries,
    split: &SeriesSplit,
    config: &OnlineConfig,
    background: &BackgroundSet,
    mut detector: DriftState,
) -> Result<RunOutput> {
    config.roc.validate()?;
    let lags = config.roc.lags;
    let test_len = split.test.len();
    let test_start = split.boundaries.1;
    if test_start < lags {
        return Err(TsmsError::RegionTooShort {
            len: test_start,
            min: lags,
        });
    }
    let values = series.values();
    let mut rocs = initial_rocs.to_vec();
    let mut records = Vec::with_capacity(test_len);
    let mut rebuilds = Vec::new();
    let mut drifts = Vec::new();

    // Start of the pending observation window (absolute index).
    let mut drift_region_start = test_start;
    let mut periodic_region_start = test_start;
    let periodic_points: Vec<usize> = match config.variant {
        SelectionVariant::Periodic { updates } => {
            if updates < 1 {
                return Err(TsmsError::InvalidParameters(
                    "periodic updates must be >= 1".into(),
                ));
            }
            (1..=updates).map(|i| i * test_len / updates).collect()
        }
        _ => Vec::new(),
    };
    let mut next_point = 0;

    for t in 1..=test_len {
        let target = test_start + t - 1;
        let window = &values[target - lags..target];
        let (chosen, evidence) = select_model(&rocs, window, Some(config.fallback_model))?;
        let model = pool.model(chosen);
        let forecast = vec![model.predict(window)?];
        let actual = vec![values[target]];

        let (attributions, stability, furthest) = if config.explain {
            let attr = shapley_prediction_linear(model, background, window)?;
            let stab = stability_intervals(model, window)?;
            let far = rocs
                .iter()
                .zip(&evidence.per_model_min)
                .filter_map(|(roc, d)| d.map(|d| (roc.model_id, d)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            (Some(attr), Some(stab), far)
        } else {
            (None, None, None)
        };

        let mut drift_fired = false;
        match config.variant {
            SelectionVariant::Adaptive => {
                if let Some(event) = detector.observe(actual[0])? {
                    drift_fired = true;
                    drifts.push(DriftRecord {
                        t,
                        delta: event.delta,
                        bound: event.bound,
                        w: event.w,
                    });
                    let region_start = drift_region_start;
                    let region_len = target + 1 - region_start;
                    attempt_rebuild(
                        pool,
                        &mut rocs,
                        series,
                        config,
                        background,
                        window,
                        &mut rebuilds,
                        t,
                        RebuildTrigger::Drift,
                        region_start,
                        region_len,
                    )?;
                    // The detector reset regardless of whether the rebuild
                    // was performed.
                    drift_region_start = target + 1;
                }
            }
            SelectionVariant::Periodic { .. } => {
                if next_point < periodic_points.len() && t == periodic_points[next_point] {
                    next_point += 1;
                    let region_start = periodic_region_start;
                    let region_len = target + 1 - region_start;
                    let performed = attempt_rebuild(
                        pool,
                        &mut rocs,
                        series,
                        config,
                        background,
                        window,
                        &mut rebuilds,
                        t,
                        RebuildTrigger::Periodic,
                        region_start,
                        region_len,
                    )?;
                    if performed {
                        periodic_region_start = target + 1;
                    }
                }
            }
            SelectionVariant::Static => {}
        }

        records.push(SelectionRecord {
            t,
            chosen_model: chosen,
            min_distance: evidence.min_distance,
            closest_member: evidence.closest,
            runner_up: evidence.runner_up,
            per_model_min: evidence.per_model_min,
            fallback: evidence.fallback,
            drift_fired,
            forecast,
            actual,
            attributions,
            stability,
            furthest,
        });
    }

    Ok(RunOutput {
        records,
        rebuilds,
        drifts,
        final_rocs: rocs,
    })
}

#[allow(clippy::too_many_arguments)]
fn attempt_rebuild(
    pool: &ModelPool,
    rocs: &mut Vec<RegionOfCompetence>,
    series: &TimeSeries,
    config: &OnlineConfig,
    background: &BackgroundSet,
    window: &[f64],
    rebuilds: &mut Vec<RebuildEvent>,
    t: usize,
    trigger: RebuildTrigger,
    region_start: usize,
    region_len: usize,
) -> Result<bool> {
    let pre_sizes: Vec<usize> = rocs.iter().map(|r| r.members.len()).collect();
    let pre_closest = closest_of(rocs, window)?;
    let performed = region_len >= config.roc.omega + config.roc.horizon;
    if performed {
        let region = series.slice(region_start - series.origin_index(), region_len)?;
        let fresh = build_rocs(pool, &region, &config.roc, background, t)?;
        *rocs = enrich_rocs(rocs, &fresh)?;
    }
    let post_sizes: Vec<usize> = rocs.iter().map(|r| r.members.len()).collect();
    let post_closest = if performed {
        closest_of(rocs, window)?
    } else {
        pre_closest
    };
    rebuilds.push(RebuildEvent {
        t,
        trigger,
        performed,
        region_start,
        region_len,
        pre_sizes,
        post_sizes,
        pre_closest,
        post_closest,
    });
    Ok(performed)
}

fn closest_of(rocs: &[RegionOfCompetence], window: &[f64]) -> Result<Option<(usize, f64)>> {
    let mut best: Option<(usize, f64)> = None;
    for roc in rocs {
        for member in &roc.members {
            let d = dtw_distance(window, &member.pattern)?;
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((roc.model_id, d));
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(pattern: &[f64]) -> RoCMember {
        RoCMember {
            pattern: pattern.to_vec(),
            series_offset: 0,
            chunk_index: 1,
            window_index: 0,
            created_at: 0,
        }
    }

    fn roc(model_id: usize, patterns: &[&[f64]]) -> RegionOfCompetence {
        RegionOfCompetence {
            model_id,
            members: patterns.iter().map(|p| member(p)).collect(),
        }
    }

    #[test]
    fn select_argmin_over_models() {
        let rocs = vec![
            roc(1, &[&[0.0, 0.0, 1.0]]),
            roc(2, &[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]]),
        ];
        let window = [1.0, 2.0, 3.0];
        let (id, ev) = select_model(&rocs, &window, None).unwrap();
        assert_eq!(id, 2);
        assert_eq!(ev.min_distance, 0.0);
        assert!(!ev.fallback);
        assert_eq!(ev.runner_up.unwrap().0, 1);
        assert!(ev.min_distance <= ev.runner_up.unwrap().1);
        assert_eq!(ev.closest.unwrap().pattern, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn select_tie_breaks_to_lowest_id() {
        let rocs = vec![roc(1, &[&[1.0, 2.0]]), roc(2, &[&[1.0, 2.0]])];
        let (id, _) = select_model(&rocs, &[1.0, 2.0], None).unwrap();
        assert_eq!(id, 1);
    }

    #[test]
    fn select_all_empty_uses_fallback() {
        let rocs = vec![roc(1, &[]), roc(2, &[])];
        let (id, ev) = select_model(&rocs, &[1.0, 2.0], Some(2)).unwrap();
        assert_eq!(id, 2);
        assert!(ev.fallback);
        assert!(ev.closest.is_none());
        assert!(matches!(
            select_model(&rocs, &[1.0, 2.0], None),
            Err(TsmsError::NoModelsAvailable)
        ));
    }

    #[test]
    fn select_is_exhaustive_argmin() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let rocs: Vec<RegionOfCompetence> = (1..=4)
                .map(|id| RegionOfCompetence {
                    model_id: id,
                    members: (0..rng.gen_range(0..4))
                        .map(|_| {
                            member(
                                &(0..rng.gen_range(3..8))
                                    .map(|_| rng.gen_range(-2.0..2.0))
                                    .collect::<Vec<f64>>(),
                            )
                        })
                        .collect(),
                })
                .collect();
            let window: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            if let Ok((id, ev)) = select_model(&rocs, &window, None) {
                for r in &rocs {
                    for m in &r.members {
                        let d = dtw_distance(&window, &m.pattern).unwrap();
                        assert!(
                            d >= ev.min_distance,
                            "member of model {} beats chosen {}",
                            r.model_id,
                            id
                        );
                    }
                }
            }
        }
    }
}
