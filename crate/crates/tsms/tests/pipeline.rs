//! End-to-end behavior of the online selection loop across variants.

mod common;

use common::regime_series;
use tsms::harness::{prepare_dataset, run_variant, PreparedDataset, RunConfig};
use tsms::selector::{RebuildTrigger, SelectionVariant};

fn config(seed: u64) -> RunConfig {
    RunConfig {
        datasets: vec!["in-memory".into()],
        seed,
        ..RunConfig::default()
    }
}

/// Length-300 series (train 150, val 75, test 75) with a level shift one
/// third into the test region.
fn shifted_dataset(seed: u64, cfg: &RunConfig) -> PreparedDataset {
    let series = regime_series(300, seed as usize, seed, Some(260), 1.5);
    prepare_dataset("shifted", &series, cfg).unwrap()
}

#[test]
fn static_variant_never_rebuilds() {
    let cfg = config(1);
    let prepared = shifted_dataset(1, &cfg);
    let (out, _) = run_variant(&prepared, SelectionVariant::Static, &cfg, false).unwrap();
    assert_eq!(out.records.len(), 75);
    assert!(out.rebuilds.is_empty());
    assert!(out.drifts.is_empty());
    for (roc, initial) in out.final_rocs.iter().zip(&prepared.initial_rocs) {
        assert_eq!(roc.members.len(), initial.members.len());
    }
}

#[test]
fn periodic_variant_attempts_exactly_updates_rebuilds() {
    let cfg = config(2);
    let prepared = shifted_dataset(2, &cfg);
    let variant = SelectionVariant::Periodic { updates: 10 };
    let (out, _) = run_variant(&prepared, variant, &cfg, false).unwrap();
    assert_eq!(out.rebuilds.len(), 10);
    assert!(out.drifts.is_empty());
    assert!(out.rebuilds.iter().any(|e| e.performed));
    for e in &out.rebuilds {
        assert_eq!(e.trigger, RebuildTrigger::Periodic);
        if e.performed {
            assert!(e.region_len >= cfg.omega + cfg.horizon);
            for (pre, post) in e.pre_sizes.iter().zip(&e.post_sizes) {
                assert!(post >= pre, "enrichment shrank a RoC");
            }
        } else {
            assert!(e.region_len < cfg.omega + cfg.horizon);
            assert_eq!(e.pre_sizes, e.post_sizes);
        }
    }
    // Skipped attempts keep accumulating; a performed rebuild resets the
    // region, so region lengths restart after each performed event.
    let mut last_performed_t = 0;
    for e in &out.rebuilds {
        assert_eq!(e.region_len, e.t - last_performed_t);
        if e.performed {
            last_performed_t = e.t;
        }
    }
}

#[test]
fn adaptive_variant_fires_on_regime_change_and_only_grows_rocs() {
    let cfg = config(3);
    let prepared = shifted_dataset(3, &cfg);
    let (out, _) = run_variant(&prepared, SelectionVariant::Adaptive, &cfg, false).unwrap();
    assert!(!out.drifts.is_empty(), "level shift went undetected");
    assert_eq!(out.drifts.len(), out.rebuilds.len());
    for d in &out.drifts {
        assert!(d.delta > d.bound);
    }
    // The shift sits one third into the test region, far enough in that
    // the first rebuild there has a region long enough to be performed.
    assert!(
        out.rebuilds.iter().any(|e| e.performed),
        "no rebuild was performed: {:?}",
        out.rebuilds
    );
    for e in &out.rebuilds {
        assert_eq!(e.trigger, RebuildTrigger::Drift);
    }
    for (roc, initial) in out.final_rocs.iter().zip(&prepared.initial_rocs) {
        assert!(roc.members.len() >= initial.members.len());
        // Old members are preserved verbatim at the front.
        for (old, kept) in initial.members.iter().zip(&roc.members) {
            assert_eq!(old.pattern, kept.pattern);
        }
    }
}

#[test]
fn adaptive_matches_static_until_the_first_performed_rebuild() {
    let cfg = config(4);
    let prepared = shifted_dataset(4, &cfg);
    let (adaptive, _) = run_variant(&prepared, SelectionVariant::Adaptive, &cfg, false).unwrap();
    let (fixed, _) = run_variant(&prepared, SelectionVariant::Static, &cfg, false).unwrap();
    let horizon_t = adaptive
        .rebuilds
        .iter()
        .find(|e| e.performed)
        .map(|e| e.t)
        .unwrap_or(usize::MAX);
    for (a, s) in adaptive.records.iter().zip(&fixed.records) {
        if a.t > horizon_t {
            break;
        }
        assert_eq!(a.chosen_model, s.chosen_model, "diverged at t = {}", a.t);
        assert_eq!(a.forecast[0].to_bits(), s.forecast[0].to_bits());
    }
}

#[test]
fn reruns_are_bit_identical() {
    let cfg = config(5);
    let prepared = shifted_dataset(5, &cfg);
    for variant in [
        SelectionVariant::Adaptive,
        SelectionVariant::Periodic { updates: 10 },
    ] {
        let (a, _) = run_variant(&prepared, variant, &cfg, false).unwrap();
        let (b, _) = run_variant(&prepared, variant, &cfg, false).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.chosen_model, y.chosen_model);
            assert_eq!(x.forecast[0].to_bits(), y.forecast[0].to_bits());
            assert_eq!(x.min_distance.to_bits(), y.min_distance.to_bits());
        }
        assert_eq!(a.rebuilds.len(), b.rebuilds.len());
        assert_eq!(a.drifts.len(), b.drifts.len());
    }
    // A fresh preparation of the same series is equally deterministic.
    let again = shifted_dataset(5, &cfg);
    assert_eq!(prepared.fallback_model, again.fallback_model);
    for (a, b) in prepared.initial_rocs.iter().zip(&again.initial_rocs) {
        assert_eq!(a.members.len(), b.members.len());
    }
}

#[test]
fn impossible_threshold_forces_the_fallback_model() {
    let mut cfg = config(6);
    cfg.tau = 1e6;
    let prepared = shifted_dataset(6, &cfg);
    assert!(prepared.initial_rocs.iter().all(|r| r.members.is_empty()));
    let (out, _) = run_variant(&prepared, SelectionVariant::Static, &cfg, false).unwrap();
    for r in &out.records {
        assert!(r.fallback);
        assert_eq!(r.chosen_model, prepared.fallback_model);
        assert!(r.min_distance.is_infinite());
        assert!(r.closest_member.is_none());
    }
}

#[test]
fn explain_mode_attaches_attributions_and_intervals() {
    let cfg = config(7);
    let prepared = shifted_dataset(7, &cfg);
    let (out, _) = run_variant(&prepared, SelectionVariant::Adaptive, &cfg, true).unwrap();
    for r in &out.records {
        let attr = r.attributions.as_ref().expect("explain mode");
        assert_eq!(attr.phi.len(), cfg.lags);
        let stab = r.stability.as_ref().expect("explain mode");
        assert_eq!(stab.lo.len(), cfg.lags);
        if !r.fallback {
            let (_, far) = r.furthest.expect("non-fallback step has distances");
            assert!(far >= r.min_distance);
        }
    }
}
