//! Dynamic Time Warping distance between real-valued sequences of possibly
//! different lengths.
//!
//! Classic dynamic program over the full cost matrix with squared local cost
//! `(a_i - b_j)^2` and step pattern {match, insertion, deletion}. The result
//! is the unnormalized accumulated cost; no square root, no warping-window
//! constraint. Sequences here are short (at most the lag count), so
//! exactness wins over pruning tricks.

use crate::error::{Result, TsmsError};

/// Accumulated DTW cost between `a` and `b`, anchored at both endpoints.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(TsmsError::EmptySequence);
    }
    // Rolling single row of the (|a|+1) x (|b|+1) accumulated-cost matrix.
    let mut prev = vec![f64::INFINITY; b.len() + 1];
    let mut cur = vec![f64::INFINITY; b.len() + 1];
    prev[0] = 0.0;
    for &av in a {
        cur[0] = f64::INFINITY;
        for (j, &bv) in b.iter().enumerate() {
            let cost = (av - bv) * (av - bv);
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = cost + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[b.len()])
}
