//! Ranking-based distance between failing tests.
//!
//! Each failing test is represented by the suspiciousness scores obtained
//! from all passing tests plus that one failure. Two representations are
//! compared pair-by-pair over components: a pair ordered oppositely counts
//! 1, a pair tied in exactly one of the two rankings counts 1/2.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::{upper_pairs, DistanceMatrix, Metric};
use crate::coverage::CoverageMatrix;
use crate::error::Result;
use crate::sbfl::{spectrum_over, Technique};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RktOptions {
    pub technique: Technique,
    /// Min-max rescale the off-diagonal entries to `[0, 1]`.
    pub normalise: bool,
}

impl Default for RktOptions {
    fn default() -> Self {
        RktOptions {
            technique: Technique::Crosstab,
            normalise: false,
        }
    }
}

/// Raw (unnormalised) ranking distance matrix.
pub fn rkt_matrix(cov: &CoverageMatrix, technique: Technique) -> Result<DistanceMatrix> {
    rkt_matrix_with(
        cov,
        RktOptions {
            technique,
            normalise: false,
        },
    )
}

pub fn rkt_matrix_with(cov: &CoverageMatrix, opts: RktOptions) -> Result<DistanceMatrix> {
    let failing = cov.require_failures(2)?;
    let columns = cov.columns_covered_by(&failing);
    let scores = failing
        .iter()
        .map(|&t| {
            let s = spectrum_over(cov, &[t], &columns)?;
            Ok(opts.technique.score(&s).values)
        })
        .collect::<Result<Vec<_>>>()?;

    let upper: Vec<f64> = upper_pairs(failing.len())
        .into_par_iter()
        .map(|(a, b)| disagreement_halves(&scores[a], &scores[b]) as f64 / 2.0)
        .collect();
    let labels = failing
        .iter()
        .map(|&i| cov.tests()[i].name.clone())
        .collect();
    let raw = DistanceMatrix::from_upper(labels, Metric::Rkt, false, &upper);
    Ok(if opts.normalise {
        raw.min_max_normalised()
    } else {
        raw
    })
}

/// Twice the tie-aware Kendall disagreement between two score vectors.
fn disagreement_halves(x: &[f64], y: &[f64]) -> u64 {
    let m = x.len();
    let mut halves = 0u64;
    for i in 0..m {
        for j in i + 1..m {
            let a = x[i].partial_cmp(&x[j]).unwrap_or(Ordering::Equal);
            let b = y[i].partial_cmp(&y[j]).unwrap_or(Ordering::Equal);
            halves += match (a, b) {
                (Ordering::Equal, Ordering::Equal) => 0,
                (Ordering::Equal, _) | (_, Ordering::Equal) => 1,
                _ if a != b => 2,
                _ => 0,
            };
        }
    }
    halves
}
