//! Vector and set distances between binary coverage rows of failing tests.

use super::{upper_pairs, DistanceMatrix, Metric};
use crate::coverage::CoverageMatrix;
use crate::error::{Error, Result};

/// Which columns count as dimensions of the coverage vectors.
///
/// Only Hamming depends on this: the other metrics ignore columns that both
/// rows leave uncovered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ColumnScope {
    /// Components covered by at least one failing test.
    #[default]
    FailingCovered,
    /// Every component of the suite.
    All,
}

pub fn baseline_matrix(cov: &CoverageMatrix, metric: Metric) -> Result<DistanceMatrix> {
    baseline_matrix_with(cov, metric, ColumnScope::default())
}

pub fn baseline_matrix_with(
    cov: &CoverageMatrix,
    metric: Metric,
    scope: ColumnScope,
) -> Result<DistanceMatrix> {
    if matches!(metric, Metric::Hdist | Metric::Rkt) {
        return Err(Error::invalid(format!(
            "`{metric}` is not a coverage-vector metric"
        )));
    }
    let failing = cov.require_failures(2)?;
    let dims = match scope {
        ColumnScope::FailingCovered => cov.columns_covered_by(&failing).len(),
        ColumnScope::All => cov.n_components(),
    };
    let upper: Vec<f64> = upper_pairs(failing.len())
        .into_iter()
        .map(|(i, j)| pair_distance(metric, cov.row(failing[i]), cov.row(failing[j]), dims))
        .collect();
    let labels = failing
        .iter()
        .map(|&i| cov.tests()[i].name.clone())
        .collect();
    Ok(DistanceMatrix::from_upper(
        labels,
        metric,
        metric != Metric::Euclidean,
        &upper,
    ))
}

fn pair_distance(metric: Metric, a: &[usize], b: &[usize], dims: usize) -> f64 {
    let shared = intersection_size(a, b) as f64;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let differing = na + nb - 2.0 * shared;
    match metric {
        Metric::Jaccard => 1.0 - shared / (na + nb - shared),
        Metric::Dice => 1.0 - 2.0 * shared / (na + nb),
        Metric::Cosine => (1.0 - shared / (na * nb).sqrt()).max(0.0),
        Metric::Hamming => differing / dims as f64,
        Metric::Euclidean => differing.sqrt(),
        Metric::Hdist | Metric::Rkt => unreachable!("rejected by caller"),
    }
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
