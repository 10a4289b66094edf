//! External clustering criteria against the known fault assignment.
//!
//! Homogeneity is `1 - H(GT|P)/H(GT)`, completeness `1 - H(P|GT)/H(P)`, and
//! NMI their harmonic mean. When `H(GT) = 0` homogeneity is 1; when
//! `H(P) = 0` completeness is 1. Natural logarithms throughout.

use std::collections::HashMap;

use serde::Serialize;

use crate::ahc::Partition;
use crate::coverage::GroundTruth;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterScore {
    pub homogeneity: f64,
    pub completeness: f64,
    pub nmi: f64,
    pub perfect: bool,
    /// Number of clusters.
    pub k: usize,
    /// Number of actual faults.
    pub c: usize,
}

/// Contingency counts `n[i][j] = |P_i ∩ Q_j|` with row and column sums.
struct Contingency {
    cells: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    total: usize,
}

impl Contingency {
    /// Built from the canonical cluster order of both partitions, so
    /// relabeling either one leaves every sum bit-for-bit unchanged.
    fn new(p: &Partition, q: &Partition) -> Result<Self> {
        if p.elements() != q.elements() {
            return Err(Error::validation(
                "the partitions do not cover the same failing tests",
            ));
        }
        let (p, q) = (p.canonical(), q.canonical());
        let column_of: HashMap<&str, usize> = q
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |&t| (t, j)))
            .collect();
        let mut cells = vec![vec![0usize; q.len()]; p.len()];
        for (i, cluster) in p.iter().enumerate() {
            for t in cluster {
                cells[i][column_of[t]] += 1;
            }
        }
        let rows = p.iter().map(|c| c.len()).collect();
        let cols = q.iter().map(|c| c.len()).collect();
        let total = p.iter().map(|c| c.len()).sum();
        Ok(Contingency {
            cells,
            rows,
            cols,
            total,
        })
    }

    /// `H(Q | P)`.
    fn conditional_entropy_of_cols(&self) -> f64 {
        let n = self.total as f64;
        let mut h = 0.0;
        for (i, row) in self.cells.iter().enumerate() {
            for &nij in row.iter().filter(|&&x| x > 0) {
                let nij = nij as f64;
                h -= nij / n * (nij / self.rows[i] as f64).ln();
            }
        }
        h
    }

    fn entropy_of_cols(&self) -> f64 {
        entropy(&self.cols, self.total)
    }

    fn transposed(&self) -> Contingency {
        let cells = (0..self.cols.len())
            .map(|j| self.cells.iter().map(|row| row[j]).collect())
            .collect();
        Contingency {
            cells,
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            total: self.total,
        }
    }
}

fn entropy(sizes: &[usize], total: usize) -> f64 {
    let n = total as f64;
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn one_minus_ratio(conditional: f64, marginal: f64) -> f64 {
    if marginal == 0.0 {
        1.0
    } else {
        (1.0 - conditional / marginal).clamp(0.0, 1.0)
    }
}

/// Whether each cluster of `p` holds failures of a single true cluster.
pub fn homogeneity(p: &Partition, gt: &Partition) -> Result<f64> {
    let table = Contingency::new(p, gt)?;
    Ok(one_minus_ratio(
        table.conditional_entropy_of_cols(),
        table.entropy_of_cols(),
    ))
}

/// Whether each true cluster lands in a single cluster of `p`.
pub fn completeness(p: &Partition, gt: &Partition) -> Result<f64> {
    let table = Contingency::new(p, gt)?.transposed();
    Ok(one_minus_ratio(
        table.conditional_entropy_of_cols(),
        table.entropy_of_cols(),
    ))
}

fn harmonic_mean(h: f64, m: f64) -> f64 {
    if h + m == 0.0 {
        0.0
    } else {
        2.0 * h * m / (h + m)
    }
}

pub fn nmi(p: &Partition, gt: &Partition) -> Result<f64> {
    Ok(harmonic_mean(homogeneity(p, gt)?, completeness(p, gt)?))
}

/// Scores `p` against the fault assignment; `gt` must cover exactly the
/// clustered tests.
pub fn score(p: &Partition, gt: &GroundTruth) -> Result<ClusterScore> {
    let truth = Partition::from_ground_truth(gt);
    score_against(p, &truth)
}

pub fn score_against(p: &Partition, truth: &Partition) -> Result<ClusterScore> {
    let h = homogeneity(p, truth)?;
    let m = completeness(p, truth)?;
    Ok(ClusterScore {
        homogeneity: h,
        completeness: m,
        nmi: harmonic_mean(h, m),
        perfect: p.same_as(truth),
        k: p.k(),
        c: truth.k(),
    })
}
