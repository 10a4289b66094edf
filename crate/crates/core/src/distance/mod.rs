//! Pairwise distances between failing tests.
//!
//! [`hdist`] is the hypergraph distance; [`baseline`] holds the vector and
//! set metrics over binary coverage rows; [`rkt`] is the ranking-based
//! Kendall disagreement between per-failure suspiciousness rankings.

pub mod baseline;
pub mod hdist;
pub mod rkt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig6;

pub use baseline::{baseline_matrix, baseline_matrix_with, ColumnScope};
pub use hdist::{
    hdist, hdist_matrix, hdist_matrix_with, linkage, normalized_linkage, pairwise_hdist,
    Evaluation, HdistOptions,
};
pub use rkt::{rkt_matrix, rkt_matrix_with, RktOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Hdist,
    Jaccard,
    Dice,
    Cosine,
    Euclidean,
    Hamming,
    Rkt,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Hdist,
        Metric::Jaccard,
        Metric::Dice,
        Metric::Cosine,
        Metric::Euclidean,
        Metric::Hamming,
        Metric::Rkt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hdist => "hdist",
            Metric::Jaccard => "jaccard",
            Metric::Dice => "dice",
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
            Metric::Hamming => "hamming",
            Metric::Rkt => "rkt",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric `{s}`")))
    }
}

/// Symmetric distance matrix over a labelled set of failing tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    metric: Metric,
    /// Whether every value is known to lie in `[0, 1]`.
    normalised: bool,
    values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(
        labels: Vec<String>,
        metric: Metric,
        normalised: bool,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = labels.len();
        if values.len() != n || values.iter().any(|row| row.len() != n) {
            return Err(Error::validation(format!(
                "distance matrix must be {n}x{n} to match its labels"
            )));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return Err(Error::validation(format!(
                    "non-zero diagonal entry for `{}`",
                    labels[i]
                )));
            }
            for j in 0..n {
                let d = values[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::validation(format!(
                        "invalid distance {d} between `{}` and `{}`",
                        labels[i], labels[j]
                    )));
                }
                if normalised && d > 1.0 {
                    return Err(Error::validation(format!(
                        "distance {d} between `{}` and `{}` exceeds 1",
                        labels[i], labels[j]
                    )));
                }
                if d != values[j][i] {
                    return Err(Error::validation(format!(
                        "asymmetric entry between `{}` and `{}`",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(DistanceMatrix {
            labels,
            metric,
            normalised,
            values,
        })
    }

    /// Builds a matrix from the strict upper triangle, row-major.
    pub(crate) fn from_upper(
        labels: Vec<String>,
        metric: Metric,
        normalised: bool,
        upper: &[f64],
    ) -> Self {
        let n = labels.len();
        let mut values = vec![vec![0.0; n]; n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                values[i][j] = upper[k];
                values[j][i] = upper[k];
                k += 1;
            }
        }
        DistanceMatrix {
            labels,
            metric,
            normalised,
            values,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn is_normalised(&self) -> bool {
        self.normalised
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Distance between two labelled tests.
    pub fn between(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.values[self.index_of(a)?][self.index_of(b)?])
    }

    /// Rescales the off-diagonal entries to `[0, 1]` by min-max.
    ///
    /// A matrix whose off-diagonal entries are all equal maps to all zeros
    /// when that common value is 0 and to all ones otherwise.
    pub fn min_max_normalised(&self) -> DistanceMatrix {
        let n = self.len();
        let off_diagonal =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
        let (lo, hi) = off_diagonal.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (i, j)| {
            (lo.min(self.values[i][j]), hi.max(self.values[i][j]))
        });
        let values = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else if hi > lo {
                            (self.values[i][j] - lo) / (hi - lo)
                        } else if hi > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        DistanceMatrix {
            labels: self.labels.clone(),
            metric: self.metric,
            normalised: true,
            values,
        }
    }

    /// CSV: a header of test names, then one row of distances per test.
    pub fn to_csv(&self) -> String {
        let mut out = self.labels.join(",");
        out.push('\n');
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|&d| sig6(d)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("distance matrix serialises");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: DistanceMatrix = serde_json::from_str(text)?;
        DistanceMatrix::new(raw.labels, raw.metric, raw.normalised, raw.values)
    }
}

/// Computes the distance matrix for `metric` over the failing tests of `cov`
/// with default options (RKT uses Crosstab and min-max normalisation).
pub fn distance_matrix(cov: &crate::CoverageMatrix, metric: Metric) -> Result<DistanceMatrix> {
    match metric {
        Metric::Hdist => hdist_matrix(cov),
        Metric::Rkt => rkt_matrix_with(
            cov,
            RktOptions {
                normalise: true,
                ..RktOptions::default()
            },
        ),
        other => baseline_matrix(cov, other),
    }
}

/// Strict upper-triangle pair list `(i, j)`, `i < j`, row-major.
pub(crate) fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DistanceMatrix {
        DistanceMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            Metric::Rkt,
            false,
            vec![
                vec![0.0, 2.0, 6.0],
                vec![2.0, 0.0, 4.0],
                vec![6.0, 4.0, 0.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_asymmetry_and_bad_diagonal() {
        let labels = vec!["a".to_owned(), "b".to_owned()];
        assert!(DistanceMatrix::new(
            labels.clone(),
            Metric::Hdist,
            true,
            vec![vec![0.0, 0.5], vec![0.4, 0.0]]
        )
        .is_err());
        assert!(DistanceMatrix::new(
            labels.clone(),
            Metric::Hdist,
            true,
            vec![vec![0.1, 0.5], vec![0.5, 0.0]]
        )
        .is_err());
        assert!(DistanceMatrix::new(
            labels,
            Metric::Hdist,
            true,
            vec![vec![0.0, 1.5], vec![1.5, 0.0]]
        )
        .is_err());
    }

    #[test]
    fn min_max() {
        let n = sample().min_max_normalised();
        assert!(n.is_normalised());
        assert_eq!(n.between("a", "b"), Some(0.0));
        assert_eq!(n.between("b", "c"), Some(0.5));
        assert_eq!(n.between("c", "a"), Some(1.0));
    }

    #[test]
    fn min_max_constant() {
        let labels = vec!["a".to_owned(), "b".to_owned()];
        let m = DistanceMatrix::new(
            labels.clone(),
            Metric::Rkt,
            false,
            vec![vec![0.0, 3.0], vec![3.0, 0.0]],
        )
        .unwrap();
        assert_eq!(m.min_max_normalised().get(0, 1), 1.0);
        let z = DistanceMatrix::new(
            labels,
            Metric::Rkt,
            false,
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        assert_eq!(z.min_max_normalised().get(0, 1), 0.0);
    }

    #[test]
    fn csv_and_json_exports() {
        let m = sample();
        assert_eq!(m.to_csv(), "a,b,c\n0,2,6\n2,0,4\n6,4,0\n");
        let back = DistanceMatrix::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_json().contains("\"metric\": \"rkt\""));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("manhattan".parse::<Metric>().is_err());
    }
}
