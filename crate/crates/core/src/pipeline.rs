//! End-to-end clustering of a suite's failures and the batch harness that
//! scores configurations over many subjects.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::ahc::{agglomerate, cut, elbow_k, threshold_k, Dendrogram, Linkage, Partition};
use crate::coverage::{CoverageMatrix, GroundTruth};
use crate::distance::{distance_matrix, DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::eval::{score, ClusterScore};
use crate::format::sig6;

/// How many clusters to keep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum StopRule {
    #[default]
    Elbow,
    Threshold(f64),
    Fixed(usize),
}

impl StopRule {
    pub fn needs_normalised(self) -> bool {
        !matches!(self, StopRule::Fixed(_))
    }
}

impl fmt::Display for StopRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopRule::Elbow => f.write_str("elbow"),
            StopRule::Threshold(theta) => write!(f, "threshold={theta}"),
            StopRule::Fixed(k) => write!(f, "fixed={k}"),
        }
    }
}

/// Parses `elbow`, `threshold=<theta>` and `fixed=<k>`.
impl FromStr for StopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unknown stopping rule `{s}`"));
        match s.split_once('=') {
            None if s == "elbow" => Ok(StopRule::Elbow),
            Some(("threshold", v)) => v.parse().map(StopRule::Threshold).map_err(|_| bad()),
            Some(("fixed", v)) => v.parse().map(StopRule::Fixed).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterConfig {
    pub metric: Metric,
    pub linkage: Linkage,
    pub stop: StopRule,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            metric: Metric::Hdist,
            linkage: Linkage::Avg,
            stop: StopRule::Elbow,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stop.needs_normalised() && self.metric == Metric::Euclidean {
            return Err(Error::invalid(format!(
                "the {} stopping rule needs a normalised metric; {} is not",
                self.stop, self.metric
            )));
        }
        match self.stop {
            StopRule::Threshold(theta) if !(0.0..=1.0).contains(&theta) => {
                Err(Error::invalid(format!("threshold {theta} outside [0, 1]")))
            }
            StopRule::Fixed(0) => Err(Error::invalid("fixed k must be at least 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Clustering {
    /// Absent when fewer than two tests fail.
    pub distances: Option<DistanceMatrix>,
    pub dendrogram: Option<Dendrogram>,
    pub k: usize,
    pub partition: Partition,
}

/// Clusters the failing tests of `cov`. A lone failure forms one cluster.
pub fn cluster_failures(cov: &CoverageMatrix, config: &ClusterConfig) -> Result<Clustering> {
    config.validate()?;
    let failing = cov.require_failures(1)?;
    if failing.len() == 1 {
        if let StopRule::Fixed(k) = config.stop {
            if k > 1 {
                return Err(Error::invalid(format!(
                    "cannot cut 1 failing test into {k} clusters"
                )));
            }
        }
        let name = cov.tests()[failing[0]].name.clone();
        return Ok(Clustering {
            distances: None,
            dendrogram: None,
            k: 1,
            partition: Partition::new(vec![vec![name]])?,
        });
    }
    let distances = distance_matrix(cov, config.metric)?;
    let dendrogram = agglomerate(&distances, config.linkage)?;
    let k = match config.stop {
        StopRule::Elbow => elbow_k(&dendrogram)?,
        StopRule::Threshold(theta) => threshold_k(&dendrogram, theta)?,
        StopRule::Fixed(k) => k,
    };
    let partition = cut(&dendrogram, k)?;
    Ok(Clustering {
        distances: Some(distances),
        dendrogram: Some(dendrogram),
        k,
        partition,
    })
}

#[derive(Clone, Debug)]
pub struct Subject {
    pub name: String,
    pub coverage: CoverageMatrix,
    pub ground_truth: GroundTruth,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub subject: String,
    pub metric: Metric,
    pub linkage: Linkage,
    pub stop: String,
    #[serde(flatten)]
    pub score: ClusterScore,
}

/// Scores every configuration on every subject. Rows are ordered by subject
/// name, then by the order of `configs`.
pub fn bench(subjects: &[Subject], configs: &[ClusterConfig]) -> Result<Vec<BenchRow>> {
    for c in configs {
        c.validate()?;
    }
    let mut order: Vec<&Subject> = subjects.iter().collect();
    order.sort_by(|a, b| a.name.cmp(&b.name));
    let per_subject = order
        .par_iter()
        .map(|s| {
            configs
                .iter()
                .map(|c| bench_one(s, c))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_subject.into_iter().flatten().collect())
}

fn bench_one(subject: &Subject, config: &ClusterConfig) -> Result<BenchRow> {
    let annotate = |e: Error| match e {
        Error::Validation(m) => Error::Validation(format!("subject `{}`: {m}", subject.name)),
        other => other,
    };
    subject
        .ground_truth
        .validate_against(&subject.coverage)
        .map_err(annotate)?;
    let clustering = cluster_failures(&subject.coverage, config).map_err(annotate)?;
    let score = score(&clustering.partition, &subject.ground_truth).map_err(annotate)?;
    Ok(BenchRow {
        subject: subject.name.clone(),
        metric: config.metric,
        linkage: config.linkage,
        stop: config.stop.to_string(),
        score,
    })
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("subject,metric,linkage,stop,k,c,h,m,nmi,perfect\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.subject,
            r.metric,
            r.linkage,
            r.stop,
            r.score.k,
            r.score.c,
            sig6(r.score.homogeneity),
            sig6(r.score.completeness),
            sig6(r.score.nmi),
            u8::from(r.score.perfect)
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub metric: Metric,
    pub linkage: Linkage,
    pub stop: String,
    pub subjects: usize,
    pub mean_homogeneity: f64,
    pub mean_completeness: f64,
    pub mean_nmi: f64,
    pub perfect_ratio: f64,
}

/// Per-configuration means, in order of first appearance.
pub fn summarise(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, usize)> = Vec::new();
    for r in rows {
        let idx = match out
            .iter()
            .position(|(s, _)| s.metric == r.metric && s.linkage == r.linkage && s.stop == r.stop)
        {
            Some(i) => i,
            None => {
                out.push((
                    SummaryRow {
                        metric: r.metric,
                        linkage: r.linkage,
                        stop: r.stop.clone(),
                        subjects: 0,
                        mean_homogeneity: 0.0,
                        mean_completeness: 0.0,
                        mean_nmi: 0.0,
                        perfect_ratio: 0.0,
                    },
                    0,
                ));
                out.len() - 1
            }
        };
        let (s, perfect) = &mut out[idx];
        s.subjects += 1;
        s.mean_homogeneity += r.score.homogeneity;
        s.mean_completeness += r.score.completeness;
        s.mean_nmi += r.score.nmi;
        *perfect += usize::from(r.score.perfect);
    }
    out.into_iter()
        .map(|(mut s, perfect)| {
            let n = s.subjects as f64;
            s.mean_homogeneity /= n;
            s.mean_completeness /= n;
            s.mean_nmi /= n;
            s.perfect_ratio = perfect as f64 / n;
            s
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("metric,linkage,stop,subjects,h,m,nmi,perfect_ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.metric,
            r.linkage,
            r.stop,
            r.subjects,
            sig6(r.mean_homogeneity),
            sig6(r.mean_completeness),
            sig6(r.mean_nmi),
            sig6(r.perfect_ratio)
        );
    }
    out
}
