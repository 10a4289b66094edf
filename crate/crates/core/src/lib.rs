//! Clustering of failing tests on a coverage hypergraph, with the baseline
//! distances, agglomerative clustering, external clustering criteria and the
//! spectrum-based fault localisation used to evaluate the clusters.

pub mod ahc;
pub mod coverage;
pub mod distance;
pub mod error;
pub mod eval;
pub mod format;
pub mod hypergraph;
pub mod pipeline;
pub mod sbfl;
pub mod synthgen;

pub use ahc::{agglomerate, cut, elbow_k, threshold_k, Dendrogram, Linkage, Partition};
pub use coverage::{
    load_coverage, load_ground_truth, CoverageFormat, CoverageMatrix, Fault, GroundTruth,
    LoadReport, LoadedCoverage, Outcome, TestCase,
};
pub use distance::{distance_matrix, DistanceMatrix, Metric};
pub use error::{Error, Result};
pub use eval::{score, ClusterScore};
pub use hypergraph::{build_hypergraph, restrict_to_failures, Hypergraph};
pub use sbfl::{Cutoff, Technique, TieBreak};
pub use synthgen::{generate, GenSpec};
