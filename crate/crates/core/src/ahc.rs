//! Agglomerative hierarchical clustering of failing tests.
//!
//! Clustering starts from singletons and repeatedly merges the two closest
//! clusters until one remains. The distance of the merge that takes the
//! clustering from `k` to `k - 1` clusters is `mdist_k`; the stopping rules
//! read the number of clusters off that curve.

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coverage::GroundTruth;
use crate::distance::{DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::format::sig6;

/// Intercluster distance aggregation.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// Single linkage: closest pair.
    Min,
    /// Average linkage: mean over all cross pairs.
    #[default]
    Avg,
    /// Complete linkage: farthest pair.
    Max,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Min, Linkage::Avg, Linkage::Max];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Min => "min",
            Linkage::Avg => "avg",
            Linkage::Max => "max",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" | "single" => Ok(Linkage::Min),
            "avg" | "average" => Ok(Linkage::Avg),
            "max" | "complete" => Ok(Linkage::Max),
            _ => Err(Error::invalid(format!("unknown linkage `{s}`"))),
        }
    }
}

/// Disjoint, nonempty clusters of test names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    clusters: Vec<Vec<String>>,
}

#[derive(Deserialize)]
struct PartitionDoc {
    clusters: Vec<Vec<String>>,
}

impl Partition {
    pub fn new(clusters: Vec<Vec<String>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for cluster in &clusters {
            if cluster.is_empty() {
                return Err(Error::validation("partition contains an empty cluster"));
            }
            for name in cluster {
                if !seen.insert(name.as_str()) {
                    return Err(Error::validation(format!(
                        "`{name}` appears in more than one cluster"
                    )));
                }
            }
        }
        Ok(Partition { clusters })
    }

    /// The true partition: one cluster per fault.
    pub fn from_ground_truth(gt: &GroundTruth) -> Self {
        Partition {
            clusters: gt
                .faults()
                .iter()
                .map(|f| f.failing_tests.clone())
                .collect(),
        }
    }

    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn elements(&self) -> BTreeSet<&str> {
        self.clusters.iter().flatten().map(String::as_str).collect()
    }

    /// Clusters as sorted sets, in sorted order: equal iff the partitions
    /// agree up to relabeling.
    pub fn canonical(&self) -> Vec<BTreeSet<&str>> {
        let mut sets: Vec<BTreeSet<&str>> = self
            .clusters
            .iter()
            .map(|c| c.iter().map(String::as_str).collect())
            .collect();
        sets.sort();
        sets
    }

    pub fn same_as(&self, other: &Partition) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("partition serialises");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PartitionDoc = serde_json::from_str(text)?;
        Partition::new(doc.clusters)
    }
}

/// `D(a, b)` for disjoint, nonempty clusters of matrix indices.
pub fn intercluster_distance(
    d: &DistanceMatrix,
    a: &[usize],
    b: &[usize],
    linkage: Linkage,
) -> f64 {
    let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| d.get(i, j)));
    match linkage {
        Linkage::Min => pairs.fold(f64::INFINITY, f64::min),
        Linkage::Max => pairs.fold(f64::NEG_INFINITY, f64::max),
        Linkage::Avg => pairs.sum::<f64>() / (a.len() * b.len()) as f64,
    }
}

/// One agglomeration step. Leaves are clusters `0..N`; the cluster created
/// by step `s` is `N + s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    leaves: Vec<String>,
    merges: Vec<Merge>,
    metric: Metric,
    normalised: bool,
    linkage: Linkage,
}

#[derive(Serialize)]
struct DendrogramDoc<'a> {
    leaves: &'a [String],
    metric: Metric,
    linkage: Linkage,
    merges: &'a [Merge],
    mdist: std::collections::BTreeMap<usize, f64>,
}

impl Dendrogram {
    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn linkage(&self) -> Linkage {
        self.linkage
    }

    pub fn is_normalised(&self) -> bool {
        self.normalised
    }

    /// Minimum intercluster distance with `k` clusters, for `2 <= k <= N`.
    pub fn mdist(&self, k: usize) -> Option<f64> {
        let n = self.n_leaves();
        (2..=n).contains(&k).then(|| self.merges[n - k].distance)
    }

    /// `(k, mdist_k)` for `k = 2..=N`.
    pub fn mdist_curve(&self) -> Vec<(usize, f64)> {
        (2..=self.n_leaves())
            .map(|k| (k, self.mdist(k).expect("k in range")))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = DendrogramDoc {
            leaves: &self.leaves,
            metric: self.metric,
            linkage: self.linkage,
            merges: &self.merges,
            mdist: self.mdist_curve().into_iter().collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("dendrogram serialises");
        text.push('\n');
        text
    }

    /// `k,value` rows for `k = 1..=N`. Row 1 uses the plotting convention
    /// `mdist_1 = 1`.
    pub fn mdist_csv(&self) -> String {
        let mut out = String::from("k,value\n1,1\n");
        for (k, v) in self.mdist_curve() {
            let _ = writeln!(out, "{k},{}", sig6(v));
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let n = self.n_leaves();
        let mut out = String::from("digraph dendrogram {\n  rankdir=BT;\n");
        for (i, leaf) in self.leaves.iter().enumerate() {
            let _ = writeln!(
                out,
                "  n{i} [shape=box, label=\"{}\"];",
                leaf.replace('"', "\\\"")
            );
        }
        for (s, m) in self.merges.iter().enumerate() {
            let id = n + s;
            let _ = writeln!(
                out,
                "  n{id} [shape=point, xlabel=\"{}\"];",
                sig6(m.distance)
            );
            let _ = writeln!(out, "  n{} -> n{id};", m.a);
            let _ = writeln!(out, "  n{} -> n{id};", m.b);
        }
        out.push_str("}\n");
        out
    }
}

/// Clusters the labels of `d` from singletons to a single cluster.
///
/// Active clusters are kept ordered by their smallest leaf index; among
/// equally close pairs the lexicographically smallest `(i, j)` is merged.
pub fn agglomerate(d: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = d.len();
    if n < 2 {
        return Err(Error::invalid("agglomeration needs at least two items"));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut between: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| d.get(i, j)).collect())
        .collect();
    let mut merges = Vec::with_capacity(n - 1);

    while members.len() > 1 {
        let k = members.len();
        let (mut bi, mut bj, mut best) = (0, 1, f64::INFINITY);
        for i in 0..k {
            for j in i + 1..k {
                if between[i][j] < best {
                    (bi, bj, best) = (i, j, between[i][j]);
                }
            }
        }
        let absorbed = members.remove(bj);
        members[bi].extend(absorbed);
        members[bi].sort_unstable();
        merges.push(Merge {
            a: ids[bi],
            b: ids[bj],
            distance: best,
            size: members[bi].len(),
        });
        ids.remove(bj);
        ids[bi] = n + merges.len() - 1;

        between.remove(bj);
        for row in &mut between {
            row.remove(bj);
        }
        for other in 0..members.len() {
            if other != bi {
                let dist = intercluster_distance(d, &members[bi], &members[other], linkage);
                between[bi][other] = dist;
                between[other][bi] = dist;
            }
        }
    }

    Ok(Dendrogram {
        leaves: d.labels().to_vec(),
        merges,
        metric: d.metric(),
        normalised: d.is_normalised(),
        linkage,
    })
}

fn require_normalised(dg: &Dendrogram, rule: &str) -> Result<()> {
    if dg.normalised {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{rule} stopping needs a distance bounded in [0, 1]; `{}` is not normalised",
            dg.metric
        )))
    }
}

/// `mdist_k - mdist_{k+1}` for `k = 1..=N`, with `mdist_1 = 0` and
/// `mdist_{N+1} = 1`.
pub fn elbow_differences(dg: &Dendrogram) -> Vec<(usize, f64)> {
    let n = dg.n_leaves();
    let at = |k: usize| match k {
        1 => 0.0,
        k if k == n + 1 => 1.0,
        k => dg.mdist(k).expect("k in range"),
    };
    (1..=n).map(|k| (k, at(k) - at(k + 1))).collect()
}

/// Number of clusters right before the largest jump of the mdist curve.
/// Ties go to the smaller `k`.
pub fn elbow_k(dg: &Dendrogram) -> Result<usize> {
    require_normalised(dg, "elbow")?;
    let mut best = (1, f64::NEG_INFINITY);
    for (k, diff) in elbow_differences(dg) {
        if diff > best.1 {
            best = (k, diff);
        }
    }
    Ok(best.0)
}

/// Number of clusters left when the dendrogram is cut at height `theta`:
/// merging stops at the first merge farther than `theta`.
pub fn threshold_k(dg: &Dendrogram, theta: f64) -> Result<usize> {
    require_normalised(dg, "threshold")?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("threshold {theta} outside [0, 1]")));
    }
    let n = dg.n_leaves();
    Ok((2..=n)
        .rev()
        .find(|&k| dg.mdist(k).expect("k in range") > theta)
        .unwrap_or(1))
}

/// The partition after `N - k` merges. Clusters are ordered by their first
/// leaf, members by leaf order.
pub fn cut(dg: &Dendrogram, k: usize) -> Result<Partition> {
    let n = dg.n_leaves();
    if !(1..=n).contains(&k) {
        return Err(Error::invalid(format!(
            "cannot cut {n} leaves into {k} clusters"
        )));
    }
    let mut groups: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    for m in &dg.merges[..n - k] {
        let mut merged = groups[m.a].take().expect("cluster merged once");
        merged.extend(groups[m.b].take().expect("cluster merged once"));
        groups.push(Some(merged));
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_iter().flatten().collect();
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    Partition::new(
        clusters
            .into_iter()
            .map(|c| c.into_iter().map(|i| dg.leaves[i].clone()).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(labels: &[&str], values: Vec<Vec<f64>>) -> DistanceMatrix {
        DistanceMatrix::new(
            labels.iter().map(|s| (*s).to_owned()).collect(),
            Metric::Hdist,
            true,
            values,
        )
        .unwrap()
    }

    fn motivating() -> DistanceMatrix {
        matrix(
            &["t3", "t4", "t5"],
            vec![
                vec![0.0, 1.0, 0.58],
                vec![1.0, 0.0, 0.45],
                vec![0.58, 0.45, 0.0],
            ],
        )
    }

    fn names(p: &Partition) -> Vec<Vec<&str>> {
        p.clusters()
            .iter()
            .map(|c| c.iter().map(String::as_str).collect())
            .collect()
    }

    #[test]
    fn intercluster_rules() {
        let d = motivating();
        assert_eq!(intercluster_distance(&d, &[0], &[1, 2], Linkage::Max), 1.0);
        assert_eq!(intercluster_distance(&d, &[0], &[1, 2], Linkage::Min), 0.58);
        assert!((intercluster_distance(&d, &[1], &[0, 2], Linkage::Avg) - 0.725).abs() < 1e-12);
        for l in Linkage::ALL {
            assert_eq!(intercluster_distance(&d, &[1], &[2], l), 0.45);
        }
    }

    #[test]
    fn complete_linkage_on_motivating_example() {
        let dg = agglomerate(&motivating(), Linkage::Max).unwrap();
        assert_eq!(
            dg.merges()[0],
            Merge {
                a: 1,
                b: 2,
                distance: 0.45,
                size: 2
            }
        );
        assert_eq!(
            dg.merges()[1],
            Merge {
                a: 0,
                b: 3,
                distance: 1.0,
                size: 3
            }
        );
        assert_eq!(dg.mdist(3), Some(0.45));
        assert_eq!(dg.mdist(2), Some(1.0));
        assert_eq!(elbow_k(&dg).unwrap(), 2);
        assert_eq!(
            names(&cut(&dg, 2).unwrap()),
            vec![vec!["t3"], vec!["t4", "t5"]]
        );
        assert_eq!(threshold_k(&dg, 0.8).unwrap(), 2);
    }

    #[test]
    fn elbow_differences_on_motivating_example() {
        let dg = agglomerate(&motivating(), Linkage::Max).unwrap();
        let diffs = elbow_differences(&dg);
        let expected = [(1, -1.0), (2, 0.55), (3, -0.55)];
        for ((k, v), (ek, ev)) in diffs.into_iter().zip(expected) {
            assert_eq!(k, ek);
            assert!((v - ev).abs() < 1e-12);
        }
    }

    #[test]
    fn two_leaves() {
        let close = matrix(&["a", "b"], vec![vec![0.0, 0.3], vec![0.3, 0.0]]);
        let dg = agglomerate(&close, Linkage::Avg).unwrap();
        assert_eq!(dg.merges().len(), 1);
        assert_eq!(dg.merges()[0].distance, 0.3);
        assert_eq!(elbow_k(&dg).unwrap(), 1);

        let far = matrix(&["a", "b"], vec![vec![0.0, 0.9], vec![0.9, 0.0]]);
        assert_eq!(
            elbow_k(&agglomerate(&far, Linkage::Avg).unwrap()).unwrap(),
            2
        );
    }

    #[test]
    fn equidistant_triangle_uses_lexicographic_tie_break() {
        let d = matrix(
            &["x", "y", "z"],
            vec![
                vec![0.0, 0.5, 0.5],
                vec![0.5, 0.0, 0.5],
                vec![0.5, 0.5, 0.0],
            ],
        );
        let dg = agglomerate(&d, Linkage::Avg).unwrap();
        assert_eq!((dg.merges()[0].a, dg.merges()[0].b), (0, 1));
        assert_eq!(dg.mdist(3), Some(0.5));
        assert_eq!(dg.mdist(2), Some(0.5));
    }

    #[test]
    fn threshold_extremes() {
        let dg = agglomerate(&motivating(), Linkage::Avg).unwrap();
        assert_eq!(threshold_k(&dg, 0.0).unwrap(), 3);
        let near = matrix(
            &["a", "b", "c"],
            vec![
                vec![0.0, 0.2, 0.3],
                vec![0.2, 0.0, 0.4],
                vec![0.3, 0.4, 0.0],
            ],
        );
        let dg = agglomerate(&near, Linkage::Max).unwrap();
        assert_eq!(threshold_k(&dg, 1.0).unwrap(), 1);
        assert!(threshold_k(&dg, 1.5).is_err());
        assert!(threshold_k(&dg, -0.1).is_err());
    }

    #[test]
    fn cut_extremes() {
        let dg = agglomerate(&motivating(), Linkage::Avg).unwrap();
        assert_eq!(cut(&dg, 3).unwrap().k(), 3);
        assert_eq!(names(&cut(&dg, 1).unwrap()), vec![vec!["t3", "t4", "t5"]]);
        assert!(cut(&dg, 0).is_err());
        assert!(cut(&dg, 4).is_err());
    }

    #[test]
    fn unnormalised_metric_refuses_automatic_stopping() {
        let d = DistanceMatrix::new(
            vec!["a".into(), "b".into()],
            Metric::Euclidean,
            false,
            vec![vec![0.0, 2.0], vec![2.0, 0.0]],
        )
        .unwrap();
        let dg = agglomerate(&d, Linkage::Avg).unwrap();
        assert!(elbow_k(&dg).is_err());
        assert!(threshold_k(&dg, 0.5).is_err());
        assert_eq!(cut(&dg, 1).unwrap().k(), 1);
    }

    #[test]
    fn exports() {
        let dg = agglomerate(&motivating(), Linkage::Max).unwrap();
        assert_eq!(dg.mdist_csv(), "k,value\n1,1\n2,1\n3,0.45\n");
        let json: serde_json::Value = serde_json::from_str(&dg.to_json()).unwrap();
        assert_eq!(json["mdist"]["3"], 0.45);
        assert_eq!(json["merges"][1]["b"], 3);
        assert!(dg.to_dot().contains("n4 [shape=point, xlabel=\"1\"]"));
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![vec![]]).is_err());
        assert!(Partition::new(vec![vec!["a".into()], vec!["a".into()]]).is_err());
        let p = Partition::new(vec![vec!["b".into(), "a".into()], vec!["c".into()]]).unwrap();
        let q = Partition::new(vec![vec!["c".into()], vec!["a".into(), "b".into()]]).unwrap();
        assert!(p.same_as(&q));
        assert_eq!(Partition::from_json(&p.to_json()).unwrap(), p);
    }
}
