//! Spectrum-based fault localisation and the parallel-debugging evaluation.
//!
//! A [`Spectrum`] counts, per component, the failing and passing tests that
//! do (`ef`, `ep`) and do not (`nf`, `np`) cover it. Suspiciousness scores
//! turn a spectrum into a [`Ranking`]; [`evaluate_parallel_fl`] builds one
//! ranking per failure cluster and measures the wasted effort to reach a
//! faulty component in each.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ahc::Partition;
use crate::coverage::{CoverageMatrix, GroundTruth};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    #[default]
    Ochiai,
    Crosstab,
}

impl Technique {
    pub fn name(self) -> &'static str {
        match self {
            Technique::Ochiai => "ochiai",
            Technique::Crosstab => "crosstab",
        }
    }

    pub fn score(self, s: &Spectrum) -> Scores {
        match self {
            Technique::Ochiai => ochiai(s),
            Technique::Crosstab => crosstab(s),
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ochiai" => Ok(Technique::Ochiai),
            "crosstab" => Ok(Technique::Crosstab),
            _ => Err(Error::invalid(format!("unknown FL technique `{s}`"))),
        }
    }
}

/// Rank assigned to members of a group of equal scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Every member gets the group's worst (largest) rank.
    #[default]
    Max,
    /// Every member gets the group's best (smallest) rank.
    Min,
}

impl TieBreak {
    pub fn name(self) -> &'static str {
        match self {
            TieBreak::Max => "max",
            TieBreak::Min => "min",
        }
    }
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(TieBreak::Max),
            "min" => Ok(TieBreak::Min),
            _ => Err(Error::invalid(format!("unknown tie-breaker `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spectrum {
    components: Vec<usize>,
    ef: Vec<u32>,
    ep: Vec<u32>,
    failing: u32,
    passing: u32,
}

impl Spectrum {
    pub fn components(&self) -> &[usize] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_failing(&self) -> u32 {
        self.failing
    }

    pub fn total_passing(&self) -> u32 {
        self.passing
    }

    /// `(ef, ep, nf, np)` of the `k`-th component.
    pub fn counts(&self, k: usize) -> (u32, u32, u32, u32) {
        let (ef, ep) = (self.ef[k], self.ep[k]);
        (ef, ep, self.failing - ef, self.passing - ep)
    }

    /// Counts for component index `component`, if it is part of the spectrum.
    pub fn counts_of(&self, component: usize) -> Option<(u32, u32, u32, u32)> {
        let k = self.components.binary_search(&component).ok()?;
        Some(self.counts(k))
    }
}

/// Spectrum over `failing_subset ∪ T_P`, ranking every component covered by
/// at least one test of the suite.
pub fn spectrum(cov: &CoverageMatrix, failing_subset: &[usize]) -> Result<Spectrum> {
    let all: Vec<usize> = (0..cov.n_tests()).collect();
    let universe = cov.columns_covered_by(&all);
    spectrum_over(cov, failing_subset, &universe)
}

/// Spectrum over `failing_subset ∪ T_P` for an explicit ascending component
/// universe.
pub fn spectrum_over(
    cov: &CoverageMatrix,
    failing_subset: &[usize],
    components: &[usize],
) -> Result<Spectrum> {
    if failing_subset.is_empty() {
        return Err(Error::invalid("spectrum needs at least one failing test"));
    }
    let mut position = vec![usize::MAX; cov.n_components()];
    for (k, &c) in components.iter().enumerate() {
        position[c] = k;
    }
    let mut ef = vec![0u32; components.len()];
    let mut ep = vec![0u32; components.len()];
    let mut seen = BTreeSet::new();
    for &t in failing_subset {
        if t >= cov.n_tests() || !cov.tests()[t].outcome.is_fail() {
            return Err(Error::invalid(format!(
                "test index {t} is not a failing test"
            )));
        }
        if !seen.insert(t) {
            return Err(Error::invalid(format!("test index {t} listed twice")));
        }
        for &c in cov.row(t) {
            if position[c] != usize::MAX {
                ef[position[c]] += 1;
            }
        }
    }
    let passing = cov.passing_tests();
    for &t in &passing {
        for &c in cov.row(t) {
            if position[c] != usize::MAX {
                ep[position[c]] += 1;
            }
        }
    }
    Ok(Spectrum {
        components: components.to_vec(),
        ef,
        ep,
        failing: failing_subset.len() as u32,
        passing: passing.len() as u32,
    })
}

/// Suspiciousness per item (component or component group).
#[derive(Clone, Debug, PartialEq)]
pub struct Scores {
    pub items: Vec<usize>,
    pub values: Vec<f64>,
}

/// `ef / sqrt((ef + nf)(ef + ep))`, 0 when the denominator is 0.
///
/// Evaluated as `sqrt(ef² / ((ef + nf)(ef + ep)))`, a single rounded integer
/// division, so equal ratios always produce equal scores.
pub fn ochiai(s: &Spectrum) -> Scores {
    let values = (0..s.len())
        .map(|k| {
            let (ef, ep, nf, _) = s.counts(k);
            let denom = u64::from(ef + nf) * u64::from(ef + ep);
            if denom == 0 {
                0.0
            } else {
                (u64::from(ef).pow(2) as f64 / denom as f64).sqrt()
            }
        })
        .collect();
    Scores {
        items: s.components.clone(),
        values,
    }
}

/// Signed chi-square statistic of the covered/uncovered × fail/pass table,
/// `N (ef·np - ep·nf)² / ((ef+ep)(nf+np)(ef+nf)(ep+np))`.
///
/// The sign follows `(ef/F) / (ep/P)`: positive above 1, negative below 1,
/// zero at 1. A table with an empty margin scores 0. Numerator and
/// denominator are exact integers, so equal statistics compare equal as long
/// as both stay below 2^53.
pub fn crosstab(s: &Spectrum) -> Scores {
    let n = u128::from(s.failing) + u128::from(s.passing);
    let values = (0..s.len())
        .map(|k| {
            let (ef, ep, nf, np) = s.counts(k);
            let [ef, ep, nf, np] = [ef, ep, nf, np].map(i128::from);
            let det = ef * np - ep * nf;
            let denom = ((ef + ep) * (nf + np) * (ef + nf) * (ep + np)) as u128;
            if denom == 0 || det == 0 {
                return 0.0;
            }
            let chi2 = (n * det.unsigned_abs().pow(2)) as f64 / denom as f64;
            if det > 0 {
                chi2
            } else {
                -chi2
            }
        })
        .collect();
    Scores {
        items: s.components.clone(),
        values,
    }
}

/// Group score = max member score. Groups are reported in ascending id order.
pub fn aggregate_components(scores: &Scores, groups: &HashMap<usize, usize>) -> Result<Scores> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for (&item, &value) in scores.items.iter().zip(&scores.values) {
        let group = *groups
            .get(&item)
            .ok_or_else(|| Error::invalid(format!("component {item} has no group")))?;
        best.entry(group)
            .and_modify(|v| *v = v.max(value))
            .or_insert(value);
    }
    Ok(Scores {
        items: best.keys().copied().collect(),
        values: best.values().copied().collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedItem {
    pub item: usize,
    pub score: f64,
    pub rank: usize,
}

/// Items in descending score order (equal scores by ascending item id),
/// each with a 1-based rank under the ranking's tie-breaker.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking {
    entries: Vec<RankedItem>,
    rank_of: HashMap<usize, usize>,
    tiebreak: TieBreak,
}

impl Ranking {
    pub fn entries(&self) -> &[RankedItem] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tiebreak(&self) -> TieBreak {
        self.tiebreak
    }

    pub fn rank_of(&self, item: usize) -> Option<usize> {
        self.rank_of.get(&item).copied()
    }
}

pub fn rank(scores: &Scores, tiebreak: TieBreak) -> Ranking {
    let mut order: Vec<(usize, f64)> = scores
        .items
        .iter()
        .copied()
        .zip(scores.values.iter().copied())
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut entries = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && order[end].1 == order[start].1 {
            end += 1;
        }
        let rank = match tiebreak {
            TieBreak::Max => end,
            TieBreak::Min => start + 1,
        };
        entries.extend(order[start..end].iter().map(|&(item, score)| RankedItem {
            item,
            score,
            rank,
        }));
        start = end;
    }
    let rank_of = entries.iter().map(|e| (e.item, e.rank)).collect();
    Ranking {
        entries,
        rank_of,
        tiebreak,
    }
}

/// Inspection budget: only the top `n` ranks are examined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cutoff {
    Top(usize),
    Unbounded,
}

impl Cutoff {
    fn admits(self, rank: usize) -> bool {
        match self {
            Cutoff::Top(n) => rank <= n,
            Cutoff::Unbounded => true,
        }
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Top(n) => write!(f, "{n}"),
            Cutoff::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for Cutoff {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "all" => Ok(Cutoff::Unbounded),
            _ => s
                .parse::<usize>()
                .map(Cutoff::Top)
                .map_err(|_| Error::invalid(format!("invalid top-n cutoff `{s}`"))),
        }
    }
}

impl Serialize for Cutoff {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cutoff::Top(n) => serializer.serialize_u64(*n as u64),
            Cutoff::Unbounded => serializer.serialize_str("inf"),
        }
    }
}

/// Best (smallest) rank of any item in `faulty`, if ranked at all.
fn best_faulty_rank(r: &Ranking, faulty: &BTreeSet<usize>) -> Option<usize> {
    faulty.iter().filter_map(|&c| r.rank_of(c)).min()
}

/// Wasted effort: items examined before the best-ranked faulty item, i.e.
/// its rank minus one. Capped at `n` when no faulty item is within the top
/// `n`; with no cutoff and no faulty item ranked, the whole ranking is wasted.
pub fn wef(r: &Ranking, faulty: &BTreeSet<usize>, n: Cutoff) -> usize {
    match (best_faulty_rank(r, faulty), n) {
        (Some(rank), cutoff) if cutoff.admits(rank) => rank - 1,
        (_, Cutoff::Top(n)) => n,
        (None, Cutoff::Unbounded) => r.len(),
        (Some(_), Cutoff::Unbounded) => unreachable!("unbounded cutoff admits every rank"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterFl {
    pub cluster: usize,
    pub failing_tests: Vec<String>,
    pub wef: usize,
    /// Rank of the highest-ranked faulty component, when within the cutoff.
    pub best_faulty_rank: Option<usize>,
    /// Faults located by this ranking's highest-ranked faulty component(s).
    pub located_faults: Vec<String>,
    /// Found faults credited to this ranking.
    pub credited_faults: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlReport {
    pub technique: Technique,
    pub tiebreak: TieBreak,
    pub cutoff: Cutoff,
    pub found_faults: Vec<String>,
    pub found_fault_ratio: f64,
    pub t_wef: usize,
    pub redundant_rankings: usize,
    pub redundant_ranking_ratio: f64,
    pub clusters: Vec<ClusterFl>,
}

/// Per-cluster rankings in `partition` order, each built from the cluster's
/// failing tests plus every passing test.
pub fn cluster_rankings(
    cov: &CoverageMatrix,
    partition: &Partition,
    technique: Technique,
    tiebreak: TieBreak,
) -> Result<Vec<Ranking>> {
    let failing = cov.failing_tests();
    let clusters = partition
        .clusters()
        .iter()
        .map(|members| {
            members
                .iter()
                .map(|name| {
                    cov.test_index(name)
                        .filter(|i| failing.contains(i))
                        .ok_or_else(|| {
                            Error::validation(format!(
                                "`{name}` is not a failing test of the suite"
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = (0..cov.n_tests()).collect();
    let universe = cov.columns_covered_by(&all);
    clusters
        .par_iter()
        .map(|members| {
            let s = spectrum_over(cov, members, &universe)?;
            Ok(rank(&technique.score(&s), tiebreak))
        })
        .collect()
}

/// First iteration of parallel debugging over the clusters of `partition`.
///
/// A ranking locates every fault owning one of its highest-ranked faulty
/// components, provided that rank is within the cutoff. Each located fault is
/// credited to the ranking that reaches it at the best rank (lowest cluster
/// index on ties); rankings credited with no fault are redundant.
pub fn evaluate_parallel_fl(
    cov: &CoverageMatrix,
    partition: &Partition,
    gt: &GroundTruth,
    technique: Technique,
    tiebreak: TieBreak,
    n: Cutoff,
) -> Result<FlReport> {
    let rankings = cluster_rankings(cov, partition, technique, tiebreak)?;
    evaluate_rankings(&rankings, partition, gt, technique, n)
}

pub fn evaluate_rankings(
    rankings: &[Ranking],
    partition: &Partition,
    gt: &GroundTruth,
    technique: Technique,
    n: Cutoff,
) -> Result<FlReport> {
    if gt.faults().is_empty() {
        return Err(Error::validation("ground truth lists no faults"));
    }
    if let Some(f) = gt.faults().iter().find(|f| f.components.is_empty()) {
        return Err(Error::validation(format!(
            "fault `{}` has no faulty components to localise",
            f.id
        )));
    }
    let all_faulty: BTreeSet<usize> = gt
        .faults()
        .iter()
        .flat_map(|f| f.components.iter().copied())
        .collect();
    let tiebreak = rankings
        .first()
        .map_or(TieBreak::default(), Ranking::tiebreak);

    let mut clusters = Vec::with_capacity(rankings.len());
    // fault index -> (best rank, cluster index)
    let mut credit: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (ci, r) in rankings.iter().enumerate() {
        let best = best_faulty_rank(r, &all_faulty).filter(|&rank| n.admits(rank));
        let mut located = Vec::new();
        if let Some(rank) = best {
            for (fi, fault) in gt.faults().iter().enumerate() {
                if fault.components.iter().any(|&c| r.rank_of(c) == Some(rank)) {
                    located.push(fi);
                    let entry = credit.entry(fi).or_insert((rank, ci));
                    if rank < entry.0 {
                        *entry = (rank, ci);
                    }
                }
            }
        }
        clusters.push(ClusterFl {
            cluster: ci,
            failing_tests: partition.clusters()[ci].clone(),
            wef: wef(r, &all_faulty, n),
            best_faulty_rank: best,
            located_faults: located
                .iter()
                .map(|&fi| gt.faults()[fi].id.clone())
                .collect(),
            credited_faults: Vec::new(),
        });
    }
    for (&fi, &(_, ci)) in &credit {
        clusters[ci]
            .credited_faults
            .push(gt.faults()[fi].id.clone());
    }

    let found_faults: Vec<String> = credit
        .keys()
        .map(|&fi| gt.faults()[fi].id.clone())
        .collect();
    let redundant = clusters
        .iter()
        .filter(|c| c.credited_faults.is_empty())
        .count();
    let k = rankings.len();
    Ok(FlReport {
        technique,
        tiebreak,
        cutoff: n,
        found_fault_ratio: found_faults.len() as f64 / gt.fault_count() as f64,
        found_faults,
        t_wef: clusters.iter().map(|c| c.wef).sum(),
        redundant_rankings: redundant,
        redundant_ranking_ratio: if k == 0 {
            0.0
        } else {
            redundant as f64 / k as f64
        },
        clusters,
    })
}

/// CSV rows `cluster_id,rank,component,score` for every ranking.
pub fn rankings_csv(rankings: &[Ranking], component_names: &[String]) -> String {
    let mut out = String::from("cluster_id,rank,component,score\n");
    for (ci, r) in rankings.iter().enumerate() {
        for e in r.entries() {
            out.push_str(&format!(
                "{ci},{},{},{}\n",
                e.rank,
                component_names.get(e.item).map_or("?", String::as_str),
                crate::format::sig6(e.score)
            ));
        }
    }
    out
}
