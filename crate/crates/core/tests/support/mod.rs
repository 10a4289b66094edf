#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::HashMap;

use hyperclust::{CoverageMatrix, Outcome, TestCase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Five tests over six components; t3 fails alone, t4 and t5 share a fault.
pub fn table1() -> CoverageMatrix {
    let json = include_str!("../../../../data/motivating/coverage.json");
    hyperclust::load_coverage(json.as_bytes(), hyperclust::CoverageFormat::Json)
        .unwrap()
        .matrix
}

pub fn table1_truth() -> hyperclust::GroundTruth {
    let json = include_str!("../../../../data/motivating/ground_truth.json");
    hyperclust::load_ground_truth(json.as_bytes()).unwrap()
}

/// Random suite with `n` tests and `m` components, at least `min_fail`
/// failures, every test covering at least one component.
pub fn random_matrix(r: &mut ChaCha8Rng, n: usize, m: usize, min_fail: usize) -> CoverageMatrix {
    let density = r.random_range(0.05..0.5);
    let fail_p = r.random_range(0.2..0.8);
    let mut outcomes: Vec<bool> = (0..n).map(|_| r.random_bool(fail_p)).collect();
    for o in outcomes.iter_mut().take(min_fail) {
        *o = true;
    }
    let rows = (0..n)
        .map(|_| {
            let mut row: Vec<usize> = (0..m).filter(|_| r.random_bool(density)).collect();
            if row.is_empty() {
                row.push(r.random_range(0..m));
            }
            row
        })
        .collect();
    let tests = outcomes
        .iter()
        .enumerate()
        .map(|(i, &fail)| TestCase {
            name: format!("t{i}"),
            outcome: if fail { Outcome::Fail } else { Outcome::Pass },
        })
        .collect();
    let components = (0..m).map(|j| format!("c{j}")).collect();
    CoverageMatrix::new(components, tests, rows).unwrap()
}

pub fn random_corpus_matrix(r: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> CoverageMatrix {
    let n = r.random_range(2..=max_n);
    let m = r.random_range(1..=max_m);
    random_matrix(r, n, m, 2)
}

fn failing(cov: &CoverageMatrix) -> Vec<usize> {
    (0..cov.n_tests())
        .filter(|&i| cov.tests()[i].outcome == Outcome::Fail)
        .collect()
}

/// hdist between failing tests straight from the coverage rows of the whole
/// suite: `l(u,v) = Σ 1/deg(c)` over shared components, normalised by the
/// self-linkages, then `1 - l̂`.
pub fn hdist_oracle(cov: &CoverageMatrix) -> Vec<Vec<f64>> {
    let mut deg = vec![0usize; cov.n_components()];
    for row in cov.rows() {
        for &c in row {
            deg[c] += 1;
        }
    }
    let link = |u: usize, v: usize| -> f64 {
        cov.row(u)
            .iter()
            .filter(|c| cov.row(v).contains(c))
            .map(|&c| 1.0 / deg[c] as f64)
            .sum()
    };
    let f = failing(cov);
    f.iter()
        .map(|&u| {
            f.iter()
                .map(|&v| {
                    if u == v {
                        return 0.0;
                    }
                    let l = link(u, v);
                    1.0 - (l / link(u, u) + l / link(v, v)) / 2.0
                })
                .collect()
        })
        .collect()
}

/// Signed chi-square as an exact fraction `sign · num / den`.
#[derive(Clone, Copy, Debug)]
struct Chi2 {
    num: i128,
    den: i128,
}

impl Chi2 {
    fn cmp(self, o: Chi2) -> Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }
}

fn crosstab_exact(ef: i128, ep: i128, f: i128, p: i128) -> Chi2 {
    let (nf, np) = (f - ef, p - ep);
    let den = (ef + ep) * (nf + np) * (ef + nf) * (ep + np);
    let det = ef * np - ep * nf;
    if den == 0 {
        return Chi2 { num: 0, den: 1 };
    }
    Chi2 {
        num: (f + p) * det * det.abs(),
        den,
    }
}

/// Ranking distance by direct pair enumeration, scores compared exactly.
pub fn rkt_oracle(cov: &CoverageMatrix) -> Vec<Vec<f64>> {
    let f = failing(cov);
    let passing: Vec<usize> = (0..cov.n_tests()).filter(|i| !f.contains(i)).collect();
    let columns: Vec<usize> = (0..cov.n_components())
        .filter(|&c| f.iter().any(|&t| cov.covers(t, c)))
        .collect();
    let p = passing.len() as i128;
    let scores: Vec<Vec<Chi2>> = f
        .iter()
        .map(|&t| {
            columns
                .iter()
                .map(|&c| {
                    let ef = i128::from(cov.covers(t, c));
                    let ep = passing.iter().filter(|&&q| cov.covers(q, c)).count() as i128;
                    crosstab_exact(ef, ep, 1, p)
                })
                .collect()
        })
        .collect();
    let distance = |x: &[Chi2], y: &[Chi2]| -> f64 {
        let mut d = 0.0;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let (a, b) = (x[i].cmp(x[j]), y[i].cmp(y[j]));
                d += match (a, b) {
                    (Ordering::Equal, Ordering::Equal) => 0.0,
                    (Ordering::Equal, _) | (_, Ordering::Equal) => 0.5,
                    _ if a != b => 1.0,
                    _ => 0.0,
                };
            }
        }
        d
    };
    scores
        .iter()
        .map(|x| scores.iter().map(|y| distance(x, y)).collect())
        .collect()
}

/// Random partition of `items` into at most `max_k` clusters.
pub fn random_partition(r: &mut ChaCha8Rng, items: &[String], max_k: usize) -> Vec<Vec<String>> {
    let k = r.random_range(1..=max_k.min(items.len()).max(1));
    let mut clusters = vec![Vec::new(); k];
    for it in items {
        clusters[r.random_range(0..k)].push(it.clone());
    }
    clusters.retain(|c| !c.is_empty());
    clusters
}

/// V-measure through mutual information: `h = I/H(GT)`, `m = I/H(P)`.
pub fn vmeasure_oracle(p: &[Vec<String>], gt: &[Vec<String>]) -> (f64, f64, f64) {
    let label = |part: &[Vec<String>]| -> HashMap<String, usize> {
        part.iter()
            .enumerate()
            .flat_map(|(i, c)| c.iter().map(move |t| (t.clone(), i)))
            .collect()
    };
    let (lp, lg) = (label(p), label(gt));
    let n = lp.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    for (t, &i) in &lp {
        *joint.entry((i, lg[t])).or_default() += 1.0;
    }
    let marg = |part: &[Vec<String>]| -> Vec<f64> { part.iter().map(|c| c.len() as f64).collect() };
    let (mp, mg) = (marg(p), marg(gt));
    let h = |m: &[f64]| -> f64 { m.iter().map(|&x| -(x / n) * (x / n).ln()).sum() };
    let mi: f64 = joint
        .iter()
        .map(|(&(i, j), &x)| x / n * (n * x / (mp[i] * mg[j])).ln())
        .sum();
    let (hp, hg) = (h(&mp), h(&mg));
    let hom = if hg == 0.0 { 1.0 } else { mi / hg };
    let com = if hp == 0.0 { 1.0 } else { mi / hp };
    let nmi = if hom + com == 0.0 {
        0.0
    } else {
        2.0 * hom * com / (hom + com)
    };
    (hom, com, nmi)
}

pub fn part(clusters: &[&[&str]]) -> hyperclust::Partition {
    hyperclust::Partition::new(
        clusters
            .iter()
            .map(|c| c.iter().map(|s| (*s).to_owned()).collect())
            .collect(),
    )
    .unwrap()
}

/// Proptest strategy: suites of up to `max_n` tests over up to `max_m`
/// components with at least `min_fail` failures.
pub fn arb_matrix(
    max_n: usize,
    max_m: usize,
    min_fail: usize,
) -> impl proptest::strategy::Strategy<Value = CoverageMatrix> {
    use proptest::prelude::*;
    (min_fail.max(1)..=max_n, 1..=max_m)
        .prop_flat_map(move |(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), m), n),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(0..m, n),
            )
        })
        .prop_map(move |(cells, fails, fallback)| {
            let m = cells[0].len();
            let rows = cells
                .iter()
                .zip(&fallback)
                .map(|(row, &f)| {
                    let mut r: Vec<usize> = (0..m).filter(|&j| row[j]).collect();
                    if r.is_empty() {
                        r.push(f);
                    }
                    r
                })
                .collect();
            let tests = fails
                .iter()
                .enumerate()
                .map(|(i, &fail)| TestCase {
                    name: format!("t{i}"),
                    outcome: if fail || i < min_fail {
                        Outcome::Fail
                    } else {
                        Outcome::Pass
                    },
                })
                .collect();
            CoverageMatrix::new((0..m).map(|j| format!("c{j}")).collect(), tests, rows).unwrap()
        })
}

/// Same suite with tests and components reordered by the given permutations.
pub fn permuted(cov: &CoverageMatrix, tests: &[usize], comps: &[usize]) -> CoverageMatrix {
    let mut new_index = vec![0; comps.len()];
    for (new, &old) in comps.iter().enumerate() {
        new_index[old] = new;
    }
    let components = comps.iter().map(|&c| cov.components()[c].clone()).collect();
    let cases = tests.iter().map(|&t| cov.tests()[t].clone()).collect();
    let rows = tests
        .iter()
        .map(|&t| cov.row(t).iter().map(|&c| new_index[c]).collect())
        .collect();
    CoverageMatrix::new(components, cases, rows).unwrap()
}
