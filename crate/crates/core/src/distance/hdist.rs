//! Hypergraph test distance.
//!
//! `l(u, v)` sums `w(e)/deg(e)` over the edges shared by `u` and `v`;
//! normalising by each endpoint's self-linkage gives `l̂ ∈ [0, 1]` and
//! `hdist = 1 - l̂`.

use ndarray::Array2;
use rayon::prelude::*;

use super::{upper_pairs, DistanceMatrix, Metric};
use crate::coverage::CoverageMatrix;
use crate::error::Result;
use crate::hypergraph::{build_hypergraph, restrict_to_failures, Hypergraph};

/// Sum of `w(e)/deg(e)` over edges containing both `u` and `v`, summed in
/// ascending edge order.
pub fn linkage(g: &Hypergraph, u: usize, v: usize) -> f64 {
    let (a, b) = (g.incident_edges(u), g.incident_edges(v));
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                total += g.edge_ratio(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    total
}

fn normalise(l: f64, assoc_u: f64, assoc_v: f64) -> f64 {
    (0.5 * (l / assoc_u + l / assoc_v)).clamp(0.0, 1.0)
}

pub fn normalized_linkage(g: &Hypergraph, u: usize, v: usize) -> f64 {
    if u == v {
        return 1.0;
    }
    normalise(linkage(g, u, v), g.vertex_assoc(u), g.vertex_assoc(v))
}

pub fn hdist(g: &Hypergraph, u: usize, v: usize) -> f64 {
    if u == v {
        0.0
    } else {
        1.0 - normalized_linkage(g, u, v)
    }
}

/// How to evaluate the pairwise linkage matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evaluation {
    /// Dense `L = H W De⁻¹ Hᵀ` over the touched edges.
    Dense,
    /// Per-pair intersection of incident-edge lists.
    Adjacency,
    /// Dense when `vertices × touched edges` is at most `budget_cells`.
    Auto { budget_cells: usize },
}

impl Default for Evaluation {
    fn default() -> Self {
        Evaluation::Auto {
            budget_cells: 1 << 26,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HdistOptions {
    pub evaluation: Evaluation,
}

pub fn hdist_matrix(cov: &CoverageMatrix) -> Result<DistanceMatrix> {
    hdist_matrix_with(cov, HdistOptions::default())
}

/// hdist over all failing tests: build the hypergraph, restrict it to the
/// failures, then evaluate the pairwise distances on the restriction.
pub fn hdist_matrix_with(cov: &CoverageMatrix, opts: HdistOptions) -> Result<DistanceMatrix> {
    let failing = cov.require_failures(2)?;
    let g = build_hypergraph(cov);
    let restricted = restrict_to_failures(&g, &failing)?;
    let all: Vec<usize> = (0..restricted.vertex_count()).collect();
    let upper = pairwise_upper(&restricted, &all, opts.evaluation);
    let labels = failing
        .iter()
        .map(|&i| cov.tests()[i].name.clone())
        .collect();
    Ok(DistanceMatrix::from_upper(
        labels,
        Metric::Hdist,
        true,
        &upper,
    ))
}

/// Full `|vertices|²` hdist matrix among `vertices` of `g`, row-major.
pub fn pairwise_hdist(g: &Hypergraph, vertices: &[usize], evaluation: Evaluation) -> Vec<Vec<f64>> {
    let n = vertices.len();
    let upper = pairwise_upper(g, vertices, evaluation);
    let mut out = vec![vec![0.0; n]; n];
    for (k, (i, j)) in upper_pairs(n).into_iter().enumerate() {
        out[i][j] = upper[k];
        out[j][i] = upper[k];
    }
    out
}

fn pairwise_upper(g: &Hypergraph, vertices: &[usize], evaluation: Evaluation) -> Vec<f64> {
    let dense = match evaluation {
        Evaluation::Dense => true,
        Evaluation::Adjacency => false,
        Evaluation::Auto { budget_cells } => {
            let touched: usize = touched_edges(g, vertices).len();
            vertices.len().saturating_mul(touched) <= budget_cells
        }
    };
    if dense {
        dense_upper(g, vertices)
    } else {
        adjacency_upper(g, vertices)
    }
}

fn touched_edges(g: &Hypergraph, vertices: &[usize]) -> Vec<usize> {
    let mut touched = vec![false; g.edge_count()];
    for &v in vertices {
        for &e in g.incident_edges(v) {
            touched[e] = true;
        }
    }
    (0..g.edge_count()).filter(|&e| touched[e]).collect()
}

fn dense_upper(g: &Hypergraph, vertices: &[usize]) -> Vec<f64> {
    let edges = touched_edges(g, vertices);
    let mut column = vec![usize::MAX; g.edge_count()];
    for (c, &e) in edges.iter().enumerate() {
        column[e] = c;
    }
    let (n, m) = (vertices.len(), edges.len());
    // h: incidence restricted to the chosen rows; hw: h scaled by w(e)/deg(e).
    let mut h = Array2::<f64>::zeros((n, m));
    let mut hw = Array2::<f64>::zeros((n, m));
    for (r, &v) in vertices.iter().enumerate() {
        for &e in g.incident_edges(v) {
            h[[r, column[e]]] = 1.0;
            hw[[r, column[e]]] = g.edge_ratio(e);
        }
    }
    let l = hw.dot(&h.t());
    upper_pairs(n)
        .into_iter()
        .map(|(i, j)| 1.0 - normalise(l[[i, j]], l[[i, i]], l[[j, j]]))
        .collect()
}

fn adjacency_upper(g: &Hypergraph, vertices: &[usize]) -> Vec<f64> {
    let assoc: Vec<f64> = vertices.iter().map(|&v| g.vertex_assoc(v)).collect();
    upper_pairs(vertices.len())
        .into_par_iter()
        .map(|(i, j)| {
            let l = linkage(g, vertices[i], vertices[j]);
            1.0 - normalise(l, assoc[i], assoc[j])
        })
        .collect()
}
