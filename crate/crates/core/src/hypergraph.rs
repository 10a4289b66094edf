//! Weighted hypergraph model of test coverage.
//!
//! Vertices are tests and each program component becomes a hyperedge joining
//! every test that covers it, so the incidence matrix is the coverage matrix
//! itself. Restricting to the failing tests keeps failing-pair linkages
//! unchanged by rescaling each surviving edge's weight with the fraction of
//! its original members that survive.

use std::fmt::Write as _;

use crate::coverage::CoverageMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperedge {
    /// Sorted vertex indices.
    pub members: Vec<usize>,
    pub weight: f64,
}

impl Hyperedge {
    pub fn degree(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypergraph {
    vertex_count: usize,
    edges: Vec<Hyperedge>,
    /// Edge index -> original component index.
    provenance: Vec<usize>,
    /// Vertex index -> vertex index in the graph this one was derived from
    /// (identity for a freshly built graph).
    origin: Vec<usize>,
    /// Vertex index -> ascending incident edge indices.
    incidence: Vec<Vec<usize>>,
}

impl Hypergraph {
    fn from_edges(
        vertex_count: usize,
        edges: Vec<Hyperedge>,
        provenance: Vec<usize>,
        origin: Vec<usize>,
    ) -> Self {
        let mut incidence = vec![Vec::new(); vertex_count];
        for (e, edge) in edges.iter().enumerate() {
            for &v in &edge.members {
                incidence[v].push(e);
            }
        }
        Hypergraph {
            vertex_count,
            edges,
            provenance,
            origin,
            incidence,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Hyperedge {
        &self.edges[e]
    }

    /// Original component index of edge `e`.
    pub fn component_of(&self, e: usize) -> usize {
        self.provenance[e]
    }

    /// Index of vertex `v` in the graph this graph was restricted from.
    pub fn origin_of(&self, v: usize) -> usize {
        self.origin[v]
    }

    /// Edges incident to `v`, ascending.
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    pub fn edge_degree(&self, e: usize) -> usize {
        self.edges[e].degree()
    }

    /// Self-linkage: sum of `w(e)/deg(e)` over the edges containing `v`.
    pub fn vertex_assoc(&self, v: usize) -> f64 {
        self.incidence[v].iter().map(|&e| self.edge_ratio(e)).sum()
    }

    /// `w(e) / deg(e)`.
    pub fn edge_ratio(&self, e: usize) -> f64 {
        let edge = &self.edges[e];
        edge.weight / edge.degree() as f64
    }

    /// Dense 0/1 incidence matrix, rows are vertices, columns are edges.
    pub fn incidence_matrix(&self) -> Vec<Vec<u8>> {
        let mut h = vec![vec![0u8; self.edges.len()]; self.vertex_count];
        for (e, edge) in self.edges.iter().enumerate() {
            for &v in &edge.members {
                h[v][e] = 1;
            }
        }
        h
    }

    /// Bipartite DOT rendering: vertex nodes, edge nodes, membership arcs.
    pub fn to_dot(&self, vertex_labels: &[String], edge_labels: &[String]) -> String {
        let mut out = String::from("graph hypergraph {\n  node [fontname=\"Helvetica\"];\n");
        for v in 0..self.vertex_count {
            let label = vertex_labels
                .get(v)
                .map_or_else(|| format!("v{v}"), Clone::clone);
            let _ = writeln!(out, "  v{v} [shape=circle, label=\"{}\"];", escape(&label));
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let label = edge_labels
                .get(self.provenance[e])
                .map_or_else(|| format!("e{e}"), Clone::clone);
            let _ = writeln!(
                out,
                "  e{e} [shape=box, label=\"{}\\nw={}\"];",
                escape(&label),
                crate::format::sig6(edge.weight)
            );
            for &v in &edge.members {
                let _ = writeln!(out, "  e{e} -- v{v};");
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// One vertex per test, one unit-weight hyperedge per covered component.
/// Components covered by no test produce no edge.
pub fn build_hypergraph(cov: &CoverageMatrix) -> Hypergraph {
    let mut members = vec![Vec::new(); cov.n_components()];
    for (i, row) in cov.rows().iter().enumerate() {
        for &j in row {
            members[j].push(i);
        }
    }
    let mut edges = Vec::new();
    let mut provenance = Vec::new();
    for (j, m) in members.into_iter().enumerate() {
        if !m.is_empty() {
            edges.push(Hyperedge {
                members: m,
                weight: 1.0,
            });
            provenance.push(j);
        }
    }
    let n = cov.n_tests();
    Hypergraph::from_edges(n, edges, provenance, (0..n).collect())
}

/// Restriction of `g` to the vertex subset `keep`.
///
/// Vertices are renumbered in the order given by `keep`. Each edge meeting
/// `keep` survives as its intersection with `keep`, reweighted by
/// `w'(e) = w(e) * deg'(e) / deg(e)` so that `w'/deg' = w/deg`.
pub fn restrict_to_failures(g: &Hypergraph, keep: &[usize]) -> Result<Hypergraph> {
    if keep.is_empty() {
        return Err(Error::invalid(
            "cannot restrict a hypergraph to an empty vertex set",
        ));
    }
    let mut new_index = vec![usize::MAX; g.vertex_count];
    for (k, &v) in keep.iter().enumerate() {
        if v >= g.vertex_count {
            return Err(Error::invalid(format!("vertex {v} out of range")));
        }
        if new_index[v] != usize::MAX {
            return Err(Error::invalid(format!("vertex {v} listed twice")));
        }
        new_index[v] = k;
    }

    let mut edges = Vec::new();
    let mut provenance = Vec::new();
    for (e, edge) in g.edges.iter().enumerate() {
        let mut members: Vec<usize> = edge
            .members
            .iter()
            .filter_map(|&v| (new_index[v] != usize::MAX).then_some(new_index[v]))
            .collect();
        if members.is_empty() {
            continue;
        }
        members.sort_unstable();
        let weight = edge.weight * members.len() as f64 / edge.degree() as f64;
        if weight <= 0.0 {
            continue;
        }
        edges.push(Hyperedge { members, weight });
        provenance.push(g.provenance[e]);
    }
    let origin = keep.iter().map(|&v| g.origin[v]).collect();
    Ok(Hypergraph::from_edges(
        keep.len(),
        edges,
        provenance,
        origin,
    ))
}
