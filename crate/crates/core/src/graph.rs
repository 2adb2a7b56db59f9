//! Graphs, weighted hypergraphs and the operator families they define.
//!
//! Vertices are numbered `1..=n`. A plain graph is a hypergraph whose
//! hyperedges all have two vertices and unit weight.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default hyperedge cap, `10 n^3`.
pub fn default_edge_cap(n: usize) -> usize {
    10usize.saturating_mul(n).saturating_mul(n).saturating_mul(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedHypergraph {
    n: usize,
    /// Each hyperedge sorted ascending.
    edges: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl WeightedHypergraph {
    pub fn new(n: usize, edges: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        Self::with_cap(n, edges, weights, default_edge_cap(n))
    }

    pub fn with_cap(
        n: usize,
        edges: Vec<Vec<usize>>,
        weights: Vec<f64>,
        cap: usize,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if edges.len() != weights.len() {
            return Err(Error::WeightCount {
                edges: edges.len(),
                weights: weights.len(),
            });
        }
        if edges.len() > cap {
            return Err(Error::TooManyHyperedges {
                edges: edges.len(),
                cap,
            });
        }
        let mut seen = BTreeSet::new();
        let mut sorted_edges = Vec::with_capacity(edges.len());
        for (index, mut edge) in edges.into_iter().enumerate() {
            if edge.is_empty() {
                return Err(Error::EmptyHyperedge { index });
            }
            for &vertex in &edge {
                if vertex == 0 || vertex > n {
                    return Err(Error::VertexOutOfRange { vertex, n });
                }
            }
            edge.sort_unstable();
            if let Some(w) = edge.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateVertex {
                    index,
                    vertex: w[0],
                });
            }
            if !seen.insert(edge.clone()) {
                return Err(Error::RepeatedHyperedge { index });
            }
            sorted_edges.push(edge);
        }
        for &w in &weights {
            if !w.is_finite() {
                return Err(Error::domain("weight", w, "finite real"));
            }
        }
        Ok(Self {
            n,
            edges: sorted_edges,
            weights,
        })
    }

    /// Plain graph with unit weights.
    pub fn graph(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs.iter().map(|&(a, b)| alloc::vec![a, b]).collect();
        Self::new(n, edges, alloc::vec![1.0; pairs.len()])
    }

    pub fn path(n: usize) -> Result<Self> {
        let pairs: Vec<_> = (1..n).map(|v| (v, v + 1)).collect();
        Self::graph(n, &pairs)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain("cycle length", n as f64, "at least 3"));
        }
        let mut pairs: Vec<_> = (1..n).map(|v| (v, v + 1)).collect();
        pairs.push((n, 1));
        Self::graph(n, &pairs)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for a in 1..=n {
            for b in a + 1..=n {
                pairs.push((a, b));
            }
        }
        Self::graph(n, &pairs)
    }

    /// Square lattice; vertex `(r, c)` (0-based) is `r * cols + c + 1`.
    pub fn cluster2d(rows: usize, cols: usize) -> Result<Self> {
        let id = |r: usize, c: usize| r * cols + c + 1;
        let mut pairs = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    pairs.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    pairs.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Self::graph(rows * cols, &pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_plain_graph(&self) -> bool {
        self.edges.iter().all(|e| e.len() == 2)
    }

    /// Errors unless every hyperedge has exactly two vertices.
    pub fn require_plain_graph(&self) -> Result<()> {
        match self.edges.iter().position(|e| e.len() != 2) {
            Some(index) => Err(Error::NotAGraph {
                index,
                size: self.edges[index].len(),
            }),
            None => Ok(()),
        }
    }

    /// Sorted neighbor list of `vertex` (1-based) in the 2-section.
    pub fn neighbors(&self, vertex: usize) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for edge in self.edges.iter().filter(|e| e.contains(&vertex)) {
            out.extend(edge.iter().copied().filter(|&v| v != vertex));
        }
        out.into_iter().collect()
    }

    /// 0-based adjacency lists of a plain graph.
    pub(crate) fn adjacency0(&self) -> Vec<Vec<usize>> {
        let mut adj = alloc::vec![Vec::new(); self.n];
        for e in &self.edges {
            if let [a, b] = e[..] {
                adj[a - 1].push(b - 1);
                adj[b - 1].push(a - 1);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// `g_i = X_i prod_{j in N(i)} Z_j` for vertex `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuditStabilizerSpec {
    pub vertex: usize,
    /// Sorted ascending, never contains `vertex`.
    pub neighbors: Vec<usize>,
    pub d: u32,
}

impl QuditStabilizerSpec {
    /// Measured sites (0-based, ascending) and whether each is the X site.
    pub fn measured_sites(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        let mut all: Vec<usize> = self.neighbors.clone();
        all.push(self.vertex);
        all.sort_unstable();
        all.into_iter().map(move |v| (v - 1, v == self.vertex))
    }
}

pub fn build_stabilizers(graph: &WeightedHypergraph, d: u32) -> Result<Vec<QuditStabilizerSpec>> {
    if d < 2 {
        return Err(Error::Dimension(d));
    }
    graph.require_plain_graph()?;
    if let Some(index) = graph.weights.iter().position(|&w| w != 1.0) {
        return Err(Error::WeightedQuditEdge {
            index,
            weight: graph.weights[index],
        });
    }
    Ok((1..=graph.n)
        .map(|vertex| QuditStabilizerSpec {
            vertex,
            neighbors: graph.neighbors(vertex),
            d,
        })
        .collect())
}

/// Rebuilds the edge set from a stabilizer family.
pub fn edges_from_stabilizers(specs: &[QuditStabilizerSpec]) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for spec in specs {
        for &j in &spec.neighbors {
            edges.insert((spec.vertex.min(j), spec.vertex.max(j)));
        }
    }
    edges
}

/// One term `weight * prod_{k in factors} x_k` of a CV nullifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullifierTerm {
    pub weight: f64,
    /// `e_j - {v_i}`, sorted ascending; empty for a single-vertex hyperedge.
    pub factors: Vec<usize>,
}

/// `g_i = p_i - sum_{e_j containing v_i} weight_j prod_{k in e_j - v_i} x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvNullifierSpec {
    pub vertex: usize,
    pub terms: Vec<NullifierTerm>,
}

impl CvNullifierSpec {
    /// Sorted union of all factor vertices.
    pub fn x_vertices(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.terms.iter().flat_map(|t| t.factors.iter().copied()).collect();
        set.into_iter().collect()
    }

    /// `sum_j weight_j prod x_k`, with `x` indexed by 0-based site. Terms are
    /// summed in hyperedge order so every caller gets the same rounding.
    pub fn polynomial(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut sum = 0.0;
        for term in &self.terms {
            let mut prod = term.weight;
            for &k in &term.factors {
                prod *= x(k - 1);
            }
            sum += prod;
        }
        sum
    }
}

pub fn build_nullifiers(graph: &WeightedHypergraph) -> Vec<CvNullifierSpec> {
    (1..=graph.n)
        .map(|vertex| CvNullifierSpec {
            vertex,
            terms: graph
                .edges
                .iter()
                .zip(&graph.weights)
                .filter(|(e, _)| e.contains(&vertex))
                .map(|(e, &weight)| NullifierTerm {
                    weight,
                    factors: e.iter().copied().filter(|&v| v != vertex).collect(),
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn edge_graph_stabilizers() {
        let g = WeightedHypergraph::graph(2, &[(1, 2)]).unwrap();
        let s = build_stabilizers(&g, 2).unwrap();
        assert_eq!(s[0], QuditStabilizerSpec { vertex: 1, neighbors: vec![2], d: 2 });
        assert_eq!(s[1], QuditStabilizerSpec { vertex: 2, neighbors: vec![1], d: 2 });
    }

    #[test]
    fn isolated_vertex_has_empty_neighborhood() {
        let g = WeightedHypergraph::graph(1, &[]).unwrap();
        let s = build_stabilizers(&g, 3).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].neighbors.is_empty());
    }

    #[test]
    fn path_middle_vertex() {
        let s = build_stabilizers(&WeightedHypergraph::path(5).unwrap(), 2).unwrap();
        assert_eq!(s[2].neighbors, vec![2, 4]);
    }

    #[test]
    fn stabilizers_reject_hyperedges_and_small_d() {
        let h = WeightedHypergraph::new(3, vec![vec![1, 2, 3]], vec![1.0]).unwrap();
        assert!(matches!(build_stabilizers(&h, 2), Err(Error::NotAGraph { size: 3, .. })));
        let g = WeightedHypergraph::path(2).unwrap();
        assert_eq!(build_stabilizers(&g, 1), Err(Error::Dimension(1)));
        let w = WeightedHypergraph::new(2, vec![vec![1, 2]], vec![2.0]).unwrap();
        assert!(matches!(build_stabilizers(&w, 3), Err(Error::WeightedQuditEdge { .. })));
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(matches!(
            WeightedHypergraph::graph(2, &[(1, 3)]),
            Err(Error::VertexOutOfRange { vertex: 3, n: 2 })
        ));
        assert!(matches!(
            WeightedHypergraph::graph(2, &[(1, 1)]),
            Err(Error::DuplicateVertex { .. })
        ));
        assert!(matches!(
            WeightedHypergraph::graph(2, &[(1, 2), (2, 1)]),
            Err(Error::RepeatedHyperedge { index: 1 })
        ));
        assert!(matches!(
            WeightedHypergraph::new(2, vec![vec![1, 2]], vec![]),
            Err(Error::WeightCount { .. })
        ));
        assert!(matches!(
            WeightedHypergraph::with_cap(3, vec![vec![1, 2], vec![2, 3]], vec![1.0, 1.0], 1),
            Err(Error::TooManyHyperedges { edges: 2, cap: 1 })
        ));
        assert_eq!(default_edge_cap(3), 270);
    }

    #[test]
    fn nullifier_expansion() {
        let g = WeightedHypergraph::new(2, vec![vec![1, 2]], vec![1.0]).unwrap();
        let nf = build_nullifiers(&g);
        assert_eq!(nf[0].terms, vec![NullifierTerm { weight: 1.0, factors: vec![2] }]);

        let h = WeightedHypergraph::new(3, vec![vec![1, 2, 3]], vec![0.5]).unwrap();
        let nf = build_nullifiers(&h);
        assert_eq!(nf[0].terms, vec![NullifierTerm { weight: 0.5, factors: vec![2, 3] }]);
        assert_eq!(nf[0].polynomial(|k| [0.0, 2.0, 3.0][k]), 3.0);

        let w = WeightedHypergraph::new(3, vec![vec![1, 2], vec![1, 3]], vec![2.0, -1.0]).unwrap();
        let nf = build_nullifiers(&w);
        // p1 - 2 x2 + x3
        assert_eq!(nf[0].terms.len(), 2);
        assert_eq!(nf[0].polynomial(|k| [0.0, 1.0, 5.0][k]), 2.0 - 5.0);
        assert_eq!(nf[1].terms, vec![NullifierTerm { weight: 2.0, factors: vec![1] }]);
        assert_eq!(nf[0].x_vertices(), vec![2, 3]);
    }

    #[test]
    fn cluster_and_presets() {
        let c = WeightedHypergraph::cluster2d(2, 3).unwrap();
        assert_eq!(c.n(), 6);
        assert_eq!(c.edges().len(), 7);
        assert_eq!(c.neighbors(2), vec![1, 3, 5]);
        assert_eq!(WeightedHypergraph::complete(4).unwrap().edges().len(), 6);
        assert_eq!(WeightedHypergraph::cycle(5).unwrap().neighbors(1), vec![2, 5]);
        assert!(WeightedHypergraph::cycle(2).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = WeightedHypergraph> {
        (1usize..8).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (1..=n)
                .flat_map(|a| (a + 1..=n).map(move |b| (a, b)))
                .collect();
            let len = pairs.len();
            proptest::collection::vec(any::<bool>(), len).prop_map(move |mask| {
                let chosen: Vec<_> =
                    pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
                WeightedHypergraph::graph(n, &chosen).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn neighborhoods_reconstruct_edges(g in arb_graph(), d in 2u32..7) {
            let specs = build_stabilizers(&g, d).unwrap();
            prop_assert_eq!(specs.len(), g.n());
            let expected: BTreeSet<(usize, usize)> =
                g.edges().iter().map(|e| (e[0], e[1])).collect();
            prop_assert_eq!(edges_from_stabilizers(&specs), expected);
            for s in &specs {
                prop_assert!(!s.neighbors.contains(&s.vertex));
            }
        }

        #[test]
        fn unit_weight_nullifiers_are_graph_nullifiers(g in arb_graph()) {
            let nf = build_nullifiers(&g);
            for spec in &nf {
                let mut xs = spec.x_vertices();
                xs.sort_unstable();
                prop_assert_eq!(xs, g.neighbors(spec.vertex));
                prop_assert!(spec.terms.iter().all(|t| t.weight == 1.0 && t.factors.len() == 1));
            }
        }
    }
}
