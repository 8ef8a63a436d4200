//! Undirected graphs with a fixed edge orientation and their incidence matrices.
//!
//! Node ids are 1-based at the API boundary ([`Graph::from_edge_list`], error
//! messages) and 0-based everywhere inside the crate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("a network needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("edge list is empty")]
    NoEdges,
    #[error("edge {edge} is a self-loop on node {node}")]
    SelfLoop { edge: usize, node: usize },
    #[error("edge {edge} duplicates edge {first} between nodes {i} and {j}")]
    DuplicateEdge {
        edge: usize,
        first: usize,
        i: usize,
        j: usize,
    },
    #[error("edge {edge} references node {node}, outside 1..={n}")]
    NodeOutOfRange { edge: usize, node: usize, n: usize },
    #[error("graph is disconnected")]
    Disconnected,
}

/// One oriented link; `pos` is the positive end. Both ids are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub pos: usize,
    pub neg: usize,
}

impl Edge {
    pub fn touches(&self, node: usize) -> bool {
        self.pos == node || self.neg == node
    }

    pub fn other(&self, node: usize) -> usize {
        if self.pos == node {
            self.neg
        } else {
            self.pos
        }
    }

    /// Incidence entry of `node` in this edge's column.
    pub fn sign_at(&self, node: usize) -> i8 {
        if node == self.pos {
            1
        } else if node == self.neg {
            -1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph from 1-based `(positive end, negative end)` pairs.
    pub fn from_edge_list(n: usize, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        if pairs.is_empty() {
            return Err(GraphError::NoEdges);
        }
        let mut edges: Vec<Edge> = Vec::with_capacity(pairs.len());
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let edge = k + 1;
            for node in [i, j] {
                if node < 1 || node > n {
                    return Err(GraphError::NodeOutOfRange { edge, node, n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop { edge, node: i });
            }
            let e = Edge { pos: i - 1, neg: j - 1 };
            if let Some(first) = edges
                .iter()
                .position(|f| f.touches(e.pos) && f.touches(e.neg))
            {
                return Err(GraphError::DuplicateEdge {
                    edge,
                    first: first + 1,
                    i,
                    j,
                });
            }
            edges.push(e);
        }
        Ok(Self { n, edges })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge list as 1-based pairs, in canonical order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.pos + 1, e.neg + 1)).collect()
    }

    /// The same topology with edge `k` (0-based) reversed.
    pub fn with_flipped(&self, k: usize) -> Self {
        let mut g = self.clone();
        let e = &mut g.edges[k];
        std::mem::swap(&mut e.pos, &mut e.neg);
        g
    }

    /// Subgraph keeping only the listed 0-based edge indices (in the given order).
    pub fn edge_subgraph(&self, keep: &[usize]) -> Self {
        Self {
            n: self.n,
            edges: keep.iter().map(|&k| self.edges[k]).collect(),
        }
    }

    /// Number of neighbours `r_i` of every node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            deg[e.pos] += 1;
            deg[e.neg] += 1;
        }
        deg
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.pos].push(k);
            adj[e.neg].push(k);
        }
        adj
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &k in &adj[u] {
                    let v = self.edges[k].other(u);
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// 0-based edge indices of a spanning tree, ascending.
    ///
    /// Grows a tree from node 1, each time adding the lowest-indexed edge that
    /// leaves the current tree. The result is fully determined by the edge order.
    pub fn spanning_tree(&self) -> Result<Vec<usize>, GraphError> {
        if !self.is_connected() {
            return Err(GraphError::Disconnected);
        }
        let mut in_tree = vec![false; self.n];
        in_tree[0] = true;
        let mut chosen = Vec::with_capacity(self.n - 1);
        while chosen.len() < self.n - 1 {
            let k = self
                .edges
                .iter()
                .position(|e| in_tree[e.pos] != in_tree[e.neg])
                .ok_or(GraphError::Disconnected)?;
            let e = self.edges[k];
            in_tree[e.pos] = true;
            in_tree[e.neg] = true;
            chosen.push(k);
        }
        chosen.sort_unstable();
        Ok(chosen)
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        IncidenceMatrix::from_graph(self)
    }
}

/// Node-by-edge incidence matrix with entries in {-1, 0, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidenceMatrix {
    n: usize,
    p: usize,
    edges: Vec<Edge>,
    entries: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.node_count();
        let p = g.edge_count();
        let mut entries = vec![0_i8; n * p];
        for (k, e) in g.edges().iter().enumerate() {
            entries[e.pos * p + k] = 1;
            entries[e.neg * p + k] = -1;
        }
        Self {
            n,
            p,
            edges: g.edges().to_vec(),
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> i8 {
        self.entries[i * self.p + k]
    }

    /// Endpoints of column `k`.
    pub fn edge(&self, k: usize) -> Edge {
        self.edges[k]
    }

    pub fn to_rows(&self) -> Vec<Vec<i8>> {
        self.entries.chunks(self.p).map(<[i8]>::to_vec).collect()
    }

    /// Integer column sums (`D^T 1`); all zero for a valid incidence matrix.
    pub fn column_sums(&self) -> Vec<i32> {
        (0..self.p)
            .map(|k| (0..self.n).map(|i| i32::from(self.get(i, k))).sum())
            .collect()
    }

    /// `D^T x` (edge differences).
    pub fn transpose_mul(&self, x: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|e| x[e.pos] - x[e.neg]).collect()
    }

    /// `D b` (node aggregation).
    pub fn mul(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (e, &bk) in self.edges.iter().zip(b) {
            out[e.pos] += bk;
            out[e.neg] -= bk;
        }
        out
    }
}
