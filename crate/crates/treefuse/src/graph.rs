//! Undirected graphs, connectivity, and minimum-spanning-forest machinery.
//!
//! A [`Graph`] is immutable after construction. Spanning forests are drawn by
//! assigning iid Uniform(0,1) weights to the edges and taking the minimum
//! spanning forest (Kruskal with union-find), which puts positive probability
//! on every spanning forest of the graph.

use rand::Rng;

use crate::error::{Error, Result};
use crate::partition::SpanningForest;
use crate::scalar::Scalar;

/// Disjoint-set forest with path compression and union by rank.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        let mut cur = x;
        while cur != root {
            let next = self.parent[cur] as usize;
            self.parent[cur] = root as u32;
            cur = next;
        }
        root
    }

    /// Merge the sets containing `a` and `b`; returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb as u32,
            std::cmp::Ordering::Greater => self.parent[rb] = ra as u32,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra as u32;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Immutable undirected graph with precomputed connected components.
#[derive(Clone, Debug)]
pub struct Graph {
    p: usize,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<(u32, u32)>>,
    component_label: Vec<u32>,
    n_c: usize,
}

impl Graph {
    /// Build a graph from an edge list. Self-loops are rejected, duplicate
    /// edges (in either orientation) are collapsed.
    pub fn new(edge_list: &[(usize, usize)], p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidVertexCount(p));
        }
        let mut normalized: Vec<(u32, u32)> = Vec::with_capacity(edge_list.len());
        for &(u, v) in edge_list {
            if u >= p {
                return Err(Error::VertexOutOfRange { index: u, p });
            }
            if v >= p {
                return Err(Error::VertexOutOfRange { index: v, p });
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            normalized.push((a as u32, b as u32));
        }
        normalized.sort_unstable();
        normalized.dedup();

        let mut adjacency = vec![Vec::new(); p];
        for (idx, &(u, v)) in normalized.iter().enumerate() {
            adjacency[u as usize].push((v, idx as u32));
            adjacency[v as usize].push((u, idx as u32));
        }

        let mut uf = UnionFind::new(p);
        for &(u, v) in &normalized {
            uf.union(u as usize, v as usize);
        }
        // Labels in first-seen order, which is also order by smallest member.
        let mut component_label = vec![u32::MAX; p];
        let mut root_label = vec![u32::MAX; p];
        let mut n_c = 0u32;
        for v in 0..p {
            let root = uf.find(v);
            if root_label[root] == u32::MAX {
                root_label[root] = n_c;
                n_c += 1;
            }
            component_label[v] = root_label[root];
        }

        Ok(Self {
            p,
            edges: normalized,
            adjacency,
            component_label,
            n_c: n_c as usize,
        })
    }

    /// Number of vertices.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of edges after deduplication.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Number of connected components.
    pub fn n_c(&self) -> usize {
        self.n_c
    }

    /// Edge list, each pair normalized as (min, max).
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> (usize, usize) {
        let (u, v) = self.edges[idx];
        (u as usize, v as usize)
    }

    /// Neighbors of `v` as (neighbor, edge index) pairs.
    pub fn neighbors(&self, v: usize) -> &[(u32, u32)] {
        &self.adjacency[v]
    }

    /// Per-vertex connected-component label.
    pub fn component_label(&self) -> &[u32] {
        &self.component_label
    }

    /// Number of forest edges any spanning forest must have: p - n_c.
    pub fn forest_size(&self) -> usize {
        self.p - self.n_c
    }
}

/// Per-edge weights aligned with `Graph::edges`.
#[derive(Clone, Debug)]
pub struct EdgeWeights<T> {
    pub w: Vec<T>,
}

impl<T: Scalar> EdgeWeights<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.iter().any(|x| *x <= T::zero() || !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "edge weights must be strictly positive and finite".into(),
            ));
        }
        Ok(Self { w })
    }

    /// Draw iid Uniform(0,1) weights for every edge of `g`.
    pub fn sample_uniform<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Self {
        Self {
            w: (0..g.m()).map(|_| T::uniform_open01(rng)).collect(),
        }
    }
}

/// Minimum spanning forest of `g` under `w` (Kruskal, ties broken by edge
/// index so the result is deterministic). The returned forest has exactly
/// p - n_c edges and an empty cut set.
pub fn minimum_spanning_forest<T: Scalar>(g: &Graph, w: &EdgeWeights<T>) -> Result<SpanningForest> {
    if w.w.len() != g.m() {
        return Err(Error::WeightLengthMismatch {
            got: w.w.len(),
            expected: g.m(),
        });
    }
    let mut order: Vec<u32> = (0..g.m() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        w.w[a as usize]
            .partial_cmp(&w.w[b as usize])
            .expect("finite weights")
            .then(a.cmp(&b))
    });

    let mut uf = UnionFind::new(g.p());
    let mut forest_edges = Vec::with_capacity(g.forest_size());
    for &e in &order {
        let (u, v) = g.edges[e as usize];
        if uf.union(u as usize, v as usize) {
            forest_edges.push(e);
            if forest_edges.len() == g.forest_size() {
                break;
            }
        }
    }
    forest_edges.sort_unstable();
    Ok(SpanningForest::new(forest_edges))
}

/// Draw a spanning forest from the random-MSF prior: iid Uniform(0,1) edge
/// weights followed by `minimum_spanning_forest`.
pub fn sample_forest_prior<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> SpanningForest {
    let w: EdgeWeights<f64> = EdgeWeights::sample_uniform(g, rng);
    minimum_spanning_forest(g, &w).expect("weights aligned by construction")
}
