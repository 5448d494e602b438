//! Contiguous graph partitions induced by cutting spanning-forest edges, the
//! orthonormal cluster projection, and the split/merge/forest-resample moves.
//!
//! A spanning forest together with a subset of "cut" edges induces a
//! partition: two vertices share a cluster exactly when they stay connected
//! in the forest after the cut edges are removed. Cutting k edges of a forest
//! over a graph with `n_c` components yields `n_c + k` clusters, and every
//! contiguous partition arises this way from some forest.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{minimum_spanning_forest, EdgeWeights, Graph, UnionFind};
use crate::scalar::Scalar;

/// A spanning forest of a graph plus per-edge cut flags.
///
/// Edges are stored as indices into the owning graph's edge list, sorted
/// ascending, so forests compare by value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningForest {
    edge_ids: Vec<u32>,
    cut: Vec<bool>,
}

impl SpanningForest {
    pub(crate) fn new(edge_ids: Vec<u32>) -> Self {
        let cut = vec![false; edge_ids.len()];
        Self { edge_ids, cut }
    }

    pub(crate) fn with_cuts(edge_ids: Vec<u32>, cut: Vec<bool>) -> Self {
        assert_eq!(edge_ids.len(), cut.len());
        Self { edge_ids, cut }
    }

    /// Graph edge indices of the forest edges, ascending.
    pub fn edge_ids(&self) -> &[u32] {
        &self.edge_ids
    }

    /// Number of forest edges (p - n_c for the owning graph).
    pub fn len(&self) -> usize {
        self.edge_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_ids.is_empty()
    }

    pub fn is_cut(&self, forest_idx: usize) -> bool {
        self.cut[forest_idx]
    }

    pub fn cut_flags(&self) -> &[bool] {
        &self.cut
    }

    pub fn cut_count(&self) -> usize {
        self.cut.iter().filter(|&&c| c).count()
    }

    pub(crate) fn set_cut(&mut self, forest_idx: usize, cut: bool) {
        self.cut[forest_idx] = cut;
    }

    /// Forest edges as vertex pairs of `g`.
    pub fn edge_pairs<'g>(&'g self, g: &'g Graph) -> impl Iterator<Item = (usize, usize)> + 'g {
        self.edge_ids.iter().map(move |&e| g.edge(e as usize))
    }
}

/// Mark one uncut forest edge as cut, growing the induced partition by one
/// cluster. Both resulting clusters are contiguous because each is a subtree.
pub fn split(f: &SpanningForest, edge_idx: usize) -> Result<SpanningForest> {
    if f.cut[edge_idx] {
        return Err(Error::EdgeAlreadyCut(edge_idx));
    }
    let mut out = f.clone();
    out.cut[edge_idx] = true;
    Ok(out)
}

/// Clear the cut flag on one cut edge, merging the two clusters it separates.
pub fn merge(f: &SpanningForest, cut_idx: usize) -> Result<SpanningForest> {
    if !f.cut[cut_idx] {
        return Err(Error::EdgeNotCut(cut_idx));
    }
    let mut out = f.clone();
    out.cut[cut_idx] = false;
    Ok(out)
}

/// A contiguous partition: per-vertex cluster labels in `0..k`, canonically
/// relabeled so clusters are ordered by their smallest member vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<u32>,
    k: usize,
    cluster_sizes: Vec<usize>,
}

impl Partition {
    /// Build from raw labels, canonicalizing cluster ids by first appearance.
    pub fn from_labels(raw: &[u32]) -> Self {
        let mut remap: Vec<u32> = vec![u32::MAX; raw.len()];
        let mut labels = vec![0u32; raw.len()];
        let mut sizes: Vec<usize> = Vec::new();
        for (v, &r) in raw.iter().enumerate() {
            let r = r as usize;
            if remap[r] == u32::MAX {
                remap[r] = sizes.len() as u32;
                sizes.push(0);
            }
            labels[v] = remap[r];
            sizes[remap[r] as usize] += 1;
        }
        Self {
            k: sizes.len(),
            labels,
            cluster_sizes: sizes,
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// Member vertices of every cluster, in label order.
    pub fn clusters(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.k];
        for (v, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(v as u32);
        }
        out
    }

    /// True when every cluster induces a connected subgraph of `g`.
    pub fn is_contiguous(&self, g: &Graph) -> bool {
        let mut seen = vec![false; self.p()];
        for members in self.clusters() {
            let start = members[0] as usize;
            let mut stack = vec![start];
            let mut reached = 0usize;
            let mut in_cluster = vec![false; self.p()];
            for &v in &members {
                in_cluster[v as usize] = true;
            }
            let mut visited = vec![false; self.p()];
            visited[start] = true;
            while let Some(u) = stack.pop() {
                reached += 1;
                seen[u] = true;
                for &(v, _) in g.neighbors(u) {
                    let v = v as usize;
                    if in_cluster[v] && !visited[v] {
                        visited[v] = true;
                        stack.push(v);
                    }
                }
            }
            if reached != members.len() {
                return false;
            }
        }
        seen.iter().all(|&s| s)
    }
}

/// Partition induced by `f` on `g`: connected pieces of the forest after
/// removing the cut edges. K = n_c + |cut set|.
pub fn induce_partition(f: &SpanningForest, g: &Graph) -> Partition {
    let mut uf = UnionFind::new(g.p());
    for (i, &e) in f.edge_ids.iter().enumerate() {
        if !f.cut[i] {
            let (u, v) = g.edge(e as usize);
            uf.union(u, v);
        }
    }
    let mut raw = vec![0u32; g.p()];
    for v in 0..g.p() {
        raw[v] = uf.find(v) as u32;
    }
    Partition::from_labels(&raw)
}

/// The K×p cluster projection with entries 1/√|C_k|, stored sparsely as
/// per-cluster member lists plus scale factors. Rows are orthonormal.
#[derive(Clone, Debug)]
pub struct Projection<T> {
    clusters: Vec<Vec<u32>>,
    scales: Vec<T>,
    p: usize,
}

impl<T: Scalar> Projection<T> {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn clusters(&self) -> &[Vec<u32>] {
        &self.clusters
    }

    /// Scale factor 1/√|C_k| of row k.
    pub fn scale(&self, k: usize) -> T {
        self.scales[k]
    }

    /// Apply the projection: β ↦ Φβ (length K).
    pub fn project(&self, beta: &[T]) -> Vec<T> {
        assert_eq!(beta.len(), self.p);
        self.clusters
            .iter()
            .zip(&self.scales)
            .map(|(members, &s)| {
                let sum: T = members.iter().map(|&j| beta[j as usize]).sum();
                sum * s
            })
            .collect()
    }

    /// Apply the transpose: β̃ ↦ Φᵀβ̃ (length p).
    pub fn lift(&self, beta_tilde: &[T]) -> Vec<T> {
        assert_eq!(beta_tilde.len(), self.k());
        let mut out = vec![T::zero(); self.p];
        for (members, (&s, &b)) in self
            .clusters
            .iter()
            .zip(self.scales.iter().zip(beta_tilde.iter()))
        {
            for &j in members {
                out[j as usize] = s * b;
            }
        }
        out
    }

    /// Dense K×p materialization, row-major. Intended for tests and small p.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.k() * self.p];
        for (k, (members, &s)) in self.clusters.iter().zip(&self.scales).enumerate() {
            for &j in members {
                out[k * self.p + j as usize] = s;
            }
        }
        out
    }
}

/// Build the projection matrix of a partition.
pub fn projection_matrix<T: Scalar>(pi: &Partition) -> Projection<T> {
    let clusters = pi.clusters();
    let scales = clusters
        .iter()
        .map(|c| T::one() / T::from_usize(c.len()).unwrap().sqrt())
        .collect();
    Projection {
        clusters,
        scales,
        p: pi.p(),
    }
}

/// Resample a spanning forest compatible with `pi`: draw fresh iid
/// Uniform(0,1) weights, add +1.0 to every between-cluster edge, and take the
/// minimum spanning forest. Within-cluster edges always win, so each cluster
/// gets a fresh random spanning subtree and the between-cluster forest edges
/// become the cut set. The induced partition equals `pi` exactly.
pub fn resample_forest_compatible<R: Rng + ?Sized>(
    g: &Graph,
    pi: &Partition,
    rng: &mut R,
) -> SpanningForest {
    let labels = pi.labels();
    let w: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(u, v)| {
            let base: f64 = f64::uniform_open01(rng);
            if labels[u as usize] == labels[v as usize] {
                base
            } else {
                base + 1.0
            }
        })
        .collect();
    let forest = minimum_spanning_forest(g, &EdgeWeights { w }).expect("aligned weights");
    let cut = forest
        .edge_ids
        .iter()
        .map(|&e| {
            let (u, v) = g.edge(e as usize);
            labels[u] != labels[v]
        })
        .collect();
    SpanningForest::with_cuts(forest.edge_ids, cut)
}
