//! Prior hierarchy, hyperparameters, data container, and the full model
//! state carried by one MCMC chain.
//!
//! The coefficient prior given a partition with projection Φ is
//! N(0, σ²τ²ΦᵀΛΦ) with Λ = diag(λ_k²); the reduced coefficients β̃ = Φβ are
//! the working parameterization and β = Φᵀβ̃ is recovered on demand. The
//! partition prior is geometric in the cluster count and uniform over
//! cut-edge subsets of the spanning forest.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{sample_forest_prior, Graph};
use crate::linalg::{cholesky, CholState, DenseMat, TriangularMode};
use crate::partition::{induce_partition, Partition, SpanningForest};
use crate::scalar::{lit, Scalar};

/// Hyperparameters of the model and sampler.
#[derive(Clone, Debug)]
pub struct Hyperparams<T> {
    /// Scale of the half-Cauchy prior on the global shrinkage τ.
    pub tau0: T,
    /// Geometric decay of the cluster-count prior, Pr(K = k) ∝ (1-c)^k.
    pub c: T,
    /// Selection probabilities of the (split, merge, change, hyper) moves.
    pub move_probs: [T; 4],
    /// Random-walk scale for log τ (adapted during burn-in).
    pub mh_step_tau: T,
    /// Inverse-gamma shape of the σ² prior; 0 together with a zero rate gives
    /// the flat 1/σ² prior.
    pub sigma2_shape: T,
    /// Inverse-gamma rate of the σ² prior.
    pub sigma2_rate: T,
}

impl<T: Scalar> Default for Hyperparams<T> {
    fn default() -> Self {
        Self {
            tau0: T::one(),
            c: lit(0.5),
            move_probs: [lit(0.3), lit(0.3), lit(0.35), lit(0.05)],
            mh_step_tau: lit(0.5),
            sigma2_shape: T::zero(),
            sigma2_rate: T::zero(),
        }
    }
}

impl<T: Scalar> Hyperparams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.tau0 <= T::zero() {
            return Err(Error::InvalidParameter("tau0 must be positive".into()));
        }
        if self.c < T::zero() || self.c >= T::one() {
            return Err(Error::InvalidParameter("c must lie in [0, 1)".into()));
        }
        if self.move_probs.iter().any(|&p| p < T::zero()) {
            return Err(Error::InvalidParameter(
                "move probabilities must be nonnegative".into(),
            ));
        }
        let total: T = self.move_probs.iter().copied().sum();
        if (total - T::one()).abs() > lit(1e-12) {
            return Err(Error::InvalidParameter(format!(
                "move probabilities sum to {total}, expected 1"
            )));
        }
        if self.mh_step_tau <= T::zero() {
            return Err(Error::InvalidParameter(
                "mh_step_tau must be positive".into(),
            ));
        }
        if self.sigma2_shape < T::zero() || self.sigma2_rate < T::zero() {
            return Err(Error::InvalidParameter(
                "sigma2 prior parameters must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Log prior mass of K = k clusters: k·log(1-c) minus the normalizer over
/// the admissible range {n_c, ..., p}.
pub fn log_prior_k<T: Scalar>(k: usize, g: &Graph, h: &Hyperparams<T>) -> Result<T> {
    if k < g.n_c() || k > g.p() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} outside [{}, {}]",
            g.n_c(),
            g.p()
        )));
    }
    let c = h.c.to_f64().unwrap();
    let n_c = g.n_c() as f64;
    let terms = (g.p() - g.n_c() + 1) as f64;
    let log_z = if c == 0.0 {
        terms.ln()
    } else {
        let log_ratio = (-c).ln_1p(); // log(1-c)
        n_c * log_ratio + (-((terms * log_ratio).exp_m1())).ln() - c.ln()
    };
    Ok(lit::<T>(k as f64 * (-c).ln_1p() - log_z))
}

/// log C(n, k) via a factorial-free product; exact enough for n in the
/// thousands.
pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 0.0f64;
    for i in 1..=k {
        acc += ((n - k + i) as f64).ln() - (i as f64).ln();
    }
    acc
}

/// Log prior of a partition given a compatible forest: uniform over the
/// C(p - n_c, K - n_c) cut-edge subsets of that size.
pub fn log_prior_partition_given_forest<T: Scalar>(pi: &Partition, g: &Graph) -> T {
    lit(-ln_choose(g.p() - g.n_c(), pi.k() - g.n_c()))
}

/// Log prior density of the local scales: independent half-Cauchy C⁺(0,1),
/// Σ_k [log(2/π) - log(1 + λ_k²)].
pub fn log_prior_local_scales<T: Scalar>(lambda: &[T]) -> Result<T> {
    let log_two_over_pi = lit::<T>((2.0 / std::f64::consts::PI).ln());
    let mut acc = T::zero();
    for &l in lambda {
        if l <= T::zero() {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        acc += log_two_over_pi - (T::one() + l * l).ln();
    }
    Ok(acc)
}

/// Design matrix: dense column-major storage, or the implicit identity used
/// by the normal-means mode.
#[derive(Clone, Debug)]
pub enum DesignMatrix<T> {
    Dense { n: usize, p: usize, cols: Vec<T> },
    Identity { p: usize },
}

impl<T: Scalar> DesignMatrix<T> {
    /// Build from row-major data (as read from CSV).
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("design matrix has no rows".into()));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::DimensionMismatch(
                "design matrix has no columns".into(),
            ));
        }
        let mut cols = vec![T::zero(); n * p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {p}",
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                cols[j * n + i] = x;
            }
        }
        Ok(Self::Dense { n, p, cols })
    }

    pub fn identity(p: usize) -> Self {
        Self::Identity { p }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            Self::Dense { n, .. } => *n,
            Self::Identity { p } => *p,
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Self::Dense { p, .. } => *p,
            Self::Identity { p } => *p,
        }
    }

    /// out += column j.
    pub fn add_col_into(&self, j: usize, out: &mut [T]) {
        match self {
            Self::Dense { n, cols, .. } => {
                let col = &cols[j * n..(j + 1) * n];
                for (o, &x) in out.iter_mut().zip(col) {
                    *o += x;
                }
            }
            Self::Identity { .. } => out[j] += T::one(),
        }
    }

    /// ℓ2 norm of column j.
    pub fn col_norm(&self, j: usize) -> T {
        match self {
            Self::Dense { n, cols, .. } => cols[j * n..(j + 1) * n]
                .iter()
                .map(|&x| x * x)
                .sum::<T>()
                .sqrt(),
            Self::Identity { .. } => T::one(),
        }
    }

    fn scale_col(&mut self, j: usize, factor: T) {
        if let Self::Dense { n, cols, .. } = self {
            for x in &mut cols[j * *n..(j + 1) * *n] {
                *x *= factor;
            }
        }
    }

    /// X v (length n).
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n_cols());
        match self {
            Self::Dense { n, p, cols } => {
                let mut out = vec![T::zero(); *n];
                for j in 0..*p {
                    let vj = v[j];
                    if vj == T::zero() {
                        continue;
                    }
                    for (o, &x) in out.iter_mut().zip(&cols[j * n..(j + 1) * n]) {
                        *o += x * vj;
                    }
                }
                out
            }
            Self::Identity { .. } => v.to_vec(),
        }
    }
}

/// Response vector, column-standardized design, and the recorded original
/// column norms.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub x: Arc<DesignMatrix<T>>,
    pub y: Vec<T>,
    pub column_norms: Arc<Vec<T>>,
    pub yty: T,
}

impl<T: Scalar> Dataset<T> {
    /// Standardize every column of `x` to unit ℓ2 norm and pair with `y`.
    /// Columns with zero norm are rejected.
    pub fn new(mut x: DesignMatrix<T>, y: Vec<T>) -> Result<Self> {
        if y.len() != x.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "y has length {}, design has {} rows",
                y.len(),
                x.n_rows()
            )));
        }
        if y.is_empty() {
            return Err(Error::DimensionMismatch("empty response".into()));
        }
        let p = x.n_cols();
        let mut norms = Vec::with_capacity(p);
        for j in 0..p {
            let norm = x.col_norm(j);
            if norm <= T::zero() || !norm.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "column {j} has zero or non-finite norm"
                )));
            }
            x.scale_col(j, T::one() / norm);
            norms.push(norm);
        }
        let yty = y.iter().map(|&v| v * v).sum();
        Ok(Self {
            x: Arc::new(x),
            y,
            column_norms: Arc::new(norms),
            yty,
        })
    }

    /// Normal-means mode: the design is the p×p identity, so node signals
    /// are modeled directly.
    pub fn normal_means(y: Vec<T>) -> Result<Self> {
        let p = y.len();
        Self::new(DesignMatrix::identity(p), y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.n_cols()
    }

    /// Replace the response in place (used by self-consistency harnesses
    /// that resimulate y). Caches depending on y must be refreshed by the
    /// owner.
    pub fn replace_response(&mut self, y: Vec<T>) {
        assert_eq!(y.len(), self.n());
        self.yty = y.iter().map(|&v| v * v).sum();
        self.y = y;
    }
}

/// Full parameter state of one chain plus the incremental caches: cluster
/// membership by column slot, per-cluster design column sums, the Gram
/// matrix X̃ᵀX̃, and the Cholesky factor of A = τ⁻²Λ⁻¹ + X̃ᵀX̃.
///
/// Slot order is arbitrary (append/remove order); the canonical partition is
/// derived on demand. All cached quantities are maintained in O(K²) or
/// O(nK) per move.
#[derive(Clone, Debug)]
pub struct ModelState<T> {
    pub(crate) forest: SpanningForest,
    pub(crate) forest_adj: Vec<Vec<(u32, u32)>>, // vertex -> (neighbor, forest idx)
    pub(crate) cut_edges: Vec<u32>,              // forest indices currently cut
    pub(crate) uncut_edges: Vec<u32>,            // forest indices currently uncut
    pub(crate) edge_pos: Vec<u32>,               // forest idx -> position in its list
    pub(crate) vertex_slot: Vec<u32>,
    pub(crate) members: Vec<Vec<u32>>,
    pub(crate) col_sum: Vec<Vec<T>>, // slot -> Σ_{j∈C} X[:,j]
    pub(crate) xty: Vec<T>,          // slot -> x̃ᵀy
    pub(crate) gram: DenseMat<T>,    // X̃ᵀX̃ in slot order
    pub(crate) lambda: Vec<T>,
    pub(crate) beta_tilde: Vec<T>,
    pub(crate) chol: CholState<T>,
    pub(crate) tau: T,
    pub(crate) sigma2: T,
    pub(crate) quad: T,   // yᵀΣ⁻¹y
    pub(crate) loglik: T, // cached collapsed log-likelihood
}

impl<T: Scalar> ModelState<T> {
    /// Initial state: forest from the prior, fully merged partition
    /// (K = n_c), unit local scales, τ = τ0, σ² = sample variance of y,
    /// β̃ = 0.
    pub fn init<R: Rng + ?Sized>(
        g: &Graph,
        data: &Dataset<T>,
        h: &Hyperparams<T>,
        rng: &mut R,
    ) -> Result<Self> {
        let forest = sample_forest_prior(g, rng);
        let n = data.n();
        let nf = T::from_usize(n).unwrap();
        let mean = data.y.iter().copied().sum::<T>() / nf;
        let var = data
            .y
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<T>()
            / nf;
        let sigma2 = if var > T::zero() { var } else { T::one() };
        let mut state = Self {
            forest,
            forest_adj: Vec::new(),
            cut_edges: Vec::new(),
            uncut_edges: Vec::new(),
            edge_pos: Vec::new(),
            vertex_slot: Vec::new(),
            members: Vec::new(),
            col_sum: Vec::new(),
            xty: Vec::new(),
            gram: DenseMat::zeros(0, 0),
            lambda: Vec::new(),
            beta_tilde: Vec::new(),
            chol: cholesky(&DenseMat::identity(0))?,
            tau: h.tau0,
            sigma2,
            quad: T::zero(),
            loglik: T::zero(),
        };
        state.rebuild_from_forest(g, data)?;
        Ok(state)
    }

    /// Rebuild every derived structure from (forest, cut flags, τ). Used at
    /// initialization, after hyper moves, and by the validation oracle.
    pub(crate) fn rebuild_from_forest(&mut self, g: &Graph, data: &Dataset<T>) -> Result<()> {
        let p = g.p();
        self.forest_adj = vec![Vec::new(); p];
        for (idx, &e) in self.forest.edge_ids().iter().enumerate() {
            let (u, v) = g.edge(e as usize);
            self.forest_adj[u].push((v as u32, idx as u32));
            self.forest_adj[v].push((u as u32, idx as u32));
        }
        self.cut_edges.clear();
        self.uncut_edges.clear();
        self.edge_pos = vec![0; self.forest.len()];
        for i in 0..self.forest.len() {
            if self.forest.is_cut(i) {
                self.edge_pos[i] = self.cut_edges.len() as u32;
                self.cut_edges.push(i as u32);
            } else {
                self.edge_pos[i] = self.uncut_edges.len() as u32;
                self.uncut_edges.push(i as u32);
            }
        }
        let pi = induce_partition(&self.forest, g);
        let k = pi.k();
        let old_beta = if self.members.is_empty() {
            None
        } else {
            Some(self.beta())
        };
        self.members = pi.clusters();
        self.vertex_slot = pi.labels().to_vec();

        let n = data.n();
        self.col_sum = self
            .members
            .iter()
            .map(|cluster| {
                let mut s = vec![T::zero(); n];
                for &v in cluster {
                    data.x.add_col_into(v as usize, &mut s);
                }
                s
            })
            .collect();
        self.xty = (0..k)
            .map(|s| dot(&self.col_sum[s], &data.y) / self.cluster_scale(s))
            .collect();
        self.gram = DenseMat::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let g_ab = dot(&self.col_sum[a], &self.col_sum[b])
                    / (self.cluster_scale(a) * self.cluster_scale(b));
                self.gram[(a, b)] = g_ab;
                self.gram[(b, a)] = g_ab;
            }
        }
        // Preserve β across the rebuild when sizes allow; otherwise restart
        // the reduced coefficients at the projection of the old β (or zero).
        self.beta_tilde = match old_beta {
            Some(beta) => (0..k)
                .map(|s| {
                    self.members[s]
                        .iter()
                        .map(|&v| beta[v as usize])
                        .sum::<T>()
                        / self.cluster_scale(s)
                })
                .collect(),
            None => vec![T::zero(); k],
        };
        if self.lambda.len() != k {
            self.lambda = vec![T::one(); k];
        }
        self.refresh_chol(data)?;
        Ok(())
    }

    /// √|C_slot|.
    #[inline]
    pub(crate) fn cluster_scale(&self, slot: usize) -> T {
        T::from_usize(self.members[slot].len()).unwrap().sqrt()
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn forest(&self) -> &SpanningForest {
        &self.forest
    }

    /// Collapsed log-likelihood of the current state (cached).
    pub fn loglik(&self) -> T {
        self.loglik
    }

    /// Canonical partition (clusters ordered by smallest member).
    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.vertex_slot)
    }

    /// Full coefficient vector β = Φᵀβ̃.
    pub fn beta(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.vertex_slot.len()];
        for (slot, cluster) in self.members.iter().enumerate() {
            let value = self.beta_tilde[slot] / self.cluster_scale(slot);
            for &v in cluster {
                out[v as usize] = value;
            }
        }
        out
    }

    pub(crate) fn sum_log_lambda_sq(&self) -> T {
        self.lambda
            .iter()
            .map(|&l| (l * l).ln())
            .fold(T::zero(), |a, b| a + b)
    }

    /// Rebuild A's Cholesky factor and the dependent caches from scratch.
    pub(crate) fn refresh_chol(&mut self, data: &Dataset<T>) -> Result<()> {
        let k = self.k();
        let mut a = self.gram.clone();
        let inv_tau_sq = T::one() / (self.tau * self.tau);
        for i in 0..k {
            a[(i, i)] += inv_tau_sq / (self.lambda[i] * self.lambda[i]);
        }
        self.chol = cholesky(&a)?;
        self.refresh_quad_loglik(data);
        Ok(())
    }

    /// Recompute quad = yᵀΣ⁻¹y and the collapsed log-likelihood from the
    /// current factor in O(K²).
    pub(crate) fn refresh_quad_loglik(&mut self, data: &Dataset<T>) {
        let z = self.chol.solve(&self.xty, TriangularMode::Lower);
        self.quad = data.yty - z.iter().map(|&v| v * v).sum::<T>();
        self.loglik = crate::linalg::collapsed_from_parts(
            self.chol.logdet(),
            self.quad,
            self.k(),
            self.sum_log_lambda_sq(),
            self.tau,
            data.n(),
            T::zero(),
            T::zero(),
        );
    }

    /// Exhaustive consistency check of every cached structure against a
    /// from-scratch recomputation; 1e-8 relative tolerance on numerics.
    pub fn validate(&self, g: &Graph, data: &Dataset<T>) -> Result<()> {
        let tol = lit::<T>(1e-8);
        let pi = induce_partition(&self.forest, g);
        if pi.labels() != Partition::from_labels(&self.vertex_slot).labels() {
            return Err(Error::InvalidParameter(
                "slot labels disagree with forest-induced partition".into(),
            ));
        }
        if !pi.is_contiguous(g) {
            return Err(Error::InvalidParameter("partition not contiguous".into()));
        }
        if pi.k() != g.n_c() + self.forest.cut_count() {
            return Err(Error::InvalidParameter("cut count inconsistent with K".into()));
        }
        let k = self.k();
        if self.lambda.len() != k || self.beta_tilde.len() != k || self.xty.len() != k {
            return Err(Error::DimensionMismatch("state arrays disagree on K".into()));
        }
        if self.lambda.iter().any(|&l| l <= T::zero()) || self.tau <= T::zero() {
            return Err(Error::InvalidParameter("nonpositive scale".into()));
        }
        // Projection rows orthonormal: Σ_j Φ_kj² = 1 per cluster by
        // construction; verify numerically.
        for slot in 0..k {
            let s = self.cluster_scale(slot);
            let norm: T =
                T::from_usize(self.members[slot].len()).unwrap() * (T::one() / (s * s));
            if (norm - T::one()).abs() > lit(1e-12) {
                return Err(Error::InvalidParameter("projection row not unit norm".into()));
            }
        }
        // β round-trips through the projection.
        let beta = self.beta();
        for (slot, cluster) in self.members.iter().enumerate() {
            let back: T = cluster.iter().map(|&v| beta[v as usize]).sum::<T>()
                / self.cluster_scale(slot);
            if (back - self.beta_tilde[slot]).abs()
                > tol * self.beta_tilde[slot].abs().max(T::one())
            {
                return Err(Error::InvalidParameter("beta round-trip failed".into()));
            }
        }
        // Column sums, xty, gram from scratch.
        let n = data.n();
        for (slot, cluster) in self.members.iter().enumerate() {
            let mut s = vec![T::zero(); n];
            for &v in cluster {
                data.x.add_col_into(v as usize, &mut s);
            }
            let scale_denominator = self.cluster_scale(slot);
            let want_xty = dot(&s, &data.y) / scale_denominator;
            if (want_xty - self.xty[slot]).abs() > tol * want_xty.abs().max(T::one()) {
                return Err(Error::InvalidParameter("xty cache drifted".into()));
            }
            for (o, &x) in self.col_sum[slot].iter().zip(&s) {
                if (*o - x).abs() > tol * x.abs().max(T::one()) {
                    return Err(Error::InvalidParameter("column-sum cache drifted".into()));
                }
            }
        }
        // Cholesky factor vs from-scratch factorization of A.
        let mut a = DenseMat::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let g_ij = dot(&self.col_sum[i], &self.col_sum[j])
                    / (self.cluster_scale(i) * self.cluster_scale(j));
                a[(i, j)] = g_ij;
                a[(j, i)] = g_ij;
            }
            a[(i, i)] += T::one() / (self.tau * self.tau * self.lambda[i] * self.lambda[i]);
        }
        let fresh = cholesky(&a)?;
        let cached = self.chol.factor();
        let fresh_f = fresh.factor();
        let mut scale = T::min_positive_value();
        for i in 0..k {
            for j in 0..k {
                scale = scale.max(fresh_f[(i, j)].abs());
            }
        }
        for i in 0..k {
            for j in 0..k {
                if (cached[(i, j)] - fresh_f[(i, j)]).abs() > tol * scale {
                    return Err(Error::InvalidParameter("cholesky cache drifted".into()));
                }
            }
        }
        let two = lit::<T>(2.0);
        let diag_logdet = two
            * (0..k)
                .map(|i| cached[(i, i)].ln())
                .fold(T::zero(), |a, b| a + b);
        if (diag_logdet - self.chol.logdet()).abs() > lit(1e-12) * diag_logdet.abs().max(T::one())
        {
            return Err(Error::InvalidParameter("logdet cache drifted".into()));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
