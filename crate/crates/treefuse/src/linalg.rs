//! Dense Cholesky factorization with O(K²) incremental updates, and the
//! collapsed marginal likelihood evaluated through the Sherman-Woodbury-
//! Morrison identity and the matrix determinant lemma.
//!
//! The factor is kept upper triangular: RᵀR = τ⁻²Λ⁻¹ + X̃ᵀX̃. Partition moves
//! change one column of X̃ into two (or vice versa); those are realized as a
//! column removal (a rank-1 update of the trailing block) plus column
//! appends (one triangular solve each), so no downdate is needed on that
//! path. Downdates only arise from diagonal shifts with negative delta.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Minimal dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// vᵀ M v for square M.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        self.mul_vec(v).iter().zip(v).map(|(&a, &b)| a * b).sum()
    }

    /// Self-transpose product: MᵀM (cols × cols).
    pub fn gram(&self) -> DenseMat<T> {
        let mut g = DenseMat::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..self.cols {
                let ra = row[a];
                if ra == T::zero() {
                    continue;
                }
                for b in a..self.cols {
                    g[(a, b)] += ra * row[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    /// Mᵀ v (length cols).
    pub fn transpose_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        out
    }

    /// Remove row and column `j` (for symmetric matrices).
    pub fn remove_rowcol(&self, j: usize) -> DenseMat<T> {
        let n = self.rows;
        let mut out = DenseMat::zeros(n - 1, n - 1);
        for i in 0..n - 1 {
            let si = if i < j { i } else { i + 1 };
            for c in 0..n - 1 {
                let sc = if c < j { c } else { c + 1 };
                out[(i, c)] = self[(si, sc)];
            }
        }
        out
    }

    /// Append a symmetric row/column: off-diagonal entries `b`, diagonal `d`.
    pub fn append_rowcol(&self, b: &[T], d: T) -> DenseMat<T> {
        let n = self.rows;
        assert_eq!(b.len(), n);
        let mut out = DenseMat::zeros(n + 1, n + 1);
        for i in 0..n {
            for c in 0..n {
                out[(i, c)] = self[(i, c)];
            }
            out[(i, n)] = b[i];
            out[(n, i)] = b[i];
        }
        out[(n, n)] = d;
        out
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for DenseMat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for DenseMat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Relative pivot threshold: a factorization or update fails when a pivot
/// drops below this fraction of the largest diagonal entry. Failures are
/// reported, never papered over with jitter, so callers can reject the move.
const PIVOT_RTOL: f64 = 1e-12;

/// Which triangular system to solve against the factor R.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriangularMode {
    /// Solve Rᵀx = b (forward substitution).
    Lower,
    /// Solve Rx = b (backward substitution).
    Upper,
}

/// Upper-triangular Cholesky factor with cached log-determinant of RᵀR.
#[derive(Clone, Debug)]
pub struct CholState<T> {
    dim: usize,
    r: Vec<T>, // row-major dim×dim, strictly lower part zero
    logdet: T, // 2 Σ log R_kk
}

impl<T: Scalar> CholState<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// 2·Σ log R_kk = log det(RᵀR).
    pub fn logdet(&self) -> T {
        self.logdet
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.r[i * self.dim + j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.r[i * self.dim + j]
    }

    /// Dense copy of the factor.
    pub fn factor(&self) -> DenseMat<T> {
        DenseMat {
            rows: self.dim,
            cols: self.dim,
            data: self.r.clone(),
        }
    }

    /// Reconstruct RᵀR.
    pub fn reconstruct(&self) -> DenseMat<T> {
        let n = self.dim;
        let mut a = DenseMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = T::zero();
                for k in 0..=i.min(j) {
                    s += self.at(k, i) * self.at(k, j);
                }
                a[(i, j)] = s;
                a[(j, i)] = s;
            }
        }
        a
    }

    fn refresh_logdet(&mut self) {
        let two = lit::<T>(2.0);
        self.logdet = two
            * (0..self.dim)
                .map(|k| self.at(k, k).ln())
                .fold(T::zero(), |a, b| a + b);
    }

    fn max_diag_sq(&self) -> T {
        (0..self.dim)
            .map(|k| self.at(k, k))
            .fold(T::zero(), |m, d| m.max(d * d))
    }

    /// In-place rank-1 update/downdate: RᵀR ← RᵀR + sign·vvᵀ.
    pub fn rank_one_update_inplace(&mut self, v: &[T], sign: i8) -> Result<()> {
        assert_eq!(v.len(), self.dim);
        let s: T = if sign >= 0 { T::one() } else { -T::one() };
        let thresh = lit::<T>(PIVOT_RTOL) * self.max_diag_sq().max(T::min_positive_value());
        let mut v = v.to_vec();
        let start = v.iter().position(|x| *x != T::zero()).unwrap_or(self.dim);
        for j in start..self.dim {
            let rjj = self.at(j, j);
            let vj = v[j];
            if vj == T::zero() {
                continue;
            }
            let arg = rjj * rjj + s * vj * vj;
            if arg <= thresh {
                return Err(Error::NotPositiveDefinite {
                    index: j,
                    pivot: arg.to_f64().unwrap_or(f64::NAN),
                });
            }
            let r = arg.sqrt();
            let c = r / rjj;
            let sf = vj / rjj;
            *self.at_mut(j, j) = r;
            for i in j + 1..self.dim {
                let rji = (self.at(j, i) + s * sf * v[i]) / c;
                *self.at_mut(j, i) = rji;
                v[i] = c * v[i] - sf * rji;
            }
        }
        self.refresh_logdet();
        Ok(())
    }

    /// Rank-1 update/downdate returning a fresh factor.
    pub fn rank_one_update(&self, v: &[T], sign: i8) -> Result<CholState<T>> {
        let mut out = self.clone();
        out.rank_one_update_inplace(v, sign)?;
        Ok(out)
    }

    /// In-place diagonal shift: entry (k,k) of RᵀR changes by `delta`. Only
    /// rows ≥ k of the factor change; realized as a sparse rank-1 op with
    /// v = √|delta|·e_k.
    pub fn diagonal_update_inplace(&mut self, k: usize, delta: T) -> Result<()> {
        if delta == T::zero() {
            return Ok(());
        }
        let mut v = vec![T::zero(); self.dim];
        v[k] = delta.abs().sqrt();
        let sign = if delta > T::zero() { 1 } else { -1 };
        self.rank_one_update_inplace(&v, sign)
    }

    /// Diagonal shift returning a fresh factor.
    pub fn diagonal_update(&self, k: usize, delta: T) -> Result<CholState<T>> {
        let mut out = self.clone();
        out.diagonal_update_inplace(k, delta)?;
        Ok(out)
    }

    /// Solve Rᵀx = b (`Lower`) or Rx = b (`Upper`).
    pub fn solve(&self, b: &[T], mode: TriangularMode) -> Vec<T> {
        assert_eq!(b.len(), self.dim);
        let n = self.dim;
        let mut x = b.to_vec();
        match mode {
            TriangularMode::Lower => {
                for i in 0..n {
                    let mut s = x[i];
                    for k in 0..i {
                        s -= self.at(k, i) * x[k];
                    }
                    x[i] = s / self.at(i, i);
                }
            }
            TriangularMode::Upper => {
                for i in (0..n).rev() {
                    let mut s = x[i];
                    for k in i + 1..n {
                        s -= self.at(i, k) * x[k];
                    }
                    x[i] = s / self.at(i, i);
                }
            }
        }
        x
    }

    /// Solve (RᵀR)x = b via the two triangular solves.
    pub fn solve_full(&self, b: &[T]) -> Vec<T> {
        let w = self.solve(b, TriangularMode::Lower);
        self.solve(&w, TriangularMode::Upper)
    }

    /// Grow the factorized matrix by one symmetric row/column with
    /// off-diagonal block `b` and diagonal entry `d`.
    pub fn append_column(&self, b: &[T], d: T) -> Result<CholState<T>> {
        assert_eq!(b.len(), self.dim);
        let n = self.dim;
        let r_col = self.solve(b, TriangularMode::Lower);
        let rho_sq = d - r_col.iter().map(|&x| x * x).sum::<T>();
        let thresh = lit::<T>(PIVOT_RTOL) * self.max_diag_sq().max(d * lit(PIVOT_RTOL)).max(T::min_positive_value());
        if rho_sq <= thresh {
            return Err(Error::NotPositiveDefinite {
                index: n,
                pivot: rho_sq.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut out = CholState {
            dim: n + 1,
            r: vec![T::zero(); (n + 1) * (n + 1)],
            logdet: T::zero(),
        };
        for i in 0..n {
            for j in i..n {
                *out.at_mut(i, j) = self.at(i, j);
            }
            *out.at_mut(i, n) = r_col[i];
        }
        *out.at_mut(n, n) = rho_sq.sqrt();
        out.refresh_logdet();
        Ok(out)
    }

    /// Shrink the factorized matrix by deleting symmetric row/column `j`.
    /// The trailing block absorbs the deleted column's coupling through a
    /// rank-1 update, which is always positive definite.
    pub fn remove_column(&self, j: usize) -> CholState<T> {
        let n = self.dim;
        assert!(j < n);
        let m = n - 1;
        let mut out = CholState {
            dim: m,
            r: vec![T::zero(); m * m],
            logdet: T::zero(),
        };
        for i in 0..m {
            let si = if i < j { i } else { i + 1 };
            for c in i..m {
                let sc = if c < j { c } else { c + 1 };
                *out.at_mut(i, c) = self.at(si, sc);
            }
        }
        if j < m {
            // v = row j of the old factor, columns j+1.., embedded at offset j.
            let mut v = vec![T::zero(); m];
            for c in j + 1..n {
                v[c - 1] = self.at(j, c);
            }
            out.rank_one_update_inplace(&v, 1)
                .expect("rank-1 update with positive sign cannot lose definiteness");
        }
        out.refresh_logdet();
        out
    }
}

/// Factor a symmetric positive-definite matrix: RᵀR = A.
pub fn cholesky<T: Scalar>(a: &DenseMat<T>) -> Result<CholState<T>> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    let max_diag = (0..n).map(|k| a[(k, k)]).fold(T::zero(), T::max);
    let thresh = lit::<T>(PIVOT_RTOL) * max_diag.max(T::min_positive_value());
    let mut c = CholState {
        dim: n,
        r: vec![T::zero(); n * n],
        logdet: T::zero(),
    };
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            let rkj = c.at(k, j);
            d -= rkj * rkj;
        }
        if d <= thresh {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: d.to_f64().unwrap_or(f64::NAN),
            });
        }
        let rjj = d.sqrt();
        *c.at_mut(j, j) = rjj;
        for i in j + 1..n {
            let mut s = a[(j, i)];
            for k in 0..j {
                s -= c.at(k, j) * c.at(k, i);
            }
            *c.at_mut(j, i) = s / rjj;
        }
    }
    c.refresh_logdet();
    Ok(c)
}

/// Triangular solve against a factor, named form.
pub fn triangular_solve<T: Scalar>(c: &CholState<T>, b: &[T], mode: TriangularMode) -> Vec<T> {
    c.solve(b, mode)
}

/// Log of |Σ|^{-1/2} (b0 + yᵀΣ⁻¹y/2)^{-(n/2 + a0)} assembled from cached
/// pieces, where Σ = I_n + τ²X̃ΛX̃ᵀ so that
/// log|Σ| = log|A| + K log τ² + Σ_k log λ_k² with A = τ⁻²Λ⁻¹ + X̃ᵀX̃.
/// The default (a0, b0) = (0, 0) corresponds to the flat 1/σ² prior.
pub fn collapsed_from_parts<T: Scalar>(
    logdet_a: T,
    quad: T,
    k: usize,
    sum_log_lambda_sq: T,
    tau: T,
    n: usize,
    sigma2_shape: T,
    sigma2_rate: T,
) -> T {
    let half = lit::<T>(0.5);
    let log_det_sigma = logdet_a + T::from_usize(k).unwrap() * (tau * tau).ln() + sum_log_lambda_sq;
    let exponent = T::from_usize(n).unwrap() * half + sigma2_shape;
    -half * log_det_sigma - exponent * (sigma2_rate + quad * half).ln()
}

/// Collapsed marginal log-likelihood, up to constants: given the n×K reduced
/// design X̃, global scale τ and per-column scales λ, returns
/// log[|Σ|^{-1/2}(yᵀΣ⁻¹y/2)^{-n/2}] together with the Cholesky factor of
/// A = τ⁻²Λ⁻¹ + X̃ᵀX̃, computed without ever forming the n×n Σ.
pub fn collapsed_loglik<T: Scalar>(
    y: &[T],
    xt: &DenseMat<T>,
    tau: T,
    lambda: &[T],
) -> Result<(T, CholState<T>)> {
    let n = xt.rows();
    let k = xt.cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has length {}, design has {} rows",
            y.len(),
            n
        )));
    }
    if lambda.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "lambda has length {}, design has {} columns",
            lambda.len(),
            k
        )));
    }
    if tau <= T::zero() || lambda.iter().any(|&l| l <= T::zero()) {
        return Err(Error::InvalidParameter(
            "tau and lambda must be strictly positive".into(),
        ));
    }
    let mut a = xt.gram();
    let inv_tau_sq = T::one() / (tau * tau);
    for (i, &l) in lambda.iter().enumerate() {
        a[(i, i)] += inv_tau_sq / (l * l);
    }
    let chol = cholesky(&a)?;
    let xty = xt.transpose_mul_vec(y);
    let z = chol.solve(&xty, TriangularMode::Lower);
    let yty: T = y.iter().map(|&v| v * v).sum();
    let quad = yty - z.iter().map(|&v| v * v).sum::<T>();
    let sum_log_lambda_sq = lambda
        .iter()
        .map(|&l| (l * l).ln())
        .fold(T::zero(), |a, b| a + b);
    let ll = collapsed_from_parts(
        chol.logdet(),
        quad,
        k,
        sum_log_lambda_sq,
        tau,
        n,
        T::zero(),
        T::zero(),
    );
    Ok((ll, chol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DenseMat<f64> {
        let mut b = DenseMat::zeros(n + 2, n);
        for i in 0..n + 2 {
            for j in 0..n {
                b[(i, j)] = rng.random::<f64>() * 2.0 - 1.0;
            }
        }
        let mut a = b.gram();
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    fn max_rel_diff(a: &DenseMat<f64>, b: &DenseMat<f64>) -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                num = num.max((a[(i, j)] - b[(i, j)]).abs());
                den = den.max(a[(i, j)].abs());
            }
        }
        num / den.max(1e-300)
    }

    #[test]
    fn cholesky_identity() {
        let c = cholesky(&DenseMat::<f64>::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(c.factor()[(i, j)], want);
            }
        }
        assert_eq!(c.logdet(), 0.0);
    }

    #[test]
    fn cholesky_two_by_two() {
        let a = DenseMat::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]);
        let c = cholesky(&a).unwrap();
        let r = c.factor();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((r[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((r[(1, 0)]).abs() < 1e-15);
        assert!((r[(1, 1)] - 2.0).abs() < 1e-15);
        // RᵀR reproduces A.
        assert!(max_rel_diff(&c.reconstruct(), &a) < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            cholesky(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn rank_one_update_then_downdate_restores() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let n = rng.random_range(1..8);
            let a = random_spd(&mut rng, n);
            let c = cholesky(&a).unwrap();
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let c2 = c
                .rank_one_update(&v, 1)
                .unwrap()
                .rank_one_update(&v, -1)
                .unwrap();
            assert!(max_rel_diff(&c2.factor(), &c.factor()) < 1e-10);
        }
    }

    #[test]
    fn rank_one_update_identity_plus_e1() {
        let c = cholesky(&DenseMat::<f64>::identity(2)).unwrap();
        let c2 = c.rank_one_update(&[1.0, 0.0], 1).unwrap();
        let r = c2.factor();
        assert!((r[(0, 0)] - 2.0f64.sqrt()).abs() < 1e-15);
        assert!((r[(1, 1)] - 1.0).abs() < 1e-15);
        assert!(r[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn rank_one_update_matches_refactorization_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let n = rng.random_range(1..10);
            let a = random_spd(&mut rng, n);
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let sign = if rng.random::<bool>() { 1 } else { -1 };
            let mut shifted = a.clone();
            for i in 0..n {
                for j in 0..n {
                    shifted[(i, j)] += sign as f64 * v[i] * v[j];
                }
            }
            let direct = cholesky(&shifted);
            let updated = cholesky(&a).unwrap().rank_one_update(&v, sign);
            match (direct, updated) {
                (Ok(d), Ok(u)) => {
                    assert!(
                        max_rel_diff(&d.factor(), &u.factor()) < 1e-10,
                        "factor mismatch"
                    );
                    assert!((d.logdet() - u.logdet()).abs() < 1e-10 * d.logdet().abs().max(1.0));
                }
                (Err(_), Err(_)) => {}
                (d, u) => panic!("oracle disagreement: direct {d:?} vs update {u:?}"),
            }
        }
    }

    #[test]
    fn diagonal_update_zero_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng, 5);
        let c = cholesky(&a).unwrap();
        let c2 = c.diagonal_update(2, 0.0).unwrap();
        assert_eq!(c.factor(), c2.factor());
    }

    #[test]
    fn diagonal_update_last_index_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_spd(&mut rng, 6);
        let c = cholesky(&a).unwrap();
        let delta = 0.7;
        let c2 = c.diagonal_update(5, delta).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if (i, j) == (5, 5) {
                    let want = (c.factor()[(5, 5)].powi(2) + delta).sqrt();
                    assert!((c2.factor()[(5, 5)] - want).abs() < 1e-12);
                } else {
                    assert!((c2.factor()[(i, j)] - c.factor()[(i, j)]).abs() < 1e-12);
                }
            }
        }
        // Against refactorization.
        let mut shifted = a.clone();
        shifted[(5, 5)] += delta;
        assert!(max_rel_diff(&c2.factor(), &cholesky(&shifted).unwrap().factor()) < 1e-10);
    }

    #[test]
    fn diagonal_update_matches_refactorization_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let n = rng.random_range(1..10);
            let a = random_spd(&mut rng, n);
            let k = rng.random_range(0..n);
            let delta = rng.random::<f64>() * 2.0 - 0.5;
            let mut shifted = a.clone();
            shifted[(k, k)] += delta;
            let direct = cholesky(&shifted);
            let updated = cholesky(&a).unwrap().diagonal_update(k, delta);
            match (direct, updated) {
                (Ok(d), Ok(u)) => {
                    assert!(max_rel_diff(&d.factor(), &u.factor()) < 1e-10)
                }
                (Err(_), Err(_)) => {}
                (d, u) => panic!("oracle disagreement: {d:?} vs {u:?}"),
            }
        }
    }

    #[test]
    fn append_and_remove_column_match_refactorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..500 {
            let n = rng.random_range(1..9);
            let a = random_spd(&mut rng, n);
            let c = cholesky(&a).unwrap();

            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let d = b.iter().map(|x| x * x).sum::<f64>() + rng.random::<f64>() + 0.1;
            let grown = a.append_rowcol(&b, d);
            let c_grown = c.append_column(&b, d).unwrap();
            assert!(max_rel_diff(&c_grown.factor(), &cholesky(&grown).unwrap().factor()) < 1e-10);

            let j = rng.random_range(0..=n);
            let shrunk = grown.remove_rowcol(j);
            let c_shrunk = c_grown.remove_column(j);
            assert!(max_rel_diff(&c_shrunk.factor(), &cholesky(&shrunk).unwrap().factor()) < 1e-9);
        }
    }

    #[test]
    fn append_column_rejects_indefinite_growth() {
        let c = cholesky(&DenseMat::<f64>::identity(2)).unwrap();
        // Schur complement 1 - 2 < 0.
        assert!(c.append_column(&[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn triangular_solve_identity_and_zero() {
        let c = cholesky(&DenseMat::<f64>::identity(3)).unwrap();
        let b = vec![1.0, -2.0, 3.0];
        assert_eq!(triangular_solve(&c, &b, TriangularMode::Lower), b);
        assert_eq!(triangular_solve(&c, &b, TriangularMode::Upper), b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(&mut rng, 4);
        let c = cholesky(&a).unwrap();
        let zero = vec![0.0; 4];
        assert_eq!(c.solve_full(&zero), zero);
    }

    #[test]
    fn solve_full_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n = rng.random_range(1..8);
            let a = random_spd(&mut rng, n);
            let c = cholesky(&a).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let x = c.solve_full(&b);
            // Check A x = b.
            let ax = a.mul_vec(&x);
            for (l, r) in ax.iter().zip(&b) {
                assert!((l - r).abs() < 1e-10);
            }
        }
    }

    /// Dense oracle for the collapsed likelihood: build Σ = I + τ²X̃ΛX̃ᵀ
    /// explicitly and evaluate |Σ| and yᵀΣ⁻¹y at O(n³).
    pub(crate) fn dense_collapsed_oracle(
        y: &[f64],
        xt: &DenseMat<f64>,
        tau: f64,
        lambda: &[f64],
    ) -> f64 {
        let n = xt.rows();
        let k = xt.cols();
        let mut sigma = DenseMat::<f64>::identity(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for c in 0..k {
                    s += xt[(i, c)] * lambda[c] * lambda[c] * xt[(j, c)];
                }
                sigma[(i, j)] += tau * tau * s;
            }
        }
        let ch = cholesky(&sigma).unwrap();
        let quad = {
            let z = ch.solve(y, TriangularMode::Lower);
            z.iter().map(|v| v * v).sum::<f64>()
        };
        -0.5 * ch.logdet() - (n as f64 / 2.0) * (quad / 2.0).ln()
    }

    #[test]
    fn collapsed_loglik_tiny_tau_limit() {
        let y = vec![1.0, 2.0, -1.0, 0.5];
        let xt = DenseMat::from_rows(&[
            vec![0.3, 0.1],
            vec![-0.2, 0.4],
            vec![0.5, -0.5],
            vec![0.1, 0.2],
        ]);
        let (ll, _) = collapsed_loglik(&y, &xt, 1e-12, &[1.0, 1.0]).unwrap();
        let yty: f64 = y.iter().map(|v| v * v).sum();
        let want = -(4.0 / 2.0) * (yty / 2.0).ln();
        assert!((ll - want).abs() < 1e-6, "{ll} vs {want}");
    }

    #[test]
    fn collapsed_loglik_identity_design_closed_form() {
        let n = 5;
        let y = vec![0.3, -1.2, 0.8, 2.0, -0.4];
        let xt = DenseMat::<f64>::identity(n);
        let (ll, _) = collapsed_loglik(&y, &xt, 1.0, &vec![1.0; n]).unwrap();
        let yty: f64 = y.iter().map(|v| v * v).sum();
        let want = -(n as f64 / 2.0) * 2.0f64.ln() - (n as f64 / 2.0) * (yty / 4.0).ln();
        assert!((ll - want).abs() < 1e-12, "{ll} vs {want}");
    }

    #[test]
    fn collapsed_loglik_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        for _ in 0..300 {
            let n = 20;
            let k = 4;
            let mut xt = DenseMat::zeros(n, k);
            for i in 0..n {
                for j in 0..k {
                    xt[(i, j)] = rng.random::<f64>() - 0.5;
                }
            }
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let tau = rng.random::<f64>() + 0.2;
            let lambda: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.2).collect();
            let (ll, chol) = collapsed_loglik(&y, &xt, tau, &lambda).unwrap();
            let want = dense_collapsed_oracle(&y, &xt, tau, &lambda);
            assert!(
                (ll - want).abs() < 1e-8 * want.abs().max(1.0),
                "{ll} vs {want}"
            );
            // Factor reconstructs A.
            let mut a = xt.gram();
            for i in 0..k {
                a[(i, i)] += 1.0 / (tau * tau * lambda[i] * lambda[i]);
            }
            assert!(max_rel_diff(&chol.reconstruct(), &a) < 1e-10);
        }
    }

    #[test]
    fn collapsed_loglik_invariant_under_column_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 12;
        let k = 5;
        let mut xt = DenseMat::zeros(n, k);
        for i in 0..n {
            for j in 0..k {
                xt[(i, j)] = rng.random::<f64>() - 0.5;
            }
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let lambda: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.3).collect();
        let (ll, _) = collapsed_loglik(&y, &xt, 0.8, &lambda).unwrap();

        let perm = [3usize, 0, 4, 1, 2];
        let mut xt2 = DenseMat::zeros(n, k);
        for i in 0..n {
            for (new_j, &old_j) in perm.iter().enumerate() {
                xt2[(i, new_j)] = xt[(i, old_j)];
            }
        }
        let lambda2: Vec<f64> = perm.iter().map(|&j| lambda[j]).collect();
        let (ll2, _) = collapsed_loglik(&y, &xt2, 0.8, &lambda2).unwrap();
        assert!((ll - ll2).abs() < 1e-10);
    }

    #[test]
    fn collapsed_loglik_response_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let n = 10;
        let k = 3;
        let mut xt = DenseMat::zeros(n, k);
        for i in 0..n {
            for j in 0..k {
                xt[(i, j)] = rng.random::<f64>() - 0.5;
            }
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
        let lambda = vec![0.7, 1.3, 0.4];
        let (ll, _) = collapsed_loglik(&y, &xt, 0.9, &lambda).unwrap();
        for c in [2.0, 0.25, -3.0f64] {
            let yc: Vec<f64> = y.iter().map(|&v| c * v).collect();
            let (llc, _) = collapsed_loglik(&yc, &xt, 0.9, &lambda).unwrap();
            let want = ll - n as f64 * c.abs().ln();
            assert!((llc - want).abs() < 1e-9, "c={c}: {llc} vs {want}");
        }
    }
}
