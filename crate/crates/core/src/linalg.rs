//! Dense decomposition kernels: truncated SVD with a deterministic sign
//! convention, Householder QR with optional max-norm column pivoting, the
//! polar decomposition, orthogonal projectors and the symmetric square root.
//!
//! The SVD itself is delegated to `nalgebra`; everything layered on top of it
//! (ordering, numerical rank, signs, QR, polar factors) lives here.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Singular values at or below `RANK_TOL * sigma_1` are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Relative tolerance under which two pivot candidates count as tied.
const PIVOT_TIE_TOL: f64 = 1e-12;

/// Thin SVD `A = U diag(sigma) V^T` restricted to the numerical rank.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SpectralModel {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Leading `m` left singular vectors.
    pub fn u_m(&self, m: usize) -> DMatrix<f64> {
        self.u.columns(0, m).into_owned()
    }

    /// Leading `m` right singular vectors, i.e. the PCA loadings `V_m`.
    pub fn v_m(&self, m: usize) -> DMatrix<f64> {
        self.v.columns(0, m).into_owned()
    }

    /// `sigma_1^2 + ... + sigma_m^2`, the variance explained by the first `m`
    /// principal components.
    pub fn pca_bound(&self, m: usize) -> f64 {
        self.sigma.iter().take(m).map(|s| s * s).sum()
    }

    /// Smallest relative gap `(sigma_j - sigma_{j+1}) / sigma_1` among the
    /// first `m` singular values (the gap to `sigma_{m+1}` included when it
    /// exists).
    pub fn min_relative_gap(&self, m: usize) -> f64 {
        let s1 = self.sigma[0];
        let upto = (m + 1).min(self.rank());
        (1..upto)
            .map(|j| (self.sigma[j - 1] - self.sigma[j]) / s1)
            .fold(f64::INFINITY, f64::min)
    }
}

/// A centered `n x p` data matrix together with its cached SVD.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    svd: SpectralModel,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid("data matrix must have at least one row and one column"));
        }
        let svd = truncated_svd(&values)?;
        Ok(Self { values, svd })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn svd(&self) -> &SpectralModel {
        &self.svd
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    /// Total variance `||A||_F^2`.
    pub fn total_variance(&self) -> f64 {
        self.values.norm_squared()
    }
}

/// Thin SVD truncated to the numerical rank.
///
/// Singular values are sorted in non-increasing order and each right singular
/// vector is signed so that its largest-magnitude entry is positive (lowest
/// row index on ties); the matching left vector is flipped along with it.
pub fn truncated_svd(a: &DMatrix<f64>) -> Result<SpectralModel> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("data matrix has non-finite entries"));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::invalid("SVD failed to converge"))?;
    let u_full = svd.u.expect("u requested");
    let vt_full = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));

    let s1 = order.first().map_or(0.0, |&i| sv[i]);
    let r = order.iter().take_while(|&&i| sv[i] > RANK_TOL * s1 && sv[i] > 0.0).count();

    let (n, p) = a.shape();
    let mut u = DMatrix::zeros(n, r);
    let mut v = DMatrix::zeros(p, r);
    let mut sigma = DVector::zeros(r);
    for (k, &i) in order.iter().take(r).enumerate() {
        sigma[k] = sv[i];
        let mut vk = vt_full.row(i).transpose();
        let mut uk = u_full.column(i).into_owned();
        let lead = largest_magnitude_index(vk.as_slice());
        if vk[lead] < 0.0 {
            vk.neg_mut();
            uk.neg_mut();
        }
        v.set_column(k, &vk);
        u.set_column(k, &uk);
    }
    Ok(SpectralModel { u, sigma, v })
}

fn largest_magnitude_index(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if x.abs() > xs[best].abs() {
            best = i;
        }
    }
    best
}

/// Singular values of `y` in non-increasing order.
pub fn singular_values(y: &DMatrix<f64>) -> DVector<f64> {
    let mut sv = y.clone().singular_values();
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Fails with `RankDeficient` unless `y` has full column rank, i.e. its
/// smallest singular value exceeds `RANK_TOL` times its largest.
pub fn ensure_full_column_rank(y: &DMatrix<f64>, what: &str) -> Result<()> {
    let (n, m) = y.shape();
    if m == 0 {
        return Err(Error::invalid(format!("{what} has no columns")));
    }
    if m > n {
        return Err(Error::rank(format!("{what} has {m} columns but only {n} rows")));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    let sv = singular_values(y);
    let (hi, lo) = (sv[0], sv[m - 1]);
    if !(hi > 0.0 && lo > RANK_TOL * hi) {
        return Err(Error::rank(format!(
            "{what} is not of full column rank (singular values {hi:e} .. {lo:e})"
        )));
    }
    Ok(())
}

/// `Y[:, perm] = Q R` with `R` upper triangular and `diag(R) >= 0`.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// `perm[k]` is the original index of the column factored at step `k`.
    pub perm: Vec<usize>,
}

impl QrFactors {
    /// `Q` with its columns moved back to the original column order of `Y`,
    /// so that column `j` is the basis vector paired with `y_j`.
    pub fn basis_in_original_order(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.q.nrows(), self.q.ncols());
        for (k, &j) in self.perm.iter().enumerate() {
            x.set_column(j, &self.q.column(k));
        }
        x
    }
}

/// Householder QR of a full-column-rank `Y`.
///
/// With `pivot_max_norm`, every step factors the remaining column of largest
/// residual norm (ties go to the lowest original index). Signs are fixed so
/// that the diagonal of `R` is non-negative.
pub fn qr_decompose(y: &DMatrix<f64>, pivot_max_norm: bool) -> Result<QrFactors> {
    ensure_full_column_rank(y, "component matrix")?;
    Ok(householder_qr(y, pivot_max_norm))
}

/// QR without the rank precondition; used internally on matrices known to be
/// well conditioned (e.g. Gaussian draws).
pub(crate) fn householder_qr(y: &DMatrix<f64>, pivot_max_norm: bool) -> QrFactors {
    let (n, m) = y.shape();
    let mut work = y.clone();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(m);

    for k in 0..m.min(n) {
        if pivot_max_norm {
            let norms: Vec<f64> = (k..m).map(|j| work.view((k, j), (n - k, 1)).norm()).collect();
            let max_norm = norms.iter().copied().fold(0.0, f64::max);
            let best = (k..m)
                .filter(|&j| norms[j - k] >= max_norm * (1.0 - PIVOT_TIE_TOL))
                .min_by_key(|&j| perm[j])
                .unwrap_or(k);
            if best != k {
                work.swap_columns(k, best);
                perm.swap(k, best);
            }
        }

        let x = work.view((k, k), (n - k, 1)).into_owned();
        let norm_x = x.norm();
        let mut v = DVector::from_column_slice(x.as_slice());
        if norm_x > 0.0 {
            let alpha = if x[0] >= 0.0 { -norm_x } else { norm_x };
            v[0] -= alpha;
            let vn = v.norm();
            if vn > 0.0 {
                v /= vn;
            }
        } else {
            v.fill(0.0);
        }
        if v.norm() > 0.0 {
            let mut block = work.view_mut((k, k), (n - k, m - k));
            let w = block.tr_mul(&v);
            block.ger(-2.0, &v, &w, 1.0);
        }
        reflectors.push(v);
    }

    let mut r = DMatrix::zeros(m, m);
    for i in 0..m.min(n) {
        for j in i..m {
            r[(i, j)] = work[(i, j)];
        }
    }

    let mut q = DMatrix::<f64>::identity(n, m);
    for (k, v) in reflectors.iter().enumerate().rev() {
        if v.norm() == 0.0 {
            continue;
        }
        let mut block = q.view_mut((k, 0), (n - k, m));
        let w = block.tr_mul(v);
        block.ger(-2.0, v, &w, 1.0);
    }

    for j in 0..m.min(n) {
        if r[(j, j)] < 0.0 {
            r.row_mut(j).neg_mut();
            q.column_mut(j).neg_mut();
        }
    }
    QrFactors { q, r, perm }
}

/// `Y = U P` with `U` column-orthonormal and `P` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub u: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

/// Polar decomposition through the thin SVD `Y = W S G^T`:
/// `U = W G^T`, `P = G S G^T`. `U` maximizes `<Y, X>_F` over all
/// column-orthonormal `X`.
pub fn polar_decompose(y: &DMatrix<f64>) -> Result<PolarFactors> {
    ensure_full_column_rank(y, "component matrix")?;
    Ok(polar_unchecked(y))
}

pub(crate) fn polar_unchecked(y: &DMatrix<f64>) -> PolarFactors {
    let svd = SVD::new(y.clone(), true, true);
    let w = svd.u.expect("u requested");
    let gt = svd.v_t.expect("v_t requested");
    let u = &w * &gt;
    let p = gt.tr_mul(&DMatrix::from_diagonal(&svd.singular_values)) * &gt;
    let p = (&p + p.transpose()) * 0.5;
    PolarFactors { u, p }
}

/// Orthogonal projector `Z (Z^T Z)^{-1} Z^T` onto `span{Z}`, formed as
/// `Q Q^T` from a QR factorization of `Z`.
pub fn projector(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_full_column_rank(z, "loading matrix")?;
    let q = householder_qr(z, false).q;
    Ok(&q * q.transpose())
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Eigenvalues below zero (round-off) are clamped.
pub fn sym_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Smallest eigenvalue of the symmetric part of `s`.
pub fn min_sym_eigenvalue(s: &DMatrix<f64>) -> f64 {
    let sym = (s + s.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Frobenius inner product `<a, b>_F`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Returns true iff `z` equals `v` column-for-column up to a sign per
/// column, within `tol` (max absolute entry difference).
pub fn columns_equal_up_to_sign(z: &DMatrix<f64>, v: &DMatrix<f64>, tol: f64) -> bool {
    z.shape() == v.shape()
        && z.column_iter().zip(v.column_iter()).all(|(a, b)| {
            let plus = (a - b).amax();
            let minus = (a + b).amax();
            plus.min(minus) <= tol
        })
}

/// Returns true iff the columns of `z` are a signed permutation of the
/// columns of `v`, within `tol`.
pub fn is_signed_permutation_of(z: &DMatrix<f64>, v: &DMatrix<f64>, tol: f64) -> bool {
    if z.shape() != v.shape() {
        return false;
    }
    let m = z.ncols();
    let mut used = vec![false; m];
    for zj in z.column_iter() {
        let hit = (0..m).find(|&k| {
            !used[k] && {
                let vk = v.column(k);
                (zj - vk).amax().min((zj + vk).amax()) <= tol
            }
        });
        match hit {
            Some(k) => used[k] = true,
            None => return false,
        }
    }
    true
}
