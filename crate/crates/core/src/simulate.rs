//! Seeded data matrices with a prescribed spectrum, and sparse correlated
//! loadings obtained by soft-thresholding the PCA loadings.
//!
//! Random streams: every draw comes from `ChaCha20Rng::seed_from_u64(seed)`
//! switched to stream `(trial << 8) | lane`, so a trial's matrices do not
//! depend on which other trials were run, or in what order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expvar::Loadings;
use crate::linalg::{householder_qr, singular_values, DataMatrix};

/// Description of the random generator, recorded in experiment metadata.
pub const GENERATOR: &str =
    "rand_chacha 0.9 ChaCha20Rng::seed_from_u64(seed), stream (trial << 8) | lane; lane 0 = U, lane 1 = V; rand_distr 0.5 StandardNormal";

const LANE_U: u64 = 0;
const LANE_V: u64 = 1;

/// Relative smallest singular value under which thresholded loadings are
/// repaired.
pub const REPAIR_RANK_TOL: f64 = 1e-6;

const REPAIR_BISECTION_STEPS: usize = 30;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n x m` matrix of independent standard normal draws, filled column by column.
pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize, m: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_vec(n, m, data)
}

/// Column-orthonormal `n x k` matrix distributed according to the Haar
/// measure: Q factor of a Gaussian matrix with `diag(R) >= 0`.
pub fn haar_orthonormal<R: Rng>(rng: &mut R, n: usize, k: usize) -> DMatrix<f64> {
    householder_qr(&gaussian_matrix(rng, n, k), false).q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    CloseEigenvalues,
    DifferentEigenvalues,
    Custom,
}

impl SchemeName {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::CloseEigenvalues => "close_eigenvalues",
            SchemeName::DifferentEigenvalues => "different_eigenvalues",
            SchemeName::Custom => "custom",
        }
    }

    pub fn default_sigma_head(self) -> Option<Vec<f64>> {
        match self {
            SchemeName::CloseEigenvalues => Some(vec![4.0, 3.8, 3.6, 3.4]),
            SchemeName::DifferentEigenvalues => Some(vec![8.0, 4.0, 2.0, 1.0]),
            SchemeName::Custom => None,
        }
    }
}

/// Simulation scheme: `A = U diag(sigma) V^T` with Haar `U`, `V`, leading
/// singular values `sigma_head` and a geometric tail
/// `sigma_m * tail_decay^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScheme {
    pub name: SchemeName,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub sigma_head: Vec<f64>,
    pub tail_decay: f64,
    pub seed: u64,
}

impl SimScheme {
    pub fn close(seed: u64) -> Self {
        Self::named(SchemeName::CloseEigenvalues, seed)
    }

    pub fn different(seed: u64) -> Self {
        Self::named(SchemeName::DifferentEigenvalues, seed)
    }

    fn named(name: SchemeName, seed: u64) -> Self {
        Self {
            name,
            n: 30,
            p: 20,
            m: 4,
            sigma_head: name.default_sigma_head().unwrap_or_default(),
            tail_decay: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("scheme {}: {msg}", self.name.as_str())));
        if self.m == 0 || self.n < self.m {
            return bad("need 1 <= m <= n");
        }
        if self.p <= self.m {
            return bad("need p > m");
        }
        if self.sigma_head.len() != self.m {
            return bad("sigma_head must have exactly m entries");
        }
        if self.sigma_head.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("sigma_head must be positive");
        }
        if self.sigma_head.windows(2).any(|w| w[1] > w[0]) {
            return bad("sigma_head must be non-increasing");
        }
        if !(self.tail_decay > 0.0 && self.tail_decay < 1.0) {
            return bad("tail_decay must lie in (0, 1)");
        }
        Ok(())
    }

    /// Full spectrum of length `min(n, p)`.
    pub fn spectrum(&self) -> Vec<f64> {
        let k = self.n.min(self.p);
        let sigma_m = self.sigma_head[self.m - 1];
        let mut sigma = self.sigma_head.clone();
        let mut tail = sigma_m;
        for _ in self.m..k {
            tail *= self.tail_decay;
            sigma.push(tail);
        }
        sigma
    }
}

/// Draws trial `trial` of `scheme`. Deterministic in `(scheme.seed, trial)`.
pub fn generate_matrix(scheme: &SimScheme, trial: u64) -> Result<DataMatrix> {
    scheme.validate()?;
    if trial >= 1 << 56 {
        return Err(Error::invalid("trial index too large"));
    }
    let sigma = scheme.spectrum();
    let k = sigma.len();
    let u = haar_orthonormal(&mut stream_rng(scheme.seed, (trial << 8) | LANE_U), scheme.n, k);
    let v = haar_orthonormal(&mut stream_rng(scheme.seed, (trial << 8) | LANE_V), scheme.p, k);
    let a = u * DMatrix::from_diagonal(&DVector::from_vec(sigma)) * v.transpose();
    DataMatrix::new(a)
}

/// Increasing sparsity levels in `[0, 1]`, starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityGrid {
    lambdas: Vec<f64>,
}

impl SparsityGrid {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.first() != Some(&0.0) {
            return Err(Error::invalid("sparsity grid must start at 0"));
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sparsity grid must be strictly increasing"));
        }
        if lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::invalid("sparsity levels must lie in [0, 1]"));
        }
        Ok(Self { lambdas })
    }

    /// `count` equally spaced levels `0, 1/(count-1), ..., 1`.
    pub fn uniform(count: usize) -> Result<Self> {
        match count {
            0 => Err(Error::invalid("grid needs at least one point")),
            1 => Self::new(vec![0.0]),
            _ => Self::new((0..count).map(|i| i as f64 / (count - 1) as f64).collect()),
        }
    }

    /// The first `count` levels.
    pub fn head(&self, count: usize) -> Result<Self> {
        Self::new(self.lambdas.iter().take(count.max(1)).copied().collect())
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Soft-threshold `v` at `level * max|v_i|` and rescale to unit norm. When
/// nothing survives (`level = 1`) the limit is taken: `sign(v_i)` at the
/// entries of maximal magnitude.
fn threshold_column(v: &[f64], level: f64) -> DVector<f64> {
    let vmax = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let t = level * vmax;
    let mut w = DVector::from_iterator(v.len(), v.iter().map(|x| x.signum() * (x.abs() - t).max(0.0)));
    if w.norm() == 0.0 {
        w = DVector::from_iterator(
            v.len(),
            v.iter().map(|x| if x.abs() == vmax { x.signum() } else { 0.0 }),
        );
    }
    let n = w.norm();
    w / n
}

fn well_conditioned(cols: &DMatrix<f64>) -> bool {
    let sv = singular_values(cols);
    let m = cols.ncols();
    m <= cols.nrows() && sv[0] > 0.0 && sv[m - 1] > REPAIR_RANK_TOL * sv[0]
}

/// Sparse, correlated surrogate loadings: each column of `V_m` is
/// soft-thresholded at `lambda` times its largest magnitude and renormalized.
/// If a column would make `Z` (or `A Z`) numerically rank deficient, its
/// threshold is lowered to the largest level that keeps full rank (bisection).
/// When even level 0 fails, the previous column's level is halved and the
/// search resumes from there. `lambda = 0` returns `V_m` exactly.
pub fn sparsify_loadings(a: &DataMatrix, m: usize, lambda: f64) -> Result<Loadings> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda = {lambda} outside [0, 1]")));
    }
    if m == 0 || m > a.rank() {
        return Err(Error::invalid(format!("m = {m} must lie in 1..={}", a.rank())));
    }
    let vm = a.svd().v_m(m);
    if lambda == 0.0 {
        return Loadings::new(vm);
    }

    let p = a.p();
    let columns: Vec<Vec<f64>> = vm.column_iter().map(|c| c.iter().copied().collect()).collect();
    // Column j with earlier columns fixed, at `level`, if the result keeps
    // full rank.
    let place = |z: &DMatrix<f64>, j: usize, level: f64| -> Option<DVector<f64>> {
        let col = threshold_column(&columns[j], level);
        let mut trial = z.columns(0, j + 1).into_owned();
        trial.set_column(j, &col);
        (well_conditioned(&trial) && well_conditioned(&(a.values() * &trial))).then_some(col)
    };

    let mut z = DMatrix::zeros(p, m);
    let mut caps = vec![lambda; m];
    let mut levels = vec![0.0; m];
    let mut j = 0;
    while j < m {
        let placed = match place(&z, j, caps[j]) {
            Some(col) => Some((caps[j], col)),
            None => {
                let (mut lo, mut hi) = (0.0, caps[j]);
                for _ in 0..REPAIR_BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if place(&z, j, mid).is_some() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                place(&z, j, lo).map(|col| (lo, col))
            }
        };
        match placed {
            Some((level, col)) => {
                levels[j] = level;
                z.set_column(j, &col);
                j += 1;
            }
            None if j > 0 && levels[j - 1] > 0.0 => {
                // the earlier column leaves no room: thin it out and retry
                j -= 1;
                caps[j] = if levels[j] < 1e-9 { 0.0 } else { 0.5 * levels[j] };
                caps[j + 1..].iter_mut().for_each(|c| *c = lambda);
            }
            None => {
                return Err(Error::rank(format!(
                    "cannot keep loading {} independent even without thresholding",
                    j + 1
                )));
            }
        }
    }
    Loadings::new(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn close_scheme_recovers_its_spectrum() {
        let s = SimScheme::close(42);
        let a = generate_matrix(&s, 0).unwrap();
        for (k, expect) in [4.0, 3.8, 3.6, 3.4].iter().enumerate() {
            assert_relative_eq!(a.svd().sigma[k], *expect, epsilon = 1e-8);
        }
        assert_eq!((a.n(), a.p()), (30, 20));
        assert_eq!(a.rank(), 20);
    }

    #[test]
    fn different_scheme_recovers_its_spectrum() {
        let s = SimScheme::different(42);
        let a = generate_matrix(&s, 3).unwrap();
        for (k, expect) in [8.0, 4.0, 2.0, 1.0, 0.5, 0.25].iter().enumerate() {
            assert_relative_eq!(a.svd().sigma[k], *expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn generation_is_deterministic_per_trial() {
        let s = SimScheme::close(7);
        let a = generate_matrix(&s, 5).unwrap();
        let b = generate_matrix(&s, 5).unwrap();
        assert_eq!(a.values(), b.values());
        let c = generate_matrix(&s, 6).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn invalid_schemes_are_rejected() {
        let mut s = SimScheme::close(1);
        s.p = 4;
        assert!(generate_matrix(&s, 0).is_err());
        let mut s = SimScheme::close(1);
        s.sigma_head = vec![1.0, 2.0, 3.0, 4.0];
        assert!(generate_matrix(&s, 0).is_err());
        let mut s = SimScheme::close(1);
        s.tail_decay = 1.0;
        assert!(generate_matrix(&s, 0).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(SparsityGrid::new(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(SparsityGrid::new(vec![0.1, 0.5]).is_err());
        assert!(SparsityGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(SparsityGrid::new(vec![0.0, 1.5]).is_err());
        let g = SparsityGrid::uniform(101).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g.lambdas()[100], 1.0);
        assert_eq!(g.head(50).unwrap().len(), 50);
    }

    #[test]
    fn zero_lambda_returns_svd_loadings() {
        let a = generate_matrix(&SimScheme::close(3), 0).unwrap();
        let z = sparsify_loadings(&a, 4, 0.0).unwrap();
        assert_eq!(z.matrix(), &a.svd().v_m(4));
    }

    #[test]
    fn full_lambda_keeps_one_entry_per_column() {
        let a = generate_matrix(&SimScheme::different(3), 1).unwrap();
        let vm = a.svd().v_m(4);
        let z = sparsify_loadings(&a, 4, 1.0).unwrap();
        for (zj, vj) in z.matrix().column_iter().zip(vm.column_iter()) {
            let nonzero: Vec<usize> = (0..zj.len()).filter(|&i| zj[i] != 0.0).collect();
            let imax = vj.iamax();
            if nonzero.len() == 1 {
                assert_eq!(nonzero[0], imax);
                assert_eq!(zj[imax], vj[imax].signum());
            }
        }
    }

    #[test]
    fn moderate_lambda_correlates_components() {
        let a = generate_matrix(&SimScheme::close(11), 0).unwrap();
        let z = sparsify_loadings(&a, 4, 0.3).unwrap();
        let y = a.values() * z.matrix();
        let g = y.tr_mul(&y);
        let mut max_corr: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    max_corr = max_corr.max((g[(i, j)] / (g[(i, i)] * g[(j, j)]).sqrt()).abs());
                }
            }
        }
        assert!(max_corr > 0.01, "max correlation {max_corr}");
    }

    #[test]
    fn thresholding_produces_zeros() {
        let col = threshold_column(&[0.9, -0.3, 0.1, -0.05], 0.5);
        assert_eq!(col[2], 0.0);
        assert_eq!(col[3], 0.0);
        assert!(col[0] > 0.0 && col[1] == 0.0);
        assert_relative_eq!(col.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn stream_rngs_are_independent_of_order() {
        let mut r1 = stream_rng(9, 3);
        let a: f64 = r1.sample(StandardNormal);
        let _ = stream_rng(9, 2).sample::<f64, _>(StandardNormal);
        let mut r2 = stream_rng(9, 3);
        let b: f64 = r2.sample(StandardNormal);
        assert_eq!(a, b);
    }
}
