//! Six definitions of the variance explained by possibly correlated
//! components `Y = A Z`, and the proportion of explained variance (pev).
//!
//! | short name  | definition                                             |
//! |-------------|--------------------------------------------------------|
//! | subspVar    | `tr{Y^T Y (Z^T Z)^{-1}}`                               |
//! | QRnormVar   | `sum 1/||t_j||^2`, `Z = T R` with `Y = Q R`            |
//! | UPnormVar   | `sum 1/||t_j||^2`, `Z = T P` with `Y = U P`            |
//! | QRprojVar   | `sum r_jj^2`                                           |
//! | UPprojVar   | `sum p_jj^2`                                           |
//! | optprojVar  | `max_{X^T X = I} sum <y_j, x_j>^2`                     |
//!
//! The projected variants are the only ones that never exceed `||Y||_F^2`.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, PartialResult, Result};
use crate::linalg::{
    ensure_full_column_rank, householder_qr, min_sym_eigenvalue, polar_unchecked, qr_decompose, DataMatrix,
    QrFactors,
};

/// Tolerance on `||z_j|| - 1`.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Relative stationarity residual under which a fixed point is accepted.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// Slack (relative to `max(1, pca_bound)`) allowed on report orderings.
pub const ORDERING_SLACK: f64 = 1e-8;

/// Relative objective drop attributed to floating-point rounding. Iterates
/// within this band are accepted so that stalling does not freeze the basis.
pub const ROUNDING_SLACK: f64 = 1e-14;

/// True when no step of an objective trace drops by more than rounding.
pub fn trace_is_monotone(trace: &[f64]) -> bool {
    trace
        .windows(2)
        .all(|t| t[1] >= t[0] - ROUNDING_SLACK * (1.0 + t[0].abs()))
}

/// `p x m` matrix of unit-norm, linearly independent loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct Loadings {
    z: DMatrix<f64>,
}

impl Loadings {
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        for (j, col) in z.column_iter().enumerate() {
            let norm = col.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::invalid(format!(
                    "column {} of Z has norm {norm:.6}, expected 1; rerun with --normalize",
                    j + 1
                )));
            }
        }
        ensure_full_column_rank(&z, "loading matrix Z")?;
        Ok(Self { z })
    }

    /// Rescales every column to unit norm before validating.
    pub fn normalized(mut z: DMatrix<f64>) -> Result<Self> {
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::rank(format!("column {} of Z is zero", j + 1)));
            }
            col /= norm;
        }
        Self::new(z)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.z
    }

    pub fn p(&self) -> usize {
        self.z.nrows()
    }

    pub fn m(&self) -> usize {
        self.z.ncols()
    }
}

/// Components `Y = A Z`, checked to be of full column rank.
#[derive(Debug, Clone)]
pub struct Components {
    y: DMatrix<f64>,
}

impl Components {
    pub fn new(a: &DataMatrix, z: &Loadings) -> Result<Self> {
        if z.p() != a.p() {
            return Err(Error::invalid(format!(
                "Z has {} rows but A has {} columns",
                z.p(),
                a.p()
            )));
        }
        if z.m() > a.rank() {
            return Err(Error::rank(format!(
                "m = {} exceeds the rank {} of A",
                z.m(),
                a.rank()
            )));
        }
        let y = a.values() * z.matrix();
        ensure_full_column_rank(&y, "component matrix Y = AZ")?;
        Ok(Self { y })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// `||Y||_F^2`, the plain sum of component variances.
    pub fn total_variance(&self) -> f64 {
        self.y.norm_squared()
    }
}

/// Positive, non-increasing weights `mu_1 >= ... >= mu_m > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    mu: Vec<f64>,
}

impl Weights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::invalid("weights must not be empty"));
        }
        if mu.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("weights must be finite and positive"));
        }
        if mu.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("weights must be non-increasing"));
        }
        Ok(Self { mu })
    }

    pub fn ones(m: usize) -> Self {
        Self { mu: vec![1.0; m] }
    }

    /// `mu_j = m - j + 1`.
    pub fn decreasing(m: usize) -> Self {
        Self {
            mu: (0..m).map(|j| (m - j) as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.mu
    }

    pub fn squared(&self) -> DVector<f64> {
        DVector::from_iterator(self.mu.len(), self.mu.iter().map(|w| w * w))
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.mu.windows(2).all(|w| w[1] < w[0])
    }

    fn check_len(&self, m: usize) -> Result<()> {
        if self.mu.len() != m {
            return Err(Error::invalid(format!(
                "got {} weights for {m} components",
                self.mu.len()
            )));
        }
        Ok(())
    }
}

/// Rule associating an orthonormal basis of `span{Y}` to the components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisRule {
    /// QR decomposition, largest residual norm factored first.
    #[default]
    Qr,
    /// QR decomposition in the natural column order.
    QrUnpivoted,
    /// Polar decomposition.
    Up,
}

/// How an [`OrthoBasis`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Qr { pivoted: bool },
    Up,
    Optimal,
}

/// Orthonormal `n x m` basis of `span{Y}`; column `j` is paired with `y_j`.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    pub x: DMatrix<f64>,
    pub kind: BasisKind,
}

/// Basis associated to `y` by `rule`, with columns in the original order of `y`.
pub fn basis_for(y: &DMatrix<f64>, rule: BasisRule) -> Result<OrthoBasis> {
    ensure_full_column_rank(y, "component matrix")?;
    Ok(match rule {
        BasisRule::Qr | BasisRule::QrUnpivoted => {
            let pivoted = rule == BasisRule::Qr;
            let f = qr_decompose(y, pivoted)?;
            qr_basis(&f, pivoted)
        }
        BasisRule::Up => OrthoBasis {
            x: polar_unchecked(y).u,
            kind: BasisKind::Up,
        },
    })
}

fn qr_basis(f: &QrFactors, pivoted: bool) -> OrthoBasis {
    OrthoBasis {
        x: f.basis_in_original_order(),
        kind: BasisKind::Qr { pivoted },
    }
}

/// Diagonal of `X^T Y`: the projections `<y_j, x_j>`.
pub fn projections(y: &DMatrix<f64>, x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        y.ncols(),
        y.column_iter().zip(x.column_iter()).map(|(yj, xj)| yj.dot(&xj)),
    )
}

/// `sum_j mu_j^2 <y_j, x_j>^2`.
pub fn weighted_projected_objective(y: &DMatrix<f64>, x: &DMatrix<f64>, mu_sq: &DVector<f64>) -> f64 {
    projections(y, x)
        .iter()
        .zip(mu_sq.iter())
        .map(|(d, w)| w * d * d)
        .sum()
}

/// Euclidean gradient in `X` of [`weighted_projected_objective`]:
/// `2 Y diag(mu^2) diag(X^T Y)`.
pub fn weighted_projection_gradient(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    mu_sq: &DVector<f64>,
) -> DMatrix<f64> {
    let d = projections(y, x).component_mul(mu_sq) * 2.0;
    y * DMatrix::from_diagonal(&d)
}

/// Subspace explained variance `tr{Y^T Y (Z^T Z)^{-1}} = ||A P_Z||_F^2`.
/// Depends only on `span{Z}`.
pub fn subspace_var(a: &DataMatrix, z: &Loadings) -> Result<f64> {
    let comps = Components::new(a, z)?;
    subspace_of(comps.matrix(), z.matrix())
}

fn subspace_of(y: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<f64> {
    let gram = z.tr_mul(z);
    let chol = Cholesky::new(gram).ok_or_else(|| Error::rank("Z^T Z is not positive definite"))?;
    Ok(chol.solve(&y.tr_mul(y)).trace())
}

/// Normalized explained variance `sum_j 1/||t_j||^2` where `Y = X M` and
/// `Z = T M`, i.e. `t_j` is the loading whose image is the basis vector `x_j`.
pub fn normalized_var(a: &DataMatrix, z: &Loadings, rule: BasisRule) -> Result<f64> {
    let comps = Components::new(a, z)?;
    let basis = basis_for(comps.matrix(), rule)?;
    normalized_of(a, comps.matrix(), z.matrix(), &basis.x)
}

fn normalized_of(a: &DataMatrix, y: &DMatrix<f64>, z: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let m = x.ncols();
    let coeffs = x.tr_mul(y);
    let inv = coeffs
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateBasis("X^T Y is singular".into()))?;
    let t = z * inv;
    let mismatch = (a.values() * &t - x).norm();
    if !(mismatch <= 1e-8 * (m as f64).sqrt()) {
        return Err(Error::DegenerateBasis(format!(
            "adjusted loadings do not map onto the basis (||AT - X||_F = {mismatch:e})"
        )));
    }
    Ok(t.column_iter().map(|tj| 1.0 / tj.norm_squared()).sum())
}

/// Projected explained variance `sum_j <y_j, x_j>^2`. For the QR rule this is
/// `sum r_jj^2` (the adjusted variance), for the polar rule `sum p_jj^2`.
pub fn projected_var(a: &DataMatrix, z: &Loadings, rule: BasisRule) -> Result<f64> {
    let comps = Components::new(a, z)?;
    let basis = basis_for(comps.matrix(), rule)?;
    Ok(projections(comps.matrix(), &basis.x).norm_squared())
}

/// Weighted projected variance `sum_j mu_j^2 <y_j, x_j>^2` with the basis
/// given by `rule`.
///
/// Experimental: only the optimal-basis weighted form
/// ([`optimal_projected_var`]) has known maximizer guarantees.
pub fn projected_var_weighted(
    a: &DataMatrix,
    z: &Loadings,
    rule: BasisRule,
    weights: &Weights,
) -> Result<f64> {
    weights.check_len(z.m())?;
    let comps = Components::new(a, z)?;
    let basis = basis_for(comps.matrix(), rule)?;
    Ok(weighted_projected_objective(comps.matrix(), &basis.x, &weights.squared()))
}

/// Stopping rule of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Stop once an iteration improves the objective by less than
    /// `tol * (1 + objective)` and the iterate is stationary.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1000,
        }
    }
}

/// Result of the optimal-basis maximization.
#[derive(Debug, Clone)]
pub struct OptimalProjection {
    pub value: f64,
    pub basis: OrthoBasis,
    pub iterations: usize,
    /// Objective after every accepted iterate, starting with `X_0`.
    pub trace: Vec<f64>,
    pub stationarity_residual: f64,
    pub converged: bool,
}

/// Relative residual of the first-order condition
/// `Y diag(mu^2) diag(X^T Y) = X P`, `P` symmetric positive semidefinite.
pub fn stationarity_residual(y: &DMatrix<f64>, x: &DMatrix<f64>, mu_sq: &DVector<f64>) -> f64 {
    let g = y * DMatrix::from_diagonal(&projections(y, x).component_mul(mu_sq));
    let p = x.tr_mul(&g);
    let off_span = (&g - x * &p).norm();
    let asym = (&p - p.transpose()).norm();
    let neg = (-min_sym_eigenvalue(&p)).max(0.0);
    let scale = (y.norm_squared() * mu_sq.max()).max(f64::MIN_POSITIVE);
    (off_span + asym + neg) / scale
}

/// Fixed-point ascent `X <- polar(2 Y diag(mu^2) diag(X^T Y))` from `x0`.
fn fixed_point(
    y: &DMatrix<f64>,
    x0: DMatrix<f64>,
    mu_sq: &DVector<f64>,
    opts: FixedPointOptions,
) -> Result<OptimalProjection> {
    let mut x = x0;
    let mut value = weighted_projected_objective(y, &x, mu_sq);
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let g = weighted_projection_gradient(y, &x, mu_sq);
        let next = polar_unchecked(&g).u;
        let next_value = weighted_projected_objective(y, &next, mu_sq);
        iterations += 1;
        let slack = opts.tol * (1.0 + value);
        if next_value < value - slack.max(1e-12 * (1.0 + value)) {
            return Err(Error::InvariantViolation(format!(
                "fixed-point objective decreased from {value} to {next_value}"
            )));
        }
        let increase = next_value - value;
        if next_value >= value - ROUNDING_SLACK * (1.0 + value.abs()) {
            x = next;
            value = next_value;
            trace.push(value);
        }
        if increase < slack && stationarity_residual(y, &x, mu_sq) < STATIONARITY_TOL {
            converged = true;
            break;
        }
    }

    if !converged {
        let (polished, polished_value) = newton_polish(y, &x, mu_sq, value, &mut trace);
        x = polished;
        value = polished_value;
    }
    let stationarity = stationarity_residual(y, &x, mu_sq);
    converged = converged || stationarity < STATIONARITY_TOL;
    Ok(OptimalProjection {
        value,
        basis: OrthoBasis {
            x,
            kind: BasisKind::Optimal,
        },
        iterations,
        trace,
        stationarity_residual: stationarity,
        converged,
    })
}

const NEWTON_STEPS: usize = 200;

/// `(I - S/2)^{-1} (I + S/2)` for skew-symmetric `S`.
fn cayley(s: &DMatrix<f64>) -> DMatrix<f64> {
    let m = s.nrows();
    let half = s * 0.5;
    let lhs = DMatrix::identity(m, m) - &half;
    let rhs = DMatrix::identity(m, m) + &half;
    lhs.lu().solve(&rhs).unwrap_or_else(|| DMatrix::identity(m, m))
}

fn skew_generator(m: usize, k: usize, l: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(m, m);
    e[(k, l)] = 1.0;
    e[(l, k)] = -1.0;
    e
}

/// Gradient and Hessian of `W -> sum_j <r_j, W e_j>^2` along `W exp(sum t_kl E_kl)`
/// at `t = 0`.
fn rotation_derivatives(r: &DMatrix<f64>, w: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let m = r.ncols();
    let s = w.tr_mul(r);
    let gens: Vec<DMatrix<f64>> = (0..m)
        .flat_map(|k| (k + 1..m).map(move |l| (k, l)))
        .map(|(k, l)| skew_generator(m, k, l))
        .collect();
    let d = gens.len();
    // b[g][j] = s_j^T E_g e_j
    let b: Vec<Vec<f64>> = gens
        .iter()
        .map(|e| (0..m).map(|j| s.column(j).dot(&e.column(j))).collect())
        .collect();
    let grad = DVector::from_fn(d, |g, _| (0..m).map(|j| 2.0 * s[(j, j)] * b[g][j]).sum());
    let hess = DMatrix::from_fn(d, d, |g, h| {
        let sym = &gens[g] * &gens[h] + &gens[h] * &gens[g];
        (0..m)
            .map(|j| 2.0 * b[g][j] * b[h][j] + s[(j, j)] * s.column(j).dot(&sym.column(j)))
            .sum()
    });
    (grad, hess)
}

/// Newton ascent on the rotations of an orthonormal basis of `span{Y}`, for
/// components so ill-conditioned that the fixed point crawls. Steps follow the
/// same acceptance rule as the fixed point, so the trace stays monotone.
fn newton_polish(
    y: &DMatrix<f64>,
    x0: &DMatrix<f64>,
    mu_sq: &DVector<f64>,
    start_value: f64,
    trace: &mut Vec<f64>,
) -> (DMatrix<f64>, f64) {
    let m = y.ncols();
    if m < 2 {
        return (x0.clone(), start_value);
    }
    let q = householder_qr(y, false).q;
    let mu = mu_sq.map(f64::sqrt);
    let r = q.tr_mul(y) * DMatrix::from_diagonal(&mu);
    let mut w = polar_unchecked(&q.tr_mul(x0)).u;
    let eval = |w: &DMatrix<f64>| weighted_projected_objective(y, &(&q * w), mu_sq);
    let mut value = eval(&w);
    if value < start_value - ROUNDING_SLACK * (1.0 + start_value.abs()) {
        return (x0.clone(), start_value);
    }
    let mut best = value;

    for _ in 0..NEWTON_STEPS {
        if stationarity_residual(y, &(&q * &w), mu_sq) < STATIONARITY_TOL * 1e-3 {
            break;
        }
        let (grad, hess) = rotation_derivatives(&r, &w);
        let gnorm = grad.norm();
        let step = match Cholesky::new(-&hess) {
            Some(c) => c.solve(&grad),
            None => grad.clone() / hess.norm().max(f64::MIN_POSITIVE),
        };
        let mut omega = DMatrix::zeros(m, m);
        let mut g = 0;
        for k in 0..m {
            for l in k + 1..m {
                omega += skew_generator(m, k, l) * step[g];
                g += 1;
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &w * cayley(&(&omega * t));
            let v = eval(&cand);
            let band = ROUNDING_SLACK * (1.0 + value.abs());
            let level = v >= best - band;
            if v > value + band || (level && rotation_derivatives(&r, &cand).0.norm() < gnorm) {
                w = cand;
                value = v;
                best = best.max(v);
                trace.push(v);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (&q * w, value)
}

/// Weighted optimal projected variance of the components `y`.
///
/// Runs the fixed-point ascent from the polar basis of `y` and from its
/// pivoted QR basis, and keeps the better end point, so the result is never
/// below the UP- or QR-projected value.
pub fn optimal_projection(
    y: &DMatrix<f64>,
    weights: Option<&Weights>,
    opts: FixedPointOptions,
) -> Result<OptimalProjection> {
    ensure_full_column_rank(y, "component matrix")?;
    let m = y.ncols();
    let mu_sq = match weights {
        Some(w) => {
            w.check_len(m)?;
            w.squared()
        }
        None => DVector::from_element(m, 1.0),
    };
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let polar_start = polar_unchecked(y).u;
    let qr_start = qr_decompose(y, true)?.basis_in_original_order();
    let from_polar = fixed_point(y, polar_start, &mu_sq, opts)?;
    let from_qr = fixed_point(y, qr_start, &mu_sq, opts)?;
    let best = if from_qr.value > from_polar.value + 1e-12 * (1.0 + from_polar.value) {
        from_qr
    } else {
        from_polar
    };
    if !best.converged {
        return Err(Error::NonConverged {
            iterations: best.iterations,
            objective: best.value,
            partial: PartialResult::Projection(Box::new(best)),
        });
    }
    Ok(best)
}

/// Optimal projected explained variance `max_{X^T X = I} sum mu_j^2 <y_j, x_j>^2`
/// of `Y = A Z` (unit weights when `weights` is `None`).
pub fn optimal_projected_var(
    a: &DataMatrix,
    z: &Loadings,
    weights: Option<&Weights>,
    opts: FixedPointOptions,
) -> Result<OptimalProjection> {
    let comps = Components::new(a, z)?;
    optimal_projection(comps.matrix(), weights, opts)
}

/// The six explained-variance definitions, in the column order used by
/// ranking reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Definition {
    #[serde(rename = "subspVar")]
    Subspace,
    #[serde(rename = "optprojVar")]
    OptProj,
    #[serde(rename = "UPprojVar")]
    UpProj,
    #[serde(rename = "QRprojVar")]
    QrProj,
    #[serde(rename = "QRnormVar")]
    QrNorm,
    #[serde(rename = "UPnormVar")]
    UpNorm,
}

impl Definition {
    pub const ALL: [Definition; 6] = [
        Definition::Subspace,
        Definition::OptProj,
        Definition::UpProj,
        Definition::QrProj,
        Definition::QrNorm,
        Definition::UpNorm,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Definition::Subspace => "subspVar",
            Definition::OptProj => "optprojVar",
            Definition::UpProj => "UPprojVar",
            Definition::QrProj => "QRprojVar",
            Definition::QrNorm => "QRnormVar",
            Definition::UpNorm => "UPnormVar",
        }
    }

    pub fn index(self) -> usize {
        Definition::ALL.iter().position(|d| *d == self).expect("listed")
    }

    pub fn is_projected(self) -> bool {
        matches!(self, Definition::OptProj | Definition::UpProj | Definition::QrProj)
    }
}

impl fmt::Display for Definition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// All six explained variances of one `(A, Z)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpVarReport {
    pub subsp: f64,
    pub qr_norm: f64,
    pub up_norm: f64,
    pub qr_proj: f64,
    pub up_proj: f64,
    pub opt_proj: f64,
    pub pev_subsp: f64,
    pub pev_qr_norm: f64,
    pub pev_up_norm: f64,
    pub pev_qr_proj: f64,
    pub pev_up_proj: f64,
    pub pev_opt_proj: f64,
    /// `||Y||_F^2`.
    pub total_var_y: f64,
    /// `||A||_F^2`.
    pub total_var_a: f64,
    /// `sigma_1^2 + ... + sigma_m^2`.
    pub pca_bound: f64,
}

impl ExpVarReport {
    pub fn value(&self, def: Definition) -> f64 {
        match def {
            Definition::Subspace => self.subsp,
            Definition::OptProj => self.opt_proj,
            Definition::UpProj => self.up_proj,
            Definition::QrProj => self.qr_proj,
            Definition::QrNorm => self.qr_norm,
            Definition::UpNorm => self.up_norm,
        }
    }

    pub fn pev(&self, def: Definition) -> f64 {
        match def {
            Definition::Subspace => self.pev_subsp,
            Definition::OptProj => self.pev_opt_proj,
            Definition::UpProj => self.pev_up_proj,
            Definition::QrProj => self.pev_qr_proj,
            Definition::QrNorm => self.pev_qr_norm,
            Definition::UpNorm => self.pev_up_norm,
        }
    }

    /// pev values in [`Definition::ALL`] order.
    pub fn pevs(&self) -> [f64; 6] {
        Definition::ALL.map(|d| self.pev(d))
    }

    fn check_invariants(&self) -> Result<()> {
        let slack = ORDERING_SLACK * self.pca_bound.max(1.0);
        let fail = |what: String| Err(Error::InvariantViolation(what));
        for def in Definition::ALL {
            let v = self.value(def);
            if !(v.is_finite() && v >= -slack) {
                return fail(format!("{def} = {v} is not a finite non-negative value"));
            }
            if v > self.pca_bound + slack {
                return fail(format!("{def} = {v} exceeds the PCA bound {}", self.pca_bound));
            }
        }
        let cap = self.subsp.min(self.total_var_y) + slack;
        for def in [Definition::QrProj, Definition::UpProj, Definition::OptProj] {
            if self.value(def) > cap {
                return fail(format!("{def} exceeds min(subspVar, ||Y||^2)"));
            }
        }
        for def in [Definition::QrNorm, Definition::UpNorm] {
            if self.value(def) > self.subsp + slack {
                return fail(format!("{def} exceeds subspVar"));
            }
        }
        if self.opt_proj < self.qr_proj.max(self.up_proj) - slack {
            return fail("optprojVar is below another projected variance".into());
        }
        Ok(())
    }
}

/// Options shared by [`report_with`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportOptions {
    pub qr_pivot: bool,
    pub fixed_point: FixedPointOptions,
}

impl ReportOptions {
    pub fn pivoted() -> Self {
        Self {
            qr_pivot: true,
            fixed_point: FixedPointOptions::default(),
        }
    }
}

/// All six definitions and their pev, with max-norm pivoted QR.
pub fn report(a: &DataMatrix, z: &Loadings) -> Result<ExpVarReport> {
    report_with(a, z, ReportOptions::pivoted())
}

pub fn report_with(a: &DataMatrix, z: &Loadings, opts: ReportOptions) -> Result<ExpVarReport> {
    let comps = Components::new(a, z)?;
    let y = comps.matrix();
    let zm = z.matrix();
    let m = z.m();

    let qr = qr_decompose(y, opts.qr_pivot)?;
    let x_qr = qr.basis_in_original_order();
    let polar = polar_unchecked(y);

    let subsp = subspace_of(y, zm)?;
    let qr_norm = normalized_of(a, y, zm, &x_qr)?;
    let up_norm = normalized_of(a, y, zm, &polar.u)?;
    let qr_proj = qr.r.diagonal().norm_squared();
    let up_proj = polar.p.diagonal().norm_squared();

    let mu_sq = DVector::from_element(m, 1.0);
    let fp = opts.fixed_point;
    let mut best = fixed_point(y, polar.u.clone(), &mu_sq, fp)?;
    let from_qr = fixed_point(y, x_qr, &mu_sq, fp)?;
    if from_qr.value > best.value + 1e-12 * (1.0 + best.value) {
        best = from_qr;
    }
    if !best.converged {
        return Err(Error::NonConverged {
            iterations: best.iterations,
            objective: best.value,
            partial: PartialResult::Projection(Box::new(best)),
        });
    }
    let opt_proj = best.value;

    let total_var_a = a.total_variance();
    let pev = |v: f64| v / total_var_a;
    let rep = ExpVarReport {
        subsp,
        qr_norm,
        up_norm,
        qr_proj,
        up_proj,
        opt_proj,
        pev_subsp: pev(subsp),
        pev_qr_norm: pev(qr_norm),
        pev_up_norm: pev(up_norm),
        pev_qr_proj: pev(qr_proj),
        pev_up_proj: pev(up_proj),
        pev_opt_proj: pev(opt_proj),
        total_var_y: comps.total_variance(),
        total_var_a,
        pca_bound: a.svd().pca_bound(m),
    };
    rep.check_invariants()?;
    Ok(rep)
}
