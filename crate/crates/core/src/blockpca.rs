//! Block PCA formulations without orthogonality constraints on the loadings.
//!
//! * [`solve_weighted`] maximizes the weighted optimal projected variance by
//!   alternating a closed-form loading update with a polar ascent step on the
//!   basis. With strictly decreasing weights and a distinct spectrum its only
//!   maximizer is the SVD solution `Z = V_m`.
//! * [`certify_pca_optimality`] checks the three conditions under which a
//!   projected variance attains `sigma_1^2 + ... + sigma_m^2`.
//! * [`maximize_projected`] runs projected gradient ascent of the QR- or
//!   UP-projected variance over unit-norm loadings, and
//!   [`find_parasitic_up`] uses it to locate non-SVD maximizers of the
//!   UP-projected variance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, PartialResult, Result};
use crate::expvar::{
    projections, stationarity_residual, weighted_projected_objective, BasisRule, Components,
    Loadings, Weights, ROUNDING_SLACK,
};
use crate::linalg::{
    columns_equal_up_to_sign, householder_qr, is_signed_permutation_of, polar_unchecked,
    singular_values, DataMatrix, RANK_TOL,
};
use crate::simulate::{gaussian_matrix, stream_rng};

/// Tolerance for declaring `Z` equal to `V_m` column-wise up to sign.
pub const SVD_MATCH_TOL: f64 = 1e-6;

/// Relative spectral gap under which uniqueness claims are downgraded.
pub const DEGENERATE_GAP: f64 = 1e-8;

/// Tolerance of the optimality certificate residuals.
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// Absolute tolerance on equal diagonal projections of a parasitic point.
pub const PARASITIC_EQUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BlockPcaSolution {
    pub z_star: DMatrix<f64>,
    pub x_star: DMatrix<f64>,
    pub objective: f64,
    /// `sum mu_j^2 sigma_j^2`, the maximum of the weighted formulation.
    pub optimum: f64,
    pub iterations: usize,
    pub converged: bool,
    pub matched_svd: bool,
    /// Some gap among `sigma_1 .. sigma_{m+1}` is below [`DEGENERATE_GAP`]
    /// (relative to `sigma_1`): the maximizer need not be unique.
    pub degenerate_spectrum: bool,
    pub weights: Vec<f64>,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Init {
    Loadings(Loadings),
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative objective increase below which an iterate may stop.
    pub tol: f64,
    /// Stationarity residual required as well; tighter than for the optimal
    /// projection because the loadings themselves are the output.
    pub stationarity_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            stationarity_tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

fn random_unit_loadings(p: usize, m: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, stream);
    let mut z = gaussian_matrix(&mut rng, p, m);
    for mut c in z.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    z
}

fn check_m(a: &DataMatrix, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if m > a.rank() {
        return Err(Error::invalid(format!(
            "m = {m} exceeds the rank {} of the data matrix",
            a.rank()
        )));
    }
    Ok(())
}

/// Closed-form loading step: `z_j = A^T x_j / ||A^T x_j||`.
fn loadings_from_basis(a: &DataMatrix, x: &DMatrix<f64>, previous: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = a.values().tr_mul(x);
    for (j, mut c) in z.column_iter_mut().enumerate() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        } else {
            c.copy_from(&previous.column(j));
        }
    }
    z
}

/// Maximizes `max_X sum mu_j^2 <A z_j, x_j>^2` over unit-norm loadings by
/// alternating `z_j = A^T x_j / ||A^T x_j||` with
/// `X <- polar(2 Y diag(mu_j^2 <x_j, y_j>))`.
pub fn solve_weighted(
    a: &DataMatrix,
    m: usize,
    weights: &Weights,
    opts: SolveOptions,
    init: Init,
) -> Result<BlockPcaSolution> {
    check_m(a, m)?;
    if weights.len() != m {
        return Err(Error::invalid(format!("got {} weights for m = {m}", weights.len())));
    }
    if !(opts.tol > 0.0 && opts.stationarity_tol > 0.0) {
        return Err(Error::invalid("tolerances must be positive"));
    }
    let z0 = match init {
        Init::Loadings(l) => {
            if l.m() != m || l.p() != a.p() {
                return Err(Error::invalid("initial loadings have the wrong shape"));
            }
            l.into_matrix()
        }
        Init::Random { seed } => random_unit_loadings(a.p(), m, seed, 0),
    };
    let mu_sq = weights.squared();
    let spectrum = a.svd();
    let optimum: f64 = (0..m).map(|j| mu_sq[j] * spectrum.sigma[j].powi(2)).sum();

    let mut y = a.values() * &z0;
    let mut x = polar_unchecked(&y).u;
    let mut z = loadings_from_basis(a, &x, &z0);
    y = a.values() * &z;
    let mut objective = weighted_projected_objective(&y, &x, &mu_sq);
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let d = projections(&y, &x).component_mul(&mu_sq) * 2.0;
        let x_next = polar_unchecked(&(&y * DMatrix::from_diagonal(&d))).u;
        let z_next = loadings_from_basis(a, &x_next, &z);
        let y_next = a.values() * &z_next;
        let next = weighted_projected_objective(&y_next, &x_next, &mu_sq);
        iterations += 1;

        let slack = opts.tol * (1.0 + objective);
        if next < objective - slack.max(1e-12 * (1.0 + objective)) {
            return Err(Error::InvariantViolation(format!(
                "block PCA objective decreased from {objective} to {next}"
            )));
        }
        let increase = next - objective;
        if next >= objective - ROUNDING_SLACK * (1.0 + objective.abs()) {
            x = x_next;
            z = z_next;
            y = y_next;
            objective = next;
            trace.push(objective);
        }
        if increase < slack && stationarity_residual(&y, &x, &mu_sq) < opts.stationarity_tol {
            converged = true;
            break;
        }
    }

    let sol = BlockPcaSolution {
        matched_svd: columns_equal_up_to_sign(&z, &spectrum.v_m(m), SVD_MATCH_TOL),
        degenerate_spectrum: spectrum.min_relative_gap(m) < DEGENERATE_GAP,
        z_star: z,
        x_star: x,
        objective,
        optimum,
        iterations,
        converged,
        weights: weights.values().to_vec(),
        trace,
    };
    if sol.objective > optimum + 1e-8 * optimum.max(1.0) {
        return Err(Error::InvariantViolation(format!(
            "block PCA objective {} exceeds sum mu_j^2 sigma_j^2 = {optimum}",
            sol.objective
        )));
    }
    if !sol.converged {
        return Err(Error::NonConverged {
            iterations: sol.iterations,
            objective: sol.objective,
            partial: PartialResult::Solution(Box::new(sol)),
        });
    }
    Ok(sol)
}

/// Evidence for or against `Y = A Z` attaining the PCA maximum of a
/// projected variance.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalityCertificate {
    /// `span{Z} = span{V_m}`.
    pub span_match: bool,
    pub span_residual: f64,
    /// Largest cosine between distinct columns in the `(A_m^T A_m)^{-1}`
    /// inner product.
    pub weighted_orth_residual: f64,
    /// How far the unit normals `(A_m^{-1})^T z_j` are from an orthonormal
    /// basis that attains the PCA maximum.
    pub normal_basis_residual: f64,
    pub is_pca_optimal: bool,
}

pub fn certify_pca_optimality(a: &DataMatrix, z: &Loadings) -> Result<OptimalityCertificate> {
    let comps = Components::new(a, z)?;
    let m = z.m();
    let spectrum = a.svd();
    let vm = spectrum.v_m(m);
    let um = spectrum.u_m(m);
    let sigma = spectrum.sigma.rows(0, m).into_owned();
    let zm = z.matrix();

    // coordinates in the singular basis
    let zt = vm.tr_mul(zm);
    let span_residual = (&vm * &zt - zm).norm();
    let span_match = span_residual < CERTIFICATE_TOL;

    let inv_sigma = sigma.map(|s| 1.0 / s);
    let inv_sigma_sq = sigma.map(|s| 1.0 / (s * s));
    let gram = zt.tr_mul(&DMatrix::from_diagonal(&inv_sigma_sq)) * &zt;
    let mut weighted_orth_residual: f64 = 0.0;
    for j in 0..m {
        for k in 0..m {
            if j != k {
                let cos = gram[(j, k)] / (gram[(j, j)] * gram[(k, k)]).sqrt();
                weighted_orth_residual = weighted_orth_residual.max(cos.abs());
            }
        }
    }

    let mut normals = &um * DMatrix::from_diagonal(&inv_sigma) * &zt;
    for mut c in normals.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    let bound = spectrum.pca_bound(m);
    let attained = projections(comps.matrix(), &normals).norm_squared();
    let normal_basis_residual =
        (normals.tr_mul(&normals) - DMatrix::identity(m, m)).norm() + (attained - bound).abs() / bound;

    Ok(OptimalityCertificate {
        span_match,
        span_residual,
        weighted_orth_residual,
        normal_basis_residual,
        is_pca_optimal: span_match
            && weighted_orth_residual < CERTIFICATE_TOL
            && normal_basis_residual < CERTIFICATE_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    /// Stop once the tangent gradient norm is below `tol * (1 + objective)`.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50_000,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AscentRun {
    pub z: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub trace: Vec<f64>,
}

/// QR-projected variance `sum r_jj^2` of `A Z` (max-norm pivoting) and its
/// Euclidean gradient in `Z`, `A^T (2 Q diag(r_jj^2) R^{-T})` with columns
/// returned to their original order. `None` when `A Z` is rank deficient.
pub fn qr_projected_with_gradient(a: &DataMatrix, z: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    let y = a.values() * z;
    if !full_rank(&y) {
        return None;
    }
    let f = householder_qr(&y, true);
    let rd = f.r.diagonal();
    let value = rd.norm_squared();
    let r_inv = f.r.clone().try_inverse()?;
    let d = DMatrix::from_diagonal(&rd.map(|r| 2.0 * r * r));
    let grad_perm = &f.q * d * r_inv.transpose();
    let mut grad_y = DMatrix::zeros(y.nrows(), y.ncols());
    for (k, &j) in f.perm.iter().enumerate() {
        grad_y.set_column(j, &grad_perm.column(k));
    }
    Some((value, a.values().tr_mul(&grad_y)))
}

/// UP-projected variance `sum p_jj^2` with `P = (Y^T Y)^{1/2}`, `Y = A Z`, and
/// its gradient `A^T (4 Y K)` where `P K + K P = diag(P)`.
pub fn up_projected_with_gradient(a: &DataMatrix, z: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    let y = a.values() * z;
    if !full_rank(&y) {
        return None;
    }
    let gram = y.tr_mul(&y);
    let eig = SymmetricEigen::new((&gram + gram.transpose()) * 0.5);
    let s = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let g = &eig.eigenvectors;
    let p = g * DMatrix::from_diagonal(&s) * g.transpose();
    let pd = p.diagonal();
    let value = pd.norm_squared();
    // Sylvester equation solved in the eigenbasis of P
    let dt = g.tr_mul(&DMatrix::from_diagonal(&pd)) * g;
    let m = s.len();
    let kt = DMatrix::from_fn(m, m, |i, j| dt[(i, j)] / (s[i] + s[j]));
    let k = g * kt * g.transpose();
    Some((value, a.values().tr_mul(&(y * k * 4.0))))
}

fn full_rank(y: &DMatrix<f64>) -> bool {
    let sv = singular_values(y);
    let m = y.ncols();
    m <= y.nrows() && sv[0] > 0.0 && sv[m - 1] > RANK_TOL * sv[0]
}

fn normalize_columns(z: &mut DMatrix<f64>) {
    for mut c in z.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
}

/// Projection of the gradient onto the tangent space of the product of
/// unit spheres at `z`.
fn tangent(z: &DMatrix<f64>, grad: &DMatrix<f64>) -> DMatrix<f64> {
    let mut t = grad.clone();
    for (j, mut c) in t.column_iter_mut().enumerate() {
        let zj = z.column(j);
        let along = zj.dot(&c);
        c.axpy(-along, &zj, 1.0);
    }
    t
}

/// Projected gradient ascent over unit-norm columns: step along the tangent
/// gradient, renormalize each column, halve the step until the objective
/// increases (or, at rounding level, until the gradient shrinks), double it
/// after every accepted step.
pub fn ascend_unit_columns<F>(z0: DMatrix<f64>, eval: F, opts: AscentOptions) -> Result<AscentRun>
where
    F: Fn(&DMatrix<f64>) -> Option<(f64, DMatrix<f64>)>,
{
    let mut z = z0;
    normalize_columns(&mut z);
    let (mut value, mut grad) =
        eval(&z).ok_or_else(|| Error::rank("starting loadings give rank-deficient components"))?;
    let mut trace = vec![value];
    let mut best = value;
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    let mut tg = tangent(&z, &grad);

    while iterations < opts.max_iter {
        let gnorm = tg.norm();
        if gnorm <= opts.tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..80 {
            let mut cand = &z + &tg * step;
            normalize_columns(&mut cand);
            if let Some((v, g)) = eval(&cand) {
                // Past the rounding floor of the objective, a step that keeps
                // it level and shrinks the gradient still makes progress.
                let band = ROUNDING_SLACK * (1.0 + value.abs());
                let rises = v > value + band;
                let level = v >= best - band;
                if rises || (level && tangent(&cand, &g).norm() < gnorm) {
                    z = cand;
                    value = v;
                    best = best.max(v);
                    grad = g;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // no ascent direction at machine precision
            break;
        }
        trace.push(value);
        step = (step * 2.0).min(1e6);
        tg = tangent(&z, &grad);
    }
    let gradient_norm = tg.norm();
    converged = converged || gradient_norm <= opts.tol * (1.0 + value.abs());
    Ok(AscentRun {
        z,
        objective: value,
        iterations,
        converged,
        gradient_norm,
        trace,
    })
}

/// Projected gradient ascent of the QR- or UP-projected variance from `z0`.
pub fn maximize_projected(
    a: &DataMatrix,
    z0: DMatrix<f64>,
    rule: BasisRule,
    opts: AscentOptions,
) -> Result<AscentRun> {
    if z0.nrows() != a.p() {
        return Err(Error::invalid("initial loadings have the wrong number of rows"));
    }
    match rule {
        BasisRule::Qr => ascend_unit_columns(z0, |z| qr_projected_with_gradient(a, z), opts),
        BasisRule::Up => ascend_unit_columns(z0, |z| up_projected_with_gradient(a, z), opts),
        BasisRule::QrUnpivoted => Err(Error::invalid(
            "ascent is implemented for the pivoted QR and the polar rules only",
        )),
    }
}

/// Random-start maximizations of a projected variance; restart `i` starts
/// from Gaussian loadings drawn from stream `i` of `seed`.
pub fn multistart_projected(
    a: &DataMatrix,
    m: usize,
    rule: BasisRule,
    opts: AscentOptions,
    restarts: usize,
    seed: u64,
) -> Result<Vec<AscentRun>> {
    check_m(a, m)?;
    (0..restarts)
        .map(|i| maximize_projected(a, random_unit_loadings(a.p(), m, seed, i as u64), rule, opts))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaximizerKind {
    /// A signed permutation of `V_m`.
    Svd,
    /// At the PCA maximum with all diagonal projections equal.
    Parasitic,
    /// Below the maximum, or at it without equal projections.
    Other,
}

#[derive(Debug, Clone)]
pub struct ClassifiedRun {
    pub run: AscentRun,
    pub kind: MaximizerKind,
    pub projections: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ParasiticSearch {
    pub pca_bound: f64,
    pub runs: Vec<ClassifiedRun>,
    pub parasitic: Vec<Loadings>,
}

/// Classifies an end point of UP-projected ascent.
pub fn classify_up_maximizer(a: &DataMatrix, run: &AscentRun) -> ClassifiedRun {
    let m = run.z.ncols();
    let bound = a.svd().pca_bound(m);
    let y = a.values() * &run.z;
    let x = polar_unchecked(&y).u;
    let d = projections(&y, &x);
    let at_max = (run.objective - bound).abs() <= 1e-9 * bound;
    let equal = d.max() - d.min() <= PARASITIC_EQUAL_TOL;
    let kind = if !at_max {
        MaximizerKind::Other
    } else if is_signed_permutation_of(&run.z, &a.svd().v_m(m), 1e-5) {
        MaximizerKind::Svd
    } else if equal && m >= 2 {
        MaximizerKind::Parasitic
    } else {
        MaximizerKind::Other
    };
    ClassifiedRun {
        run: run.clone(),
        kind,
        projections: d.iter().copied().collect(),
    }
}

/// Searches for parasitic maximizers of the UP-projected variance: loadings
/// other than `V_m` whose components attain `sigma_1^2 + ... + sigma_m^2`
/// with equal projections `<y_j, x_j>`. For `m = 1` no parasitic point
/// exists and the result is empty.
pub fn find_parasitic_up(
    a: &DataMatrix,
    m: usize,
    opts: AscentOptions,
    restarts: usize,
    seed: u64,
) -> Result<ParasiticSearch> {
    check_m(a, m)?;
    let pca_bound = a.svd().pca_bound(m);
    if m < 2 {
        return Ok(ParasiticSearch {
            pca_bound,
            runs: Vec::new(),
            parasitic: Vec::new(),
        });
    }
    let runs: Vec<ClassifiedRun> = multistart_projected(a, m, BasisRule::Up, opts, restarts, seed)?
        .iter()
        .map(|r| classify_up_maximizer(a, r))
        .collect();
    let parasitic = runs
        .iter()
        .filter(|r| r.kind == MaximizerKind::Parasitic)
        .filter_map(|r| Loadings::new(r.run.z.clone()).ok())
        .collect();
    Ok(ParasiticSearch {
        pca_bound,
        runs,
        parasitic,
    })
}

/// Loadings spanning `V_m` whose columns are `(A_m^T A_m)^{-1}`-orthogonal:
/// `Z = V_m diag(sigma) Q`, columns renormalized, for an orthogonal `Q`.
pub fn sigma_orthogonal_loadings(a: &DataMatrix, q: &DMatrix<f64>) -> Result<Loadings> {
    let m = q.ncols();
    check_m(a, m)?;
    let s = a.svd();
    let sigma = DVector::from_iterator(m, s.sigma.iter().take(m).copied());
    Loadings::normalized(s.v_m(m) * DMatrix::from_diagonal(&sigma) * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expvar::{optimal_projected_var, report, FixedPointOptions};
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn diag(values: &[f64]) -> DataMatrix {
        DataMatrix::new(DMatrix::from_diagonal(&DVector::from_column_slice(values))).unwrap()
    }

    fn rotation(t: f64) -> DMatrix<f64> {
        dmatrix![t.cos(), -t.sin(); t.sin(), t.cos()]
    }

    #[test]
    fn weighted_solution_on_diag_531() {
        let a = diag(&[5.0, 3.0, 1.0]);
        let w = Weights::new(vec![2.0, 1.0]).unwrap();
        let sol = solve_weighted(&a, 2, &w, SolveOptions::default(), Init::Random { seed: 7 }).unwrap();
        assert!(sol.converged && sol.matched_svd);
        assert_relative_eq!(sol.objective, 109.0, epsilon = 1e-8);
        assert!(columns_equal_up_to_sign(&sol.z_star, &DMatrix::identity(3, 2), 1e-6));
        assert!(crate::expvar::trace_is_monotone(&sol.trace));
    }

    #[test]
    fn constant_weights_reach_the_maximum() {
        let a = diag(&[5.0, 3.0, 1.0]);
        let sol = solve_weighted(&a, 2, &Weights::ones(2), SolveOptions::default(), Init::Random { seed: 3 })
            .unwrap();
        assert_relative_eq!(sol.objective, 34.0, epsilon = 1e-8);
        // the loadings span V_2 even when they are not V_2 itself
        let c = certify_pca_optimality(&a, &Loadings::new(sol.z_star.clone()).unwrap()).unwrap();
        assert!(c.span_match);
    }

    #[test]
    fn m_above_rank_is_invalid() {
        let a = diag(&[5.0, 3.0, 0.0]);
        let r = solve_weighted(&a, 3, &Weights::ones(3), SolveOptions::default(), Init::Random { seed: 1 });
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn non_convergence_carries_partial_solution() {
        let a = diag(&[5.0, 4.9, 1.0]);
        let w = Weights::new(vec![1.01, 1.0]).unwrap();
        let opts = SolveOptions { max_iter: 3, ..SolveOptions::default() };
        match solve_weighted(&a, 2, &w, opts, Init::Random { seed: 2 }) {
            Err(Error::NonConverged { partial: PartialResult::Solution(s), .. }) => {
                assert!(!s.converged);
                assert_eq!(s.iterations, 3);
            }
            other => panic!("expected NonConverged, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_spectrum_is_flagged() {
        let a = diag(&[2.0, 2.0, 1.0]);
        let sol = solve_weighted(&a, 2, &Weights::new(vec![2.0, 1.0]).unwrap(), SolveOptions::default(), Init::Random { seed: 5 })
            .unwrap();
        assert!(sol.degenerate_spectrum);
        assert_relative_eq!(sol.objective, 20.0, epsilon = 1e-8);
    }

    #[test]
    fn certificate_for_svd_loadings() {
        let a = diag(&[3.0, 2.0, 1.0]);
        let c = certify_pca_optimality(&a, &Loadings::new(DMatrix::identity(3, 2)).unwrap()).unwrap();
        assert!(c.is_pca_optimal);
        assert!(c.span_residual < 1e-14 && c.weighted_orth_residual < 1e-14 && c.normal_basis_residual < 1e-14);
    }

    #[test]
    fn certificate_rejects_rotated_basis_of_leading_plane() {
        let a = diag(&[3.0, 2.0, 1.0]);
        let mut z = DMatrix::zeros(3, 2);
        z.view_mut((0, 0), (2, 2)).copy_from(&rotation(std::f64::consts::PI / 6.0));
        let c = certify_pca_optimality(&a, &Loadings::new(z).unwrap()).unwrap();
        assert!(c.span_match);
        assert!(!c.is_pca_optimal);
        assert!(c.weighted_orth_residual > 0.1);
    }

    #[test]
    fn certificate_detects_span_mismatch() {
        let a = diag(&[3.0, 2.0, 1.0]);
        let z = Loadings::normalized(dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.5]).unwrap();
        assert!(!certify_pca_optimality(&a, &z).unwrap().span_match);
    }

    #[test]
    fn sigma_orthogonal_loadings_attain_pca_bound() {
        let a = diag(&[4.0, 3.0, 1.0, 0.5]);
        let z = sigma_orthogonal_loadings(&a, &rotation(0.6)).unwrap();
        assert!(certify_pca_optimality(&a, &z).unwrap().is_pca_optimal);
        let opt = optimal_projected_var(&a, &z, None, FixedPointOptions::default()).unwrap();
        assert_relative_eq!(opt.value, 25.0, max_relative = 1e-10);
        // not orthogonal loadings, yet a maximizer
        assert!(z.matrix().column(0).dot(&z.matrix().column(1)).abs() > 0.01);
        let rep = report(&a, &z).unwrap();
        assert_relative_eq!(rep.opt_proj, 25.0, max_relative = 1e-10);
    }

    fn fd_gradient<F: Fn(&DMatrix<f64>) -> f64>(z: &DMatrix<f64>, f: F) -> DMatrix<f64> {
        let h = 1e-6;
        DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[(i, j)] += h;
            zm[(i, j)] -= h;
            (f(&zp) - f(&zm)) / (2.0 * h)
        })
    }

    #[test]
    fn qr_gradient_matches_finite_differences() {
        let a = DataMatrix::new(crate::simulate::gaussian_matrix(&mut stream_rng(1, 0), 6, 4)).unwrap();
        let z = random_unit_loadings(4, 3, 2, 0);
        let (_, g) = qr_projected_with_gradient(&a, &z).unwrap();
        let fd = fd_gradient(&z, |z| qr_projected_with_gradient(&a, z).unwrap().0);
        assert!((&g - &fd).amax() <= 1e-6 * (1.0 + g.amax()), "{g} vs {fd}");
    }

    #[test]
    fn up_gradient_matches_finite_differences() {
        let a = DataMatrix::new(crate::simulate::gaussian_matrix(&mut stream_rng(3, 0), 6, 4)).unwrap();
        let z = random_unit_loadings(4, 3, 4, 0);
        let (_, g) = up_projected_with_gradient(&a, &z).unwrap();
        let fd = fd_gradient(&z, |z| up_projected_with_gradient(&a, z).unwrap().0);
        assert!((&g - &fd).amax() <= 1e-6 * (1.0 + g.amax()), "{g} vs {fd}");
    }

    #[test]
    fn single_component_has_no_parasitic_point() {
        let a = diag(&[3.0, 2.0]);
        let s = find_parasitic_up(&a, 1, AscentOptions::default(), 5, 0).unwrap();
        assert!(s.parasitic.is_empty() && s.runs.is_empty());
    }
}
