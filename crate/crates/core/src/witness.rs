//! Constructed inputs on which a variance definition misbehaves: subspace
//! variance anomalies and normalized variances exceeding `||Y||_F^2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expvar::{normalized_var, subspace_var, BasisRule, Components, Loadings};
use crate::linalg::{is_signed_permutation_of, DataMatrix};
use crate::simulate::{gaussian_matrix, haar_orthonormal, stream_rng};

/// Relative margin a witness must clear to count.
pub const WITNESS_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Witness {
    pub a: DataMatrix,
    pub z: Loadings,
    /// The variance under test.
    pub value: f64,
    /// `||Y||_F^2`.
    pub total_var_y: f64,
    /// Largest off-diagonal correlation of the components.
    pub max_component_correlation: f64,
    /// Largest off-diagonal `|z_i^T z_j|`.
    pub max_loading_cosine: f64,
}

fn max_off_diagonal_cosine(g: &DMatrix<f64>) -> f64 {
    let m = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                worst = worst.max((g[(i, j)] / (g[(i, i)] * g[(j, j)]).sqrt()).abs());
            }
        }
    }
    worst
}

fn witness(a: &DataMatrix, z: Loadings, value: f64) -> Result<Witness> {
    let y = Components::new(a, &z)?;
    let yy = y.matrix().tr_mul(y.matrix());
    Ok(Witness {
        a: a.clone(),
        max_component_correlation: max_off_diagonal_cosine(&yy),
        max_loading_cosine: max_off_diagonal_cosine(&z.matrix().tr_mul(z.matrix())),
        total_var_y: y.total_variance(),
        value,
        z,
    })
}

/// Orthonormal loadings that are not a signed permutation of `V_m`: the
/// components are correlated yet subspace variance equals `||Y||_F^2`.
pub fn orthogonal_loadings_anomaly(a: &DataMatrix, m: usize, seed: u64) -> Result<Witness> {
    let vm = a.svd().v_m(m.min(a.rank()));
    for attempt in 0..16 {
        let z = Loadings::new(haar_orthonormal(&mut stream_rng(seed, attempt), a.p(), m))?;
        if is_signed_permutation_of(z.matrix(), &vm, 1e-6) {
            continue;
        }
        let value = subspace_var(a, &z)?;
        return witness(a, z, value);
    }
    Err(Error::invalid("could not draw loadings away from V_m"))
}

/// Loadings whose components are orthogonal while the loadings are not:
/// `Z = V_m Sigma_m^{-1} Q` with columns renormalized. Subspace variance then
/// exceeds `||Y||_F^2`.
pub fn orthogonal_components_anomaly(a: &DataMatrix, m: usize, seed: u64) -> Result<Witness> {
    if m < 2 || m > a.rank() {
        return Err(Error::invalid(format!("need 2 <= m <= rank = {}", a.rank())));
    }
    let s = a.svd();
    let inv_sigma = DVector::from_iterator(m, s.sigma.iter().take(m).map(|x| 1.0 / x));
    for attempt in 0..16 {
        let q = haar_orthonormal(&mut stream_rng(seed, attempt), m, m);
        let z = Loadings::normalized(s.v_m(m) * DMatrix::from_diagonal(&inv_sigma) * q)?;
        let value = subspace_var(a, &z)?;
        let w = witness(a, z, value)?;
        if w.value > w.total_var_y * (1.0 + WITNESS_MARGIN) {
            return Ok(w);
        }
    }
    Err(Error::invalid("spectrum too flat for an orthogonal-components anomaly"))
}

/// Random search for loadings on which the normalized variance of `rule`
/// exceeds `||Y||_F^2` by more than [`WITNESS_MARGIN`] (relative). Returns
/// the largest excess found, or `None` when the budget runs out.
pub fn search_normalized_counterexample(
    a: &DataMatrix,
    m: usize,
    rule: BasisRule,
    budget: usize,
    seed: u64,
) -> Result<Option<Witness>> {
    if m < 2 || m > a.rank() {
        return Err(Error::invalid(format!("need 2 <= m <= rank = {}", a.rank())));
    }
    let mut rng = stream_rng(seed, 0);
    let mut best: Option<(f64, Loadings, f64)> = None;
    for _ in 0..budget {
        let Ok(z) = Loadings::normalized(gaussian_matrix(&mut rng, a.p(), m)) else {
            continue;
        };
        let Ok(y) = Components::new(a, &z) else { continue };
        let Ok(value) = normalized_var(a, &z, rule) else {
            continue;
        };
        let excess = value / y.total_variance() - 1.0;
        if excess > WITNESS_MARGIN && best.as_ref().map_or(true, |b| excess > b.0) {
            best = Some((excess, z, value));
        }
    }
    best.map(|(_, z, value)| witness(a, z, value)).transpose()
}

/// Default searches used by the demos: `diag(3, 2)` for QR and a seeded
/// `diag(3, 2, 1)` family for UP, first hit wins.
pub fn default_normalized_counterexample(rule: BasisRule, seed: u64) -> Result<Option<Witness>> {
    let candidates: [&[f64]; 3] = [&[3.0, 2.0], &[3.0, 2.0, 1.0], &[4.0, 2.0, 1.0, 0.5]];
    for diag in candidates {
        let a = DataMatrix::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))?;
        if let Some(w) = search_normalized_counterexample(&a, 2, rule, 20_000, seed)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate_matrix, SimScheme};

    #[test]
    fn orthogonal_loadings_give_subspace_equal_total() {
        let a = generate_matrix(&SimScheme::different(4), 0).unwrap();
        let w = orthogonal_loadings_anomaly(&a, 3, 1).unwrap();
        assert!((w.value - w.total_var_y).abs() <= 1e-10 * w.total_var_y);
        assert!(w.max_loading_cosine < 1e-12);
        assert!(w.max_component_correlation > 1e-3);
    }

    #[test]
    fn orthogonal_components_give_subspace_above_total() {
        let a = generate_matrix(&SimScheme::different(4), 0).unwrap();
        let w = orthogonal_components_anomaly(&a, 3, 1).unwrap();
        assert!(w.value > w.total_var_y);
        assert!(w.max_component_correlation < 1e-10);
        assert!(w.max_loading_cosine > 1e-3);
    }

    #[test]
    fn qr_normalized_counterexample_is_found() {
        let w = default_normalized_counterexample(BasisRule::Qr, 0).unwrap().unwrap();
        assert!(w.value > w.total_var_y * (1.0 + WITNESS_MARGIN));
        assert_eq!(normalized_var(&w.a, &w.z, BasisRule::Qr).unwrap(), w.value);
    }
}
