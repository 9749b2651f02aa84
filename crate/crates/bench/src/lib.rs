//! Inputs shared by the benchmarks.

use expvar_core::{generate_matrix, sparsify_loadings, DataMatrix, Loadings, SimScheme};

/// First simulated matrix of the close-eigenvalue scheme and its
/// soft-thresholded loadings at `lambda`.
pub fn fixture(lambda: f64) -> (DataMatrix, Loadings) {
    let scheme = SimScheme::close(20_240_917);
    let a = generate_matrix(&scheme, 0).expect("valid scheme");
    let z = sparsify_loadings(&a, scheme.m, lambda).expect("loadings keep full rank");
    (a, z)
}
