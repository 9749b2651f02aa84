//! Explained variance of correlated (sparse) principal components.
//!
//! Six ways to measure how much of the variance of a data matrix `A` is
//! captured by components `Y = A Z` with unit-norm loadings `Z`, a weighted
//! block PCA solver with an optimality certificate, simulation and
//! experiment drivers.

pub mod blockpca;
pub mod error;
pub mod expvar;
pub mod linalg;
pub mod report;
pub mod simulate;
pub mod witness;

pub use blockpca::{
    certify_pca_optimality, find_parasitic_up, solve_weighted, BlockPcaSolution, Init,
    OptimalityCertificate, ParasiticSearch, SolveOptions,
};
pub use error::{Error, PartialResult, Result};
pub use expvar::{
    normalized_var, optimal_projected_var, projected_var, report, report_with, subspace_var,
    BasisRule, Components, Definition, ExpVarReport, FixedPointOptions, Loadings,
    OptimalProjection, OrthoBasis, ReportOptions, Weights,
};
pub use linalg::{DataMatrix, SpectralModel};
pub use report::{CurveTable, ExperimentConfig, RankingReport, RankingRun};
pub use simulate::{generate_matrix, sparsify_loadings, SimScheme, SparsityGrid};
