//! Robust estimation of sparse Gaussian graphical models by trimming.
//!
//! The trimmed graphical lasso estimates a sparse precision (inverse
//! covariance) matrix from samples that may contain outliers. It minimizes
//! a weighted, l1-penalized Gaussian negative log-likelihood in which
//! binary weights retain only the `h` samples the current model explains
//! best, analogous to least trimmed squares in regression; `h = n` recovers
//! the vanilla graphical lasso. The problem is biconvex, and two strategies
//! are provided: a single proximal gradient step per weight update
//! ([`Strategy::Composite`]) and full inner solves ([`Strategy::Alternating`]).
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the command
//! line live in the companion CLI crate. Everything here is deterministic:
//! fits given their inputs, generators given a `(seed, stream)` pair.

#![no_std]
// `!(x > 0.0)`-style guards are deliberate throughout: unlike the rewrites
// clippy suggests, they reject NaN. Indexed loops mirror the matrix math.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod eval;
pub mod matrix;
pub mod model;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{
    auc, cv_folds, edges_of, eq5_bounds, estimation_errors, f1_score, roc_point,
    theory_diagnostics, trimmed_cv, CvCell, CvReport, EdgeSet, OutlierModel, RocCurve, RocPoint,
    TheoryDiagnostics, TheoryParams, DEFAULT_EDGE_THRESHOLD,
};
pub use matrix::{
    cholesky, inverse_from_factor, log_det, min_eigenvalue, project_l1_ball,
    soft_threshold_offdiag, spectral_norm, CholeskyFactor, PrecisionEstimate, SymMatrix,
};
pub use model::{
    objective, objective_with_cov, per_sample_nll, smooth_gradient, weighted_empirical_cov,
    ObjectiveValue, SampleSet, TrimWeights,
};
pub use solver::{
    check_stationarity, composite_step, fit, fit_path, fit_with_inspect, update_weights, FitResult,
    PathEntry, SolverConfig, StationarityReport, Strategy, Termination, TraceEntry,
};
pub use synth::{
    gen_contaminated, gen_hub_precision, sample_gaussian, ContaminatedSample, GroundTruth,
    HubNetworkParams, IntervalRule, RngStream, Scenario,
};
