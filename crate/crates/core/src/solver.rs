//! The two optimization strategies for the trimmed objective: alternating
//! full minimization over the precision matrix and the weights, and the
//! single-step composite (proximal) gradient scheme; plus regularization-path
//! driving and a first-order stationarity certificate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{
    cholesky, project_l1_ball, soft_threshold_offdiag, PrecisionEstimate, SymMatrix,
};
use crate::matrix::{inverse_from_factor, log_det};
use crate::model::{
    objective_with_cov, smooth_gradient, weighted_empirical_cov, CovTracker, SampleSet, TrimWeights,
};

/// Which optimization strategy drives the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One weight update followed by one proximal gradient step per
    /// iteration (partial minimization).
    Composite,
    /// One weight update followed by a full inner solve of the convex
    /// subproblem in the precision matrix.
    Alternating,
}

/// Solver configuration. All fits are deterministic given the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Off-diagonal l1 regularization weight, >= 0.
    pub lambda: f64,
    /// Number of samples retained by the trimming, 1 <= h <= n. Ideally the
    /// number of uncorrupted samples; h = n disables trimming. When h < p
    /// the weighted covariance is rank deficient; iterates stay PD through
    /// the log-det barrier and the line search, but expect slow progress.
    pub h: usize,
    /// Radius of the l1 ball constraint on all entries; infinite by
    /// default, in which case no projection is performed.
    pub radius: f64,
    pub max_iters: usize,
    /// Relative change of the total objective below which the fit stops.
    pub tol: f64,
    pub initial_step: f64,
    /// Multiplier in (0, 1) applied to the step while backtracking.
    pub backtrack_factor: f64,
    pub strategy: Strategy,
    /// Whether `fit_path` seeds each fit from the previous lambda's result.
    pub warm_start: bool,
}

impl SolverConfig {
    pub fn new(lambda: f64, h: usize) -> Self {
        SolverConfig {
            lambda,
            h,
            radius: f64::INFINITY,
            max_iters: 500,
            tol: 1e-6,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            strategy: Strategy::Composite,
            warm_start: true,
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_warm_start(mut self, warm_start: bool) -> Self {
        self.warm_start = warm_start;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidConfig("sample set is empty"));
        }
        if self.h < 1 || self.h > n {
            return Err(Error::InvalidConfig("h must satisfy 1 <= h <= n"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig("lambda must be nonnegative"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidConfig("radius must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidConfig(
                "initial_step must be positive and finite",
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidConfig("backtrack_factor must lie in (0, 1)"));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be positive"));
        }
        Ok(())
    }
}

/// Why a fit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    LineSearchFailed,
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
    pub weights_changed: bool,
}

/// A converged (or halted) fit: the estimate, the final trim weights, and
/// the per-iteration trace. Trace objectives are non-increasing across
/// accepted iterations (within 1e-10 slack).
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimate: PrecisionEstimate,
    pub weights: TrimWeights,
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
}

/// Subgradient-optimality violations of a fit at its final weights.
///
/// `max_zero_violation` is `max(|g_ij| - lambda, 0)` over zero
/// off-diagonals, `max_active_violation` is `max |g_ij + lambda sign(t_ij)|`
/// over nonzero off-diagonals, and `max_diag_gradient` is `max |g_ii|`,
/// where `g` is the smooth gradient. `weights_optimal` is whether the
/// weights re-derived from the estimate equal the stored ones. Assumes the
/// iterate is interior to the l1-ball constraint (the default, with
/// infinite radius).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    pub max_zero_violation: f64,
    pub max_active_violation: f64,
    pub max_diag_gradient: f64,
    pub weights_optimal: bool,
}

/// Binary weights selecting the `h` samples with lowest negative
/// log-likelihood under `theta`; ties broken by ascending sample index.
pub fn update_weights(theta: &PrecisionEstimate, s: &SampleSet, h: usize) -> TrimWeights {
    debug_assert!(h >= 1 && h <= s.n());
    // The log-det term is constant across samples, so ordering by the
    // quadratic form equals ordering by per-sample NLL.
    let scores: Vec<f64> = (0..s.n())
        .map(|i| theta.matrix().quad_form(s.row(i)))
        .collect();
    let mut order: Vec<usize> = (0..s.n()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut values = vec![0.0; s.n()];
    for &i in order.iter().take(h) {
        values[i] = 1.0;
    }
    TrimWeights::from_values(values, h).expect("binary weights sum to h")
}

fn smooth_value(matrix: &SymMatrix, factor_logdet: f64, cov: &SymMatrix) -> f64 {
    matrix.frob_inner(cov) - factor_logdet
}

/// One backtracking proximal gradient step from `theta` at the given
/// weighted covariance.
///
/// The candidate is `soft_threshold_offdiag(theta - eta * grad, eta *
/// lambda)`, followed by an l1-ball projection when the radius is finite.
/// The step is shrunk by `backtrack_factor` until the candidate admits a
/// Cholesky factorization, the composite surrogate decrease condition
/// holds, and the total objective does not increase. Returns the accepted
/// iterate and step; fails with `LineSearchFailed` once the step drops
/// below 1e-12.
pub fn composite_step(
    theta: &PrecisionEstimate,
    cov: &SymMatrix,
    cfg: &SolverConfig,
    step: f64,
) -> Result<(PrecisionEstimate, f64)> {
    let grad = smooth_gradient(theta, cov);
    let smooth_cur = smooth_value(theta.matrix(), theta.log_det(), cov);
    let penalty_cur = cfg.lambda * theta.matrix().offdiag_l1();
    let slack = 1e-12 * (1.0 + smooth_cur.abs() + penalty_cur);

    let mut eta = step;
    while eta >= 1e-12 {
        let raw = theta.matrix().sub(&grad.scale(eta));
        let mut candidate = soft_threshold_offdiag(&raw, eta * cfg.lambda);
        if cfg.radius.is_finite() {
            candidate = project_l1_ball(&candidate, cfg.radius);
        }
        if let Ok(factor) = cholesky(&candidate) {
            let diff = candidate.sub(theta.matrix());
            let cand_logdet = log_det(&factor);
            let smooth_cand = smooth_value(&candidate, cand_logdet, cov);
            let surrogate =
                smooth_cur + grad.frob_inner(&diff) + diff.frob_inner(&diff) / (2.0 * eta);
            let penalty_cand = cfg.lambda * candidate.offdiag_l1();
            let descent = smooth_cand + penalty_cand <= smooth_cur + penalty_cur + slack;
            if smooth_cand <= surrogate + slack && descent {
                return Ok((PrecisionEstimate::from_parts(candidate, factor), eta));
            }
        }
        eta *= cfg.backtrack_factor;
    }
    Err(Error::LineSearchFailed)
}

/// Runs the configured strategy from the standard initialization
/// `(S + lambda I)^-1`, where `S` is the all-samples covariance.
pub fn fit(s: &SampleSet, cfg: &SolverConfig) -> Result<FitResult> {
    fit_impl(s, cfg, None, &mut |_, _, _| {})
}

/// Like [`fit`], invoking `inspect(iteration, iterate, weights)` on the
/// initial point and on every accepted iterate.
pub fn fit_with_inspect(
    s: &SampleSet,
    cfg: &SolverConfig,
    inspect: &mut dyn FnMut(usize, &PrecisionEstimate, &TrimWeights),
) -> Result<FitResult> {
    fit_impl(s, cfg, None, inspect)
}

fn initial_estimate(s: &SampleSet, lambda: f64) -> Result<PrecisionEstimate> {
    let s_full = weighted_empirical_cov(s, &TrimWeights::all_ones(s.n()))?;
    let shifted = s_full.add_diag(lambda);
    let factor = match cholesky(&shifted) {
        Ok(f) => f,
        Err(_) => {
            // lambda = 0 with a singular covariance: fall back to a ridge at
            // the diagonal scale of S, so the start is a sane interior point
            // rather than a near-boundary one.
            let p = s_full.dim();
            let mean_diag = (0..p).map(|i| s_full.get(i, i)).sum::<f64>() / p as f64;
            let mut ridge = f64::max(mean_diag, 1e-8);
            let mut found = None;
            for _ in 0..8 {
                if let Ok(f) = cholesky(&shifted.add_diag(ridge)) {
                    found = Some(f);
                    break;
                }
                ridge *= 100.0;
            }
            found.ok_or(Error::NotPositiveDefinite)?
        }
    };
    PrecisionEstimate::from_matrix(inverse_from_factor(&factor))
}

pub(crate) fn fit_impl(
    s: &SampleSet,
    cfg: &SolverConfig,
    warm: Option<(PrecisionEstimate, TrimWeights)>,
    inspect: &mut dyn FnMut(usize, &PrecisionEstimate, &TrimWeights),
) -> Result<FitResult> {
    cfg.validate(s.n())?;

    let mut theta = match warm {
        Some((est, _)) if est.dim() == s.p() => est,
        Some(_) => return Err(Error::InvalidConfig("warm start dimension mismatch")),
        None => initial_estimate(s, cfg.lambda)?,
    };
    if cfg.radius.is_finite() {
        // scaling into the ball keeps the start PD; a Euclidean projection
        // of an infeasible start generally is not
        let l1 = theta.matrix().l1_norm();
        if l1 > cfg.radius {
            theta = PrecisionEstimate::from_matrix(theta.matrix().scale(cfg.radius / l1))?;
        }
    }

    let w0 = update_weights(&theta, s, cfg.h);
    let mut tracker = CovTracker::new(s, &w0)?;
    inspect(0, &theta, tracker.weights());

    let mut trace = Vec::new();
    let obj0 = objective_with_cov(&theta, tracker.cov(), cfg.lambda);
    trace.push(TraceEntry {
        iteration: 0,
        objective: obj0.total,
        step: 0.0,
        weights_changed: false,
    });
    let mut prev_total = obj0.total;

    let mut step_seed = cfg.initial_step;
    let mut termination = Termination::MaxIters;

    for t in 1..=cfg.max_iters {
        let w_new = update_weights(&theta, s, cfg.h);
        let changed = w_new != *tracker.weights();
        if changed {
            tracker.set_weights(s, &w_new);
        }

        let stepped = match cfg.strategy {
            Strategy::Composite => composite_step(&theta, tracker.cov(), cfg, step_seed),
            Strategy::Alternating => inner_solve(&theta, tracker.cov(), cfg, step_seed),
        };
        match stepped {
            Ok((next, accepted)) => {
                theta = next;
                inspect(t, &theta, tracker.weights());
                step_seed = f64::min(accepted * 2.0, cfg.initial_step);
                let obj = objective_with_cov(&theta, tracker.cov(), cfg.lambda);
                trace.push(TraceEntry {
                    iteration: t,
                    objective: obj.total,
                    step: accepted,
                    weights_changed: changed,
                });
                let rel = (prev_total - obj.total).abs() / f64::max(1.0, prev_total.abs());
                prev_total = obj.total;
                let converged = match cfg.strategy {
                    Strategy::Composite => rel < cfg.tol,
                    // the alternating scheme additionally requires the
                    // weight assignment to have stabilized
                    Strategy::Alternating => rel < cfg.tol && !changed,
                };
                if converged {
                    termination = Termination::Converged;
                    break;
                }
            }
            Err(Error::LineSearchFailed) => {
                termination = Termination::LineSearchFailed;
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(FitResult {
        estimate: theta,
        weights: tracker.weights().clone(),
        trace,
        termination,
    })
}

/// Solves the convex subproblem at fixed weights to stationarity with
/// composite gradient steps (tolerance tol/10, at most 200 iterations).
fn inner_solve(
    theta: &PrecisionEstimate,
    cov: &SymMatrix,
    cfg: &SolverConfig,
    step_seed: f64,
) -> Result<(PrecisionEstimate, f64)> {
    let mut current = theta.clone();
    let mut prev = objective_with_cov(&current, cov, cfg.lambda).total;
    let mut step = step_seed;
    let mut last_accepted = step_seed;
    for _ in 0..200 {
        let (next, accepted) = composite_step(&current, cov, cfg, step)?;
        current = next;
        last_accepted = accepted;
        step = f64::min(accepted * 2.0, cfg.initial_step);
        let total = objective_with_cov(&current, cov, cfg.lambda).total;
        let rel = (prev - total).abs() / f64::max(1.0, prev.abs());
        prev = total;
        if rel < cfg.tol / 10.0 {
            break;
        }
    }
    Ok((current, last_accepted))
}

/// One regularization-path entry; failed lambdas carry their error and the
/// path restarts cold at the next lambda.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    pub lambda: f64,
    pub result: Result<FitResult>,
}

/// Fits a strictly descending lambda path, warm-starting each fit from the
/// previous estimate and weights (unless `cfg.warm_start` is off).
pub fn fit_path(s: &SampleSet, lambdas: &[f64], cfg: &SolverConfig) -> Result<Vec<PathEntry>> {
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("lambda path is empty"));
    }
    for pair in lambdas.windows(2) {
        if !(pair[0] > pair[1]) {
            return Err(Error::InvalidConfig("lambdas must be strictly descending"));
        }
    }
    if !(lambdas[lambdas.len() - 1] >= 0.0) {
        return Err(Error::InvalidConfig("lambdas must be nonnegative"));
    }

    let mut entries = Vec::with_capacity(lambdas.len());
    let mut warm: Option<(PrecisionEstimate, TrimWeights)> = None;
    for &lambda in lambdas {
        let mut c = cfg.clone();
        c.lambda = lambda;
        match fit_impl(s, &c, warm.take(), &mut |_, _, _| {}) {
            Ok(res) => {
                if cfg.warm_start && res.termination != Termination::LineSearchFailed {
                    warm = Some((res.estimate.clone(), res.weights.clone()));
                }
                entries.push(PathEntry {
                    lambda,
                    result: Ok(res),
                });
            }
            Err(e) => {
                entries.push(PathEntry {
                    lambda,
                    result: Err(e),
                });
                warm = None;
            }
        }
    }
    Ok(entries)
}

/// First-order stationarity certificate for a fit.
pub fn check_stationarity(r: &FitResult, s: &SampleSet, lambda: f64) -> Result<StationarityReport> {
    let cov = weighted_empirical_cov(s, &r.weights)?;
    let g = smooth_gradient(&r.estimate, &cov);
    let t = r.estimate.matrix();
    let p = t.dim();

    let mut max_zero: f64 = 0.0;
    let mut max_active: f64 = 0.0;
    let mut max_diag: f64 = 0.0;
    for i in 0..p {
        max_diag = f64::max(max_diag, g.get(i, i).abs());
        for j in (i + 1)..p {
            let tij = t.get(i, j);
            let gij = g.get(i, j);
            if tij == 0.0 {
                max_zero = f64::max(max_zero, f64::max(gij.abs() - lambda, 0.0));
            } else {
                max_active = f64::max(max_active, (gij + lambda * tij.signum()).abs());
            }
        }
    }
    let weights_optimal = update_weights(&r.estimate, s, r.weights.h()) == r.weights;
    Ok(StationarityReport {
        max_zero_violation: max_zero,
        max_active_violation: max_active,
        max_diag_gradient: max_diag,
        weights_optimal,
    })
}
