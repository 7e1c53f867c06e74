//! Structure-recovery and estimation-error metrics, trimmed cross-validation
//! for tuning lambda and the trim count, and plug-in diagnostics for the
//! consistency bounds of the trimmed estimator.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{cholesky, inverse_from_factor, spectral_norm, SymMatrix};
use crate::model::{per_sample_nll, SampleSet};
use crate::solver::{fit_path, SolverConfig, Termination};
use crate::synth::{GroundTruth, RngStream};

/// Default magnitude below which an off-diagonal entry does not count as an
/// edge; soft-thresholding produces exact zeros, this only absorbs round-off.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 1e-8;

/// Undirected graph over `p` nodes as unordered pairs `i < j`, no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(p: usize) -> Self {
        EdgeSet {
            p,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_pairs(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::InvalidParams("self-loops are not edges"));
            }
            if a >= p || b >= p {
                return Err(Error::InvalidParams("edge index out of range"));
            }
            edges.insert((a.min(b), a.max(b)));
        }
        Ok(EdgeSet { p, edges })
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    fn intersection_count(&self, other: &EdgeSet) -> usize {
        self.edges.intersection(&other.edges).count()
    }
}

/// Support extraction: `{ i < j : |theta_ij| > threshold }`.
pub fn edges_of(theta: &SymMatrix, threshold: f64) -> EdgeSet {
    debug_assert!(threshold >= 0.0);
    let p = theta.dim();
    let mut edges = BTreeSet::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if theta.get(i, j).abs() > threshold {
                edges.insert((i, j));
            }
        }
    }
    EdgeSet { p, edges }
}

/// `(fpr, tpr)` of an estimated edge set against the truth.
///
/// `tpr = |est ∩ truth| / |truth|` (1 when the truth is empty);
/// `fpr = |est \ truth| / (C(p,2) - |truth|)` (0 when no non-edges exist).
pub fn roc_point(est: &EdgeSet, truth: &EdgeSet) -> Result<(f64, f64)> {
    if est.p != truth.p {
        return Err(Error::DimensionMismatch {
            expected: truth.p,
            got: est.p,
        });
    }
    let tp = est.intersection_count(truth);
    let fp = est.len() - tp;
    let total_pairs = truth.p * (truth.p - 1) / 2;
    let negatives = total_pairs - truth.len();
    let tpr = if truth.is_empty() {
        1.0
    } else {
        tp as f64 / truth.len() as f64
    };
    let fpr = if negatives == 0 {
        0.0
    } else {
        fp as f64 / negatives as f64
    };
    Ok((fpr, tpr))
}

/// One ROC sweep point: the rates and the lambda that produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub lambda: f64,
}

/// ROC curve swept over a lambda path against one ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// Trapezoidal area under the curve after sorting by fpr and anchoring at
/// `(0,0)` and `(1,1)`.
pub fn auc(curve: &RocCurve) -> Result<f64> {
    if curve.points.len() < 2 {
        return Err(Error::TooFewPoints);
    }
    let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut prev = (0.0, 0.0);
    for &(x, y) in pts.iter().chain(core::iter::once(&(1.0, 1.0))) {
        area += (x - prev.0) * (y + prev.1) * 0.5;
        prev = (x, y);
    }
    Ok(area)
}

/// Harmonic mean of edge precision and recall; 0 when both are 0.
pub fn f1_score(est: &EdgeSet, reference: &EdgeSet) -> Result<f64> {
    if est.p != reference.p {
        return Err(Error::DimensionMismatch {
            expected: reference.p,
            got: est.p,
        });
    }
    let tp = est.intersection_count(reference) as f64;
    let precision = if est.is_empty() {
        0.0
    } else {
        tp / est.len() as f64
    };
    let recall = if reference.is_empty() {
        0.0
    } else {
        tp / reference.len() as f64
    };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// `(||est - truth||_F, ||est - truth||_{1,off})`.
pub fn estimation_errors(est: &SymMatrix, truth: &SymMatrix) -> Result<(f64, f64)> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            got: est.dim(),
        });
    }
    let diff = est.sub(truth);
    Ok((diff.frob_norm(), diff.offdiag_l1()))
}

/// Deterministic fold assignment: a seeded Fisher-Yates shuffle of `0..n`
/// chopped into `folds` nearly equal parts (the first `n % folds` parts get
/// the extra sample).
pub fn cv_folds(n: usize, folds: usize, rng: &mut RngStream) -> Vec<Vec<usize>> {
    debug_assert!(folds >= 2 && folds <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n.saturating_sub(1) {
        let j = i + rng.index(n - i);
        idx.swap(i, j);
    }
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut at = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(idx[at..at + size].to_vec());
        at += size;
    }
    out
}

/// One cross-validation cell. `h` is the trim count the cell's ratio
/// corresponds to on the full data; `score` is `None` when the fit failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub lambda: f64,
    pub h: usize,
    pub fold: usize,
    pub score: Option<f64>,
}

/// Cross-validation outcome: the winning `(lambda, h)` — `None` when every
/// cell failed — and the full table.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub best: Option<(f64, usize)>,
    pub cells: Vec<CvCell>,
}

impl CvReport {
    pub fn best_lambda(&self) -> Option<f64> {
        self.best.map(|(l, _)| l)
    }

    pub fn best_h(&self) -> Option<usize> {
        self.best.map(|(_, h)| h)
    }
}

/// Trimmed k-fold cross-validation over a lambda grid and a grid of trim
/// ratios `h/n` in `(0, 1]`.
///
/// For each fold and ratio the lambda path is fitted on the training part
/// (trim count `round(ratio * m_train)`), and each fit is scored by the
/// mean per-sample NLL of the `round(ratio * m_val)` held-out samples with
/// lowest NLL — validation folds are contaminated too, so the score is
/// trimmed at the same ratio. Cells average across folds; any failed fold
/// excludes the cell from the argmin. `template` supplies strategy,
/// tolerances, and warm-start behavior; its `lambda` and `h` are ignored.
/// At ratio 1 this is exactly standard k-fold CV with mean held-out NLL.
pub fn trimmed_cv(
    s: &SampleSet,
    lambdas: &[f64],
    h_fracs: &[f64],
    folds: usize,
    rng: &mut RngStream,
    template: &SolverConfig,
) -> Result<CvReport> {
    if lambdas.is_empty() || h_fracs.is_empty() {
        return Err(Error::InvalidParams("grids must be nonempty"));
    }
    if folds < 2 {
        return Err(Error::InvalidParams("folds must be at least 2"));
    }
    if s.n() < folds {
        return Err(Error::InvalidParams("need at least one sample per fold"));
    }
    for &f in h_fracs {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidParams("h ratios must lie in (0, 1]"));
        }
    }
    let mut lam_sorted: Vec<f64> = lambdas.to_vec();
    lam_sorted.sort_by(|a, b| b.total_cmp(a));
    lam_sorted.dedup();
    if !(lam_sorted[lam_sorted.len() - 1] >= 0.0) {
        return Err(Error::InvalidParams("lambdas must be nonnegative"));
    }

    let assignment = cv_folds(s.n(), folds, rng);
    let mut cells: Vec<CvCell> = Vec::new();
    // fold-sum per (lambda, ratio) grid slot; None once any fold failed
    let mut agg: Vec<Option<f64>> = vec![Some(0.0); lam_sorted.len() * h_fracs.len()];

    for (fold_id, val_idx) in assignment.iter().enumerate() {
        let train_idx: Vec<usize> = assignment
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold_id)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let train = s.subset(&train_idx);
        let val = s.subset(val_idx);

        for (frac_idx, &frac) in h_fracs.iter().enumerate() {
            let h_train = trim_count(frac, train.n());
            let h_full = trim_count(frac, s.n());
            let keep_val = trim_count(frac, val.n());

            let mut cfg = template.clone();
            cfg.h = h_train;
            let path = fit_path(&train, &lam_sorted, &cfg)?;
            for (lam_idx, entry) in path.iter().enumerate() {
                let score = match &entry.result {
                    Ok(res) if res.termination != Termination::LineSearchFailed => {
                        Some(trimmed_val_score(&res.estimate, &val, keep_val)?)
                    }
                    _ => None,
                };
                let slot = &mut agg[lam_idx * h_fracs.len() + frac_idx];
                *slot = match (*slot, score) {
                    (Some(acc), Some(v)) => Some(acc + v),
                    _ => None,
                };
                cells.push(CvCell {
                    lambda: entry.lambda,
                    h: h_full,
                    fold: fold_id,
                    score,
                });
            }
        }
    }

    // argmin of the fold-mean over grid slots with every fold scored
    let mut best: Option<(f64, f64, usize)> = None; // (mean, lambda, h)
    for (lam_idx, &lam) in lam_sorted.iter().enumerate() {
        for (frac_idx, &frac) in h_fracs.iter().enumerate() {
            if let Some(sum) = agg[lam_idx * h_fracs.len() + frac_idx] {
                let mean = sum / folds as f64;
                if best.is_none_or(|(m, _, _)| mean < m) {
                    best = Some((mean, lam, trim_count(frac, s.n())));
                }
            }
        }
    }
    cells.sort_by(|a, b| {
        b.lambda
            .total_cmp(&a.lambda)
            .then(a.h.cmp(&b.h))
            .then(a.fold.cmp(&b.fold))
    });
    Ok(CvReport {
        best: best.map(|(_, l, h)| (l, h)),
        cells,
    })
}

fn trim_count(frac: f64, n: usize) -> usize {
    let k = libm::round(frac * n as f64) as usize;
    k.clamp(1, n.max(1))
}

/// Mean NLL of the `keep` lowest-NLL validation samples; the selected
/// samples are summed in ascending index order so that at `keep = n` this
/// is exactly the plain mean.
fn trimmed_val_score(
    estimate: &crate::matrix::PrecisionEstimate,
    val: &SampleSet,
    keep: usize,
) -> Result<f64> {
    let mut nlls = Vec::with_capacity(val.n());
    for i in 0..val.n() {
        nlls.push(per_sample_nll(estimate, val.row(i))?);
    }
    let mut order: Vec<usize> = (0..val.n()).collect();
    order.sort_by(|&a, &b| nlls[a].total_cmp(&nlls[b]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = order.into_iter().take(keep).collect();
    selected.sort_unstable();
    let sum: f64 = selected.iter().map(|&i| nlls[i]).sum();
    Ok(sum / keep as f64)
}

/// How the outlier block enters the bound constant `f(X^B)`.
#[derive(Debug, Clone, PartialEq)]
pub enum OutlierModel {
    /// No outliers (`b_count` must be 0): `f = 0`.
    Clean,
    /// Outliers drawn from a Gaussian with the given covariance:
    /// `f = 4 sqrt(2) a (1 + sqrt(log p))^2 ||Sigma_B||_2 / sqrt(log p)`
    /// with `a = b_count / sqrt(n)`.
    Gaussian(SymMatrix),
    /// Caller-supplied `f` for outlier models not covered above.
    Explicit(f64),
}

/// Inputs to [`theory_diagnostics`] beyond the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryParams {
    pub n: usize,
    /// Retained sample count, `b_count < h <= n`.
    pub h: usize,
    /// Assumed number of corrupted samples `|B|`.
    pub b_count: usize,
    /// Concentration constant, any value greater than 2 (default 2.5).
    pub tau: f64,
    /// The l1-ball radius `R` the bound is evaluated at; the smallest valid
    /// choice is `||Theta*||_1`.
    pub radius: f64,
    pub outlier: OutlierModel,
}

impl TheoryParams {
    pub fn clean(n: usize, h: usize, radius: f64) -> Self {
        TheoryParams {
            n,
            h,
            b_count: 0,
            tau: 2.5,
            radius,
            outlier: OutlierModel::Clean,
        }
    }
}

/// Every quantity of the consistency analysis, evaluated by plug-in.
///
/// `window_empty` flags a vacuous certificate: the admissible lambda window
/// `[lambda_theory, (kappa_l - tau1) / (3 R)]` is empty at these parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryDiagnostics {
    /// Restricted strong convexity curvature `(||Theta*||_2 + 1)^-2`.
    pub kappa_l: f64,
    /// The prescribed regularization level.
    pub lambda_theory: f64,
    /// Frobenius error bound at `lambda_theory`.
    pub frobenius_bound: f64,
    /// Off-diagonal l1 error bound at `lambda_theory`.
    pub offdiag_l1_bound: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub f_xb: f64,
    /// Upper end of the admissible lambda window, `(kappa_l - tau1)/(3R)`.
    pub lambda_window_max: f64,
    /// Sample size above which the scaled-lambda corollary applies.
    pub sample_size_bound: f64,
    pub window_empty: bool,
}

/// The error bounds at curvature `kappa_l`, regularization `lambda`,
/// incoherence `tau1`, support size `k`, and dimension `p`:
/// Frobenius `(3 lambda sqrt(k+p) / 2 + tau1) / kappa_l` and off-diagonal
/// l1 `2 (3 lambda sqrt(k+p) + tau1)^2 / (lambda kappa_l)`.
pub fn eq5_bounds(kappa_l: f64, lambda: f64, tau1: f64, k: usize, p: usize) -> (f64, f64) {
    let root = libm::sqrt((k + p) as f64);
    let fro = (1.5 * lambda * root + tau1) / kappa_l;
    let l1 = if lambda > 0.0 {
        let inner = 3.0 * lambda * root + tau1;
        2.0 * inner * inner / (lambda * kappa_l)
    } else {
        f64::INFINITY
    };
    (fro, l1)
}

/// Plug-in evaluation of the consistency certificate for a known ground
/// truth at the given contamination level.
pub fn theory_diagnostics(gt: &GroundTruth, params: &TheoryParams) -> Result<TheoryDiagnostics> {
    let p = gt.theta_star.dim();
    if p < 2 {
        return Err(Error::InvalidParams("diagnostics need p >= 2"));
    }
    if !(params.b_count < params.h && params.h <= params.n) {
        return Err(Error::InvalidParams("need b_count < h <= n"));
    }
    if !(params.tau > 2.0) {
        return Err(Error::InvalidParams("tau must exceed 2"));
    }
    if !(params.radius > 0.0) {
        return Err(Error::InvalidParams("radius must be positive"));
    }

    let log_p = libm::log(p as f64);
    let sigma_star = inverse_from_factor(&cholesky(&gt.theta_star)?);
    let kappa_l = {
        let s = spectral_norm(&gt.theta_star)? + 1.0;
        1.0 / (s * s)
    };
    let b = params.b_count as f64;
    let h = params.h as f64;
    let a = b / libm::sqrt(params.n as f64);

    let f_xb = match &params.outlier {
        OutlierModel::Clean => {
            if params.b_count != 0 {
                return Err(Error::InvalidParams(
                    "b_count > 0 requires a Gaussian outlier covariance or an explicit f",
                ));
            }
            0.0
        }
        OutlierModel::Gaussian(sigma_b) => {
            if sigma_b.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: sigma_b.dim(),
                });
            }
            let root_log_p = libm::sqrt(log_p);
            let lift = 1.0 + root_log_p;
            4.0 * libm::sqrt(2.0) * a * lift * lift * spectral_norm(sigma_b)? / root_log_p
        }
        OutlierModel::Explicit(f) => {
            if !(*f >= 0.0) {
                return Err(Error::InvalidParams("f must be nonnegative"));
            }
            *f
        }
    };

    let tau1 = f_xb * libm::sqrt(b * log_p / h);
    let tau2 = f_xb * libm::sqrt(log_p / h);

    let max_sigma_diag = sigma_star.max_diag();
    let sigma_inf = sigma_star.max_abs();
    let clean_term = 8.0 * max_sigma_diag * libm::sqrt(10.0 * params.tau * log_p / (h - b))
        + (b / h) * sigma_inf;
    let lambda_theory = 4.0 * f64::max(clean_term, tau2);

    let k = gt.support.len();
    let (frobenius_bound, offdiag_l1_bound) = eq5_bounds(kappa_l, lambda_theory, tau1, k, p);

    let lambda_window_max = (kappa_l - tau1) / (3.0 * params.radius);
    let window_empty = !(lambda_theory <= lambda_window_max);

    // scaled-lambda corollary: n >= max{16 a^2,
    //   (||Theta*||_2 + 1)^4 (3 R c + f sqrt(2 |B|))^2 log p}
    let c = 4.0
        * f64::max(
            16.0 * max_sigma_diag * libm::sqrt(5.0 * params.tau)
                + 2.0 * a * sigma_inf / libm::sqrt(log_p),
            libm::sqrt(2.0) * f_xb,
        );
    let sample_size_bound = {
        let inner = 3.0 * params.radius * c + f_xb * libm::sqrt(2.0 * b);
        let kappa_inv_sq = 1.0 / (kappa_l * kappa_l); // (||Theta*||_2 + 1)^4
        f64::max(16.0 * a * a, kappa_inv_sq * inner * inner * log_p)
    };

    Ok(TheoryDiagnostics {
        kappa_l,
        lambda_theory,
        frobenius_bound,
        offdiag_l1_bound,
        tau1,
        tau2,
        f_xb,
        lambda_window_max,
        sample_size_bound,
        window_empty,
    })
}
