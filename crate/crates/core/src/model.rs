//! The statistical objects of the trimmed estimator: sample sets, trim
//! weights, weighted empirical covariance, per-sample negative
//! log-likelihood, the penalized objective, and its smooth-part gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{PrecisionEstimate, SymMatrix};

/// An immutable `n x p` matrix of observations, one sample per row.
///
/// Samples are assumed already centered; the model is zero-mean. `n = 0` is
/// permitted (an empty draw); operations that need samples require `n >= 1`
/// through their own preconditions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    p: usize,
    rows: Vec<f64>,
}

impl SampleSet {
    pub fn from_rows(rows: &[Vec<f64>], p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParams("variable count must be positive"));
        }
        let n = rows.len();
        let mut data = Vec::with_capacity(n * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::NonFinite);
                }
                data.push(v);
            }
        }
        Ok(SampleSet { n, p, rows: data })
    }

    pub(crate) fn from_flat(n: usize, p: usize, rows: Vec<f64>) -> Self {
        debug_assert_eq!(rows.len(), n * p);
        SampleSet { n, p, rows }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    /// New sample set holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> SampleSet {
        let mut rows = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            rows.extend_from_slice(self.row(i));
        }
        SampleSet {
            n: indices.len(),
            p: self.p,
            rows,
        }
    }
}

/// Per-sample weights in `[0, 1]` summing to the trim count `h`.
///
/// Every weight the solver produces is binary: the weight subproblem is a
/// linear program over the constraint set whose optimum sits at a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimWeights {
    values: Vec<f64>,
    h: usize,
}

impl TrimWeights {
    pub fn from_values(values: Vec<f64>, h: usize) -> Result<Self> {
        if h < 1 || h > values.len() {
            return Err(Error::InvalidParams("h must satisfy 1 <= h <= n"));
        }
        let mut sum = 0.0;
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParams("weights must lie in [0, 1]"));
            }
            sum += v;
        }
        if (sum - h as f64).abs() > 1e-9 {
            return Err(Error::InvalidParams("weights must sum to h"));
        }
        Ok(TrimWeights { values, h })
    }

    /// Binary weights: one on exactly the listed samples.
    pub fn binary(selected: &[usize], n: usize) -> Result<Self> {
        let mut values = vec![0.0; n];
        for &i in selected {
            if i >= n {
                return Err(Error::InvalidParams("selected index out of range"));
            }
            values[i] = 1.0;
        }
        let h = values.iter().filter(|&&v| v == 1.0).count();
        Self::from_values(values, h)
    }

    pub fn all_ones(n: usize) -> Self {
        TrimWeights {
            values: vec![1.0; n],
            h: n,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn h(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }
}

/// Objective split into its smooth part and the l1 off-diagonal penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub smooth: f64,
    pub penalty: f64,
}

/// Weighted empirical covariance `(1/h) sum_i w_i x_i x_i^T`, symmetric PSD.
pub fn weighted_empirical_cov(s: &SampleSet, w: &TrimWeights) -> Result<SymMatrix> {
    if w.n() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            got: w.n(),
        });
    }
    let p = s.p();
    let mut acc = vec![0.0; p * p];
    for i in 0..s.n() {
        let wi = w.get(i);
        if wi == 0.0 {
            continue;
        }
        accumulate_outer(&mut acc, s.row(i), wi, p);
    }
    Ok(finish_cov(acc, p, w.h()))
}

fn accumulate_outer(acc: &mut [f64], x: &[f64], weight: f64, p: usize) {
    for a in 0..p {
        let wa = weight * x[a];
        let row = &mut acc[a * p..a * p + a + 1];
        for (b, slot) in row.iter_mut().enumerate() {
            *slot += wa * x[b];
        }
    }
}

fn finish_cov(mut acc: Vec<f64>, p: usize, h: usize) -> SymMatrix {
    let inv_h = 1.0 / h as f64;
    for v in acc.iter_mut() {
        *v *= inv_h;
    }
    // only the lower triangle was accumulated; mirror for exact symmetry
    SymMatrix::from_fn(p, |i, j| acc[j * p + i])
}

/// Incrementally maintained weighted covariance for the solver: rank-one
/// updates when few weights flip, full recompute when more than a quarter
/// of them do.
#[derive(Debug, Clone)]
pub(crate) struct CovTracker {
    weights: TrimWeights,
    /// Unscaled lower-triangle accumulator `sum_i w_i x_i x_i^T`.
    acc: Vec<f64>,
    cov: SymMatrix,
}

impl CovTracker {
    pub fn new(s: &SampleSet, w: &TrimWeights) -> Result<Self> {
        if w.n() != s.n() {
            return Err(Error::DimensionMismatch {
                expected: s.n(),
                got: w.n(),
            });
        }
        let p = s.p();
        let mut acc = vec![0.0; p * p];
        for i in 0..s.n() {
            let wi = w.get(i);
            if wi != 0.0 {
                accumulate_outer(&mut acc, s.row(i), wi, p);
            }
        }
        let cov = finish_cov(acc.clone(), p, w.h());
        Ok(CovTracker {
            weights: w.clone(),
            acc,
            cov,
        })
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn weights(&self) -> &TrimWeights {
        &self.weights
    }

    /// Replaces the weights, updating the accumulator by the changed
    /// samples only when at most `n/4` of them flipped.
    pub fn set_weights(&mut self, s: &SampleSet, w: &TrimWeights) {
        debug_assert_eq!(w.n(), s.n());
        let p = s.p();
        let flips: Vec<usize> = (0..s.n())
            .filter(|&i| self.weights.get(i) != w.get(i))
            .collect();
        if flips.len() * 4 > s.n() {
            let mut acc = vec![0.0; p * p];
            for i in 0..s.n() {
                let wi = w.get(i);
                if wi != 0.0 {
                    accumulate_outer(&mut acc, s.row(i), wi, p);
                }
            }
            self.acc = acc;
        } else {
            for &i in &flips {
                let delta = w.get(i) - self.weights.get(i);
                accumulate_outer(&mut self.acc, s.row(i), delta, p);
            }
        }
        self.cov = finish_cov(self.acc.clone(), p, w.h());
        self.weights = w.clone();
    }
}

/// Negative log-likelihood of one sample under precision `theta`:
/// `x^T Theta x / 2 - log det(Theta) / 2`, dropping the `(p/2) ln(2 pi)`
/// constant (no ordering or difference consumed downstream depends on it).
pub fn per_sample_nll(theta: &PrecisionEstimate, x: &[f64]) -> Result<f64> {
    if x.len() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            got: x.len(),
        });
    }
    Ok(0.5 * theta.matrix().quad_form(x) - 0.5 * theta.log_det())
}

/// The trimmed objective at `(theta, w)`:
/// `<Theta, cov(w)> - log det(Theta) + lambda * ||Theta||_{1,off}`.
pub fn objective(
    theta: &PrecisionEstimate,
    s: &SampleSet,
    w: &TrimWeights,
    lambda: f64,
) -> Result<ObjectiveValue> {
    if s.p() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            got: s.p(),
        });
    }
    let cov = weighted_empirical_cov(s, w)?;
    Ok(objective_with_cov(theta, &cov, lambda))
}

/// The objective when the weighted covariance is already at hand.
pub fn objective_with_cov(
    theta: &PrecisionEstimate,
    cov: &SymMatrix,
    lambda: f64,
) -> ObjectiveValue {
    let smooth = theta.matrix().frob_inner(cov) - theta.log_det();
    let penalty = lambda * theta.matrix().offdiag_l1();
    ObjectiveValue {
        total: smooth + penalty,
        smooth,
        penalty,
    }
}

/// Gradient of the smooth part: `cov - Theta^-1`, using the stored factor.
pub fn smooth_gradient(theta: &PrecisionEstimate, cov: &SymMatrix) -> SymMatrix {
    cov.sub(&theta.inverse())
}
