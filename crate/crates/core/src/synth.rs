//! Reproducible generation of hub-network ground-truth precision matrices
//! and contaminated sample sets.
//!
//! All randomness flows through [`RngStream`], a ChaCha8 generator keyed by
//! a `(seed, stream)` pair. The mapping from raw 64-bit draws to uniforms
//! and normals is fixed and documented here, so identical `(seed, stream)`
//! pairs reproduce identical data byte for byte on every platform.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::matrix::{cholesky, inverse_from_factor, min_eigenvalue, CholeskyFactor, SymMatrix};
use crate::model::SampleSet;

/// A splittable deterministic random stream.
///
/// Draw conventions:
/// - `uniform()` maps a raw draw `x` to `(x >> 11) * 2^-53`, i.e. a double
///   in `[0, 1)`.
/// - `normal()` is one Box-Muller transform, `sqrt(-2 ln u1) cos(2 pi u2)`
///   with `u1 = ((x >> 11) + 1) * 2^-53` in `(0, 1]`; it always consumes
///   exactly two raw draws (the sine branch is discarded).
/// - `index(k)` uses rejection below the largest multiple of `k`, so it is
///   exactly uniform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    /// A fresh stream with the same seed; distinct ids never overlap.
    pub fn substream(&self, stream: u64) -> Self {
        RngStream::new(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform double in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Standard normal via Box-Muller; consumes two raw draws.
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0);
        let u2 = (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Uniform index in `0..k`, exactly unbiased.
    pub fn index(&mut self, k: usize) -> usize {
        debug_assert!(k >= 1);
        let k = k as u64;
        let zone = u64::MAX - u64::MAX % k;
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % k) as usize;
            }
        }
    }

    /// First `count` entries of a Fisher-Yates shuffle of `0..n`.
    pub fn choose_distinct(&mut self, n: usize, count: usize) -> Vec<usize> {
        debug_assert!(count <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.index(n - i);
            idx.swap(i, j);
        }
        idx.truncate(count);
        idx
    }
}

/// How nonzero precision coefficients are drawn from
/// `[-0.75, -0.23] u [0.25, 0.75]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntervalRule {
    /// Uniform over the union set, i.e. interval probability proportional
    /// to interval length (0.52 vs 0.50). The literal reading; default.
    #[default]
    UnionUniform,
    /// Fair coin between the two intervals, then uniform within.
    FairCoin,
}

/// Hub-network generator parameters; defaults follow the standard protocol
/// (edge probability 0.03, 9 hubs, hub fill probability 0.4).
#[derive(Debug, Clone, PartialEq)]
pub struct HubNetworkParams {
    pub edge_prob: f64,
    pub hub_count: usize,
    pub hub_prob: f64,
    pub interval_rule: IntervalRule,
    /// Upper end of the negative coefficient interval `[-0.75, neg_upper]`.
    /// The protocol value is -0.23; override to -0.25 for a symmetric
    /// interval pair.
    pub neg_upper: f64,
}

impl Default for HubNetworkParams {
    fn default() -> Self {
        HubNetworkParams {
            edge_prob: 0.03,
            hub_count: 9,
            hub_prob: 0.4,
            interval_rule: IntervalRule::UnionUniform,
            neg_upper: -0.23,
        }
    }
}

/// A generated ground truth: the true precision matrix, its off-diagonal
/// support as unordered pairs `i < j`, and the hub node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta_star: SymMatrix,
    pub support: Vec<(usize, usize)>,
    pub hubs: Vec<usize>,
}

/// Contamination scenarios. M1/M2 draw outliers around mean `+-1` / `+-1.5`
/// with the inverse of an independently generated hub precision as
/// covariance; M3/M4 use the same means with identity covariance; M5 is
/// asymmetric, mean `+2` with identity covariance and no sign flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::M1,
        Scenario::M2,
        Scenario::M3,
        Scenario::M4,
        Scenario::M5,
    ];

    fn mean_magnitude(self) -> f64 {
        match self {
            Scenario::M1 | Scenario::M3 => 1.0,
            Scenario::M2 | Scenario::M4 => 1.5,
            Scenario::M5 => 2.0,
        }
    }

    fn hub_covariance(self) -> bool {
        matches!(self, Scenario::M1 | Scenario::M2)
    }

    fn sign_flip(self) -> bool {
        !matches!(self, Scenario::M5)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::M1 => "m1",
            Scenario::M2 => "m2",
            Scenario::M3 => "m3",
            Scenario::M4 => "m4",
            Scenario::M5 => "m5",
        }
    }
}

impl core::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m1" | "M1" => Ok(Scenario::M1),
            "m2" | "M2" => Ok(Scenario::M2),
            "m3" | "M3" => Ok(Scenario::M3),
            "m4" | "M4" => Ok(Scenario::M4),
            "m5" | "M5" => Ok(Scenario::M5),
            _ => Err(Error::InvalidParams("scenario must be one of m1..m5")),
        }
    }
}

/// A contaminated draw: the samples, per-sample outlier labels (true =
/// outlier), the scenario, and the nominal contamination rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedSample {
    pub data: SampleSet,
    pub labels: Vec<bool>,
    pub scenario: Scenario,
    pub p0: f64,
}

impl ContaminatedSample {
    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

/// Generates a hub-network precision matrix.
///
/// Construction: symmetric adjacency `A` with `A_ij = 1` w.p. `edge_prob`
/// for `i < j`; `hub_count` hubs chosen uniformly, whose rows and columns
/// are overwritten to 1 w.p. `hub_prob` (diagonal excluded); coefficients
/// `E_ij` for `A_ij = 1`, `i < j`, drawn from
/// `[-0.75, -0.23] u [0.25, 0.75]` and mirrored; finally
/// `Theta = E + (0.1 - min_eig(E)) I`, which pins the smallest eigenvalue
/// of the result at 0.1.
///
/// Draw order (one stream): adjacency uniforms row-major over `i < j`, the
/// hub shuffle, hub overwrite uniforms per hub in selection order over
/// `j != hub`, then coefficient draws row-major over surviving edges.
pub fn gen_hub_precision(
    p: usize,
    rng: &mut RngStream,
    params: &HubNetworkParams,
) -> Result<GroundTruth> {
    if p <= params.hub_count {
        return Err(Error::InvalidParams("p must exceed hub_count"));
    }
    if !(0.0..=1.0).contains(&params.edge_prob) || !(0.0..=1.0).contains(&params.hub_prob) {
        return Err(Error::InvalidParams("probabilities must lie in [0, 1]"));
    }
    if !(params.neg_upper > -0.75 && params.neg_upper < 0.0) {
        return Err(Error::InvalidParams("neg_upper must lie in (-0.75, 0)"));
    }

    let mut adj = vec![false; p * p];
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.uniform() < params.edge_prob {
                adj[i * p + j] = true;
                adj[j * p + i] = true;
            }
        }
    }

    let mut hubs = rng.choose_distinct(p, params.hub_count);
    for &hb in &hubs {
        for j in 0..p {
            if j != hb {
                let on = rng.uniform() < params.hub_prob;
                adj[hb * p + j] = on;
                adj[j * p + hb] = on;
            }
        }
    }
    hubs.sort_unstable();

    let mut e = SymMatrix::zeros(p);
    let mut support = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if adj[i * p + j] {
                e.set(
                    i,
                    j,
                    draw_coefficient(rng, params.interval_rule, params.neg_upper),
                );
                support.push((i, j));
            }
        }
    }

    let lam_min = min_eigenvalue(&e)?;
    let theta_star = e.add_diag(0.1 - lam_min);
    Ok(GroundTruth {
        theta_star,
        support,
        hubs,
    })
}

fn draw_coefficient(rng: &mut RngStream, rule: IntervalRule, neg_upper: f64) -> f64 {
    let neg_len = neg_upper + 0.75;
    match rule {
        IntervalRule::UnionUniform => {
            let u = rng.uniform() * (neg_len + 0.5);
            if u < neg_len {
                -0.75 + u
            } else {
                0.25 + (u - neg_len)
            }
        }
        IntervalRule::FairCoin => {
            let negative = rng.uniform() < 0.5;
            let u = rng.uniform();
            if negative {
                -0.75 + neg_len * u
            } else {
                0.25 + 0.5 * u
            }
        }
    }
}

/// Draws `nsamples` rows from `N(0, cov)`: each row is `L z` with `z` iid
/// standard normal and `L` the Cholesky factor of `cov`.
pub fn sample_gaussian(nsamples: usize, cov: &SymMatrix, rng: &mut RngStream) -> Result<SampleSet> {
    let factor = cholesky(cov)?;
    let p = cov.dim();
    let mut rows = Vec::with_capacity(nsamples * p);
    let mut z = vec![0.0; p];
    for _ in 0..nsamples {
        for zi in z.iter_mut() {
            *zi = rng.normal();
        }
        rows.extend_from_slice(&factor.mul_lower(&z));
    }
    Ok(SampleSet::from_flat(nsamples, p, rows))
}

/// Generates a contaminated sample set from the mixture
/// `(1 - p0) N(0, Theta*^-1) + p0 * outlier(scenario)`.
///
/// For M1/M2 the outlier precision is regenerated per dataset with
/// `tilde_params` (consuming this stream) before any sample is drawn. Per
/// sample the draw order is: the branch uniform, the sign uniform (M1-M4
/// outliers only), then `p` normals.
pub fn gen_contaminated(
    gt: &GroundTruth,
    scenario: Scenario,
    n: usize,
    p0: f64,
    rng: &mut RngStream,
    tilde_params: &HubNetworkParams,
) -> Result<ContaminatedSample> {
    if !(0.0..0.5).contains(&p0) {
        return Err(Error::InvalidParams("p0 must lie in [0, 0.5)"));
    }
    let p = gt.theta_star.dim();
    let good_factor = cholesky(&inverse_from_factor(&cholesky(&gt.theta_star)?))?;

    let outlier_factor: Option<CholeskyFactor> = if scenario.hub_covariance() {
        let tilde = gen_hub_precision(p, rng, tilde_params)?;
        Some(cholesky(&inverse_from_factor(&cholesky(
            &tilde.theta_star,
        )?))?)
    } else {
        None
    };

    let mean = scenario.mean_magnitude();
    let mut rows = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        let outlier = rng.uniform() < p0;
        labels.push(outlier);
        if outlier {
            let sign = if scenario.sign_flip() {
                if rng.uniform() < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                1.0
            };
            for zi in z.iter_mut() {
                *zi = rng.normal();
            }
            match &outlier_factor {
                Some(f) => {
                    let x = f.mul_lower(&z);
                    rows.extend(x.iter().map(|v| sign * mean + v));
                }
                None => rows.extend(z.iter().map(|v| sign * mean + v)),
            }
        } else {
            for zi in z.iter_mut() {
                *zi = rng.normal();
            }
            rows.extend_from_slice(&good_factor.mul_lower(&z));
        }
    }

    Ok(ContaminatedSample {
        data: SampleSet::from_flat(n, p, rows),
        labels,
        scenario,
        p0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(42, 3);
        let mut b = RngStream::new(42, 3);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);

        let mut c = RngStream::new(42, 4);
        assert_ne!(xs[0], c.next_u64());
    }

    #[test]
    fn uniform_range_and_normal_moments() {
        let mut rng = RngStream::new(7, 0);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let n = 200_000;
        for _ in 0..n {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            let z = rng.normal();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "normal mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "normal variance {var}");
    }

    #[test]
    fn hub_precision_min_eigenvalue_pinned() {
        let mut rng = RngStream::new(11, 0);
        let params = HubNetworkParams {
            hub_count: 3,
            ..Default::default()
        };
        let gt = gen_hub_precision(30, &mut rng, &params).unwrap();
        let lam = min_eigenvalue(&gt.theta_star).unwrap();
        assert!((lam - 0.1).abs() <= 1e-8, "min eigenvalue {lam}");
        assert!(cholesky(&gt.theta_star).is_ok());
    }

    #[test]
    fn hub_precision_support_matches_pattern() {
        let mut rng = RngStream::new(5, 1);
        let params = HubNetworkParams {
            hub_count: 2,
            edge_prob: 0.1,
            ..Default::default()
        };
        let gt = gen_hub_precision(20, &mut rng, &params).unwrap();
        let mut from_matrix = Vec::new();
        for i in 0..20 {
            for j in (i + 1)..20 {
                let v = gt.theta_star.get(i, j);
                assert_eq!(v, gt.theta_star.get(j, i));
                if v != 0.0 {
                    from_matrix.push((i, j));
                    let mag = v.abs();
                    assert!(
                        (0.23..=0.75).contains(&mag),
                        "coefficient {v} outside interval"
                    );
                }
            }
        }
        assert_eq!(from_matrix, gt.support);
        assert_eq!(gt.hubs.len(), 2);
    }

    #[test]
    fn hub_precision_no_edges_gives_scaled_identity() {
        let mut rng = RngStream::new(1, 0);
        let params = HubNetworkParams {
            edge_prob: 0.0,
            hub_prob: 0.0,
            hub_count: 2,
            ..Default::default()
        };
        let gt = gen_hub_precision(6, &mut rng, &params).unwrap();
        assert!(gt.support.is_empty());
        assert_eq!(gt.theta_star, SymMatrix::identity(6).scale(0.1));
    }

    #[test]
    fn hub_precision_rejects_small_p() {
        let mut rng = RngStream::new(1, 0);
        assert!(gen_hub_precision(9, &mut rng, &HubNetworkParams::default()).is_err());
    }

    #[test]
    fn interval_override_and_rules_respect_bounds() {
        for rule in [IntervalRule::UnionUniform, IntervalRule::FairCoin] {
            let mut rng = RngStream::new(33, 2);
            let params = HubNetworkParams {
                hub_count: 3,
                edge_prob: 0.3,
                neg_upper: -0.25,
                interval_rule: rule,
                ..Default::default()
            };
            let gt = gen_hub_precision(25, &mut rng, &params).unwrap();
            assert!(!gt.support.is_empty());
            for &(i, j) in &gt.support {
                let v = gt.theta_star.get(i, j);
                assert!(
                    (-0.75..=-0.25).contains(&v) || (0.25..=0.75).contains(&v),
                    "coefficient {v} outside the overridden union"
                );
            }
        }
        let mut rng = RngStream::new(1, 0);
        let bad = HubNetworkParams {
            hub_count: 2,
            neg_upper: 0.1,
            ..Default::default()
        };
        assert!(gen_hub_precision(6, &mut rng, &bad).is_err());
    }

    #[test]
    fn generation_is_byte_identical() {
        let params = HubNetworkParams {
            hub_count: 2,
            ..Default::default()
        };
        let run = || {
            let mut rng = RngStream::new(99, 7);
            let gt = gen_hub_precision(15, &mut rng, &params).unwrap();
            let c = gen_contaminated(&gt, Scenario::M1, 40, 0.2, &mut rng, &params).unwrap();
            (gt, c)
        };
        let (gt_a, c_a) = run();
        let (gt_b, c_b) = run();
        assert_eq!(gt_a, gt_b);
        assert_eq!(c_a, c_b);
    }

    #[test]
    fn sample_gaussian_moments() {
        let mut rng = RngStream::new(3, 0);
        let s = sample_gaussian(100_000, &SymMatrix::identity(2), &mut rng).unwrap();
        let mut cov = [[0.0; 2]; 2];
        for i in 0..s.n() {
            let r = s.row(i);
            for a in 0..2 {
                for b in 0..2 {
                    cov[a][b] += r[a] * r[b];
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 1.0 } else { 0.0 };
                let got = cov[a][b] / s.n() as f64;
                assert!((got - want).abs() < 0.05, "cov[{a}][{b}] = {got}");
            }
        }
    }

    #[test]
    fn sample_gaussian_empty() {
        let mut rng = RngStream::new(3, 0);
        let s = sample_gaussian(0, &SymMatrix::identity(4), &mut rng).unwrap();
        assert_eq!(s.n(), 0);
        assert_eq!(s.p(), 4);
    }

    #[test]
    fn sample_gaussian_variance_ratio() {
        let mut rng = RngStream::new(8, 2);
        let s = sample_gaussian(50_000, &SymMatrix::diag(&[4.0, 1.0]), &mut rng).unwrap();
        let mut v = [0.0; 2];
        for i in 0..s.n() {
            let r = s.row(i);
            v[0] += r[0] * r[0];
            v[1] += r[1] * r[1];
        }
        let ratio = v[0] / v[1];
        assert!((ratio - 4.0).abs() < 0.4, "variance ratio {ratio}");
    }

    #[test]
    fn contaminated_p0_zero_all_good() {
        let mut rng = RngStream::new(21, 0);
        let params = HubNetworkParams {
            hub_count: 2,
            ..Default::default()
        };
        let gt = gen_hub_precision(10, &mut rng, &params).unwrap();
        let c = gen_contaminated(&gt, Scenario::M3, 50, 0.0, &mut rng, &params).unwrap();
        assert_eq!(c.outlier_count(), 0);
        assert_eq!(c.data.n(), 50);
    }

    #[test]
    fn contaminated_m4_outlier_moments() {
        let mut rng = RngStream::new(13, 5);
        let params = HubNetworkParams {
            hub_count: 2,
            ..Default::default()
        };
        let gt = gen_hub_precision(4, &mut rng, &params).unwrap();
        let c = gen_contaminated(&gt, Scenario::M4, 40_000, 0.4, &mut rng, &params).unwrap();

        // outliers cluster at +-1.5 per coordinate with identity covariance
        let mut pos = 0usize;
        let mut neg = 0usize;
        let mut var_sum = 0.0;
        let mut count = 0usize;
        for (i, &is_out) in c.labels.iter().enumerate() {
            if !is_out {
                continue;
            }
            let r = c.data.row(i);
            let mean_est: f64 = r.iter().sum::<f64>() / 4.0;
            if mean_est > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            let center = if mean_est > 0.0 { 1.5 } else { -1.5 };
            var_sum += r.iter().map(|v| (v - center) * (v - center)).sum::<f64>();
            count += 4;
        }
        let total = pos + neg;
        assert!(total > 10_000, "expected many outliers, got {total}");
        let pos_frac = pos as f64 / total as f64;
        assert!(
            (pos_frac - 0.5).abs() < 0.02,
            "sign flip fraction {pos_frac}"
        );
        let var = var_sum / count as f64;
        assert!((var - 1.0).abs() < 0.05, "outlier variance {var}");
    }

    #[test]
    fn contaminated_label_rate_concentrates() {
        let mut rng = RngStream::new(17, 9);
        let params = HubNetworkParams {
            hub_count: 2,
            ..Default::default()
        };
        let gt = gen_hub_precision(5, &mut rng, &params).unwrap();
        let n = 10_000;
        let p0 = 0.1;
        let c = gen_contaminated(&gt, Scenario::M5, n, p0, &mut rng, &params).unwrap();
        let k = c.outlier_count() as f64;
        let sigma = libm::sqrt(n as f64 * p0 * (1.0 - p0));
        assert!(
            (k - n as f64 * p0).abs() <= 3.0 * sigma,
            "outlier count {k} outside 3-sigma band"
        );
    }

    #[test]
    fn invalid_p0_rejected() {
        let mut rng = RngStream::new(1, 0);
        let params = HubNetworkParams {
            hub_count: 2,
            ..Default::default()
        };
        let gt = gen_hub_precision(5, &mut rng, &params).unwrap();
        assert!(gen_contaminated(&gt, Scenario::M1, 10, 0.5, &mut rng, &params).is_err());
        assert!(gen_contaminated(&gt, Scenario::M1, 10, -0.1, &mut rng, &params).is_err());
    }
}
