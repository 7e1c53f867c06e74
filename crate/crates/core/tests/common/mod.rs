//! Shared test helpers: an independent Jacobi eigenvalue oracle and
//! deterministic random matrix builders.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use trimglasso_core::{RngStream, SymMatrix};

/// All eigenvalues of a symmetric matrix by the cyclic Jacobi rotation
/// method, ascending. Deliberately a different algorithm from anything in
/// the library so it can serve as an oracle.
pub fn jacobi_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let p = m.dim();
    let mut a: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| m.get(i, j)).collect())
        .collect();
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(1.0);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= 1e-13 * scale {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if a[i][j].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[j][j] - a[i][i]) / (2.0 * a[i][j]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    1.0 / (theta - (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aki = a[k][i];
                    let akj = a[k][j];
                    a[k][i] = c * aki - s * akj;
                    a[k][j] = s * aki + c * akj;
                }
                for k in 0..p {
                    let aik = a[i][k];
                    let ajk = a[j][k];
                    a[i][k] = c * aik - s * ajk;
                    a[j][k] = s * aik + c * ajk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..p).map(|i| a[i][i]).collect();
    eigs.sort_by(|x, y| x.total_cmp(y));
    eigs
}

/// Random symmetric matrix with standard normal entries (mirrored).
pub fn random_symmetric(p: usize, rng: &mut RngStream) -> SymMatrix {
    SymMatrix::from_fn(p, |_, _| rng.normal())
}

/// Random positive definite matrix `B B^T / p + shift I`.
pub fn random_pd(p: usize, shift: f64, rng: &mut RngStream) -> SymMatrix {
    let b: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..p).map(|_| rng.normal()).collect())
        .collect();
    let mut m = SymMatrix::from_fn(p, |i, j| {
        let dot: f64 = (0..p).map(|k| b[i][k] * b[j][k]).sum();
        dot / p as f64
    });
    m = m.add_diag(shift);
    m
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
}
