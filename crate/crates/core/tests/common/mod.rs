//! Independent reference computations shared by the integration tests.
//! Nothing here goes through the crate's sigma recurrence, index table or
//! Jacobi eigensolver.

#![allow(dead_code)]

use hqlab::{HqOperator, OperatorConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `sigma_m` by enumerating subsets with bitmasks.
pub fn brute_sigma(m: i64, v: &[f64]) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if m < 0 || m as usize > v.len() {
        return 0.0;
    }
    let d = v.len();
    (0u32..1 << d)
        .filter(|mask| mask.count_ones() as i64 == m)
        .map(|mask| {
            (0..d)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| v[i])
                .product::<f64>()
        })
        .sum()
}

/// All `p`-fold sums of `lam`, in increasing bitmask order.
pub fn brute_lambda(lam: &[f64], p: usize) -> Vec<f64> {
    let n = lam.len();
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == p)
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| lam[i])
                .sum()
        })
        .collect()
}

pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Eigenvalues in non-increasing order, via nalgebra.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    sorted(
        a.clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect(),
    )
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// `Q diag(lam) Q^T`.
pub fn with_spectrum(q: &DMatrix<f64>, lam: &[f64]) -> DMatrix<f64> {
    let d = DMatrix::from_fn(
        lam.len(),
        lam.len(),
        |i, j| if i == j { lam[i] } else { 0.0 },
    );
    q * d * q.transpose()
}

/// `(sigma_k / sigma_l)(Lambda)` by brute force, `None` outside the cone.
pub fn oracle_f(cfg: &OperatorConfig, lam: &[f64]) -> Option<f64> {
    let big = brute_lambda(lam, cfg.p);
    if (1..=cfg.k).any(|j| brute_sigma(j as i64, &big) <= 0.0) {
        return None;
    }
    Some(brute_sigma(cfg.k as i64, &big) / brute_sigma(cfg.l as i64, &big))
}

pub fn oracle_ftilde(cfg: &OperatorConfig, lam: &[f64]) -> Option<f64> {
    oracle_f(cfg, lam).map(|f| f.powf(1.0 / (cfg.k - cfg.l) as f64))
}

/// `F` of a matrix through nalgebra's eigensolver and the brute-force sigma.
pub fn oracle_f_matrix(cfg: &OperatorConfig, a: &DMatrix<f64>) -> f64 {
    oracle_f(cfg, &eigenvalues(a)).expect("admissible")
}

pub fn oracle_ftilde_matrix(cfg: &OperatorConfig, a: &DMatrix<f64>) -> f64 {
    oracle_ftilde(cfg, &eigenvalues(a)).expect("admissible")
}

/// A spectrum in the cone that stays admissible after moving a fixed
/// distance towards the boundary, so finite differences are well resolved.
pub fn interior_spectrum(op: &HqOperator, rng: &mut impl Rng) -> Vec<f64> {
    let n = op.config().n;
    loop {
        let t = rng.random_range(0.0..1.0);
        let lam: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) + t).collect();
        let margin = 0.05 * (1.0 + lam.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
        let shrunk: Vec<f64> = lam.iter().map(|x| x - margin).collect();
        if oracle_f(&op.config(), &shrunk).is_some() {
            return lam;
        }
    }
}

pub fn interior_matrix(op: &HqOperator, rng: &mut impl Rng) -> DMatrix<f64> {
    let lam = interior_spectrum(op, rng);
    let q = random_orthogonal(op.config().n, rng);
    with_spectrum(&q, &lam)
}

/// Symmetric unit perturbation in entry `(i, j)`; a single one when `i == j`.
pub fn unit(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

/// Central-difference gradient of `g` over the entries of a symmetric matrix;
/// off-diagonal entries move symmetrically and the slope is halved.
pub fn fd_gradient(a: &DMatrix<f64>, g: impl Fn(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let n = a.nrows();
    let h = 1e-5 * (1.0 + a.norm());
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let e = unit(n, i, j);
            let slope = (g(&(a + &e * h)) - g(&(a - &e * h))) / (2.0 * h);
            let v = if i == j { slope } else { slope / 2.0 };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `max |a - b| / max |a|`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax()
}

/// Every configuration with `n` in `dims`, `1 <= p < n`, `1 <= k <= N`, `0 <= l < k`.
pub fn all_configs(dims: &[usize], max_big_n: usize) -> Vec<OperatorConfig> {
    let mut out = Vec::new();
    for &n in dims {
        for p in 1..n {
            let big_n = brute_lambda(&vec![0.0; n], p).len();
            if big_n > max_big_n {
                continue;
            }
            for k in 1..=big_n {
                for l in 0..k {
                    out.push(OperatorConfig::new(n, p, k, l).unwrap());
                }
            }
        }
    }
    out
}
