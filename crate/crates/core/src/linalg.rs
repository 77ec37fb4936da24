//! Small dense and banded linear algebra: a cyclic Jacobi eigensolver for
//! symmetric matrices and a banded LU with partial pivoting.

use nalgebra::{DMatrix, DVector};

use crate::error::{HqError, Result};

/// Eigen-decomposition `A = V diag(values) V^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in non-increasing order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&self.values));
        &self.vectors * d * self.vectors.transpose()
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations in fixed `(p, q)` order until the off-diagonal
/// Frobenius norm is at most `1e-12 * ||A||_F`.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigen needs a square matrix");
    let mut m = a.clone();
    // enforce exact symmetry so rotations stay consistent
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = 1e-12 * m.norm();

    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&m);
        if off <= tol || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].total_cmp(&m[(x, x)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymEigen { values, vectors }
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// `Q diag(d) Q^T`.
pub fn spectral_compose(q: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let n = q.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| q[(i, k)] * d[k] * q[(j, k)]).sum();
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

#[derive(Debug, Clone)]
struct BandRow {
    lo: usize,
    vals: Vec<f64>,
}

impl BandRow {
    fn get(&self, col: usize) -> f64 {
        if col < self.lo {
            return 0.0;
        }
        self.vals.get(col - self.lo).copied().unwrap_or(0.0)
    }

    fn hi(&self) -> usize {
        self.lo + self.vals.len()
    }
}

/// Square matrix with `kl` sub- and `ku` super-diagonals, solved by Gaussian
/// elimination with partial pivoting (fill grows the upper band to `kl + ku`).
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<BandRow>,
}

impl BandedMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(kl);
                let hi = (i + ku + 1).min(n);
                BandRow {
                    lo,
                    vals: vec![0.0; hi - lo],
                }
            })
            .collect();
        BandedMatrix { n, kl, ku, rows }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `v` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let row = &mut self.rows[i];
        row.vals[j - row.lo] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(j)
    }

    /// `y = M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                r.vals
                    .iter()
                    .zip(&x[r.lo..r.hi()])
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Solves `M x = b`, consuming the matrix.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut rhs = b.to_vec();
        let scale = self
            .rows
            .iter()
            .flat_map(|r| r.vals.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return Err(HqError::SingularSystem(0));
        }
        for c in 0..n {
            let last = (c + self.kl + 1).min(n);
            let mut piv = c;
            let mut best = self.rows[c].get(c).abs();
            for r in c + 1..last {
                let x = self.rows[r].get(c).abs();
                if x > best {
                    best = x;
                    piv = r;
                }
            }
            if best <= 1e-300 || best <= f64::EPSILON * 1e-6 * scale {
                return Err(HqError::SingularSystem(c));
            }
            if piv != c {
                self.rows.swap(c, piv);
                rhs.swap(c, piv);
            }
            let (head, tail) = self.rows.split_at_mut(c + 1);
            let prow = &head[c];
            let pval = prow.get(c);
            let phi = prow.hi();
            for (off, row) in tail.iter_mut().take(last - c - 1).enumerate() {
                let factor = row.get(c) / pval;
                if factor == 0.0 {
                    continue;
                }
                if row.hi() < phi {
                    let extra = phi - row.hi();
                    row.vals.extend(std::iter::repeat_n(0.0, extra));
                }
                for col in c..phi {
                    row.vals[col - row.lo] -= factor * prow.vals[col - prow.lo];
                }
                rhs[c + 1 + off] -= factor * rhs[c];
            }
        }
        let mut x = vec![0.0; n];
        for c in (0..n).rev() {
            let row = &self.rows[c];
            let mut s = rhs[c];
            for col in c + 1..row.hi() {
                s -= row.vals[col - row.lo] * x[col];
            }
            x[c] = s / row.get(c);
        }
        Ok(x)
    }
}
