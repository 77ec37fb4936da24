//! The Hessian quotient operator
//! `F(A) = sigma_k(Lambda(A)) / sigma_l(Lambda(A))` and its normalized root
//! `Ft(A) = F(A)^{1/(k-l)}`, where `Lambda(A)` collects all `p`-fold sums of
//! the eigenvalues of the symmetric matrix `A`.
//!
//! Production derivatives go through the eigen-decomposition of `A`
//! (`O(n^3)`); [`HqOperator::gradient_via_derivation`] recomputes the gradient
//! from the `N x N` derivation matrix and is kept as a cross-check.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HqError, Result};
use crate::exterior::{check_symmetric, derivation_jacobian, derivation_matrix, IndexTable};
use crate::linalg::{jacobi_eigen, spectral_compose, SymEigen};
use crate::symmetric::{
    binomial, quotient_partials, sigma_excluding, sigma_table, sigma_table_into, QuotientScratch,
    Spectrum,
};

/// Dimension `n`, derivation order `p`, numerator level `k`, denominator level `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub l: usize,
}

impl OperatorConfig {
    pub fn new(n: usize, p: usize, k: usize, l: usize) -> Result<Self> {
        let cfg = OperatorConfig { n, p, k, l };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let OperatorConfig { n, p, k, l } = *self;
        if n < 2 || p == 0 || p >= n {
            return Err(HqError::invalid(format!(
                "need 1 <= p <= n - 1, got n={n}, p={p}"
            )));
        }
        let big_n = binomial(n, p);
        if l >= k || k as f64 > big_n {
            return Err(HqError::invalid(format!(
                "need 0 <= l < k <= N = {big_n}, got k={k}, l={l}"
            )));
        }
        Ok(())
    }

    /// `N = C(n, p)`.
    pub fn big_n(&self) -> usize {
        binomial(self.n, self.p) as usize
    }

    /// `k - l` as a float exponent base.
    pub fn order(&self) -> f64 {
        (self.k - self.l) as f64
    }

    /// `C(N,k) / C(N,l)`: the value of `F` at `Lambda = 1`.
    pub fn unit_value(&self) -> f64 {
        let big_n = self.big_n();
        binomial(big_n, self.k) / binomial(big_n, self.l)
    }

    /// `p (C(N,k)/C(N,l))^{1/(k-l)}`, the lower bound for `sum_i dFt/dlambda_i`.
    pub fn trace_bound(&self) -> f64 {
        self.p as f64 * self.unit_value().powf(1.0 / self.order())
    }
}

impl std::fmt::Display for OperatorConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n={} p={} k={} l={}", self.n, self.p, self.k, self.l)
    }
}

/// Cone membership of `Lambda` with the smallest `sigma_j`, `1 <= j <= k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeDiagnostics {
    pub admissible: bool,
    pub min_sigma: f64,
    pub failing_level: Option<usize>,
}

/// A symmetric matrix with its spectral data and operator values.
#[derive(Debug, Clone)]
pub struct EvaluationPoint {
    pub matrix: DMatrix<f64>,
    pub eigen: SymEigen,
    /// `Lambda(lambda(A))` in table order.
    pub big_lambda: Vec<f64>,
    pub f_value: f64,
    pub ftilde_value: f64,
    pub admissible: bool,
}

impl EvaluationPoint {
    pub fn spectrum(&self) -> &[f64] {
        &self.eigen.values
    }
}

/// `dF/dlambda_i`, `dF/dLambda_I` and the same for `Ft`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDerivatives {
    pub f_value: f64,
    pub ftilde_value: f64,
    pub d_lambda: Vec<f64>,
    pub d_big_lambda: Vec<f64>,
    pub dt_lambda: Vec<f64>,
    pub dt_big_lambda: Vec<f64>,
}

/// Ambient-frame gradients `F^{ij}` and `Ft^{ij}`.
#[derive(Debug, Clone)]
pub struct OperatorGradient {
    pub f: DMatrix<f64>,
    pub ftilde: DMatrix<f64>,
}

/// Reusable buffers for the allocation-free spectral path.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub big_lambda: Vec<f64>,
    pub d_big_lambda: Vec<f64>,
    pub d_lambda: Vec<f64>,
    table: Vec<f64>,
    scratch: QuotientScratch,
}

/// Operator bound to one configuration, with its multi-index table.
#[derive(Debug, Clone)]
pub struct HqOperator {
    cfg: OperatorConfig,
    table: IndexTable,
}

/// Eigenvalue gaps below this (relative) use the coincident-limit formula in
/// [`HqOperator::hessian_form`].
pub const COINCIDENCE_TOL: f64 = 1e-8;

impl HqOperator {
    pub fn new(cfg: OperatorConfig) -> Result<Self> {
        cfg.validate()?;
        let table = IndexTable::new(cfg.p, cfg.n)?;
        Ok(HqOperator { cfg, table })
    }

    pub fn config(&self) -> OperatorConfig {
        self.cfg
    }

    pub fn table(&self) -> &IndexTable {
        &self.table
    }

    pub fn big_lambda(&self, lam: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.table.len()];
        self.table.lambda_into(lam, &mut out);
        out
    }

    fn check_len(&self, lam: &[f64]) -> Result<()> {
        if lam.len() != self.cfg.n {
            return Err(HqError::invalid(format!(
                "spectrum length {} != n = {}",
                lam.len(),
                self.cfg.n
            )));
        }
        Ok(())
    }

    /// Cone test on a spectrum: `lambda in P_{p,k}`.
    pub fn cone_diagnostics(&self, lam: &[f64]) -> ConeDiagnostics {
        let big = self.big_lambda(lam);
        let t = sigma_table(&big, self.cfg.k);
        let mut min_sigma = f64::INFINITY;
        let mut failing_level = None;
        for (j, &s) in t.iter().enumerate().skip(1) {
            min_sigma = min_sigma.min(s);
            if s <= 0.0 && failing_level.is_none() {
                failing_level = Some(j);
            }
        }
        ConeDiagnostics {
            admissible: failing_level.is_none(),
            min_sigma,
            failing_level,
        }
    }

    pub fn spectrum_admissible(&self, lam: &[f64]) -> bool {
        let mut ws = Workspace::default();
        self.admissible_in(lam, &mut ws)
    }

    /// Allocation-free cone test; leaves `Lambda` in `ws.big_lambda`.
    pub fn admissible_in(&self, lam: &[f64], ws: &mut Workspace) -> bool {
        let big_n = self.table.len();
        let k = self.cfg.k;
        ws.big_lambda.resize(big_n, 0.0);
        self.table.lambda_into(lam, &mut ws.big_lambda);
        ws.table.resize(k + 1, 0.0);
        sigma_table_into(&ws.big_lambda, &[], k, &mut ws.table);
        ws.table[1..=k].iter().all(|&s| s > 0.0)
    }

    /// Computes `F`, `dF/dLambda_I` and `dF/dlambda_i` into `ws` without any
    /// cone check. Returns `F`.
    pub fn quotient_partials_in(&self, lam: &[f64], ws: &mut Workspace) -> f64 {
        let big_n = self.table.len();
        ws.big_lambda.resize(big_n, 0.0);
        ws.d_big_lambda.resize(big_n, 0.0);
        ws.d_lambda.resize(self.cfg.n, 0.0);
        self.table.lambda_into(lam, &mut ws.big_lambda);
        let f = quotient_partials(
            self.cfg.k,
            self.cfg.l,
            &ws.big_lambda,
            &mut ws.scratch,
            &mut ws.d_big_lambda,
        );
        for (i, d) in ws.d_lambda.iter_mut().enumerate() {
            *d = self
                .table
                .members(i)
                .iter()
                .map(|&s| ws.d_big_lambda[s])
                .sum();
        }
        f
    }

    pub fn admissible(&self, a: &DMatrix<f64>) -> Result<ConeDiagnostics> {
        check_symmetric(a, self.cfg.n)?;
        let e = jacobi_eigen(a);
        Ok(self.cone_diagnostics(&e.values))
    }

    fn not_admissible(&self, d: &ConeDiagnostics) -> HqError {
        HqError::NotInCone {
            level: d.failing_level.unwrap_or(0),
            value: d.min_sigma,
            context: format!(" for {}", self.cfg),
        }
    }

    /// `(F, Ft)` on an admissible spectrum.
    pub fn values_from_spectrum(&self, lam: &[f64]) -> Result<(f64, f64)> {
        self.check_len(lam)?;
        let d = self.cone_diagnostics(lam);
        if !d.admissible {
            return Err(self.not_admissible(&d));
        }
        let big = self.big_lambda(lam);
        let t = sigma_table(&big, self.cfg.k);
        let f = t[self.cfg.k] / t[self.cfg.l];
        Ok((f, f.powf(1.0 / self.cfg.order())))
    }

    pub fn evaluate(&self, a: &DMatrix<f64>) -> Result<EvaluationPoint> {
        check_symmetric(a, self.cfg.n)?;
        let eigen = jacobi_eigen(a);
        let (f_value, ftilde_value) = self.values_from_spectrum(&eigen.values)?;
        Ok(EvaluationPoint {
            matrix: a.clone(),
            big_lambda: self.big_lambda(&eigen.values),
            eigen,
            f_value,
            ftilde_value,
            admissible: true,
        })
    }

    pub fn spectral_first_derivatives(&self, lam: &[f64]) -> Result<SpectralDerivatives> {
        self.check_len(lam)?;
        let d = self.cone_diagnostics(lam);
        if !d.admissible {
            return Err(self.not_admissible(&d));
        }
        let mut ws = Workspace::default();
        let f = self.quotient_partials_in(lam, &mut ws);
        let e = 1.0 / self.cfg.order();
        let ft = f.powf(e);
        let chain = e * ft / f;
        Ok(SpectralDerivatives {
            f_value: f,
            ftilde_value: ft,
            dt_lambda: ws.d_lambda.iter().map(|x| x * chain).collect(),
            dt_big_lambda: ws.d_big_lambda.iter().map(|x| x * chain).collect(),
            d_lambda: ws.d_lambda,
            d_big_lambda: ws.d_big_lambda,
        })
    }

    /// `F^{ij}` and `Ft^{ij}` assembled as `Q diag(dF/dlambda) Q^T`.
    pub fn gradient(&self, a: &DMatrix<f64>) -> Result<OperatorGradient> {
        let point = self.evaluate(a)?;
        self.gradient_at(&point)
    }

    pub fn gradient_at(&self, point: &EvaluationPoint) -> Result<OperatorGradient> {
        let sd = self.spectral_first_derivatives(&point.eigen.values)?;
        Ok(OperatorGradient {
            f: spectral_compose(&point.eigen.vectors, &sd.d_lambda),
            ftilde: spectral_compose(&point.eigen.vectors, &sd.dt_lambda),
        })
    }

    /// Gradient through the derivation matrix `W(A)`: `sigma_m(W)` from
    /// Newton's identities on `tr(W^j)`, `d sigma_m / dW` from the matrix
    /// polynomial `sum_j (-1)^j sigma_{m-1-j}(W) (W^j)^T`, then pulled back to
    /// `A` with the constant Jacobian `dW/dA`. No eigen-decomposition is used.
    pub fn gradient_via_derivation(&self, a: &DMatrix<f64>) -> Result<OperatorGradient> {
        let diag = self.admissible(a)?;
        if !diag.admissible {
            return Err(self.not_admissible(&diag));
        }
        let w = derivation_matrix(a, &self.table)?.into_matrix();
        let (k, l) = (self.cfg.k, self.cfg.l);
        let big_n = self.table.len();
        let mut powers = vec![DMatrix::<f64>::identity(big_n, big_n)];
        for j in 1..=k {
            let next = &powers[j - 1] * &w;
            powers.push(next);
        }
        let traces: Vec<f64> = powers.iter().map(|m| m.trace()).collect();
        let mut sig = vec![1.0];
        for m in 1..=k {
            let s: f64 = (1..=m)
                .map(|j| {
                    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                    sign * sig[m - j] * traces[j]
                })
                .sum();
            sig.push(s / m as f64);
        }
        let dsigma = |m: usize| -> DMatrix<f64> {
            let mut out = DMatrix::zeros(big_n, big_n);
            for j in 0..m {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                out += powers[j].transpose() * (sign * sig[m - 1 - j]);
            }
            out
        };
        let (sk, sl) = (sig[k], sig[l]);
        let dk = dsigma(k);
        let df_dw = if l == 0 {
            dk
        } else {
            (dk * sl - dsigma(l) * sk) / (sl * sl)
        };
        let jac = derivation_jacobian(&self.table);
        let raw = jac.pullback(&df_dw);
        let f = (&raw + raw.transpose()) * 0.5;
        let value = sk / sl;
        let e = 1.0 / self.cfg.order();
        let chain = e * value.powf(e) / value;
        Ok(OperatorGradient {
            ftilde: &f * chain,
            f,
        })
    }

    /// Second partials `d^2 Ft / dlambda_p dlambda_q` (n x n) at an admissible
    /// spectrum, together with the first partials.
    pub fn spectral_second_derivatives(&self, lam: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let sd = self.spectral_first_derivatives(lam)?;
        let (k, l) = (self.cfg.k as i64, self.cfg.l as i64);
        let big = self.big_lambda(lam);
        let big_n = big.len();
        let sk = sigma_excluding(k, &big, &[]);
        let sl = sigma_excluding(l, &big, &[]);
        let g = sk / sl;
        let q = self.cfg.order();
        // first partials of sigma_k, sigma_l in Lambda
        let dk: Vec<f64> = (0..big_n)
            .map(|s| sigma_excluding(k - 1, &big, &[s]))
            .collect();
        let dl: Vec<f64> = (0..big_n)
            .map(|s| sigma_excluding(l - 1, &big, &[s]))
            .collect();
        let gi = &sd.d_big_lambda;
        let mut h = DMatrix::zeros(big_n, big_n);
        for s in 0..big_n {
            for t in 0..big_n {
                let (dkk, dll) = if s == t {
                    (0.0, 0.0)
                } else {
                    (
                        sigma_excluding(k - 2, &big, &[s, t]),
                        sigma_excluding(l - 2, &big, &[s, t]),
                    )
                };
                let g_st =
                    dkk / sl - (dk[s] * dl[t] + dk[t] * dl[s]) / (sl * sl) - sk * dll / (sl * sl)
                        + 2.0 * sk * dl[s] * dl[t] / (sl * sl * sl);
                h[(s, t)] = g.powf(1.0 / q - 1.0) / q * g_st
                    + (1.0 / q) * (1.0 / q - 1.0) * g.powf(1.0 / q - 2.0) * gi[s] * gi[t];
            }
        }
        let n = self.cfg.n;
        let mut out = DMatrix::zeros(n, n);
        for p in 0..n {
            for r in 0..n {
                let mut acc = 0.0;
                for &s in self.table.members(p) {
                    for &t in self.table.members(r) {
                        acc += h[(s, t)];
                    }
                }
                out[(p, r)] = acc;
            }
        }
        Ok((sd.dt_lambda, out))
    }

    /// Second directional derivative of `Ft` at `A` in direction `B`:
    /// `sum f_pq b_pp b_qq + 2 sum_{p<q} (f_p - f_q)/(lambda_p - lambda_q) b_pq^2`
    /// with `b = Q^T B Q`. Near-coincident eigenvalues use the limit `f_pp - f_pq`.
    pub fn hessian_form(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
        check_symmetric(b, self.cfg.n)?;
        let point = self.evaluate(a)?;
        let lam = &point.eigen.values;
        let (fp, fpq) = self.spectral_second_derivatives(lam)?;
        let q = &point.eigen.vectors;
        let bt = q.transpose() * b * q;
        let n = self.cfg.n;
        let mut total = 0.0;
        for p in 0..n {
            for r in 0..n {
                total += fpq[(p, r)] * bt[(p, p)] * bt[(r, r)];
            }
        }
        for p in 0..n {
            for r in p + 1..n {
                let gap = lam[p] - lam[r];
                let coef = if gap.abs() <= COINCIDENCE_TOL * (1.0 + lam[p].abs() + lam[r].abs()) {
                    fpq[(p, p)] - fpq[(p, r)]
                } else {
                    (fp[p] - fp[r]) / gap
                };
                total += 2.0 * coef * bt[(p, r)] * bt[(p, r)];
            }
        }
        Ok(total)
    }
}

/// Value of `Ft` on a spectrum, `None` outside the cone. Convenience for oracles.
pub fn ftilde_of_spectrum(op: &HqOperator, lam: &Spectrum) -> Option<f64> {
    op.values_from_spectrum(lam.values()).ok().map(|v| v.1)
}
