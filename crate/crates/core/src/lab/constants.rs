//! Explicit lower-bound constants for the `dF/dlambda_1` inequalities.

use crate::error::{HqError, Result};
use crate::operator::OperatorConfig;
use crate::symmetric::binomial;

fn require_k2(cfg: &OperatorConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.k < 2 {
        return Err(HqError::invalid(format!(
            "the lambda_1 inequalities need k >= 2, got k={}",
            cfg.k
        )));
    }
    Ok(())
}

/// `N(k-l) / (k(N-l))`, equal to `1 - l(N-k)/(k(N-l))`.
fn newton_maclaurin_factor(big_n: f64, k: f64, l: f64) -> f64 {
    big_n * (k - l) / (k * (big_n - l))
}

/// Constant for `lambda_1 < 0`: the smaller of the two case bounds
/// `N(k-l)/(k(N-l)(N-k+1)) / p` (some `Lambda_I` with `1 in I` negative) and
/// `1/(p (C(n-1,p) + 1))` (all such `Lambda_I >= 0`).
pub fn theoretical_c1(cfg: &OperatorConfig) -> Result<f64> {
    require_k2(cfg)?;
    let big_n = cfg.big_n() as f64;
    let (k, l, p) = (cfg.k as f64, cfg.l as f64, cfg.p as f64);
    let negative_case = newton_maclaurin_factor(big_n, k, l) / (big_n - k + 1.0) / p;
    let nonnegative_case = 1.0 / (p * (binomial(cfg.n - 1, cfg.p) + 1.0));
    Ok(negative_case.min(nonnegative_case))
}

/// The individual case constants behind [`theoretical_c2`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchedConstants {
    /// `lambda_1 < lambda_{n-p+1}`: `1/(p C(n,p))`.
    pub small_first: f64,
    /// `lambda_1 >= lambda_{n-p+1}`, `Lambda_{I_N} >= -eps lambda_1 / 2`; absent for `p = 1`
    /// where the case is empty.
    pub large_first: Option<f64>,
    /// `Lambda_{I_N} < -eps lambda_1 / 2`.
    pub negative_tail: f64,
}

impl PinchedConstants {
    pub fn min(&self) -> f64 {
        self.large_first
            .map_or(self.small_first, |c| c.min(self.small_first))
            .min(self.negative_tail)
    }
}

pub fn pinched_constants(cfg: &OperatorConfig, delta: f64, eps: f64) -> Result<PinchedConstants> {
    require_k2(cfg)?;
    for (name, v) in [("delta", delta), ("eps", eps)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(HqError::invalid(format!("{name} = {v} must lie in (0, 1]")));
        }
    }
    let big_n = cfg.big_n() as f64;
    let (k, l, p) = (cfg.k as f64, cfg.l as f64, cfg.p as f64);
    let nm = newton_maclaurin_factor(big_n, k, l);

    let small_first = 1.0 / (p * binomial(cfg.n, cfg.p));

    // sum_A >= c sum_B  =>  sum_A >= c/(1+c) sum_I = c/((1+c) p) sum_i
    let large_first = (cfg.p >= 2).then(|| {
        let c = eps * eps * nm / (4.0 * (p - 1.0).powi(2) * binomial(cfg.n - 1, cfg.p));
        c / ((1.0 + c) * p)
    });

    // sigma_m(Lambda | I_1) >= c0(m) sigma_m(Lambda), 1 <= m <= k-1, with c0 the
    // smaller of the two subcase constants theta_1 * theta and C_m.
    let theta = eps * delta / (2.0 * (big_n - 1.0) * p);
    let theta1 = (big_n > 2.0).then(|| eps * delta / (4.0 * (big_n - 2.0) * p));
    let c0 = |m: usize| -> f64 {
        if m == 0 {
            return 1.0;
        }
        let cm = eps * delta * theta / (4.0 * (m as f64 + 1.0) * (p - 1.0 + delta));
        theta1.map_or(cm, |t1| cm.min(t1 * theta))
    };
    let negative_tail = nm * c0(cfg.k - 1) * c0(cfg.l) / ((big_n - k + 1.0) * p);

    Ok(PinchedConstants {
        small_first,
        large_first,
        negative_tail,
    })
}

/// Constant for the pinched hypothesis: minimum over the proof's cases.
pub fn theoretical_c2(cfg: &OperatorConfig, delta: f64, eps: f64) -> Result<f64> {
    Ok(pinched_constants(cfg, delta, eps)?.min())
}
