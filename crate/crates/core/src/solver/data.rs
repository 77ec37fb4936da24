//! Problem data descriptions: right-hand sides, boundary data and exact
//! solutions used to manufacture them.

use serde::{Deserialize, Serialize};

use crate::error::{HqError, Result};
use crate::operator::{HqOperator, OperatorConfig};

use super::grid::{Grid, NodeCoord};

/// Closed-form solution used for manufactured problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactSpec {
    /// `u(r) = sum_i coeffs[i] r^i`; `coeffs[1]` must vanish for smoothness at 0.
    RadialPoly { coeffs: Vec<f64> },
    /// `u = (a x^2 + b y^2) / 2`; on radial grids `b` must equal `a`.
    Quadratic {
        a: f64,
        #[serde(default)]
        b: Option<f64>,
    },
}

impl ExactSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            ExactSpec::RadialPoly { coeffs } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(HqError::invalid(
                        "exact polynomial has non-finite coefficients",
                    ));
                }
                if coeffs.get(1).is_some_and(|&c| c != 0.0) {
                    return Err(HqError::invalid(
                        "exact radial polynomial needs a zero linear coefficient",
                    ));
                }
            }
            ExactSpec::Quadratic { a, b } => {
                if !a.is_finite() || b.is_some_and(|b| !b.is_finite()) {
                    return Err(HqError::invalid("quadratic coefficients must be finite"));
                }
                if matches!(grid, Grid::Radial(_)) && b.is_some_and(|b| b != *a) {
                    return Err(HqError::invalid(
                        "an anisotropic quadratic needs the disk geometry",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, c: NodeCoord) -> f64 {
        match self {
            ExactSpec::RadialPoly { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, &k| acc * c.r + k)
            }
            ExactSpec::Quadratic { a, b } => {
                let b = b.unwrap_or(*a);
                0.5 * (a * c.x * c.x + b * c.y * c.y)
            }
        }
    }

    /// `(u'(r), u''(r), u'(r)/r)` for radial polynomials.
    fn radial_derivatives(coeffs: &[f64], r: f64) -> (f64, f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        let mut d1_over_r = 0.0;
        for (i, &c) in coeffs.iter().enumerate().skip(1) {
            let i_f = i as f64;
            d1 += i_f * c * r.powi(i as i32 - 1);
            if i >= 2 {
                d2 += i_f * (i_f - 1.0) * c * r.powi(i as i32 - 2);
                d1_over_r += i_f * c * r.powi(i as i32 - 2);
            }
        }
        (d1, d2, d1_over_r)
    }

    /// Hessian eigenvalues at a node in dimension `n`.
    pub fn spectrum(&self, c: NodeCoord, n: usize) -> Vec<f64> {
        match self {
            ExactSpec::RadialPoly { coeffs } => {
                let (_, d2, d1r) = Self::radial_derivatives(coeffs, c.r);
                let mut out = vec![d1r; n];
                out[0] = d2;
                out
            }
            ExactSpec::Quadratic { a, b } => {
                let mut out = vec![*a; n];
                if n == 2 {
                    out[1] = b.unwrap_or(*a);
                }
                out
            }
        }
    }

    /// Outward normal derivative on the unit sphere at angle `c.theta`.
    pub fn normal_derivative(&self, c: NodeCoord) -> f64 {
        match self {
            ExactSpec::RadialPoly { coeffs } => Self::radial_derivatives(coeffs, 1.0).0,
            ExactSpec::Quadratic { a, b } => {
                let b = b.unwrap_or(*a);
                a * c.theta.cos().powi(2) + b * c.theta.sin().powi(2)
            }
        }
    }
}

/// Right-hand side `f >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    Constant {
        value: f64,
    },
    /// `f(r) = sum_i coeffs[i] r^i`.
    RadialPoly {
        coeffs: Vec<f64>,
    },
    /// Piecewise-linear in `r` through `(r[i], values[i])`, `r` increasing
    /// and covering `[0, 1]`.
    #[serde(alias = "expression-table", alias = "expression_table")]
    Table {
        r: Vec<f64>,
        values: Vec<f64>,
    },
    /// `F(D^2 u*)` for the exact solution.
    FromExact,
}

/// Boundary data `phi` on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiSpec {
    Constant {
        value: f64,
    },
    /// `u*_nu + eps u*`, so that `u*` solves the problem for every `eps`.
    FromExact,
    /// `a0 + sum_m cos[m-1] cos(m theta) + sin[m-1] sin(m theta)`.
    Fourier {
        a0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

fn interpolate(r: &[f64], values: &[f64], x: f64) -> f64 {
    let pos = r.partition_point(|&t| t <= x);
    if pos == 0 {
        return values[0];
    }
    if pos == r.len() {
        return values[r.len() - 1];
    }
    let (r0, r1) = (r[pos - 1], r[pos]);
    let t = (x - r0) / (r1 - r0);
    values[pos - 1] * (1.0 - t) + values[pos] * t
}

impl FSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FSpec::Table { r, values } => {
                if r.len() < 2 || r.len() != values.len() {
                    return Err(HqError::invalid(
                        "f table needs at least two points and matching lengths",
                    ));
                }
                if r.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(HqError::invalid(
                        "f table radii must be strictly increasing",
                    ));
                }
                if r[0] > 0.0 || r[r.len() - 1] < 1.0 {
                    return Err(HqError::invalid("f table must cover [0, 1]"));
                }
            }
            FSpec::Constant { value } if !value.is_finite() => {
                return Err(HqError::invalid("f value must be finite"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Node values of `f`.
    pub fn sample(
        &self,
        grid: &Grid,
        cfg: &OperatorConfig,
        exact: Option<&ExactSpec>,
    ) -> Result<Vec<f64>> {
        self.validate()?;
        let count = grid.node_count();
        match self {
            FSpec::Constant { value } => Ok(vec![*value; count]),
            FSpec::RadialPoly { coeffs } => Ok((0..count)
                .map(|i| {
                    let r = grid.coord(i).r;
                    coeffs.iter().rev().fold(0.0, |acc, &k| acc * r + k)
                })
                .collect()),
            FSpec::Table { r, values } => Ok((0..count)
                .map(|i| interpolate(r, values, grid.coord(i).r))
                .collect()),
            FSpec::FromExact => {
                let exact = exact.ok_or_else(|| {
                    HqError::Config("f.kind = from_exact needs an `exact` entry".into())
                })?;
                let op = HqOperator::new(*cfg)?;
                (0..count)
                    .map(|i| {
                        let c = grid.coord(i);
                        let lam = exact.spectrum(c, cfg.n);
                        // a vanishing Hessian is the degenerate limit, F = 0
                        if lam.iter().all(|&x| x == 0.0) {
                            return Ok(0.0);
                        }
                        let big = op.big_lambda(&lam);
                        let t = crate::symmetric::sigma_table(&big, cfg.k);
                        if t[1..=cfg.k].iter().any(|&s| s < 0.0) || t[cfg.l] <= 0.0 {
                            return Err(HqError::invalid(format!(
                                "exact solution is not admissible at r = {}",
                                c.r
                            )));
                        }
                        Ok(t[cfg.k] / t[cfg.l])
                    })
                    .collect()
            }
        }
    }
}

impl PhiSpec {
    /// Boundary values in the grid's boundary-node order.
    pub fn sample(&self, grid: &Grid, eps: f64, exact: Option<&ExactSpec>) -> Result<Vec<f64>> {
        let nodes = grid.boundary_nodes();
        match self {
            PhiSpec::Constant { value } => Ok(vec![*value; nodes.len()]),
            PhiSpec::FromExact => {
                let exact = exact.ok_or_else(|| {
                    HqError::Config("phi.kind = from_exact needs an `exact` entry".into())
                })?;
                Ok(nodes
                    .iter()
                    .map(|&i| {
                        let c = grid.coord(i);
                        exact.normal_derivative(c) + eps * exact.value(c)
                    })
                    .collect())
            }
            PhiSpec::Fourier { a0, cos, sin } => Ok(nodes
                .iter()
                .map(|&i| {
                    let t = grid.coord(i).theta;
                    let mut v = *a0;
                    for (m, c) in cos.iter().enumerate() {
                        v += c * ((m + 1) as f64 * t).cos();
                    }
                    for (m, s) in sin.iter().enumerate() {
                        v += s * ((m + 1) as f64 * t).sin();
                    }
                    v
                })
                .collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::grid::RadialGrid;

    #[test]
    fn table_interpolates_linearly() {
        let r = [0.0, 0.5, 1.0];
        let v = [1.0, 3.0, 2.0];
        assert_eq!(interpolate(&r, &v, 0.25), 2.0);
        assert_eq!(interpolate(&r, &v, 1.0), 2.0);
        assert_eq!(interpolate(&r, &v, 0.75), 2.5);
    }

    #[test]
    fn quartic_spectrum_and_normal_derivative() {
        let e = ExactSpec::RadialPoly {
            coeffs: vec![0.0, 0.0, 0.5, 0.0, 0.125],
        };
        let c = NodeCoord {
            r: 0.5,
            theta: 0.0,
            x: 0.5,
            y: 0.0,
        };
        let s = e.spectrum(c, 3);
        assert!((s[0] - (1.0 + 1.5 * 0.25)).abs() < 1e-15);
        assert!((s[1] - (1.0 + 0.5 * 0.25)).abs() < 1e-15);
        assert!((e.normal_derivative(c) - 1.5).abs() < 1e-15);
        assert!((e.value(c) - (0.125 + 0.0078125)).abs() < 1e-15);
    }

    #[test]
    fn linear_term_rejected() {
        let g = Grid::Radial(RadialGrid::new(9).unwrap());
        let e = ExactSpec::RadialPoly {
            coeffs: vec![0.0, 1.0],
        };
        assert!(e.validate(&g).is_err());
        let q = ExactSpec::Quadratic {
            a: 1.0,
            b: Some(2.0),
        };
        assert!(q.validate(&g).is_err());
    }

    #[test]
    fn from_exact_quadratic_f() {
        let g = Grid::Radial(RadialGrid::new(9).unwrap());
        let cfg = OperatorConfig::new(3, 1, 2, 0).unwrap();
        let e = ExactSpec::Quadratic { a: 1.0, b: None };
        let f = FSpec::FromExact.sample(&g, &cfg, Some(&e)).unwrap();
        assert!(f.iter().all(|&x| (x - 3.0).abs() < 1e-14));
        let phi = PhiSpec::FromExact.sample(&g, 1.0, Some(&e)).unwrap();
        assert_eq!(phi, vec![1.5]);
    }
}
