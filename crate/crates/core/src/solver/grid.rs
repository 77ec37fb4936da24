//! Grids on the unit ball and disk, node fields, and the finite-difference
//! stencils that express the Hessian at each node as linear forms in `u`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HqError, Result};
use crate::linalg::jacobi_eigen;

/// Uniform radial grid `r_j = j / (m - 1)` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub m: usize,
}

impl RadialGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 {
            return Err(HqError::invalid(format!(
                "radial grid needs m >= 4, got {m}"
            )));
        }
        Ok(RadialGrid { m })
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.m - 1) as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }
}

/// Polar grid on the closed unit disk: one center node plus `m_r - 1` rings
/// of `m_theta` nodes at radii `i / (m_r - 1)`.
///
/// Within a ring, nodes are stored in the interleaved angular order
/// `0, m-1, 1, m-2, ..` so that angular neighbours (including the periodic
/// wrap) sit at most two positions apart, which keeps the linear system banded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskGrid {
    pub m_r: usize,
    pub m_theta: usize,
}

impl DiskGrid {
    pub fn new(m_r: usize, m_theta: usize) -> Result<Self> {
        if m_r < 4 {
            return Err(HqError::invalid(format!(
                "disk grid needs m_r >= 4, got {m_r}"
            )));
        }
        if m_theta < 8 || m_theta % 2 != 0 {
            return Err(HqError::invalid(format!(
                "disk grid needs an even m_theta >= 8, got {m_theta}"
            )));
        }
        Ok(DiskGrid { m_r, m_theta })
    }

    pub fn h_r(&self) -> f64 {
        1.0 / (self.m_r - 1) as f64
    }

    pub fn h_theta(&self) -> f64 {
        2.0 * PI / self.m_theta as f64
    }

    pub fn rings(&self) -> usize {
        self.m_r - 1
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.h_theta()
    }

    /// Storage position of angular index `j` within a ring.
    fn slot(&self, j: usize) -> usize {
        let m = self.m_theta;
        if 2 * j < m {
            2 * j
        } else {
            2 * (m - 1 - j) + 1
        }
    }

    fn angle_of_slot(&self, q: usize) -> usize {
        if q % 2 == 0 {
            q / 2
        } else {
            self.m_theta - 1 - (q - 1) / 2
        }
    }

    /// Unknown index of ring `i >= 1`, angle `j` (taken modulo `m_theta`);
    /// ring 0 is the center.
    pub fn index(&self, i: usize, j: usize) -> usize {
        if i == 0 {
            return 0;
        }
        1 + (i - 1) * self.m_theta + self.slot(j % self.m_theta)
    }

    /// `(ring, angle)` of an unknown index.
    pub fn ring_angle(&self, idx: usize) -> (usize, usize) {
        if idx == 0 {
            return (0, 0);
        }
        let q = idx - 1;
        (1 + q / self.m_theta, self.angle_of_slot(q % self.m_theta))
    }

    pub fn node_count(&self) -> usize {
        1 + self.rings() * self.m_theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case")]
pub enum Grid {
    Radial(RadialGrid),
    Disk(DiskGrid),
}

/// Position of a node; `x`, `y` are zero on radial grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeCoord {
    pub r: f64,
    pub theta: f64,
    pub x: f64,
    pub y: f64,
}

impl Grid {
    pub fn node_count(&self) -> usize {
        match self {
            Grid::Radial(g) => g.m,
            Grid::Disk(g) => g.node_count(),
        }
    }

    pub fn coord(&self, idx: usize) -> NodeCoord {
        match self {
            Grid::Radial(g) => NodeCoord {
                r: g.r(idx),
                theta: 0.0,
                x: g.r(idx),
                y: 0.0,
            },
            Grid::Disk(g) => {
                let (i, j) = g.ring_angle(idx);
                let r = i as f64 * g.h_r();
                let theta = if i == 0 { 0.0 } else { g.theta(j) };
                NodeCoord {
                    r,
                    theta,
                    x: r * theta.cos(),
                    y: r * theta.sin(),
                }
            }
        }
    }

    /// Boundary nodes in angular order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        match self {
            Grid::Radial(g) => vec![g.m - 1],
            Grid::Disk(g) => (0..g.m_theta).map(|j| g.index(g.rings(), j)).collect(),
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        match self {
            Grid::Radial(g) => idx == g.m - 1,
            Grid::Disk(g) => g.ring_angle(idx).0 == g.rings(),
        }
    }

    /// Node indices in natural order: radius first, then angle.
    pub fn natural_order(&self) -> Vec<usize> {
        match self {
            Grid::Radial(g) => (0..g.m).collect(),
            Grid::Disk(g) => {
                let mut out = vec![0];
                for i in 1..=g.rings() {
                    out.extend((0..g.m_theta).map(|j| g.index(i, j)));
                }
                out
            }
        }
    }

    /// Quadrature weights for the volume of the unit ball in `R^n` (radial)
    /// or the unit disk, normalized to sum to one.
    pub fn volume_weights(&self, n: usize) -> Vec<f64> {
        let mut w = match self {
            Grid::Radial(g) => {
                let h = g.h();
                (0..g.m)
                    .map(|j| {
                        let end = if j == 0 || j == g.m - 1 { 0.5 } else { 1.0 };
                        end * h * g.r(j).powi(n as i32 - 1)
                    })
                    .collect::<Vec<_>>()
            }
            Grid::Disk(g) => {
                let (hr, ht) = (g.h_r(), g.h_theta());
                let mut w = vec![0.0; g.node_count()];
                w[0] = PI * (0.5 * hr).powi(2);
                for i in 1..=g.rings() {
                    let band = if i == g.rings() { 0.5 * hr } else { hr };
                    for j in 0..g.m_theta {
                        w[g.index(i, j)] = i as f64 * hr * band * ht;
                    }
                }
                w
            }
        };
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }
}

/// Values of `u` at every node of a grid, in unknown order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(HqError::invalid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(NodeCoord) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(grid.coord(i))).collect();
        ScalarField { grid, values }
    }

    pub fn mean(&self, n: usize) -> f64 {
        self.grid
            .volume_weights(n)
            .iter()
            .zip(&self.values)
            .map(|(w, u)| w * u)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `max - min` over nodes.
    pub fn oscillation(&self) -> f64 {
        let max = self.values.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let min = self.values.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        max - min
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Discrete gradient magnitude at every node.
    pub fn gradient_norms(&self) -> Vec<f64> {
        let u = &self.values;
        match self.grid {
            Grid::Radial(g) => {
                let h = g.h();
                let m = g.m;
                (0..m)
                    .map(|j| {
                        if j == 0 {
                            0.0
                        } else if j == m - 1 {
                            ((3.0 * u[j] - 4.0 * u[j - 1] + u[j - 2]) / (2.0 * h)).abs()
                        } else {
                            ((u[j + 1] - u[j - 1]) / (2.0 * h)).abs()
                        }
                    })
                    .collect()
            }
            Grid::Disk(g) => {
                let (hr, ht) = (g.h_r(), g.h_theta());
                let mt = g.m_theta;
                let mut out = vec![0.0; g.node_count()];
                // center: fit odd part of the first ring
                let (mut gx, mut gy) = (0.0, 0.0);
                for j in 0..mt {
                    let d = (u[g.index(1, j)] - u[g.index(1, j + mt / 2)]) / (2.0 * hr);
                    gx += d * g.theta(j).cos();
                    gy += d * g.theta(j).sin();
                }
                out[0] = (2.0 / mt as f64) * gx.hypot(gy);
                for i in 1..=g.rings() {
                    let r = i as f64 * hr;
                    for j in 0..mt {
                        let ur = if i == g.rings() {
                            (3.0 * u[g.index(i, j)] - 4.0 * u[g.index(i - 1, j)]
                                + u[g.index(i - 2, j)])
                                / (2.0 * hr)
                        } else {
                            (u[g.index(i + 1, j)] - u[g.index(i - 1, j)]) / (2.0 * hr)
                        };
                        let ut = (u[g.index(i, j + 1)] - u[g.index(i, j + mt - 1)]) / (2.0 * ht);
                        out[g.index(i, j)] = ur.hypot(ut / r);
                    }
                }
                out
            }
        }
    }
}

/// Sparse linear form `sum c_i u_i`.
pub type Form = Vec<(usize, f64)>;

pub(crate) fn apply(form: &Form, u: &[f64]) -> f64 {
    form.iter().map(|&(i, c)| c * u[i]).sum()
}

/// What one row of the discrete system imposes.
#[derive(Debug, Clone)]
pub enum Row {
    /// The PDE at an interior node (center included): the upper triangle of
    /// the Hessian as linear forms `(a, b, form)`, `a <= b`.
    Equation { hess: Vec<(usize, usize, Form)> },
    /// Neumann condition: second-order one-sided outward normal derivative,
    /// with `phi_index` pointing into the boundary data.
    Boundary { normal: Form, phi_index: usize },
}

/// Stencils for every row plus the band structure of the resulting system.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    pub n: usize,
    pub rows: Vec<Row>,
    pub kl: usize,
    pub ku: usize,
}

impl Discretization {
    /// `n` is the ambient dimension (ignored for the disk, where it must be 2).
    pub fn new(grid: Grid, n: usize) -> Result<Self> {
        let rows = match grid {
            Grid::Radial(g) => radial_rows(g, n),
            Grid::Disk(g) => {
                if n != 2 {
                    return Err(HqError::invalid(format!(
                        "the disk solver needs n = 2, got {n}"
                    )));
                }
                disk_rows(g)
            }
        };
        let (mut kl, mut ku) = (0, 0);
        for (i, row) in rows.iter().enumerate() {
            let forms: Vec<&Form> = match row {
                Row::Equation { hess } => hess.iter().map(|h| &h.2).collect(),
                Row::Boundary { normal, .. } => vec![normal],
            };
            for &(c, _) in forms.into_iter().flatten() {
                kl = kl.max(i.saturating_sub(c));
                ku = ku.max(c.saturating_sub(i));
            }
        }
        Ok(Discretization {
            grid,
            n,
            rows,
            kl,
            ku,
        })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Discrete Hessian at equation row `i`; `None` on boundary rows.
    pub fn hessian(&self, i: usize, u: &[f64]) -> Option<DMatrix<f64>> {
        match &self.rows[i] {
            Row::Equation { hess } => {
                let mut h = DMatrix::zeros(self.n, self.n);
                for (a, b, form) in hess {
                    let v = apply(form, u);
                    h[(*a, *b)] = v;
                    h[(*b, *a)] = v;
                }
                Some(h)
            }
            Row::Boundary { .. } => None,
        }
    }
}

fn radial_rows(g: RadialGrid, n: usize) -> Vec<Row> {
    let m = g.m;
    let h = g.h();
    let h2 = h * h;
    let mut rows = Vec::with_capacity(m);
    for j in 0..m - 1 {
        let (urr, ut): (Form, Form) = if j == 0 {
            // ghost node u_{-1} = u_1; u'/r tends to u''(0)
            let f = vec![(0, -2.0 / h2), (1, 2.0 / h2)];
            (f.clone(), f)
        } else {
            let r = g.r(j);
            (
                vec![(j - 1, 1.0 / h2), (j, -2.0 / h2), (j + 1, 1.0 / h2)],
                vec![(j - 1, -1.0 / (2.0 * h * r)), (j + 1, 1.0 / (2.0 * h * r))],
            )
        };
        let mut hess = vec![(0, 0, urr)];
        hess.extend((1..n).map(|a| (a, a, ut.clone())));
        rows.push(Row::Equation { hess });
    }
    rows.push(Row::Boundary {
        normal: vec![
            (m - 3, 1.0 / (2.0 * h)),
            (m - 2, -4.0 / (2.0 * h)),
            (m - 1, 3.0 / (2.0 * h)),
        ],
        phi_index: 0,
    });
    rows
}

fn disk_rows(g: DiskGrid) -> Vec<Row> {
    let (hr, ht) = (g.h_r(), g.h_theta());
    let mt = g.m_theta;
    let big = g.rings();
    let mut rows: Vec<Option<Row>> = vec![None; g.node_count()];

    // center: D(theta_j) = (u(h, theta_j) + u(h, theta_j + pi) - 2 u_0) / h^2 is the
    // second derivative along theta_j; fit tr/2 + a cos 2t + b sin 2t over the ring.
    let w = 2.0 / mt as f64;
    let mut hxx: Form = Vec::new();
    let mut hyy: Form = Vec::new();
    let mut hxy: Form = Vec::new();
    let mut center = 0.0;
    for j in 0..mt {
        let t = g.theta(j);
        let (c2, s2) = ((2.0 * t).cos(), (2.0 * t).sin());
        // u(h, theta_j) appears in D(theta_j) and D(theta_j + pi)
        let coef = 2.0 / (hr * hr);
        let node = g.index(1, j);
        // tr = 2 mean D, (Hxx - Hyy)/2 = 2 mean(D cos), Hxy = 2 mean(D sin)
        let tr = w * coef;
        let diff = w * coef * c2;
        hxx.push((node, 0.5 * tr + diff));
        hyy.push((node, 0.5 * tr - diff));
        hxy.push((node, w * coef * s2));
        center += coef;
    }
    let tr0 = -w * center;
    hxx.push((0, 0.5 * tr0));
    hyy.push((0, 0.5 * tr0));
    rows[0] = Some(Row::Equation {
        hess: vec![(0, 0, hxx), (0, 1, hxy), (1, 1, hyy)],
    });

    for i in 1..big {
        let r = i as f64 * hr;
        for j in 0..mt {
            let c = g.index(i, j);
            let up = g.index(i + 1, j);
            let dn = g.index(i - 1, j);
            let (jp, jm) = (j + 1, j + mt - 1);
            let urr = vec![
                (dn, 1.0 / (hr * hr)),
                (c, -2.0 / (hr * hr)),
                (up, 1.0 / (hr * hr)),
            ];
            // u_r / r + u_tt / r^2
            let a = 1.0 / (2.0 * hr * r);
            let b = 1.0 / (ht * ht * r * r);
            let utt = vec![
                (dn, -a),
                (up, a),
                (g.index(i, jp), b),
                (c, -2.0 * b),
                (g.index(i, jm), b),
            ];
            // u_rt / r - u_t / r^2
            let mixed = 1.0 / (4.0 * hr * ht * r);
            let tang = 1.0 / (2.0 * ht * r * r);
            let mut urt = vec![
                (g.index(i + 1, jp), mixed),
                (g.index(i + 1, jm), -mixed),
                (g.index(i, jp), -tang),
                (g.index(i, jm), tang),
            ];
            if i > 1 {
                urt.push((g.index(i - 1, jp), -mixed));
                urt.push((g.index(i - 1, jm), mixed));
            }
            rows[c] = Some(Row::Equation {
                hess: vec![(0, 0, urr), (0, 1, urt), (1, 1, utt)],
            });
        }
    }

    for j in 0..mt {
        let c = g.index(big, j);
        rows[c] = Some(Row::Boundary {
            normal: vec![
                (g.index(big - 2, j), 1.0 / (2.0 * hr)),
                (g.index(big - 1, j), -4.0 / (2.0 * hr)),
                (c, 3.0 / (2.0 * hr)),
            ],
            phi_index: j,
        });
    }
    rows.into_iter()
        .map(|r| r.expect("every node has a row"))
        .collect()
}

/// Hessian eigenvalues of a radial field at node `j`:
/// `(u'', u'/r, .., u'/r)` with `n - 1` copies of `u'/r`. At `r = 0` both
/// entries use the symmetric ghost node; at `r = 1` one-sided stencils.
pub fn radial_spectrum(u: &ScalarField, j: usize, n: usize) -> Result<Vec<f64>> {
    let Grid::Radial(g) = u.grid else {
        return Err(HqError::invalid("radial_spectrum needs a radial field"));
    };
    if j >= g.m {
        return Err(HqError::invalid(format!(
            "node {j} out of range 0..{}",
            g.m
        )));
    }
    let v = &u.values;
    let h = g.h();
    let (upp, ut) = if j == 0 {
        let d = 2.0 * (v[1] - v[0]) / (h * h);
        (d, d)
    } else if j == g.m - 1 {
        let upp = (2.0 * v[j] - 5.0 * v[j - 1] + 4.0 * v[j - 2] - v[j - 3]) / (h * h);
        let up = (3.0 * v[j] - 4.0 * v[j - 1] + v[j - 2]) / (2.0 * h);
        (upp, up / g.r(j))
    } else {
        let upp = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
        let up = (v[j + 1] - v[j - 1]) / (2.0 * h);
        (upp, up / g.r(j))
    };
    let mut out = vec![ut; n];
    out[0] = upp;
    Ok(out)
}

/// Largest Hessian eigenvalue magnitude over the equation rows.
pub fn max_hessian_norm(disc: &Discretization, u: &[f64]) -> f64 {
    (0..disc.dim())
        .filter_map(|i| disc.hessian(i, u))
        .map(|h| {
            jacobi_eigen(&h)
                .values
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()))
        })
        .fold(0.0, f64::max)
}
