//! Batch re-checks of the classical properties of `sigma_k`, of the quotient
//! root on `Gamma_k`, and of the `Lambda`-map derivatives on `P_{p,k}`.

use crate::error::Result;
use crate::operator::{HqOperator, OperatorConfig, Workspace};
use crate::symmetric::{
    binomial, quotient_partials, sigma_excluding, sigma_table, QuotientScratch,
};

use super::{fold_samples, Constraint, MinTracker, SampleSpec, VerificationReport};

const CONCAVITY_WEIGHTS: [f64; 3] = [0.25, 0.5, 0.75];
/// Allowed negative excursion of sign and ordering checks that involve
/// cancellation between nearly equal terms.
const ROUNDING_FLOOR: f64 = -1e-10;

struct Metric {
    name: &'static str,
    theoretical: f64,
    exploratory: bool,
}

const fn metric(name: &'static str, theoretical: f64) -> Metric {
    Metric {
        name,
        theoretical,
        exploratory: false,
    }
}

const GAMMA_METRICS: [Metric; 10] = [
    metric("cone_nesting", 0.0),
    metric("reduced_sigma_positive", 0.0),
    metric("deletion_identity", -1e-12),
    metric("leading_term_bound", 0.0), // theoretical filled in per config
    metric("reduced_sigma_kth", 0.0),
    metric("reduced_sigma_order", ROUNDING_FLOOR),
    metric("newton_maclaurin", 1.0),
    metric("root_gradient_sum", 1.0),
    metric("root_concavity", -1e-10),
    metric("quotient_ellipticity", 0.0),
];

const LAMBDA_METRICS: [Metric; 6] = [
    metric("extreme_sums", -1e-12),
    metric("multi_index_derivative_order", ROUNDING_FLOOR),
    metric("coordinate_derivative_order", ROUNDING_FLOOR),
    metric("trace_lower_bound", 1.0),
    metric("concavity_in_lambda", -1e-10),
    metric("ellipticity", 0.0),
];

struct Acc {
    mins: Vec<MinTracker>,
    prev: Option<Vec<f64>>,
}

impl Acc {
    fn new(len: usize) -> Self {
        Acc {
            mins: vec![MinTracker::default(); len],
            prev: None,
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.mins = self
            .mins
            .into_iter()
            .zip(other.mins)
            .map(|(a, b)| a.merge(b))
            .collect();
        self
    }
}

fn quotient_root_of(k: usize, l: usize, v: &[f64]) -> f64 {
    let t = sigma_table(v, k);
    (t[k] / t[l]).powf(1.0 / (k - l) as f64)
}

/// Per-sample metrics on `v in Gamma_k`, `v` of any length `d >= k`.
fn gamma_sample(k: usize, l: usize, v: &[f64], prev: Option<&[f64]>, out: &mut [f64; 10]) {
    let d = v.len();
    let t = sigma_table(v, k);
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    // every sigma_j, j <= k, normalized to the same homogeneity
    out[0] = (1..=k)
        .map(|j| t[j] / (binomial(d, j) * scale.powi(j as i32)))
        .fold(f64::INFINITY, f64::min);

    let reduced: Vec<f64> = (0..d)
        .map(|i| sigma_excluding(k as i64 - 1, v, &[i]))
        .collect();
    out[1] = reduced.iter().fold(f64::INFINITY, |m, &x| m.min(x)) / scale.powi(k as i32 - 1);

    out[2] = (0..d)
        .map(|i| {
            let a = sigma_excluding(k as i64, v, &[i]);
            let b = v[i] * reduced[i];
            -(t[k] - a - b).abs() / (t[k].abs() + a.abs() + b.abs())
        })
        .fold(f64::INFINITY, f64::min);

    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let sred: Vec<f64> = (0..d)
        .map(|i| sigma_excluding(k as i64 - 1, &sorted, &[i]))
        .collect();
    out[3] = sorted[0] * sred[0] / t[k];
    out[4] = sred[k - 1] / t[k - 1];
    let top = sred.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    out[5] = sred
        .windows(2)
        .map(|w| (w[1] - w[0]) / top)
        .fold(f64::INFINITY, f64::min);

    // every admissible (r, s) pair other than (k, l) itself
    let lhs = ((t[k] / binomial(d, k)) / (t[l] / binomial(d, l))).powf(1.0 / (k - l) as f64);
    let mut nm = f64::INFINITY;
    for r in 1..=k {
        for s in 0..r.min(l + 1) {
            if (r, s) == (k, l) {
                continue;
            }
            let rhs =
                ((t[r] / binomial(d, r)) / (t[s] / binomial(d, s))).powf(1.0 / (r - s) as f64);
            nm = nm.min(rhs / lhs);
        }
    }
    out[6] = nm;

    let mut grad = vec![0.0; d];
    let q = quotient_partials(k, l, v, &mut QuotientScratch::default(), &mut grad);
    let e = 1.0 / (k - l) as f64;
    let chain = e * q.powf(e - 1.0);
    let bound = (binomial(d, k) / binomial(d, l)).powf(e);
    out[7] = grad.iter().sum::<f64>() * chain / bound;

    out[8] = match prev {
        Some(w) => concavity_gap(v, w, |x| quotient_root_of(k, l, x)),
        None => f64::INFINITY,
    };
    let gmax = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    out[9] = grad.iter().fold(f64::INFINITY, |m, &x| m.min(x)) / gmax;
}

fn concavity_gap(v: &[f64], w: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let (fv, fw) = (f(v), f(w));
    CONCAVITY_WEIGHTS
        .iter()
        .map(|&t| {
            let mix: Vec<f64> = v
                .iter()
                .zip(w)
                .map(|(a, b)| t * a + (1.0 - t) * b)
                .collect();
            f(&mix) - t * fv - (1.0 - t) * fw
        })
        .fold(f64::INFINITY, f64::min)
}

fn lambda_sample(
    op: &HqOperator,
    lam: &[f64],
    prev: Option<&[f64]>,
    ws: &mut Workspace,
    out: &mut [f64; 6],
) {
    let cfg = op.config();
    let (n, p) = (cfg.n, cfg.p);
    let mut sorted = lam.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    op.quotient_partials_in(&sorted, ws);
    let big = &ws.big_lambda;
    let scale = sorted.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let max = big.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let min = big.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let top: f64 = sorted[..p].iter().sum();
    let bottom: f64 = sorted[n - p..].iter().sum();
    out[0] = -((max - top).abs() + (min - bottom).abs()) / (p as f64 * scale);

    let mut order: Vec<usize> = (0..big.len()).collect();
    order.sort_by(|&a, &b| big[b].total_cmp(&big[a]));
    let dmax = ws.d_big_lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    out[1] = order
        .windows(2)
        .map(|w| (ws.d_big_lambda[w[1]] - ws.d_big_lambda[w[0]]) / dmax)
        .fold(f64::INFINITY, f64::min);
    let lmax = ws.d_lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    out[2] = ws
        .d_lambda
        .windows(2)
        .map(|w| (w[1] - w[0]) / lmax)
        .fold(f64::INFINITY, f64::min);

    let f = op.quotient_partials_in(lam, ws);
    let e = 1.0 / cfg.order();
    let chain = e * f.powf(e - 1.0);
    out[3] = ws.d_lambda.iter().sum::<f64>() * chain / cfg.trace_bound();
    out[5] = ws.d_big_lambda.iter().fold(f64::INFINITY, |m, &x| m.min(x)) / dmax;

    out[4] = match prev {
        Some(w) => {
            let (k, l) = (cfg.k, cfg.l);
            concavity_gap(lam, w, |x| quotient_root_of(k, l, &op.big_lambda(x)))
        }
        None => f64::INFINITY,
    };
}

fn reports(
    metrics: &[Metric],
    spec: &SampleSpec,
    acc: Acc,
    stats: super::SamplerStats,
    overrides: &[(usize, f64)],
) -> Vec<VerificationReport> {
    metrics
        .iter()
        .zip(acc.mins)
        .enumerate()
        .map(|(i, (m, tracker))| {
            let theoretical = overrides
                .iter()
                .find(|(j, _)| *j == i)
                .map_or(m.theoretical, |o| o.1);
            let mut r = VerificationReport::finish(m.name, spec, theoretical, tracker, stats);
            r.exploratory = m.exploratory;
            r
        })
        .collect()
}

/// Re-checks the `sigma_k` properties on samples of `Gamma_k` in `R^N`
/// (with the configuration's `k`, `l`), then the `Lambda`-map properties on
/// samples of `P_{p,k}`. Both families are unconstrained and
/// `spec.constraint` is ignored. One report per property.
pub fn verify_structure_suite(spec: &SampleSpec) -> Result<Vec<VerificationReport>> {
    spec.validate()?;
    let cfg = spec.cfg;
    let big_n = cfg.big_n();

    let gamma_spec = SampleSpec {
        cfg: OperatorConfig::new(big_n, 1, cfg.k, cfg.l)?,
        constraint: Constraint::Unconstrained,
        ..*spec
    };
    let (k, l) = (cfg.k, cfg.l);
    let (acc, stats) = fold_samples(
        &gamma_spec,
        || Acc::new(GAMMA_METRICS.len()),
        |acc: &mut Acc, v, _| {
            let mut out = [0.0; 10];
            gamma_sample(k, l, v, acc.prev.as_deref(), &mut out);
            for (t, &x) in acc.mins.iter_mut().zip(&out) {
                t.push(x, v);
            }
            acc.prev = Some(v.to_vec());
        },
        Acc::merge,
    )?;
    let leading = k as f64 / big_n as f64;
    let mut out = reports(&GAMMA_METRICS, spec, acc, stats, &[(3, leading)]);

    let lambda_spec = SampleSpec {
        constraint: Constraint::Unconstrained,
        ..*spec
    };
    let op = HqOperator::new(cfg)?;
    let (acc, stats) = fold_samples(
        &lambda_spec,
        || Acc::new(LAMBDA_METRICS.len()),
        |acc: &mut Acc, lam, ws| {
            let mut vals = [0.0; 6];
            lambda_sample(&op, lam, acc.prev.as_deref(), ws, &mut vals);
            for (t, &x) in acc.mins.iter_mut().zip(&vals) {
                t.push(x, lam);
            }
            acc.prev = Some(lam.to_vec());
        },
        Acc::merge,
    )?;
    out.extend(reports(&LAMBDA_METRICS, spec, acc, stats, &[]));
    Ok(out)
}

/// Exploratory: the smallest `(dF/dlambda_i) / sum_j dF/dlambda_j` over
/// unconstrained samples of `P_{p,k}`. A positive minimum is evidence for
/// uniform ellipticity at this `(p, k)`; nothing is proved.
pub fn probe_uniform_ellipticity(spec: &SampleSpec) -> Result<VerificationReport> {
    let spec = SampleSpec {
        constraint: Constraint::Unconstrained,
        ..*spec
    };
    let op = HqOperator::new(spec.cfg)?;
    let (acc, stats) = fold_samples(
        &spec,
        MinTracker::default,
        |acc: &mut MinTracker, lam, ws| {
            op.quotient_partials_in(lam, ws);
            let total: f64 = ws.d_lambda.iter().sum();
            let min = ws.d_lambda.iter().fold(f64::INFINITY, |m, &x| m.min(x));
            acc.push(min / total, lam);
        },
        MinTracker::merge,
    )?;
    let mut r = VerificationReport::finish("uniform_ellipticity", &spec, 0.0, acc, stats);
    r.exploratory = true;
    Ok(r)
}
