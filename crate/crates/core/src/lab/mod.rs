//! Monte-Carlo verification of the `dF/dlambda_1` lower bounds and batch
//! re-checks of the standard symmetric-function properties.
//!
//! Sampling is split into fixed-size chunks; chunk `c` draws from the ChaCha
//! stream `c` of the run seed, so results do not depend on scheduling.
//! Per-chunk minima are merged in chunk order with ties resolved to the
//! earlier sample.

mod constants;
mod suite;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HqError, Result};
use crate::operator::{HqOperator, OperatorConfig, Workspace};
use crate::symmetric::{binomial, sigma_table, Spectrum};

pub use constants::{pinched_constants, theoretical_c1, theoretical_c2, PinchedConstants};
pub use suite::{probe_uniform_ellipticity, verify_structure_suite};

/// Samples per deterministic sub-stream.
pub const CHUNK: usize = 4096;
/// A chunk gives up once it has made this many proposals at an acceptance
/// rate below [`MIN_ACCEPTANCE`].
pub const EXHAUSTION_PROPOSALS: u64 = 10_000_000;
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Floating-point slack for `empirical >= theoretical`.
pub const PASS_SLACK: f64 = 1e-12;

/// Extra hypothesis placed on sampled spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    Unconstrained,
    /// `lambda_1 < 0`.
    FirstNegative,
    /// `lambda_2 >= .. >= lambda_n`, `lambda_1 > 0`, `lambda_n < 0`,
    /// `lambda_1 >= delta lambda_2`, `-lambda_n >= eps lambda_1`.
    Pinched {
        delta: f64,
        eps: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub cfg: OperatorConfig,
    pub constraint: Constraint,
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_radius")]
    pub box_radius: f64,
}

fn default_radius() -> f64 {
    1.0
}

impl SampleSpec {
    pub fn new(cfg: OperatorConfig, constraint: Constraint, count: usize, seed: u64) -> Self {
        SampleSpec {
            cfg,
            constraint,
            count,
            seed,
            box_radius: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.count == 0 {
            return Err(HqError::invalid("sample count must be at least 1"));
        }
        if !(self.box_radius > 0.0 && self.box_radius.is_finite()) {
            return Err(HqError::invalid(format!(
                "box_radius must be positive, got {}",
                self.box_radius
            )));
        }
        if let Constraint::Pinched { delta, eps } = self.constraint {
            for (name, v) in [("delta", delta), ("eps", eps)] {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(HqError::invalid(format!("{name} = {v} must lie in (0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of one verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lemma: String,
    pub cfg: OperatorConfig,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    pub count: usize,
    pub seed: u64,
    pub theoretical_constant: f64,
    /// `None` when no sample satisfied the hypotheses.
    pub empirical_min_ratio: Option<f64>,
    pub argmin_sample: Vec<f64>,
    pub samples_accepted: u64,
    pub samples_rejected: u64,
    pub pass: bool,
    /// `true` for probes of properties that are not proved.
    #[serde(default)]
    pub exploratory: bool,
    /// `"pass"`, `"fail"` or `"vacuous"` (hypotheses never met).
    pub status: String,
}

impl VerificationReport {
    pub(crate) fn finish(
        lemma: &str,
        spec: &SampleSpec,
        theoretical: f64,
        acc: MinTracker,
        stats: SamplerStats,
    ) -> Self {
        let (delta, eps) = match spec.constraint {
            Constraint::Pinched { delta, eps } => (Some(delta), Some(eps)),
            _ => (None, None),
        };
        let empirical = acc.argmin.as_ref().map(|_| acc.min);
        let pass = empirical.is_none_or(|m| m >= theoretical - PASS_SLACK);
        let status = match (empirical, pass) {
            (None, _) => "vacuous",
            (Some(_), true) => "pass",
            (Some(_), false) => "fail",
        };
        VerificationReport {
            lemma: lemma.to_string(),
            cfg: spec.cfg,
            delta,
            eps,
            count: spec.count,
            seed: spec.seed,
            theoretical_constant: theoretical,
            empirical_min_ratio: empirical,
            argmin_sample: acc.argmin.unwrap_or_default(),
            samples_accepted: stats.accepted,
            samples_rejected: stats.proposals - stats.accepted,
            pass,
            exploratory: false,
            status: status.to_string(),
        }
    }

    /// A report for hypotheses the sampler could not satisfy.
    pub fn vacuous(lemma: &str, spec: &SampleSpec, theoretical: f64, err: &HqError) -> Self {
        let stats = match err {
            HqError::SamplingExhausted {
                accepted,
                proposals,
                ..
            } => SamplerStats {
                accepted: *accepted,
                proposals: *proposals,
            },
            _ => SamplerStats::default(),
        };
        Self::finish(lemma, spec, theoretical, MinTracker::default(), stats)
    }
}

/// Running minimum with the sample that produced it.
#[derive(Debug, Clone)]
pub(crate) struct MinTracker {
    pub min: f64,
    pub argmin: Option<Vec<f64>>,
}

impl Default for MinTracker {
    fn default() -> Self {
        MinTracker {
            min: f64::INFINITY,
            argmin: None,
        }
    }
}

impl MinTracker {
    pub fn push(&mut self, value: f64, sample: &[f64]) {
        // NaN counts as a violation so it is never hidden
        if self.argmin.is_none() || value < self.min || value.is_nan() && !self.min.is_nan() {
            self.min = value;
            self.argmin = Some(sample.to_vec());
        }
    }

    /// Merge a later chunk into this one; ties keep the earlier sample.
    pub fn merge(mut self, other: MinTracker) -> MinTracker {
        if let Some(s) = other.argmin {
            self.push(other.min, &s);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct SamplerStats {
    pub accepted: u64,
    pub proposals: u64,
}

impl SamplerStats {
    fn add(self, o: SamplerStats) -> SamplerStats {
        SamplerStats {
            accepted: self.accepted + o.accepted,
            proposals: self.proposals + o.proposals,
        }
    }
}

fn exhausted(stats: SamplerStats) -> HqError {
    HqError::SamplingExhausted {
        accepted: stats.accepted,
        proposals: stats.proposals,
        rate: stats.accepted as f64 / stats.proposals.max(1) as f64,
    }
}

/// Draws one proposal into `lam`. Coordinates are uniform on
/// `[-R, R]^n + t(1,..,1)` with `t ~ U[0, R]`; the first coordinate is drawn
/// from `[-R, 0)` under `FirstNegative`, and the tail is sorted non-increasing
/// under `Pinched`.
fn propose(rng: &mut ChaCha8Rng, constraint: Constraint, radius: f64, lam: &mut [f64]) {
    let t = rng.random_range(0.0..=radius);
    for x in lam.iter_mut() {
        *x = rng.random_range(-radius..radius) + t;
    }
    match constraint {
        Constraint::Unconstrained => {}
        Constraint::FirstNegative => lam[0] = -rng.random_range(0.0..radius) - f64::MIN_POSITIVE,
        Constraint::Pinched { .. } => lam[1..].sort_by(|a, b| b.total_cmp(a)),
    }
}

fn constraint_holds(constraint: Constraint, lam: &[f64]) -> bool {
    match constraint {
        Constraint::Unconstrained => true,
        Constraint::FirstNegative => lam[0] < 0.0,
        Constraint::Pinched { delta, eps } => {
            let n = lam.len();
            lam[0] > 0.0
                && lam[n - 1] < 0.0
                && lam[0] >= delta * lam[1]
                && -lam[n - 1] >= eps * lam[0]
                && lam[1..].windows(2).all(|w| w[0] >= w[1])
        }
    }
}

/// Independent re-check of a sample: cone membership through a fresh
/// `sigma` table of the explicit `p`-fold sums, plus every hypothesis
/// inequality written out separately. Returns the first violated condition.
pub fn check_hypotheses(
    cfg: &OperatorConfig,
    constraint: Constraint,
    lam: &[f64],
) -> std::result::Result<(), String> {
    if lam.len() != cfg.n {
        return Err(format!("length {} != {}", lam.len(), cfg.n));
    }
    let mut sums = Vec::new();
    for mask in 0u32..1 << cfg.n {
        if mask.count_ones() as usize == cfg.p {
            sums.push(
                (0..cfg.n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| lam[i])
                    .sum::<f64>(),
            );
        }
    }
    debug_assert_eq!(sums.len() as f64, binomial(cfg.n, cfg.p));
    let table = sigma_table(&sums, cfg.k);
    if let Some(j) = (1..=cfg.k).find(|&j| table[j] <= 0.0) {
        return Err(format!("sigma_{j}(Lambda) = {} <= 0", table[j]));
    }
    match constraint {
        Constraint::Unconstrained => Ok(()),
        Constraint::FirstNegative => {
            if lam[0] < 0.0 {
                Ok(())
            } else {
                Err(format!("lambda_1 = {} is not negative", lam[0]))
            }
        }
        Constraint::Pinched { delta, eps } => {
            let n = cfg.n;
            for i in 1..n - 1 {
                if lam[i] < lam[i + 1] {
                    return Err(format!("tail not ordered at position {i}"));
                }
            }
            if lam[0] <= 0.0 {
                return Err("lambda_1 <= 0".into());
            }
            if lam[n - 1] >= 0.0 {
                return Err("lambda_n >= 0".into());
            }
            if lam[0] < delta * lam[1] {
                return Err("lambda_1 < delta lambda_2".into());
            }
            if -lam[n - 1] < eps * lam[0] {
                return Err("-lambda_n < eps lambda_1".into());
            }
            Ok(())
        }
    }
}

fn chunk_sizes(count: usize) -> Vec<usize> {
    let mut out = vec![CHUNK; count / CHUNK];
    if count % CHUNK != 0 {
        out.push(count % CHUNK);
    }
    out
}

/// Runs `visit` on every accepted sample of one chunk.
fn run_chunk<A, F>(
    op: &HqOperator,
    spec: &SampleSpec,
    chunk: usize,
    target: usize,
    mut acc: A,
    visit: &F,
) -> Result<(A, SamplerStats)>
where
    F: Fn(&mut A, &[f64], &mut Workspace),
{
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(chunk as u64);
    let mut ws = Workspace::default();
    let mut lam = vec![0.0; spec.cfg.n];
    let mut stats = SamplerStats::default();
    while (stats.accepted as usize) < target {
        if stats.proposals >= EXHAUSTION_PROPOSALS
            && (stats.accepted as f64) < MIN_ACCEPTANCE * stats.proposals as f64
        {
            return Err(exhausted(stats));
        }
        stats.proposals += 1;
        propose(&mut rng, spec.constraint, spec.box_radius, &mut lam);
        if !constraint_holds(spec.constraint, &lam) || !op.admissible_in(&lam, &mut ws) {
            continue;
        }
        stats.accepted += 1;
        visit(&mut acc, &lam, &mut ws);
    }
    Ok((acc, stats))
}

/// Streams `spec.count` accepted samples through `visit`, chunk by chunk.
/// Chunk 0 runs first so an empty hypothesis set fails fast.
pub(crate) fn fold_samples<A, F, M>(
    spec: &SampleSpec,
    init: impl Fn() -> A + Sync,
    visit: F,
    merge: M,
) -> Result<(A, SamplerStats)>
where
    A: Send,
    F: Fn(&mut A, &[f64], &mut Workspace) + Sync,
    M: Fn(A, A) -> A,
{
    spec.validate()?;
    let op = HqOperator::new(spec.cfg)?;
    let sizes = chunk_sizes(spec.count);
    let first = run_chunk(&op, spec, 0, sizes[0], init(), &visit)?;
    let rest: Vec<Result<(A, SamplerStats)>> = sizes[1..]
        .par_iter()
        .enumerate()
        .map(|(c, &target)| run_chunk(&op, spec, c + 1, target, init(), &visit))
        .collect();
    let mut acc = first.0;
    let mut stats = first.1;
    for r in rest {
        let (a, s) = r?;
        acc = merge(acc, a);
        stats = stats.add(s);
    }
    Ok((acc, stats))
}

/// `count` spectra in `P_{p,k}` satisfying the constraint, deterministic in the seed.
pub fn sample_admissible(spec: &SampleSpec) -> Result<Vec<Spectrum>> {
    let (samples, _) = fold_samples(
        spec,
        Vec::new,
        |acc: &mut Vec<Vec<f64>>, lam, _| acc.push(lam.to_vec()),
        |mut a, b| {
            a.extend(b);
            a
        },
    )?;
    samples.into_iter().map(Spectrum::new).collect()
}

/// `(dF/dlambda_1) / sum_i dF/dlambda_i` computed from the partials in `ws`.
pub fn first_coordinate_ratio(op: &HqOperator, lam: &[f64], ws: &mut Workspace) -> f64 {
    op.quotient_partials_in(lam, ws);
    let total: f64 = ws.d_lambda.iter().sum();
    ws.d_lambda[0] / total
}

fn ratio_report(lemma: &str, spec: &SampleSpec, theoretical: f64) -> Result<VerificationReport> {
    let op = HqOperator::new(spec.cfg)?;
    let (acc, stats) = fold_samples(
        spec,
        MinTracker::default,
        |acc: &mut MinTracker, lam, ws| {
            let r = first_coordinate_ratio(&op, lam, ws);
            acc.push(r, lam);
        },
        MinTracker::merge,
    )?;
    Ok(VerificationReport::finish(
        lemma,
        spec,
        theoretical,
        acc,
        stats,
    ))
}

/// Checks `dF/dlambda_1 >= C_1 sum_i dF/dlambda_i` on samples with `lambda_1 < 0`.
pub fn verify_lemma_f11(spec: &SampleSpec) -> Result<VerificationReport> {
    verify_lemma_f11_with(spec, 1.0)
}

/// As [`verify_lemma_f11`] with the theoretical constant multiplied by
/// `scale`; `scale > 1` exercises the failure path.
pub fn verify_lemma_f11_with(spec: &SampleSpec, scale: f64) -> Result<VerificationReport> {
    if spec.constraint != Constraint::FirstNegative {
        return Err(HqError::invalid(
            "the lambda_1 < 0 check needs the first_negative constraint",
        ));
    }
    let c1 = theoretical_c1(&spec.cfg)? * scale;
    ratio_report("f11", spec, c1)
}

/// Checks `dF/dlambda_1 >= C_2 sum_i dF/dlambda_i` under the pinched hypotheses.
pub fn verify_lemma_l2(spec: &SampleSpec) -> Result<VerificationReport> {
    verify_lemma_l2_with(spec, 1.0)
}

pub fn verify_lemma_l2_with(spec: &SampleSpec, scale: f64) -> Result<VerificationReport> {
    let Constraint::Pinched { delta, eps } = spec.constraint else {
        return Err(HqError::invalid(
            "the pinched check needs the pinched constraint",
        ));
    };
    let c2 = theoretical_c2(&spec.cfg, delta, eps)? * scale;
    ratio_report("l2", spec, c2)
}

/// Every `(n, p, k, l)` with `n` in `dims`, `1 <= p <= n-1`, `2 <= k <= N`,
/// `0 <= l < k`, skipping `N > max_big_n`.
pub fn default_sweep(dims: &[usize], max_big_n: usize) -> Vec<OperatorConfig> {
    let mut out = Vec::new();
    for &n in dims {
        for p in 1..n {
            let big_n = binomial(n, p) as usize;
            if big_n > max_big_n {
                continue;
            }
            for k in 2..=big_n {
                for l in 0..k {
                    out.push(OperatorConfig { n, p, k, l });
                }
            }
        }
    }
    out
}

/// Runs a lemma check and turns sampler exhaustion into a vacuous report.
pub fn verify_or_vacuous(lemma: &str, spec: &SampleSpec, scale: f64) -> Result<VerificationReport> {
    let outcome = match lemma {
        "f11" => verify_lemma_f11_with(spec, scale),
        "l2" => verify_lemma_l2_with(spec, scale),
        other => return Err(HqError::invalid(format!("unknown lemma {other}"))),
    };
    match outcome {
        Err(e @ HqError::SamplingExhausted { .. }) => {
            let theoretical = match spec.constraint {
                Constraint::Pinched { delta, eps } => theoretical_c2(&spec.cfg, delta, eps)?,
                _ => theoretical_c1(&spec.cfg)?,
            } * scale;
            Ok(VerificationReport::vacuous(lemma, spec, theoretical, &e))
        }
        other => other,
    }
}
