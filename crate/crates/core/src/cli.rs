//! The `hqlab` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 an inequality
//! check failed, 3 a solve did not converge.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{self, Lemma, SolveConfig, SweepConfig, SweepKind, VerifyConfig};
use crate::error::{HqError, Result};
use crate::lab::{
    probe_uniform_ellipticity, verify_or_vacuous, verify_structure_suite, Constraint, SampleSpec,
    VerificationReport,
};
use crate::solver::{
    continuation, initial_guess, newton_solve_with, ContinuationResult, Diagnostics, Grid,
    ScalarField,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INEQUALITY: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "hqlab",
    version,
    about = "Hessian quotient operators: checks and solves"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the derivative lower bounds on sampled spectra.
    Verify(RunArgs),
    /// Solve a Neumann problem, optionally with continuation.
    Solve(RunArgs),
    /// Run a list of verify or solve jobs and aggregate one row per job.
    Sweep(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Parses arguments, runs the command, prints diagnostics to stderr and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (name, args) = match &cli.command {
        Command::Verify(a) => ("verify", a),
        Command::Solve(a) => ("solve", a),
        Command::Sweep(a) => ("sweep", a),
    };
    if args.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = pool.install(|| match &cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hqlab {name}: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &HqError) -> i32 {
    match e {
        HqError::NonConvergence { .. } | HqError::SingularSystem(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_USAGE,
    }
}

fn header(command: &str) -> String {
    serde_json::json!({
        "hqlab": env!("CARGO_PKG_VERSION"),
        "format": FORMAT_VERSION,
        "command": command,
    })
    .to_string()
}

/// JSON lines: version header, resolved config, then one record per line.
fn write_jsonl<T: Serialize>(
    path: &Path,
    command: &str,
    cfg: &impl Serialize,
    rows: &[T],
) -> Result<()> {
    let mut s = header(command);
    s.push('\n');
    s.push_str(&serde_json::json!({ "config": cfg }).to_string());
    s.push('\n');
    for r in rows {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| HqError::Io(format!("{}: {e}", path.display())))
}

/// A single JSON document: the header object on the first line, then the
/// resolved config and the payload.
fn write_json(
    path: &Path,
    command: &str,
    cfg: &impl Serialize,
    payload: &impl Serialize,
) -> Result<()> {
    let body = serde_json::json!({ "config": cfg, "report": payload });
    let s = format!(
        "{{\"header\":{},\n\"body\":{}}}\n",
        header(command),
        serde_json::to_string(&body)?
    );
    fs::write(path, s).map_err(|e| HqError::Io(format!("{}: {e}", path.display())))
}

/// CSV with `#` comment lines for the version header and resolved config.
fn write_csv(
    path: &Path,
    command: &str,
    cfg: &impl Serialize,
    columns: &str,
    rows: &[String],
) -> Result<()> {
    let mut s = format!(
        "# {}\n# config: {}\n{columns}\n",
        header(command),
        serde_json::to_string(cfg)?
    );
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| HqError::Io(format!("{}: {e}", path.display())))
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| HqError::Io(format!("{}: {e}", out.display())))
}

pub const VERIFY_COLUMNS: &str = "lemma,n,p,k,l,delta,eps,count,theoretical,empirical_min,pass";

pub fn verify_csv_row(r: &VerificationReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.lemma,
        r.cfg.n,
        r.cfg.p,
        r.cfg.k,
        r.cfg.l,
        fmt_opt(r.delta),
        fmt_opt(r.eps),
        r.count,
        fmt_f64(r.theoretical_constant),
        fmt_opt(r.empirical_min_ratio),
        r.pass
    )
}

/// Runs every requested check in configuration order.
pub fn run_verify(cfg: &VerifyConfig) -> Result<Vec<VerificationReport>> {
    cfg.validate()?;
    let configs = cfg.operator_configs();
    let per_config: Vec<Result<Vec<VerificationReport>>> = configs
        .par_iter()
        .map(|&op_cfg| {
            let base = SampleSpec {
                box_radius: cfg.box_radius,
                ..SampleSpec::new(op_cfg, Constraint::Unconstrained, cfg.count, cfg.seed)
            };
            let mut out = Vec::new();
            for lemma in &cfg.lemmas {
                match lemma {
                    Lemma::F11 => {
                        let spec = SampleSpec {
                            constraint: Constraint::FirstNegative,
                            ..base
                        };
                        out.push(verify_or_vacuous("f11", &spec, cfg.constant_scale)?);
                    }
                    Lemma::L2 => {
                        for p in &cfg.pinched {
                            let spec = SampleSpec {
                                constraint: Constraint::Pinched {
                                    delta: p.delta,
                                    eps: p.eps,
                                },
                                ..base
                            };
                            out.push(verify_or_vacuous("l2", &spec, cfg.constant_scale)?);
                        }
                    }
                    Lemma::Structure => out.extend(verify_structure_suite(&base)?),
                    Lemma::Probe => out.push(probe_uniform_ellipticity(&base)?),
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_config {
        all.extend(r?);
    }
    Ok(all)
}

fn failed(reports: &[VerificationReport]) -> bool {
    reports.iter().any(|r| !r.exploratory && !r.pass)
}

fn with_seed(mut cfg: VerifyConfig, seed: Option<u64>) -> VerifyConfig {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg
}

fn cmd_verify(args: &RunArgs) -> Result<i32> {
    let cfg = with_seed(config::load::<VerifyConfig>(&args.config)?, args.seed);
    cfg.validate()?;
    prepare_out(&args.out)?;
    let reports = run_verify(&cfg)?;
    write_jsonl(&args.out.join("verify.jsonl"), "verify", &cfg, &reports)?;
    let rows: Vec<String> = reports.iter().map(verify_csv_row).collect();
    write_csv(
        &args.out.join("verify.csv"),
        "verify",
        &cfg,
        VERIFY_COLUMNS,
        &rows,
    )?;
    for r in reports.iter().filter(|r| !r.exploratory && !r.pass) {
        eprintln!(
            "FAIL {} {} theoretical {} empirical {:?} at {:?}",
            r.lemma, r.cfg, r.theoretical_constant, r.empirical_min_ratio, r.argmin_sample
        );
    }
    Ok(if failed(&reports) {
        EXIT_INEQUALITY
    } else {
        EXIT_OK
    })
}

/// Summary of a single solve, without the field values.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub eps: f64,
    pub delta: f64,
    pub newton_iters: usize,
    pub final_residual_norm: f64,
    pub quotient_residual_norm: f64,
    pub residual_trace: Vec<f64>,
    pub admissible_everywhere: bool,
    pub mean_u: f64,
    pub constant_c: f64,
    pub osc: f64,
    pub diagnostics: Diagnostics,
    /// `max |u - u*|` when an exact solution is configured.
    pub error_vs_exact: Option<f64>,
}

pub enum SolveOutcome {
    Single(SolveSummary, ScalarField),
    Continuation(ContinuationResult),
}

pub fn run_solve(cfg: &SolveConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let setup = cfg.setup()?;
    if let Some(s) = &cfg.schedules {
        return Ok(SolveOutcome::Continuation(continuation(
            &setup, &s.eps, &s.delta,
        )?));
    }
    let ps = setup.resolve()?;
    let rep = newton_solve_with(&ps, &initial_guess(&ps), &cfg.newton_options(&ps.grid))?;
    let n = ps.cfg.n;
    let mean_u = rep.u.mean(n);
    let summary = SolveSummary {
        eps: ps.eps,
        delta: ps.delta,
        newton_iters: rep.newton_iters,
        final_residual_norm: rep.final_residual_norm,
        quotient_residual_norm: rep.quotient_residual_norm,
        residual_trace: rep.residual_trace.clone(),
        admissible_everywhere: rep.admissible_everywhere,
        mean_u,
        constant_c: -ps.eps * mean_u,
        osc: ps.eps * rep.u.oscillation(),
        diagnostics: rep.diagnostics,
        error_vs_exact: setup.exact_field().map(|e| e.max_abs_diff(&rep.u)),
    };
    Ok(SolveOutcome::Single(summary, rep.u))
}

fn field_rows(u: &ScalarField, extra: Option<&ScalarField>) -> (String, Vec<String>) {
    let order = u.grid.natural_order();
    let radial = matches!(u.grid, Grid::Radial(_));
    let mut cols = String::from(if radial { "r,u" } else { "x,y,r,theta,u" });
    if extra.is_some() {
        cols.push_str(",v");
    }
    let rows = order
        .iter()
        .map(|&i| {
            let c = u.grid.coord(i);
            let mut s = if radial {
                format!("{},{}", fmt_f64(c.r), fmt_f64(u.values[i]))
            } else {
                format!(
                    "{},{},{},{},{}",
                    fmt_f64(c.x),
                    fmt_f64(c.y),
                    fmt_f64(c.r),
                    fmt_f64(c.theta),
                    fmt_f64(u.values[i])
                )
            };
            if let Some(v) = extra {
                let _ = write!(s, ",{}", fmt_f64(v.values[i]));
            }
            s
        })
        .collect();
    (cols, rows)
}

pub const CONTINUATION_COLUMNS: &str =
    "eps,delta,newton_iters,final_residual,mean_u,constant_c,osc,sup_eps_u,sup_grad,sup_hess,m0_bound,m0_ok";

fn cmd_solve(args: &RunArgs) -> Result<i32> {
    let cfg: SolveConfig = config::load(&args.config)?;
    cfg.validate()?;
    prepare_out(&args.out)?;
    match run_solve(&cfg) {
        Ok(SolveOutcome::Single(summary, u)) => {
            write_json(&args.out.join("report.json"), "solve", &cfg, &summary)?;
            let (cols, rows) = field_rows(&u, None);
            write_csv(&args.out.join("field.csv"), "solve", &cfg, &cols, &rows)?;
            Ok(EXIT_OK)
        }
        Ok(SolveOutcome::Continuation(res)) => {
            write_jsonl(
                &args.out.join("continuation.jsonl"),
                "solve",
                &cfg,
                &res.steps,
            )?;
            let summary = serde_json::json!({
                "steps": res.steps,
                "constant_c": res.constant_c,
                "failure": res.failure,
            });
            write_json(&args.out.join("report.json"), "solve", &cfg, &summary)?;
            let rows: Vec<String> = res
                .steps
                .iter()
                .map(|s| {
                    let d = &s.diagnostics;
                    format!(
                        "{},{},{},{},{},{},{},{},{},{},{},{}",
                        fmt_f64(s.eps),
                        fmt_f64(s.delta),
                        s.newton_iters,
                        fmt_f64(s.final_residual_norm),
                        fmt_f64(s.mean_u),
                        fmt_f64(s.constant_c),
                        fmt_f64(s.osc),
                        fmt_f64(d.sup_eps_u),
                        fmt_f64(d.sup_grad),
                        fmt_f64(d.sup_hess),
                        fmt_f64(d.m0_bound),
                        d.m0_ok
                    )
                })
                .collect();
            write_csv(
                &args.out.join("continuation.csv"),
                "solve",
                &cfg,
                CONTINUATION_COLUMNS,
                &rows,
            )?;
            if let (Some(last), Some(v)) = (res.steps.last(), &res.v) {
                let (cols, rows) = field_rows(&last.u, Some(v));
                write_csv(&args.out.join("field.csv"), "solve", &cfg, &cols, &rows)?;
            }
            match &res.failure {
                None => Ok(EXIT_OK),
                Some(f) => {
                    eprintln!(
                        "continuation stopped at step {} (eps {}, delta {}): {}",
                        f.index, f.eps, f.delta, f.message
                    );
                    Ok(EXIT_NONCONVERGENCE)
                }
            }
        }
        Err(e) => Err(e),
    }
}

enum Job {
    Verify(VerifyConfig),
    Solve(SolveConfig),
}

fn sweep_row(key: &str, job: &Job) -> (String, i32) {
    let quoted = format!("\"{}\"", key.replace('"', "\"\""));
    match job {
        Job::Verify(cfg) => match run_verify(cfg) {
            Ok(reports) => {
                let fails = reports.iter().filter(|r| !r.exploratory && !r.pass).count();
                let vacuous = reports.iter().filter(|r| r.status == "vacuous").count();
                let worst = reports
                    .iter()
                    .filter(|r| !r.exploratory && r.theoretical_constant > 0.0)
                    .filter_map(|r| r.empirical_min_ratio.map(|m| m / r.theoretical_constant))
                    .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
                let code = if fails > 0 { EXIT_INEQUALITY } else { EXIT_OK };
                let status = if fails > 0 { "fail" } else { "ok" };
                (
                    format!(
                        "{quoted},{status},{},{fails},{vacuous},{},,,,,",
                        reports.len(),
                        fmt_opt(worst)
                    ),
                    code,
                )
            }
            Err(e) => (format!("{quoted},error,,,,,,,,,"), exit_code_for(&e)),
        },
        Job::Solve(cfg) => match run_solve(cfg) {
            Ok(SolveOutcome::Single(s, _)) => (
                format!(
                    "{quoted},ok,,,,,{},{},{},{},{}",
                    s.newton_iters,
                    fmt_f64(s.final_residual_norm),
                    fmt_f64(s.constant_c),
                    fmt_f64(s.osc),
                    fmt_opt(s.error_vs_exact)
                ),
                EXIT_OK,
            ),
            Ok(SolveOutcome::Continuation(res)) => {
                let ok = res.failure.is_none();
                let last = res.steps.last();
                (
                    format!(
                        "{quoted},{},,,,,{},{},{},{},",
                        if ok { "ok" } else { "nonconvergence" },
                        last.map(|s| s.newton_iters.to_string()).unwrap_or_default(),
                        fmt_opt(last.map(|s| s.final_residual_norm)),
                        fmt_opt(res.constant_c),
                        fmt_opt(last.map(|s| s.osc)),
                    ),
                    if ok { EXIT_OK } else { EXIT_NONCONVERGENCE },
                )
            }
            Err(e) => {
                let status = if exit_code_for(&e) == EXIT_NONCONVERGENCE {
                    "nonconvergence"
                } else {
                    "error"
                };
                (format!("{quoted},{status},,,,,,,,,"), exit_code_for(&e))
            }
        },
    }
}

pub const SWEEP_COLUMNS: &str =
    "key,status,reports,failed,vacuous,min_ratio_over_constant,newton_iters,final_residual,constant_c,osc,error_vs_exact";

fn cmd_sweep(args: &RunArgs) -> Result<i32> {
    let sweep: SweepConfig = config::load(&args.config)?;
    let keys = sweep.job_keys()?;
    // parse and validate every job before running any
    let mut jobs = Vec::with_capacity(keys.len());
    for (i, over) in sweep.jobs.iter().enumerate() {
        let merged = config::merge(&sweep.base, over)?;
        let what = format!("jobs[{i}]");
        let job = match sweep.kind {
            SweepKind::Verify => {
                let c: VerifyConfig = serde_json::from_value(merged)
                    .map_err(|e| HqError::Config(format!("{what}: {e}")))?;
                let c = with_seed(c, args.seed);
                c.validate()
                    .map_err(|e| HqError::Config(format!("{what}: {e}")))?;
                Job::Verify(c)
            }
            SweepKind::Solve => {
                let c: SolveConfig = serde_json::from_value(merged)
                    .map_err(|e| HqError::Config(format!("{what}: {e}")))?;
                c.validate()
                    .map_err(|e| HqError::Config(format!("{what}: {e}")))?;
                Job::Solve(c)
            }
        };
        jobs.push(job);
    }
    prepare_out(&args.out)?;
    let mut rows: Vec<(String, String, i32)> = keys
        .par_iter()
        .zip(jobs.par_iter())
        .map(|(k, j)| {
            let (row, code) = sweep_row(k, j);
            (k.clone(), row, code)
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let resolved = serde_json::json!({
        "kind": sweep.kind,
        "base": sweep.base,
        "jobs": sweep.jobs,
        "seed": args.seed,
    });
    let lines: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
    write_csv(
        &args.out.join("sweep.csv"),
        "sweep",
        &resolved,
        SWEEP_COLUMNS,
        &lines,
    )?;
    let code = rows.iter().map(|r| r.2).max().unwrap_or(EXIT_OK);
    Ok(match code {
        EXIT_OK => EXIT_OK,
        c => c,
    })
}

/// Parses a JSON value as a verify configuration; used by the bindings.
pub fn verify_config_from_value(v: Value) -> Result<VerifyConfig> {
    serde_json::from_value(v).map_err(|e| HqError::Config(e.to_string()))
}
