//! JSON run configurations for the `hqlab` commands.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{HqError, Result};
use crate::lab::default_sweep;
use crate::operator::OperatorConfig;
use crate::solver::{
    DiskGrid, ExactSpec, FSpec, Grid, NewtonOptions, PhiSpec, ProblemSetup, RadialGrid,
};

fn default_count() -> usize {
    100_000
}

fn default_seed() -> u64 {
    42
}

fn default_radius() -> f64 {
    1.0
}

fn default_scale() -> f64 {
    1.0
}

fn default_lemmas() -> Vec<Lemma> {
    vec![Lemma::F11, Lemma::L2]
}

fn default_pinched() -> Vec<PinchedParams> {
    let mut out = Vec::new();
    for delta in [0.1, 0.5] {
        for eps in [0.1, 0.5] {
            out.push(PinchedParams { delta, eps });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// `lambda_1 < 0` bound.
    F11,
    /// Pinched-spectrum bound.
    L2,
    /// Classical property re-checks.
    Structure,
    /// Exploratory uniform-ellipticity probe.
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinchedParams {
    pub delta: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub dims: Vec<usize>,
    #[serde(default = "default_max_big_n")]
    pub max_big_n: usize,
}

fn default_max_big_n() -> usize {
    30
}

/// `hqlab verify` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Explicit configurations; combined with `sweep` when both are given.
    #[serde(default)]
    pub configs: Vec<OperatorConfig>,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    #[serde(default = "default_lemmas")]
    pub lemmas: Vec<Lemma>,
    #[serde(default = "default_pinched")]
    pub pinched: Vec<PinchedParams>,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_radius")]
    pub box_radius: f64,
    /// Multiplies every theoretical constant; values above one exercise the
    /// failure path.
    #[serde(default = "default_scale")]
    pub constant_scale: f64,
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(HqError::Config("count must be at least 1".into()));
        }
        if self.configs.is_empty() && self.sweep.is_none() {
            return Err(HqError::Config("give `configs`, `sweep`, or both".into()));
        }
        if self.lemmas.is_empty() {
            return Err(HqError::Config("lemmas must not be empty".into()));
        }
        if !(self.box_radius > 0.0 && self.box_radius.is_finite()) {
            return Err(HqError::Config("box_radius must be positive".into()));
        }
        if !(self.constant_scale > 0.0 && self.constant_scale.is_finite()) {
            return Err(HqError::Config("constant_scale must be positive".into()));
        }
        if self.lemmas.contains(&Lemma::L2) && self.pinched.is_empty() {
            return Err(HqError::Config(
                "the pinched check needs `pinched` values".into(),
            ));
        }
        for p in &self.pinched {
            for (name, v) in [("delta", p.delta), ("eps", p.eps)] {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(HqError::Config(format!(
                        "pinched {name} = {v} outside (0, 1]"
                    )));
                }
            }
        }
        let needs_k2 = self
            .lemmas
            .iter()
            .any(|l| matches!(l, Lemma::F11 | Lemma::L2));
        for (i, c) in self.configs.iter().enumerate() {
            c.validate()
                .map_err(|e| HqError::Config(format!("configs[{i}]: {e}")))?;
            if needs_k2 && c.k < 2 {
                return Err(HqError::Config(format!(
                    "configs[{i}]: the lambda_1 inequalities need k >= 2"
                )));
            }
        }
        if let Some(s) = &self.sweep {
            if s.dims.iter().any(|&n| n < 2) {
                return Err(HqError::Config("sweep dims must be at least 2".into()));
            }
        }
        Ok(())
    }

    /// Explicit configurations followed by the sweep grid, duplicates removed.
    pub fn operator_configs(&self) -> Vec<OperatorConfig> {
        let mut out = self.configs.clone();
        if let Some(s) = &self.sweep {
            for c in default_sweep(&s.dims, s.max_big_n) {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Radial,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub m_r: Option<usize>,
    #[serde(default)]
    pub m_theta: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedules {
    pub eps: Vec<f64>,
    #[serde(default = "default_delta_schedule")]
    pub delta: Vec<f64>,
}

fn default_delta_schedule() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

/// `hqlab solve` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub l: usize,
    pub geometry: Geometry,
    pub grid: GridConfig,
    pub f: FSpec,
    pub phi: PhiSpec,
    #[serde(default)]
    pub exact: Option<ExactSpec>,
    pub eps: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub schedules: Option<Schedules>,
    #[serde(default)]
    pub newton: Option<NewtonConfig>,
}

impl SolveConfig {
    pub fn grid(&self) -> Result<Grid> {
        match self.geometry {
            Geometry::Radial => {
                let m = self
                    .grid
                    .m
                    .ok_or_else(|| HqError::Config("radial grid needs `grid.m`".into()))?;
                Ok(Grid::Radial(RadialGrid::new(m)?))
            }
            Geometry::Disk => {
                let (Some(m_r), Some(m_theta)) = (self.grid.m_r, self.grid.m_theta) else {
                    return Err(HqError::Config(
                        "disk grid needs `grid.m_r` and `grid.m_theta`".into(),
                    ));
                };
                Ok(Grid::Disk(DiskGrid::new(m_r, m_theta)?))
            }
        }
    }

    pub fn setup(&self) -> Result<ProblemSetup> {
        let cfg = OperatorConfig::new(self.n, self.p, self.k, self.l)?;
        Ok(ProblemSetup {
            cfg,
            grid: self.grid()?,
            f: self.f.clone(),
            phi: self.phi.clone(),
            exact: self.exact.clone(),
            eps: self.eps,
            delta: self.delta,
        })
    }

    pub fn newton_options(&self, grid: &Grid) -> NewtonOptions {
        let mut o = NewtonOptions::for_grid(grid);
        if let Some(n) = &self.newton {
            if let Some(t) = n.tol {
                o.tol = t;
            }
            if let Some(m) = n.max_iter {
                o.max_iter = m;
            }
        }
        o
    }

    /// Every check that can run before any solve.
    pub fn validate(&self) -> Result<()> {
        let setup = self.setup()?;
        match &self.schedules {
            None => {
                setup.resolve()?;
            }
            Some(s) => {
                crate::solver::check_schedule("eps", &s.eps, false)?;
                crate::solver::check_schedule("delta", &s.delta, true)?;
                for &d in &s.delta {
                    setup.resolve_at(s.eps[0], d)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Verify,
    Solve,
}

/// `hqlab sweep` configuration: each job is a JSON object merged over `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub base: Value,
    pub jobs: Vec<Value>,
}

/// Shallow-merges `over` into `base` (top-level keys replace).
pub fn merge(base: &Value, over: &Value) -> Result<Value> {
    let (Value::Object(b), Value::Object(o)) = (base, over) else {
        return Err(HqError::Config("base and jobs must be JSON objects".into()));
    };
    let mut out = b.clone();
    for (k, v) in o {
        out.insert(k.clone(), v.clone());
    }
    Ok(Value::Object(out))
}

impl SweepConfig {
    /// Canonical job keys (sorted-key JSON), rejecting duplicates.
    pub fn job_keys(&self) -> Result<Vec<String>> {
        if self.jobs.is_empty() {
            return Err(HqError::Config("sweep has no jobs".into()));
        }
        let mut keys: Vec<String> = Vec::with_capacity(self.jobs.len());
        for (i, j) in self.jobs.iter().enumerate() {
            if !j.is_object() {
                return Err(HqError::Config(format!("jobs[{i}] is not an object")));
            }
            let key = serde_json::to_string(j)?;
            if keys.contains(&key) {
                return Err(HqError::Config(format!("duplicate job key {key}")));
            }
            keys.push(key);
        }
        Ok(keys)
    }
}

pub fn parse<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| HqError::Config(format!("{what}: {e}")))
}

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HqError::Io(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_defaults() {
        let c: VerifyConfig = parse(r#"{"configs":[{"n":3,"p":2,"k":2,"l":0}]}"#, "t").unwrap();
        assert_eq!(c.count, 100_000);
        assert_eq!(c.seed, 42);
        assert_eq!(c.pinched.len(), 4);
        c.validate().unwrap();
    }

    #[test]
    fn verify_count_zero_rejected() {
        let c: VerifyConfig =
            parse(r#"{"configs":[{"n":3,"p":2,"k":2,"l":0}],"count":0}"#, "t").unwrap();
        assert!(matches!(c.validate(), Err(HqError::Config(_))));
    }

    #[test]
    fn unknown_field_reports_location() {
        let e = parse::<VerifyConfig>("{\n \"configz\": []\n}", "cfg.json").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("configz") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn sweep_union() {
        let c: VerifyConfig = parse(
            r#"{"configs":[{"n":3,"p":2,"k":2,"l":0}],"sweep":{"dims":[3]}}"#,
            "t",
        )
        .unwrap();
        assert_eq!(c.operator_configs().len(), 10);
    }

    #[test]
    fn duplicate_jobs_rejected() {
        let s: SweepConfig = parse(
            r#"{"kind":"solve","base":{},"jobs":[{"eps":1.0},{"eps":1.0}]}"#,
            "t",
        )
        .unwrap();
        assert!(s.job_keys().is_err());
    }

    #[test]
    fn solve_config_parses_table_alias() {
        let c: SolveConfig = parse(
            r#"{"n":3,"p":1,"k":2,"l":0,"geometry":"radial","grid":{"m":17},
                "f":{"kind":"expression-table","r":[0,1],"values":[3,3]},
                "phi":{"kind":"constant","value":1.5},"eps":1.0}"#,
            "t",
        )
        .unwrap();
        c.validate().unwrap();
    }
}
