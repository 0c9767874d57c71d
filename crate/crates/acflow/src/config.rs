//! Run configuration: a strict, line-oriented `key = value` format with
//! `[section]` headers. Unknown keys and malformed values are errors; there
//! is no silent typo tolerance.
//!
//! ```text
//! scenario = spinodal
//!
//! [mesh]
//! h = 0.015625            # or nx = 96 / ny = 96
//!
//! [params]
//! sigma = 100.0
//! re = 500                # sets mu = 1/re; mutually exclusive with mu
//!
//! [time]
//! theta = 0.3
//! dt = 0.01
//! horizon = 2.0
//!
//! [solver]
//! newton_tol = 1e-9
//!
//! [controller]
//! k_min = 1e-4
//! k_max = 0.01
//! delta = 0.1
//! k0 = 1e-4
//!
//! [output]
//! dir = runs/spinodal
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::adapt::ControllerConfig;
use crate::model::PhysParams;
use crate::solver::SolverConfig;
use crate::verify::{scenario_library, Scenario, ScenarioKind, StudyAxis};
use crate::{Error, Result};

/// Environment variable overriding the output root directory.
pub const OUT_DIR_ENV: &str = "ACFLOW_OUT_DIR";

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub scenario: Option<ScenarioKind>,
    pub axis: Option<StudyAxis>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub h: Option<f64>,
    pub param_overrides: BTreeMap<String, f64>,
    pub re: Option<f64>,
    pub theta: Option<f64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub strict_step_retry: Option<bool>,
    pub iterative_tol: Option<f64>,
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub delta: Option<f64>,
    pub k0: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub snapshot_times: Option<Vec<f64>>,
    pub record_stride: Option<usize>,
    /// Convergence-study levels (time steps or cell sizes).
    pub levels: Option<Vec<f64>>,
    /// Use the full published resolutions for the studies.
    pub paper_resolution: bool,
}

impl RunConfig {
    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| bad(lineno, "unterminated section header"))?;
                section = name.trim().to_string();
                match section.as_str() {
                    "mesh" | "params" | "time" | "solver" | "controller" | "output" => {}
                    other => return Err(bad(lineno, &format!("unknown section [{other}]"))),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(lineno, "expected key = value"))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value).map_err(|e| match e {
                Error::Config(msg) => bad(lineno, &msg),
                other => bad(lineno, &other.to_string()),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let f = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: expected a number, got '{value}'")))
        };
        let u = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("{key}: expected an integer, got '{value}'")))
        };
        match (section, key) {
            ("", "scenario") => self.scenario = Some(ScenarioKind::parse(value)?),
            ("", "axis") => {
                self.axis = Some(match value {
                    "time" => StudyAxis::Time,
                    "space" => StudyAxis::Space,
                    other => {
                        return Err(Error::Config(format!(
                            "axis must be 'time' or 'space', got '{other}'"
                        )))
                    }
                })
            }
            ("", "paper_resolution") => {
                self.paper_resolution = parse_bool(value)?;
            }
            ("mesh", "nx") => self.nx = Some(u()?),
            ("mesh", "ny") => self.ny = Some(u()?),
            ("mesh", "h") => self.h = Some(f()?),
            ("params", "re") => self.re = Some(f()?),
            ("params", p @ ("mu" | "gamma" | "nu" | "rho" | "lambda" | "sigma" | "kappa" | "eta")) => {
                self.param_overrides.insert(p.to_string(), f()?);
            }
            ("time", "theta") => self.theta = Some(f()?),
            ("time", "dt") => self.dt = Some(f()?),
            ("time", "horizon") => self.horizon = Some(f()?),
            ("time", "levels") => self.levels = Some(parse_list(value)?),
            ("solver", "newton_tol") => self.newton_tol = Some(f()?),
            ("solver", "newton_max_iter") => self.newton_max_iter = Some(u()?),
            ("solver", "strict_step_retry") => self.strict_step_retry = Some(parse_bool(value)?),
            ("solver", "iterative_tol") => self.iterative_tol = Some(f()?),
            ("controller", "k_min") => self.k_min = Some(f()?),
            ("controller", "k_max") => self.k_max = Some(f()?),
            ("controller", "delta") => self.delta = Some(f()?),
            ("controller", "k0") => self.k0 = Some(f()?),
            ("output", "dir") => self.out_dir = Some(PathBuf::from(value)),
            ("output", "seed") => {
                self.seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::Config(format!("seed: expected an unsigned integer, got '{value}'"))
                })?)
            }
            ("output", "snapshot_times") => self.snapshot_times = Some(parse_list(value)?),
            ("output", "record_stride") => self.record_stride = Some(u()?),
            (sec, k) => {
                let loc = if sec.is_empty() {
                    k.to_string()
                } else {
                    format!("[{sec}] {k}")
                };
                return Err(Error::Config(format!("unknown key {loc}")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("theta = {t} outside [0, 1]")));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::Config("delta must be positive".into()));
            }
        }
        if let (Some(kmin), Some(kmax)) = (self.k_min, self.k_max) {
            if kmin > kmax {
                return Err(Error::Config(format!("k_min = {kmin} exceeds k_max = {kmax}")));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Config("dt must be positive".into()));
            }
        }
        if self.re.is_some() && self.param_overrides.contains_key("mu") {
            return Err(Error::Config("re and mu are mutually exclusive".into()));
        }
        if let Some(re) = self.re {
            if !(re > 0.0) {
                return Err(Error::Config("re must be positive".into()));
            }
        }
        Ok(())
    }

    /// Scenario with config overrides folded in, plus mesh subdivisions,
    /// θ, solver and controller configs, and the seed.
    pub fn resolve_scenario(&self) -> Result<ResolvedRun> {
        let kind = self
            .scenario
            .ok_or_else(|| Error::Config("no scenario selected".into()))?;
        let mut scenario = scenario_library(kind);
        if let Some(h) = self.horizon {
            scenario.horizon = h;
        }
        if let Some(dt) = self.dt {
            scenario.dt = dt;
        }
        for (k, v) in &self.param_overrides {
            match k.as_str() {
                "mu" => scenario.params.mu = *v,
                "gamma" => scenario.params.gamma = *v,
                "nu" => scenario.params.nu = *v,
                "rho" => scenario.params.rho = *v,
                "lambda" => scenario.params.lambda = *v,
                "sigma" => scenario.params.sigma = *v,
                "kappa" => scenario.params.kappa = *v,
                "eta" => scenario.params.eta = *v,
                _ => unreachable!(),
            }
        }
        if let Some(re) = self.re {
            scenario.params.mu = 1.0 / re;
        }
        let (nx, ny) = self.mesh_subdivisions(&scenario)?;
        Ok(ResolvedRun {
            nx,
            ny,
            theta: self.theta.unwrap_or(0.3),
            solver: self.solver_config(),
            controller: self.controller_config(),
            seed: self.seed.unwrap_or(scenario.default_seed),
            snapshot_times: self
                .snapshot_times
                .clone()
                .unwrap_or_else(|| scenario.snapshot_times.clone()),
            record_stride: self.record_stride.unwrap_or(1),
            scenario,
        })
    }

    fn mesh_subdivisions(&self, scenario: &Scenario) -> Result<(usize, usize)> {
        if let Some(h) = self.h {
            if !(h > 0.0) {
                return Err(Error::Config("h must be positive".into()));
            }
            let lx = scenario.x_range.1 - scenario.x_range.0;
            let ly = scenario.y_range.1 - scenario.y_range.0;
            let nx = (lx / h).round() as usize;
            let ny = (ly / h).round() as usize;
            if nx == 0 || ny == 0 || (lx / nx as f64 - h).abs() > 1e-9 * h {
                return Err(Error::Config(format!(
                    "h = {h} does not evenly divide the domain sides ({lx}, {ly})"
                )));
            }
            return Ok((nx, ny));
        }
        match (self.nx, self.ny) {
            (Some(nx), Some(ny)) => Ok((nx, ny)),
            (Some(nx), None) => Ok((nx, nx)),
            (None, Some(ny)) => Ok((ny, ny)),
            (None, None) => Ok((scenario.nx, scenario.ny)),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        if let Some(t) = self.newton_tol {
            cfg.newton_tol_abs = t;
            cfg.newton_tol_rel = t;
        }
        if let Some(n) = self.newton_max_iter {
            cfg.newton_max_iter = n;
        }
        if let Some(s) = self.strict_step_retry {
            cfg.strict_step_retry = s;
        }
        if let Some(tol) = self.iterative_tol {
            cfg.linear = crate::fem::LinearSolver::BiCgStab {
                tol,
                max_iter: 5000,
            };
        }
        cfg
    }

    pub fn controller_config(&self) -> ControllerConfig {
        let mut c = ControllerConfig::default();
        if let Some(v) = self.k_min {
            c.k_min = v;
        }
        if let Some(v) = self.k_max {
            c.k_max = v;
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.k0 {
            c.k0 = v;
        } else {
            c.k0 = c.k_min;
        }
        c
    }

    /// Output directory: explicit config, else `$ACFLOW_OUT_DIR/<name>`,
    /// else `runs/<name>`.
    pub fn output_dir(&self, name: &str) -> PathBuf {
        if let Some(d) = &self.out_dir {
            return d.clone();
        }
        let root = std::env::var(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|_| PathBuf::from("runs"));
        root.join(name)
    }
}

/// A scenario run with every knob resolved.
pub struct ResolvedRun {
    pub scenario: Scenario,
    pub nx: usize,
    pub ny: usize,
    pub theta: f64,
    pub solver: SolverConfig,
    pub controller: ControllerConfig,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
    pub record_stride: usize,
}

impl ResolvedRun {
    pub fn params(&self) -> PhysParams {
        self.scenario.params
    }
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("expected a boolean, got '{other}'"))),
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("expected a list of numbers, got '{value}'")))
        })
        .collect()
}

fn bad(lineno: usize, msg: &str) -> Error {
    Error::Config(format!("line {}: {}", lineno + 1, msg))
}
