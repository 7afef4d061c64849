//! Sectioned key-value configuration.
//!
//! ```text
//! # a cone sweep
//! [scenario]
//! kind = cone
//! w = 2
//! theta = 0.75
//!
//! [domain]
//! dx = 0.1
//!
//! [solver]
//! dt = 1e-3
//! t_end = 200
//!
//! [sweep]
//! axis = w 1 4 7
//! axis = theta 0.2 3.0 15
//! workers = 4
//! output = cone-sweep
//! ```

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::geometry::{Scenario, ScenarioKind, ScenarioSpec};
use crate::solver::{cfl_check, SolverConfig};
use crate::sweep::{Axis, SweepSpec};

const DOMAIN_KEYS: &[&str] = &["dx", "dy", "x_min", "x_max", "y_min", "y_max", "mirror"];

/// Solver settings that are not part of the scenario itself. Unset fields
/// fall back to [`SolverConfig::for_scenario`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverSettings {
    pub diag_every: Option<f64>,
    pub snapshot_every: Option<f64>,
    pub snapshot_dir: Option<PathBuf>,
    pub blowup_bound: Option<f64>,
    pub stop_on_crossing: bool,
}

impl SolverSettings {
    pub fn config_for(&self, s: &Scenario) -> SolverConfig {
        let mut cfg = SolverConfig::for_scenario(s);
        if let Some(v) = self.diag_every {
            cfg.diag_every = v;
        }
        if let Some(v) = self.blowup_bound {
            cfg.blowup_bound = v;
        }
        cfg.snapshot_every = self.snapshot_every;
        cfg.snapshot_dir = self.snapshot_dir.clone();
        cfg.stop_on_crossing = self.stop_on_crossing;
        cfg
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSettings {
    pub axes: Vec<Axis>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
}

/// A parsed configuration: one scenario template, solver settings and an
/// optional sweep section.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub scenario: ScenarioSpec,
    pub solver: SolverSettings,
    pub sweep: Option<SweepSettings>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Scenario,
    Domain,
    Solver,
    Sweep,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "scenario" => Some(Self::Scenario),
            "domain" => Some(Self::Domain),
            "solver" => Some(Self::Solver),
            "sweep" => Some(Self::Sweep),
            _ => None,
        }
    }
}

fn config_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn number(line: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| config_err(line, key, format!("`{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(config_err(line, key, format!("`{value}` is not finite")));
    }
    Ok(v)
}

fn flag(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(line, key, format!("`{value}` is not a boolean"))),
    }
}

fn parse_axis(line: usize, value: &str) -> Result<Axis> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(config_err(line, "axis", "expected `name min max count`"));
    }
    let min = number(line, "axis", parts[1])?;
    let max = number(line, "axis", parts[2])?;
    let count: usize = parts[3]
        .parse()
        .map_err(|_| config_err(line, "axis", format!("count `{}` is not a positive integer", parts[3])))?;
    Axis::new(parts[0], min, max, count).map_err(|e| config_err(line, "axis", e.to_string()))
}

/// Parses configuration text. Every scenario the configuration describes is
/// built and checked, including the CFL condition, before this returns.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut entries: Vec<(usize, Section, String, String)> = Vec::new();
    let mut section = None;
    let mut kind: Option<(usize, ScenarioKind)> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, content, "unterminated section header"))?
                .trim();
            section = Some(Section::parse(name).ok_or_else(|| config_err(line, name, "unknown section"))?);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_err(line, content, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| config_err(line, key, "key outside of any section"))?;
        if key.is_empty() {
            return Err(config_err(line, key, "empty key"));
        }
        if sec == Section::Scenario && key == "kind" {
            let k = value.parse().map_err(|e: Error| config_err(line, key, e.to_string()))?;
            if kind.is_some() {
                return Err(config_err(line, key, "given twice"));
            }
            kind = Some((line, k));
            continue;
        }
        if key != "axis" && entries.iter().any(|(_, s, k, _)| *s == sec && k == key) {
            return Err(config_err(line, key, "given twice"));
        }
        entries.push((line, sec, key.to_string(), value.to_string()));
    }
    let (kind_line, kind) = kind.ok_or_else(|| config_err(0, "kind", "missing from [scenario]"))?;

    let mut cfg = Config {
        scenario: ScenarioSpec::new(kind),
        solver: SolverSettings::default(),
        sweep: None,
    };
    for (line, sec, key, value) in &entries {
        cfg.apply(*line, *sec, key, value)?;
    }
    cfg.check(kind_line)?;
    Ok(cfg)
}

impl Config {
    /// Configuration for one scenario with every other setting defaulted.
    pub fn for_spec(scenario: ScenarioSpec) -> Self {
        Self {
            scenario,
            solver: SolverSettings::default(),
            sweep: None,
        }
    }

    fn apply(&mut self, line: usize, sec: Section, key: &str, value: &str) -> Result<()> {
        match sec {
            Section::Scenario | Section::Domain => {
                let domain_key = DOMAIN_KEYS.contains(&key);
                if domain_key != (sec == Section::Domain)
                    || !self.scenario.accepts(if key == "R" { "radius" } else { key })
                {
                    let kind = self.scenario.kind();
                    return Err(config_err(
                        line,
                        key,
                        format!("unknown key for a {kind} scenario in this section"),
                    ));
                }
                let v = number(line, key, value)?;
                self.scenario
                    .set(key, v)
                    .map_err(|e| config_err(line, key, e.to_string()))
            }
            Section::Solver => {
                match key {
                    "dt" | "t_end" => {
                        let v = number(line, key, value)?;
                        self.scenario
                            .set(key, v)
                            .map_err(|e| config_err(line, key, e.to_string()))?;
                    }
                    "diag_every" => self.solver.diag_every = Some(number(line, key, value)?),
                    "snapshot_every" => self.solver.snapshot_every = Some(number(line, key, value)?),
                    "blowup_bound" => self.solver.blowup_bound = Some(number(line, key, value)?),
                    "snapshot_dir" => self.solver.snapshot_dir = Some(PathBuf::from(value)),
                    "stop_on_crossing" => self.solver.stop_on_crossing = flag(line, key, value)?,
                    _ => return Err(config_err(line, key, "unknown solver key")),
                }
                Ok(())
            }
            Section::Sweep => {
                let sweep = self.sweep.get_or_insert_with(SweepSettings::default);
                match key {
                    "axis" => sweep.axes.push(parse_axis(line, value)?),
                    "workers" => {
                        let w: usize = value
                            .parse()
                            .ok()
                            .filter(|&w| w >= 1)
                            .ok_or_else(|| config_err(line, key, format!("`{value}` is not a positive integer")))?;
                        sweep.workers = Some(w);
                    }
                    "output" => sweep.output = Some(PathBuf::from(value)),
                    _ => return Err(config_err(line, key, "unknown sweep key")),
                }
                Ok(())
            }
        }
    }

    /// Applies a `key=value` override, routing the key to the section that
    /// owns it. Sweep axes use `axis=name min max count` and replace any
    /// configured axis of the same name.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(0, assignment, "expected `key=value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = match key {
            "kind" => {
                let kind: ScenarioKind = value.parse().map_err(|e: Error| config_err(0, key, e.to_string()))?;
                let mut spec = ScenarioSpec::new(kind);
                for (k, v) in self.scenario.params() {
                    if spec.accepts(k) {
                        spec.set(k, *v)?;
                    }
                }
                self.scenario = spec;
                return Ok(());
            }
            "diag_every" | "snapshot_every" | "blowup_bound" | "snapshot_dir" | "stop_on_crossing" | "dt" | "t_end" => {
                Section::Solver
            }
            "workers" | "output" => Section::Sweep,
            "axis" => {
                let axis = parse_axis(0, value)?;
                let sweep = self.sweep.get_or_insert_with(SweepSettings::default);
                sweep.axes.retain(|a| a.name != axis.name);
                sweep.axes.push(axis);
                return Ok(());
            }
            k if DOMAIN_KEYS.contains(&k) => Section::Domain,
            _ => Section::Scenario,
        };
        self.apply(0, sec, key, value)
    }

    fn check(&self, kind_line: usize) -> Result<()> {
        let check_one = |spec: &ScenarioSpec| -> Result<()> {
            let s = spec
                .build()
                .map_err(|e| config_err(kind_line, "scenario", e.to_string()))?;
            cfl_check(s.dt, &s.domain).map_err(|e| config_err(kind_line, "dt", e.to_string()))?;
            self.solver
                .config_for(&s)
                .validate(&s.domain)
                .map_err(|e| config_err(kind_line, "solver", e.to_string()))
        };
        match &self.sweep {
            None => check_one(&self.scenario),
            Some(sw) => {
                if sw.axes.is_empty() || sw.axes.len() > 2 {
                    return Err(config_err(
                        kind_line,
                        "axis",
                        format!("{} sweep axes, need 1 or 2", sw.axes.len()),
                    ));
                }
                for a in &sw.axes {
                    if !self.scenario.accepts(&a.name) {
                        return Err(config_err(
                            kind_line,
                            "axis",
                            format!("`{}` is not a scenario parameter", a.name),
                        ));
                    }
                }
                for point in crate::sweep::grid_points(&sw.axes) {
                    let mut spec = self.scenario.clone();
                    for (a, v) in sw.axes.iter().zip(&point) {
                        spec.set(&a.name, *v)?;
                    }
                    check_one(&spec)?;
                }
                Ok(())
            }
        }
    }

    /// Re-runs every check, for configurations changed after parsing.
    pub fn validate(&self) -> Result<()> {
        self.check(0)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.scenario.build()
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let sw = self.sweep.clone().unwrap_or_default();
        SweepSpec::new(
            self.scenario.clone(),
            sw.axes,
            self.solver.clone(),
            sw.workers.unwrap_or(1),
            sw.output,
        )
    }
}
