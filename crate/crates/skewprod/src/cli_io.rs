//! Configuration parsing, experiment orchestration, CSV/JSON emission and
//! reproducibility manifests for the `skewprod` binary.
//!
//! Configs are line-oriented `key = value` files with `\[section]` headers;
//! the sections are `family.f1`, `family.f2`, `base`, `experiment` and
//! `output`. Unknown sections or keys are errors: a config either describes
//! exactly one reproducible run or it does not parse. `report.json` embeds
//! the canonical config text, so the report alone suffices to rerun the
//! experiment identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::experiments::{self, ExperimentRecord, OccupationIndicator};
use crate::interval_maps::{
    validate_family, Direction, IntervalMap, MapFamily,
};
use crate::lyapunov::{
    boundary_exponent, classify_regime, minimality_check, MinimalityReport, Regime, RegimeReport,
    DEFAULT_ZERO_TOLERANCE,
};
use crate::measure_lab::{self, BinnedMeasure};
use crate::symbol_dynamics::{regenerate, Probabilities, Provenance};

pub const REPORT_SCHEMA: &str = "skewprod-report/1";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("section [{section}]: missing key `{key}`")]
    MissingKey { section: String, key: String },
    #[error("family validation failed: {0}")]
    Validation(String),
    #[error("experiment `{experiment}` needs regime {needed}, but the family classifies as {got}")]
    RegimeMismatch { experiment: String, needed: String, got: String },
    #[error("config names experiment `{config}` but the `{requested}` subcommand was invoked")]
    ExperimentMismatch { config: String, requested: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How to build one of the two maps.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub kind: MapKindSpec,
    pub invert: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapKindSpec {
    Moebius { log_multiplier: f64 },
    Logistic { r: f64, direction: Direction },
    DampedMoebius { log_multiplier: f64, damping: f64 },
    Composite { components: Vec<MapSpec> },
}

impl MapSpec {
    pub fn build(&self) -> IntervalMap {
        let map = match &self.kind {
            MapKindSpec::Moebius { log_multiplier } => IntervalMap::moebius(*log_multiplier),
            MapKindSpec::Logistic { r, direction } => {
                IntervalMap::logistic_perturb(*r, *direction)
            }
            MapKindSpec::DampedMoebius { log_multiplier, damping } => {
                IntervalMap::damped_moebius(*log_multiplier, *damping)
            }
            MapKindSpec::Composite { components } => {
                IntervalMap::composite(components.iter().map(MapSpec::build).collect())
            }
        };
        if self.invert {
            map.inverse()
        } else {
            map
        }
    }

    fn to_component_string(&self) -> String {
        let body = match &self.kind {
            MapKindSpec::Moebius { log_multiplier } => format!("moebius({log_multiplier})"),
            MapKindSpec::Logistic { r, direction } => format!(
                "logistic({r},{})",
                match direction {
                    Direction::Down => "down",
                    Direction::Up => "up",
                }
            ),
            MapKindSpec::DampedMoebius { log_multiplier, damping } => {
                format!("damped({log_multiplier},{damping})")
            }
            MapKindSpec::Composite { components } => {
                // Nested composites flatten into the component list.
                return components
                    .iter()
                    .map(MapSpec::to_component_string)
                    .collect::<Vec<_>>()
                    .join(";");
            }
        };
        if self.invert {
            format!("{body}^-1")
        } else {
            body
        }
    }
}

/// Per-experiment parameters, all validated at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSpec {
    Classify { zero_tolerance: f64 },
    Minimality { denominator_bound: u64, tolerance: f64 },
    Stationary { iterations: usize, start: StationaryStart },
    BasinScan { cylinder_len: usize, subdivisions: usize, samples_per_cell: usize, horizon: usize, delta: f64 },
    Graph { words: usize, horizon: usize, tolerance: f64 },
    Sync { x0: f64, y0: f64, words: usize, horizon: usize, stride: usize },
    OnOff { x0: f64, beta: f64, checkpoints: Vec<usize>, timeseries_steps: usize },
    Excursions { x0: f64, beta: f64, horizon: usize },
    Clt { x0: f64, steps: usize, samples: usize, a_grid: Vec<f64> },
    Pullback { x0: f64, beta: f64, n_grid: Vec<usize>, words_per_n: usize, reentry_window: usize },
    Drift { x0: f64, samples: usize, horizon: usize, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryStart {
    Lebesgue,
    LeftHalf,
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::Classify { .. } => "classify",
            ExperimentSpec::Minimality { .. } => "minimality",
            ExperimentSpec::Stationary { .. } => "stationary",
            ExperimentSpec::BasinScan { .. } => "basin-scan",
            ExperimentSpec::Graph { .. } => "graph",
            ExperimentSpec::Sync { .. } => "sync",
            ExperimentSpec::OnOff { .. } => "onoff",
            ExperimentSpec::Excursions { .. } => "excursions",
            ExperimentSpec::Clt { .. } => "clt",
            ExperimentSpec::Pullback { .. } => "pullback",
            ExperimentSpec::Drift { .. } => "drift",
        }
    }
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub f1: MapSpec,
    pub f2: MapSpec,
    pub p1: f64,
    pub seed: u64,
    pub experiment: ExperimentSpec,
    pub outdir: PathBuf,
    pub bins: usize,
}

impl RunConfig {
    pub fn family(&self) -> Result<MapFamily, ConfigError> {
        MapFamily::new(self.f1.build(), self.f2.build(), self.p1)
            .map_err(|e| ConfigError::Validation(e.to_string()))
    }
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            sections.push(Section { name: name.trim().to_string(), line, entries: Vec::new() });
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::Parse {
                line,
                message: format!("expected `key = value` or `[section]`, got `{trimmed}`"),
            });
        };
        let Some(section) = sections.last_mut() else {
            return Err(ConfigError::Parse {
                line,
                message: "key before any [section] header".to_string(),
            });
        };
        section.entries.push((key.trim().to_string(), value.trim().to_string(), line));
    }
    Ok(sections)
}

/// Key-value view over one section that tracks which keys were consumed,
/// so leftovers can be rejected.
struct Keys {
    section: String,
    map: BTreeMap<String, (String, usize)>,
}

impl Keys {
    fn from_section(s: &Section) -> Result<Keys, ConfigError> {
        let mut map = BTreeMap::new();
        for (k, v, line) in &s.entries {
            if map.insert(k.clone(), (v.clone(), *line)).is_some() {
                return Err(ConfigError::Parse {
                    line: *line,
                    message: format!("duplicate key `{k}` in [{}]", s.name),
                });
            }
        }
        Ok(Keys { section: s.name.clone(), map })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<(String, usize), ConfigError> {
        self.take(key).ok_or_else(|| ConfigError::MissingKey {
            section: self.section.clone(),
            key: key.to_string(),
        })
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some((key, (_, line))) = self.map.into_iter().next() {
            return Err(ConfigError::Parse {
                line,
                message: format!("unknown key `{key}` in [{}]", self.section),
            });
        }
        Ok(())
    }
}

fn parse_f64(raw: &(String, usize)) -> Result<f64, ConfigError> {
    raw.0.parse().map_err(|_| ConfigError::Parse {
        line: raw.1,
        message: format!("expected a number, got `{}`", raw.0),
    })
}

fn parse_usize(raw: &(String, usize)) -> Result<usize, ConfigError> {
    raw.0.parse().map_err(|_| ConfigError::Parse {
        line: raw.1,
        message: format!("expected a nonnegative integer, got `{}`", raw.0),
    })
}

fn parse_u64(raw: &(String, usize)) -> Result<u64, ConfigError> {
    raw.0.parse().map_err(|_| ConfigError::Parse {
        line: raw.1,
        message: format!("expected a nonnegative integer, got `{}`", raw.0),
    })
}

fn parse_bool(raw: &(String, usize)) -> Result<bool, ConfigError> {
    match raw.0.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ConfigError::Parse {
            line: raw.1,
            message: format!("expected true or false, got `{other}`"),
        }),
    }
}

fn parse_direction(raw: &(String, usize)) -> Result<Direction, ConfigError> {
    match raw.0.as_str() {
        "down" => Ok(Direction::Down),
        "up" => Ok(Direction::Up),
        other => Err(ConfigError::Parse {
            line: raw.1,
            message: format!("expected down or up, got `{other}`"),
        }),
    }
}

fn parse_list<T, F>(raw: &(String, usize), f: F) -> Result<Vec<T>, ConfigError>
where
    F: Fn(&str) -> Option<T>,
{
    raw.0
        .split(',')
        .map(|item| {
            f(item.trim()).ok_or_else(|| ConfigError::Parse {
                line: raw.1,
                message: format!("bad list item `{}`", item.trim()),
            })
        })
        .collect()
}

/// Parse one component atom: `moebius(t)`, `logistic(r,down|up)` or
/// `damped(t,c)`, each optionally suffixed `^-1`.
fn parse_component(text: &str, line: usize) -> Result<MapSpec, ConfigError> {
    let err = |message: String| ConfigError::Parse { line, message };
    let (body, invert) = match text.strip_suffix("^-1") {
        Some(b) => (b.trim(), true),
        None => (text, false),
    };
    let Some((name, rest)) = body.split_once('(') else {
        return Err(err(format!("component `{text}` is not of the form name(args)")));
    };
    let Some(args) = rest.strip_suffix(')') else {
        return Err(err(format!("component `{text}` is missing a closing parenthesis")));
    };
    let args: Vec<&str> = args.split(',').map(str::trim).collect();
    let num = |s: &str| -> Result<f64, ConfigError> {
        s.parse().map_err(|_| err(format!("bad number `{s}` in component `{text}`")))
    };
    let kind = match (name.trim(), args.as_slice()) {
        ("moebius", [t]) => MapKindSpec::Moebius { log_multiplier: num(t)? },
        ("logistic", [r, dir]) => MapKindSpec::Logistic {
            r: num(r)?,
            direction: match *dir {
                "down" => Direction::Down,
                "up" => Direction::Up,
                other => return Err(err(format!("bad direction `{other}` in `{text}`"))),
            },
        },
        ("damped", [t, c]) => {
            MapKindSpec::DampedMoebius { log_multiplier: num(t)?, damping: num(c)? }
        }
        _ => return Err(err(format!("unknown component `{text}`"))),
    };
    Ok(MapSpec { kind, invert })
}

fn parse_family_section(section: &Section) -> Result<MapSpec, ConfigError> {
    let mut keys = Keys::from_section(section)?;
    let kind_raw = keys.require("kind")?;
    let invert = match keys.take("invert") {
        Some(raw) => parse_bool(&raw)?,
        None => false,
    };
    let kind = match kind_raw.0.as_str() {
        "moebius" => MapKindSpec::Moebius { log_multiplier: parse_f64(&keys.require("log_multiplier")?)? },
        "logistic" => MapKindSpec::Logistic {
            r: parse_f64(&keys.require("r")?)?,
            direction: parse_direction(&keys.require("direction")?)?,
        },
        "damped_moebius" => MapKindSpec::DampedMoebius {
            log_multiplier: parse_f64(&keys.require("log_multiplier")?)?,
            damping: parse_f64(&keys.require("damping")?)?,
        },
        "composite" => {
            let raw = keys.require("components")?;
            let components = raw
                .0
                .split(';')
                .map(|c| parse_component(c.trim(), raw.1))
                .collect::<Result<Vec<_>, _>>()?;
            if components.is_empty() {
                return Err(ConfigError::Parse {
                    line: raw.1,
                    message: "composite needs at least one component".to_string(),
                });
            }
            MapKindSpec::Composite { components }
        }
        other => {
            return Err(ConfigError::Parse {
                line: kind_raw.1,
                message: format!("unknown map kind `{other}`"),
            })
        }
    };
    keys.finish()?;
    Ok(MapSpec { kind, invert })
}

fn parse_experiment_section(section: &Section) -> Result<ExperimentSpec, ConfigError> {
    let mut keys = Keys::from_section(section)?;
    let name_raw = keys.require("name")?;
    let f64_or = |keys: &mut Keys, key: &str, default: f64| -> Result<f64, ConfigError> {
        match keys.take(key) {
            Some(raw) => parse_f64(&raw),
            None => Ok(default),
        }
    };
    let spec = match name_raw.0.as_str() {
        "classify" => ExperimentSpec::Classify {
            zero_tolerance: f64_or(&mut keys, "zero_tolerance", DEFAULT_ZERO_TOLERANCE)?,
        },
        "minimality" => ExperimentSpec::Minimality {
            denominator_bound: match keys.take("denominator_bound") {
                Some(raw) => parse_u64(&raw)?,
                None => 1_000_000,
            },
            tolerance: f64_or(&mut keys, "tolerance", 1e-9)?,
        },
        "stationary" => ExperimentSpec::Stationary {
            iterations: match keys.take("iterations") {
                Some(raw) => parse_usize(&raw)?,
                None => 10_000,
            },
            start: match keys.take("start") {
                None => StationaryStart::Lebesgue,
                Some(raw) => match raw.0.as_str() {
                    "lebesgue" => StationaryStart::Lebesgue,
                    "left_half" => StationaryStart::LeftHalf,
                    other => {
                        return Err(ConfigError::Parse {
                            line: raw.1,
                            message: format!("unknown start `{other}`"),
                        })
                    }
                },
            },
        },
        "basin-scan" => ExperimentSpec::BasinScan {
            cylinder_len: parse_usize(&keys.require("cylinder_len")?)?,
            subdivisions: parse_usize(&keys.require("subdivisions")?)?,
            samples_per_cell: parse_usize(&keys.require("samples_per_cell")?)?,
            horizon: parse_usize(&keys.require("horizon")?)?,
            delta: parse_f64(&keys.require("delta")?)?,
        },
        "graph" => ExperimentSpec::Graph {
            words: parse_usize(&keys.require("words")?)?,
            horizon: parse_usize(&keys.require("horizon")?)?,
            tolerance: f64_or(&mut keys, "tolerance", 1e-10)?,
        },
        "sync" => ExperimentSpec::Sync {
            x0: parse_f64(&keys.require("x0")?)?,
            y0: parse_f64(&keys.require("y0")?)?,
            words: parse_usize(&keys.require("words")?)?,
            horizon: parse_usize(&keys.require("horizon")?)?,
            stride: match keys.take("stride") {
                Some(raw) => parse_usize(&raw)?,
                None => 20,
            },
        },
        "onoff" => ExperimentSpec::OnOff {
            x0: f64_or(&mut keys, "x0", 0.5)?,
            beta: f64_or(&mut keys, "beta", 0.05)?,
            checkpoints: parse_list(&keys.require("checkpoints")?, |s| s.parse().ok())?,
            timeseries_steps: match keys.take("timeseries_steps") {
                Some(raw) => parse_usize(&raw)?,
                None => 0,
            },
        },
        "excursions" => ExperimentSpec::Excursions {
            x0: f64_or(&mut keys, "x0", 0.5)?,
            beta: f64_or(&mut keys, "beta", 0.05)?,
            horizon: parse_usize(&keys.require("horizon")?)?,
        },
        "clt" => ExperimentSpec::Clt {
            x0: f64_or(&mut keys, "x0", 0.5)?,
            steps: parse_usize(&keys.require("steps")?)?,
            samples: parse_usize(&keys.require("samples")?)?,
            a_grid: parse_list(&keys.require("a_grid")?, |s| s.parse().ok())?,
        },
        "pullback" => ExperimentSpec::Pullback {
            x0: f64_or(&mut keys, "x0", 0.5)?,
            beta: f64_or(&mut keys, "beta", 0.05)?,
            n_grid: parse_list(&keys.require("n_grid")?, |s| s.parse().ok())?,
            words_per_n: parse_usize(&keys.require("words_per_n")?)?,
            reentry_window: parse_usize(&keys.require("reentry_window")?)?,
        },
        "drift" => ExperimentSpec::Drift {
            x0: f64_or(&mut keys, "x0", 0.5)?,
            samples: parse_usize(&keys.require("samples")?)?,
            horizon: parse_usize(&keys.require("horizon")?)?,
            delta: parse_f64(&keys.require("delta")?)?,
        },
        other => {
            return Err(ConfigError::Parse {
                line: name_raw.1,
                message: format!("unknown experiment `{other}`"),
            })
        }
    };
    keys.finish()?;
    Ok(spec)
}

/// Parse and validate a config document. The returned config has passed the
/// class conditions on a 1000-point grid; a violation is an error here, not
/// at run time.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let sections = split_sections(text)?;
    let mut f1 = None;
    let mut f2 = None;
    let mut base: Option<Keys> = None;
    let mut experiment = None;
    let mut output: Option<Keys> = None;
    for section in &sections {
        match section.name.as_str() {
            "family.f1" => f1 = Some(parse_family_section(section)?),
            "family.f2" => f2 = Some(parse_family_section(section)?),
            "base" => base = Some(Keys::from_section(section)?),
            "experiment" => experiment = Some(parse_experiment_section(section)?),
            "output" => output = Some(Keys::from_section(section)?),
            other => {
                return Err(ConfigError::Parse {
                    line: section.line,
                    message: format!("unknown section [{other}]"),
                })
            }
        }
    }
    let missing = |name: &str| ConfigError::Parse {
        line: 0,
        message: format!("missing required section [{name}]"),
    };
    let f1 = f1.ok_or_else(|| missing("family.f1"))?;
    let f2 = f2.ok_or_else(|| missing("family.f2"))?;
    let mut base = base.ok_or_else(|| missing("base"))?;
    let experiment = experiment.ok_or_else(|| missing("experiment"))?;

    let p1 = parse_f64(&base.require("p1")?)?;
    if let Some(p2_raw) = base.take("p2") {
        let p2 = parse_f64(&p2_raw)?;
        if (p1 + p2 - 1.0).abs() > 1e-15 {
            return Err(ConfigError::Parse {
                line: p2_raw.1,
                message: format!("p1 + p2 = {} must equal 1", p1 + p2),
            });
        }
    }
    let seed = parse_u64(&base.require("seed")?)?;
    base.finish()?;

    let (outdir, bins) = match output {
        None => (PathBuf::from("out"), 4096),
        Some(mut keys) => {
            let dir = match keys.take("dir") {
                Some(raw) => PathBuf::from(raw.0),
                None => PathBuf::from("out"),
            };
            let bins = match keys.take("bins") {
                Some(raw) => parse_usize(&raw)?,
                None => 4096,
            };
            keys.finish()?;
            (dir, bins)
        }
    };

    let config = RunConfig { f1, f2, p1, seed, experiment, outdir, bins };

    // Fail closed: an invalid family never reaches a driver.
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(ConfigError::Validation(format!(
            "probabilities must be positive: p1 = {p1}"
        )));
    }
    let family = config.family()?;
    let report = validate_family(&family, 1000);
    if !report.is_valid() {
        let messages: Vec<String> =
            report.violations.iter().map(|v| v.message.clone()).collect();
        return Err(ConfigError::Validation(messages.join("; ")));
    }
    Ok(config)
}

/// Canonical text form; `parse_config(serialize_config(c))` reproduces `c`.
pub fn serialize_config(config: &RunConfig) -> String {
    let mut out = String::new();
    for (section, spec) in [("family.f1", &config.f1), ("family.f2", &config.f2)] {
        let _ = writeln!(out, "[{section}]");
        match &spec.kind {
            MapKindSpec::Moebius { log_multiplier } => {
                let _ = writeln!(out, "kind = moebius");
                let _ = writeln!(out, "log_multiplier = {log_multiplier}");
            }
            MapKindSpec::Logistic { r, direction } => {
                let _ = writeln!(out, "kind = logistic");
                let _ = writeln!(out, "r = {r}");
                let _ = writeln!(
                    out,
                    "direction = {}",
                    match direction {
                        Direction::Down => "down",
                        Direction::Up => "up",
                    }
                );
            }
            MapKindSpec::DampedMoebius { log_multiplier, damping } => {
                let _ = writeln!(out, "kind = damped_moebius");
                let _ = writeln!(out, "log_multiplier = {log_multiplier}");
                let _ = writeln!(out, "damping = {damping}");
            }
            MapKindSpec::Composite { components } => {
                let _ = writeln!(out, "kind = composite");
                let parts: Vec<String> =
                    components.iter().map(MapSpec::to_component_string).collect();
                let _ = writeln!(out, "components = {}", parts.join(";"));
            }
        }
        if spec.invert {
            let _ = writeln!(out, "invert = true");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "[base]");
    let _ = writeln!(out, "p1 = {}", config.p1);
    let _ = writeln!(out, "seed = {}", config.seed);
    out.push('\n');
    let _ = writeln!(out, "[experiment]");
    let _ = writeln!(out, "name = {}", config.experiment.name());
    match &config.experiment {
        ExperimentSpec::Classify { zero_tolerance } => {
            let _ = writeln!(out, "zero_tolerance = {zero_tolerance}");
        }
        ExperimentSpec::Minimality { denominator_bound, tolerance } => {
            let _ = writeln!(out, "denominator_bound = {denominator_bound}");
            let _ = writeln!(out, "tolerance = {tolerance}");
        }
        ExperimentSpec::Stationary { iterations, start } => {
            let _ = writeln!(out, "iterations = {iterations}");
            let _ = writeln!(
                out,
                "start = {}",
                match start {
                    StationaryStart::Lebesgue => "lebesgue",
                    StationaryStart::LeftHalf => "left_half",
                }
            );
        }
        ExperimentSpec::BasinScan { cylinder_len, subdivisions, samples_per_cell, horizon, delta } => {
            let _ = writeln!(out, "cylinder_len = {cylinder_len}");
            let _ = writeln!(out, "subdivisions = {subdivisions}");
            let _ = writeln!(out, "samples_per_cell = {samples_per_cell}");
            let _ = writeln!(out, "horizon = {horizon}");
            let _ = writeln!(out, "delta = {delta}");
        }
        ExperimentSpec::Graph { words, horizon, tolerance } => {
            let _ = writeln!(out, "words = {words}");
            let _ = writeln!(out, "horizon = {horizon}");
            let _ = writeln!(out, "tolerance = {tolerance}");
        }
        ExperimentSpec::Sync { x0, y0, words, horizon, stride } => {
            let _ = writeln!(out, "x0 = {x0}");
            let _ = writeln!(out, "y0 = {y0}");
            let _ = writeln!(out, "words = {words}");
            let _ = writeln!(out, "horizon = {horizon}");
            let _ = writeln!(out, "stride = {stride}");
        }
        ExperimentSpec::OnOff { x0, beta, checkpoints, timeseries_steps } => {
            let _ = writeln!(out, "x0 = {x0}");
            let _ = writeln!(out, "beta = {beta}");
            let list: Vec<String> = checkpoints.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "checkpoints = {}", list.join(","));
            let _ = writeln!(out, "timeseries_steps = {timeseries_steps}");
        }
        ExperimentSpec::Excursions { x0, beta, horizon } => {
            let _ = writeln!(out, "x0 = {x0}");
            let _ = writeln!(out, "beta = {beta}");
            let _ = writeln!(out, "horizon = {horizon}");
        }
        ExperimentSpec::Clt { x0, steps, samples, a_grid } => {
            let _ = writeln!(out, "x0 = {x0}");
            let _ = writeln!(out, "steps = {steps}");
            let _ = writeln!(out, "samples = {samples}");
            let list: Vec<String> = a_grid.iter().map(|a| a.to_string()).collect();
            let _ = writeln!(out, "a_grid = {}", list.join(","));
        }
        ExperimentSpec::Pullback { x0, beta, n_grid, words_per_n, reentry_window } => {
            let _ = writeln!(out, "x0 = {x0}");
            let _ = writeln!(out, "beta = {beta}");
            let list: Vec<String> = n_grid.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(out, "n_grid = {}", list.join(","));
            let _ = writeln!(out, "words_per_n = {words_per_n}");
            let _ = writeln!(out, "reentry_window = {reentry_window}");
        }
        ExperimentSpec::Drift { x0, samples, horizon, delta } => {
            let _ = writeln!(out, "x0 = {x0}");
            let _ = writeln!(out, "samples = {samples}");
            let _ = writeln!(out, "horizon = {horizon}");
            let _ = writeln!(out, "delta = {delta}");
        }
    }
    out.push('\n');
    let _ = writeln!(out, "[output]");
    let _ = writeln!(out, "dir = {}", config.outdir.display());
    let _ = writeln!(out, "bins = {}", config.bins);
    out
}

fn fmt_value(v: f64) -> String {
    if v == 0.0 {
        "0".to_string() // normalize −0
    } else {
        format!("{v}")
    }
}

/// Render a record as CSV: header row of column names, one line per row.
pub fn record_to_csv(record: &ExperimentRecord) -> String {
    let mut out = record.columns.join(",");
    out.push('\n');
    for row in &record.rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_value(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Serialize a measure: cell_kind,left,right,mass with explicit atom rows.
pub fn measure_to_csv(m: &BinnedMeasure) -> String {
    let b = m.bin_count();
    let mut out = String::from("cell_kind,left,right,mass\n");
    let _ = writeln!(out, "atom0,0,0,{}", fmt_value(m.atom0()));
    for (k, &w) in m.bins().iter().enumerate() {
        let _ = writeln!(
            out,
            "bin_{k},{},{},{}",
            fmt_value(k as f64 / b as f64),
            fmt_value((k + 1) as f64 / b as f64),
            fmt_value(w)
        );
    }
    let _ = writeln!(out, "atom1,1,1,{}", fmt_value(m.atom1()));
    out
}

/// Serialize an orbit: step,value,coordinate.
pub fn orbit_to_csv(orbit: &crate::skew_engine::Orbit) -> String {
    let mut out = String::from("step,value,coordinate\n");
    for &(step, v) in &orbit.samples {
        let _ = writeln!(out, "{step},{},{}", fmt_value(v), orbit.coordinate.label());
    }
    out
}

/// Figure-panel styles for plot-data emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    /// Columns step,x.
    Timeseries,
    /// Columns bin_left,bin_right,density.
    Histogram,
    /// Columns a,empirical,theoretical.
    Cdf,
}

#[derive(Debug, Error, PartialEq)]
pub enum EmitError {
    #[error("record `{experiment}` has no rows")]
    EmptyRecord { experiment: String },
    #[error("record `{experiment}` lacks column `{column}` required by the {style:?} style")]
    StyleMismatch { experiment: String, column: String, style: PlotStyle },
}

/// Project a record onto the columns of a figure style.
pub fn emit_plot_data(record: &ExperimentRecord, style: PlotStyle) -> Result<String, EmitError> {
    if record.rows.is_empty() {
        return Err(EmitError::EmptyRecord { experiment: record.experiment.clone() });
    }
    let wanted: &[&str] = match style {
        PlotStyle::Timeseries => &["step", "x"],
        PlotStyle::Histogram => &["bin_left", "bin_right", "density"],
        PlotStyle::Cdf => &["a", "empirical", "theoretical"],
    };
    let mut indices = Vec::with_capacity(wanted.len());
    for col in wanted {
        match record.column_index(col) {
            Some(idx) => indices.push(idx),
            None => {
                return Err(EmitError::StyleMismatch {
                    experiment: record.experiment.clone(),
                    column: col.to_string(),
                    style,
                })
            }
        }
    }
    let mut out = wanted.join(",");
    out.push('\n');
    for row in &record.rows {
        let cells: Vec<String> = indices.iter().map(|&i| fmt_value(row[i])).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Write through a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    schema: &'static str,
    build: &'static str,
    experiment: &'a str,
    seed: u64,
    regime: RegimeJson<'a>,
    parameters: BTreeMap<String, String>,
    provenance: Option<ProvenanceJson>,
    outputs: Vec<String>,
    config: &'a str,
}

/// The regime block of a report: {L0, L1, regime, zero_tolerance,
/// minimality: {verdict, clause, Q, tau, ...}}.
#[derive(Debug, Serialize)]
struct RegimeJson<'a> {
    #[serde(flatten)]
    regime: &'a RegimeReport,
    minimality: &'a MinimalityReport,
}

#[derive(Debug, Serialize)]
struct ProvenanceJson {
    seed: u64,
    streams: [u64; 2],
}

/// Outcome of a successful run: the files written into the out directory.
#[derive(Debug)]
pub struct RunOutput {
    pub report_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
    pub regime: RegimeReport,
}

fn regime_allows(spec: &ExperimentSpec, regime: Regime) -> Result<(), String> {
    let needed: &[Regime] = match spec {
        ExperimentSpec::BasinScan { .. } | ExperimentSpec::Graph { .. } => {
            &[Regime::IntermingledBasins]
        }
        ExperimentSpec::Sync { .. } => &[Regime::Synchronization],
        // The occupation indicator adapts to the double-neutral case.
        ExperimentSpec::OnOff { .. } => &[Regime::OnOffAtZero, Regime::DoubleNeutral],
        ExperimentSpec::Excursions { .. }
        | ExperimentSpec::Clt { .. }
        | ExperimentSpec::Pullback { .. } => &[Regime::OnOffAtZero],
        ExperimentSpec::Drift { .. } => &[Regime::DriftToOne, Regime::DriftToZero],
        _ => &[],
    };
    if needed.is_empty() || needed.contains(&regime) {
        Ok(())
    } else {
        Err(needed.iter().map(|r| r.label()).collect::<Vec<_>>().join(" or "))
    }
}

/// Execute a validated config: runs the experiment, writes
/// `<outdir>/report.json` plus one CSV per emitted table, and returns the
/// paths. All writes are atomic (write-temp-rename).
pub fn run(config: &RunConfig) -> Result<RunOutput, ConfigError> {
    let family = config.family()?;
    let regime = classify_regime(&family, DEFAULT_ZERO_TOLERANCE);
    if let Err(needed) = regime_allows(&config.experiment, regime.regime) {
        return Err(ConfigError::RegimeMismatch {
            experiment: config.experiment.name().to_string(),
            needed,
            got: regime.regime.label().to_string(),
        });
    }

    let probs = Probabilities::new(config.p1)
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
    let seed = config.seed;
    let mut csvs: Vec<(String, String)> = Vec::new();
    let mut parameters = BTreeMap::new();
    let mut provenance = None;

    match &config.experiment {
        ExperimentSpec::Classify { zero_tolerance } => {
            let report = classify_regime(&family, *zero_tolerance);
            parameters.insert("l0".into(), report.l0.to_string());
            parameters.insert("l1".into(), report.l1.to_string());
            parameters.insert("regime".into(), report.regime.label().to_string());
        }
        ExperimentSpec::Minimality { denominator_bound, tolerance } => {
            let report = minimality_check(&family, *denominator_bound, *tolerance);
            parameters.insert("verdict".into(), report.verdict.label().to_string());
            parameters.insert("detail".into(), report.detail.clone());
        }
        ExperimentSpec::Stationary { iterations, start } => {
            let m0 = match start {
                StationaryStart::Lebesgue => BinnedMeasure::lebesgue(config.bins),
                StationaryStart::LeftHalf => {
                    let mut bins = vec![0.0; config.bins];
                    for w in bins.iter_mut().take(config.bins / 2) {
                        *w = 2.0 / config.bins as f64;
                    }
                    BinnedMeasure::from_parts(0.0, 0.0, bins)
                        .expect("left-half start is a probability measure")
                }
            };
            let (avg, residuals) = measure_lab::krylov_bogolyubov(&m0, &family, *iterations);
            parameters.insert("iterations".into(), iterations.to_string());
            parameters
                .insert("final_residual".into(), residuals.last().unwrap().to_string());
            parameters.insert("interior_mass".into(), avg.interior_mass().to_string());
            parameters
                .insert("fiber_exponent".into(), measure_lab::lyapunov_vs_measure(&family, &avg).to_string());
            if let Some((cone, delta)) = measure_lab::find_cone_params(&family, 64) {
                let check = measure_lab::cone_check(&avg, &cone);
                parameters.insert(
                    "cone".into(),
                    format!(
                        "alpha={} q={} c={} delta={} inside={}",
                        cone.alpha, cone.q, cone.c, delta, check.inside
                    ),
                );
            }
            csvs.push(("stationary.csv".into(), measure_to_csv(&avg)));
            let mut hist = ExperimentRecord {
                experiment: "histogram".into(),
                parameters: BTreeMap::new(),
                columns: vec!["bin_left".into(), "bin_right".into(), "density".into()],
                rows: Vec::new(),
                provenance: experiments::RecordProvenance { seed, stream_lo: 0, stream_hi: 0 },
            };
            let b = avg.bin_count();
            for (k, &w) in avg.bins().iter().enumerate() {
                hist.rows.push(vec![k as f64 / b as f64, (k + 1) as f64 / b as f64, w * b as f64]);
            }
            csvs.push(("histogram.csv".into(), emit_plot_data(&hist, PlotStyle::Histogram).expect("histogram columns")));
            let mut residual_rec = ExperimentRecord {
                experiment: "residuals".into(),
                parameters: BTreeMap::new(),
                columns: vec!["iteration".into(), "residual".into()],
                rows: residuals
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| vec![i as f64, r])
                    .collect(),
                provenance: experiments::RecordProvenance { seed, stream_lo: 0, stream_hi: 0 },
            };
            residual_rec.parameters.insert("metric".into(), "total variation".into());
            csvs.push(("residuals.csv".into(), record_to_csv(&residual_rec)));
        }
        ExperimentSpec::BasinScan { cylinder_len, subdivisions, samples_per_cell, horizon, delta } => {
            let cfg = experiments::ScanConfig {
                cylinder_len: *cylinder_len,
                subdivisions: *subdivisions,
                samples_per_cell: *samples_per_cell,
                horizon: *horizon,
                delta: *delta,
                seed,
                stream_base: 0,
            };
            let (_, record) = experiments::intermingled_scan(&family, &cfg);
            parameters = record.parameters.clone();
            provenance = Some(record.provenance);
            csvs.push(("basin-scan.csv".into(), record_to_csv(&record)));
        }
        ExperimentSpec::Graph { words, horizon, tolerance } => {
            let mut record = ExperimentRecord {
                experiment: "graph".into(),
                parameters: BTreeMap::new(),
                columns: vec!["word".into(), "xi".into(), "equivariance_residual".into()],
                rows: Vec::new(),
                provenance: experiments::RecordProvenance {
                    seed,
                    stream_lo: 0,
                    stream_hi: *words as u64,
                },
            };
            for k in 0..*words as u64 {
                let w = regenerate(probs, horizon + 1, Provenance { seed, stream: k, offset: 0 });
                let xi = experiments::invariant_graph_estimate(&family, &w, *tolerance, *horizon)
                    .map_err(|e| ConfigError::Validation(e.to_string()))?;
                let shifted = w.shift(1).expect("word has horizon+1 symbols");
                let xi_next =
                    experiments::invariant_graph_estimate(&family, &shifted, *tolerance, *horizon)
                        .map_err(|e| ConfigError::Validation(e.to_string()))?;
                let pushed = family.map_for(w.symbols()[0]).eval(xi);
                record.rows.push(vec![k as f64, xi, (xi_next - pushed).abs()]);
            }
            record.parameters.insert("horizon".into(), horizon.to_string());
            record.parameters.insert("tolerance".into(), tolerance.to_string());
            parameters = record.parameters.clone();
            provenance = Some(record.provenance);
            csvs.push(("graph.csv".into(), record_to_csv(&record)));
        }
        ExperimentSpec::Sync { x0, y0, words, horizon, stride } => {
            let cfg = experiments::SyncConfig {
                pair: (*x0, *y0),
                words: *words,
                horizon: *horizon,
                stride: *stride,
                seed,
                stream_base: 0,
            };
            let record = experiments::synchronization_experiment(&family, &cfg);
            parameters = record.parameters.clone();
            if let Some(slope) = experiments::log_median_decay_slope(&record, 1e-150, 1e-4) {
                parameters.insert("log_median_slope".into(), slope.to_string());
            }
            provenance = Some(record.provenance);
            csvs.push(("sync.csv".into(), record_to_csv(&record)));
            // Time series of three initial conditions under the first word,
            // showing the within-fiber convergence directly.
            let steps = (*horizon).min(2000);
            let word = regenerate(probs, steps, Provenance { seed, stream: 0, offset: 0 });
            for (i, start) in [*x0, 0.5 * (x0 + y0), *y0].into_iter().enumerate() {
                let ts = experiments::orbit_timeseries(&family, &word, start, steps, 1)
                    .map_err(|e| ConfigError::Validation(e.to_string()))?;
                csvs.push((
                    format!("sync_orbit_{i}.csv"),
                    emit_plot_data(&ts, PlotStyle::Timeseries).expect("timeseries columns"),
                ));
            }
        }
        ExperimentSpec::OnOff { x0, beta, checkpoints, timeseries_steps } => {
            let horizon = *checkpoints.iter().max().ok_or_else(|| {
                ConfigError::Validation("onoff needs at least one checkpoint".into())
            })?;
            let indicator = if regime.regime == Regime::DoubleNeutral {
                OccupationIndicator::MidInterval
            } else {
                OccupationIndicator::BelowBeta
            };
            let word = regenerate(probs, horizon, Provenance { seed, stream: 0, offset: 0 });
            let record = experiments::occupation_fraction(
                &family,
                &word,
                *x0,
                *beta,
                checkpoints,
                indicator,
            )
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
            parameters = record.parameters.clone();
            provenance = Some(record.provenance);
            csvs.push(("onoff.csv".into(), record_to_csv(&record)));
            if *timeseries_steps > 0 {
                let stride = (timeseries_steps / 2000).max(1);
                let ts = experiments::orbit_timeseries(&family, &word, *x0, *timeseries_steps, stride)
                    .map_err(|e| ConfigError::Validation(e.to_string()))?;
                csvs.push((
                    "timeseries.csv".into(),
                    emit_plot_data(&ts, PlotStyle::Timeseries).expect("timeseries columns"),
                ));
            }
        }
        ExperimentSpec::Excursions { x0, beta, horizon } => {
            let word = regenerate(probs, *horizon, Provenance { seed, stream: 0, offset: 0 });
            let k = crate::interval_maps::logit(*beta);
            let (_, record) = experiments::excursion_statistics(&family, &word, *x0, *horizon, k)
                .map_err(|e| ConfigError::Validation(e.to_string()))?;
            parameters = record.parameters.clone();
            provenance = Some(record.provenance);
            csvs.push(("excursions.csv".into(), record_to_csv(&record)));
        }
        ExperimentSpec::Clt { x0, steps, samples, a_grid } => {
            let cfg = experiments::TailLawConfig {
                x0: *x0,
                steps: *steps,
                samples: *samples,
                a_grid: a_grid.clone(),
                seed,
                stream_base: 0,
            };
            let record = experiments::tail_law_experiment(&family, &cfg);
            parameters = record.parameters.clone();
            provenance = Some(record.provenance);
            csvs.push(("clt.csv".into(), record_to_csv(&record)));
            let mut cdf = record.clone();
            cdf.experiment = "cdf".into();
            csvs.push(("cdf.csv".into(), emit_plot_data(&cdf, PlotStyle::Cdf).expect("cdf columns")));
        }
        ExperimentSpec::Pullback { x0, beta, n_grid, words_per_n, reentry_window } => {
            let cfg = experiments::PullbackConfig {
                x0: *x0,
                n_grid: n_grid.clone(),
                words_per_n: *words_per_n,
                beta: *beta,
                reentry_window: *reentry_window,
                seed,
                stream_base: 0,
            };
            let record = experiments::pullback_vs_forward(&family, &cfg);
            parameters = record.parameters.clone();
            provenance = Some(record.provenance);
            csvs.push(("pullback.csv".into(), record_to_csv(&record)));
        }
        ExperimentSpec::Drift { x0, samples, horizon, delta } => {
            let cfg = experiments::DriftConfig {
                x0: *x0,
                samples: *samples,
                horizon: *horizon,
                delta: *delta,
                seed,
                stream_base: 0,
            };
            let (fraction, record) = experiments::drift_experiment(&family, &cfg);
            parameters = record.parameters.clone();
            parameters.insert("fraction".into(), fraction.to_string());
            provenance = Some(record.provenance);
            csvs.push(("drift.csv".into(), record_to_csv(&record)));
        }
    }

    let minimality = minimality_check(&family, 1_000_000, 1e-9);
    let config_text = serialize_config(config);
    let report = Report {
        schema: REPORT_SCHEMA,
        build: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment.name(),
        seed,
        regime: RegimeJson { regime: &regime, minimality: &minimality },
        parameters,
        provenance: provenance.map(|p| ProvenanceJson {
            seed: p.seed,
            streams: [p.stream_lo, p.stream_hi],
        }),
        outputs: csvs.iter().map(|(name, _)| name.clone()).collect(),
        config: &config_text,
    };
    let report_json =
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n";

    fs::create_dir_all(&config.outdir)?;
    let report_path = config.outdir.join("report.json");
    write_atomic(&report_path, &report_json)?;
    let mut csv_paths = Vec::new();
    for (name, contents) in &csvs {
        let path = config.outdir.join(name);
        write_atomic(&path, contents)?;
        csv_paths.push(path);
    }
    Ok(RunOutput { report_path, csv_paths, regime })
}

/// Boundary exponents as a convenience for the CLI summary line.
pub fn exponent_summary(family: &MapFamily) -> (f64, f64) {
    (
        boundary_exponent(family, crate::interval_maps::Endpoint::Zero),
        boundary_exponent(family, crate::interval_maps::Endpoint::One),
    )
}
