//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Values may contain
//! `=` and `;` (law specs do); only the first `=` splits. Lists are
//! comma-separated. Unknown keys and repeated keys are errors.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `experiment` | `thm1`, `thm2`, `prop1`, `gw_verify`, `calibrate` | from the subcommand |
//! | `step` | step law, e.g. `kind=pareto;shape=symmetric;alpha=3;xmin=1` | symmetric, alpha 3 |
//! | `offspring` | `family=geometric_half` or `family=zeta;alphaT=1.5` | geometric_half |
//! | `sizes` | tree sizes (thm1, prop1, gw_verify) or walk lengths (calibrate) | `1000` |
//! | `tree` | `size_conditioned` or `star` (thm1) | `size_conditioned` |
//! | `x_grid` | explicit thresholds (thm2) or multiples of `y` (calibrate) | none |
//! | `x_min`, `x_max`, `x_points` | geometric threshold grid (thm2) | `5`, `30`, `11` |
//! | `replicas` | replicas per cell | `1000` |
//! | `cap` | vertex cap for free trees | `10000000` |
//! | `seed` | base seed | `0` |
//! | `threads` | worker threads | `1` |
//! | `epsilon` | exponent slack in `b_n` | `0.1` |
//! | `trees` | fixed trees (prop1) | `50` |
//! | `z_mult` | `z / b_H` multipliers (prop1) | `1,2` |
//! | `y_mult` | `y / z` multipliers (prop1) | `2,5,10` |
//! | `dds_c` | truncated-walk constant (prop1); calibrated when absent | none |
//! | `repeats` | independent calibrations (calibrate) | `10` |
//! | `free_trees` | free trees for the size-tail check (gw_verify) | `100000` |
//! | `geiger_k` | height for the spine-vs-rejection check (gw_verify) | `2` |
//! | `out` | output path | none |
//! | `format` | `json`, `jsonl` or `csv` | `json` |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavytail::StepLaw;
use crate::offspring::OffspringLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Thm1,
    Thm2,
    Prop1,
    GwVerify,
    Calibrate,
}

impl Experiment {
    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Thm1 => "thm1",
            Experiment::Thm2 => "thm2",
            Experiment::Prop1 => "prop1",
            Experiment::GwVerify => "gw_verify",
            Experiment::Calibrate => "calibrate",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "thm1" => Experiment::Thm1,
            "thm2" => Experiment::Thm2,
            "prop1" => Experiment::Prop1,
            "gw_verify" | "gw-verify" => Experiment::GwVerify,
            "calibrate" => Experiment::Calibrate,
            other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "json" => Format::Json,
            "jsonl" => Format::Jsonl,
            "csv" => Format::Csv,
            other => return Err(Error::Config(format!("unknown format `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    SizeConditioned,
    /// Root with `n` leaves: the walk maxima are maxima of `n` iid steps.
    Star,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub step: StepLaw,
    pub offspring: OffspringLaw,
    pub sizes: Vec<u64>,
    pub tree: TreeKind,
    pub x_grid: Option<Vec<f64>>,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    pub replicas: u64,
    pub cap: u64,
    pub base_seed: u64,
    pub threads: usize,
    pub epsilon: f64,
    pub trees: u64,
    pub z_mult: Vec<f64>,
    pub y_mult: Vec<f64>,
    pub dds_c: Option<f64>,
    pub repeats: u64,
    pub free_trees: u64,
    pub geiger_k: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
}

const KEYS: &[&str] = &[
    "experiment",
    "step",
    "offspring",
    "sizes",
    "tree",
    "x_grid",
    "x_min",
    "x_max",
    "x_points",
    "replicas",
    "cap",
    "seed",
    "threads",
    "epsilon",
    "trees",
    "z_mult",
    "y_mult",
    "dds_c",
    "repeats",
    "free_trees",
    "geiger_k",
    "out",
    "format",
];

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            step: StepLaw::symmetric(3.0).expect("valid default"),
            offspring: OffspringLaw::geometric_half(),
            sizes: vec![1000],
            tree: TreeKind::SizeConditioned,
            x_grid: None,
            x_min: 5.0,
            x_max: 30.0,
            x_points: 11,
            replicas: 1000,
            cap: 10_000_000,
            base_seed: 0,
            threads: 1,
            epsilon: 0.1,
            trees: 50,
            z_mult: vec![1.0, 2.0],
            y_mult: vec![2.0, 5.0, 10.0],
            dds_c: None,
            repeats: 10,
            free_trees: 100_000,
            geiger_k: 2,
            out: None,
            format: Format::Json,
        }
    }

    /// Parses a config text on top of the defaults for `experiment`. An
    /// `experiment` key, if present, must agree.
    pub fn parse(text: &str, experiment: Experiment) -> Result<Self> {
        let mut cfg = ExperimentConfig::defaults(experiment);
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if seen.insert(key.to_string(), lineno + 1).is_some() {
                return Err(Error::Config(format!(
                    "line {}: key `{key}` given twice",
                    lineno + 1
                )));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, experiment: Experiment) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        ExperimentConfig::parse(&text, experiment)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    return Err(Error::Config(format!(
                        "config is for `{e}`, not `{}`",
                        self.experiment
                    )));
                }
            }
            "step" => self.step = value.parse()?,
            "offspring" => self.offspring = value.parse()?,
            "sizes" => self.sizes = parse_list(value)?,
            "tree" => {
                self.tree = match value {
                    "size_conditioned" => TreeKind::SizeConditioned,
                    "star" => TreeKind::Star,
                    other => return Err(Error::Config(format!("unknown tree kind `{other}`"))),
                }
            }
            "x_grid" => self.x_grid = Some(parse_list(value)?),
            "x_min" => self.x_min = parse_one(value)?,
            "x_max" => self.x_max = parse_one(value)?,
            "x_points" => self.x_points = parse_one(value)?,
            "replicas" => self.replicas = parse_one(value)?,
            "cap" => self.cap = parse_one(value)?,
            "seed" => self.base_seed = parse_one(value)?,
            "threads" => self.threads = parse_one(value)?,
            "epsilon" => self.epsilon = parse_one(value)?,
            "trees" => self.trees = parse_one(value)?,
            "z_mult" => self.z_mult = parse_list(value)?,
            "y_mult" => self.y_mult = parse_list(value)?,
            "dds_c" => self.dds_c = Some(parse_one(value)?),
            "repeats" => self.repeats = parse_one(value)?,
            "free_trees" => self.free_trees = parse_one(value)?,
            "geiger_k" => self.geiger_k = parse_one(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            _ => unreachable!("key list checked by the caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if self.cap == 0 {
            return bad("cap must be at least 1".into());
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) || !is_sorted(&self.sizes) {
            return bad("sizes must be a non-empty increasing list of positive integers".into());
        }
        if let Some(g) = &self.x_grid {
            if g.is_empty() || !is_sorted(g) || g.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad(
                    "x_grid must be a non-empty increasing list of positive numbers".into(),
                );
            }
        }
        if !(self.x_min > 0.0 && self.x_max >= self.x_min) || self.x_points == 0 {
            return bad("need 0 < x_min <= x_max and x_points >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)".into());
        }
        for (name, list) in [("z_mult", &self.z_mult), ("y_mult", &self.y_mult)] {
            if list.is_empty()
                || !is_sorted(list)
                || list.iter().any(|x| !(x.is_finite() && *x > 0.0))
            {
                return bad(format!(
                    "{name} must be a non-empty increasing list of positive numbers"
                ));
            }
        }
        if self.trees == 0 || self.repeats == 0 {
            return bad("trees and repeats must be at least 1".into());
        }
        if let Some(c) = self.dds_c {
            if !(c > 0.0 && c.is_finite()) {
                return bad("dds_c must be positive".into());
            }
        }
        Ok(())
    }

    /// The threshold grid for thm2: `x_grid` if given, else a geometric grid;
    /// points above `x_max` are dropped either way.
    pub fn thresholds(&self) -> Vec<f64> {
        match &self.x_grid {
            Some(g) => g.iter().copied().filter(|&x| x <= self.x_max).collect(),
            None if self.x_points == 1 => vec![self.x_min],
            None => crate::heavytail::geometric_grid(self.x_min, self.x_max, self.x_points),
        }
    }

    /// Normalized `key -> value` echo of everything that affects the data.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut m = BTreeMap::new();
        m.insert("experiment".into(), self.experiment.to_string());
        m.insert("step".into(), self.step.to_string());
        m.insert("offspring".into(), self.offspring.to_string());
        m.insert(
            "sizes".into(),
            self.sizes
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert(
            "tree".into(),
            match self.tree {
                TreeKind::SizeConditioned => "size_conditioned".into(),
                TreeKind::Star => "star".into(),
            },
        );
        if let Some(g) = &self.x_grid {
            m.insert("x_grid".into(), join(g));
        }
        m.insert("x_min".into(), self.x_min.to_string());
        m.insert("x_max".into(), self.x_max.to_string());
        m.insert("x_points".into(), self.x_points.to_string());
        m.insert("replicas".into(), self.replicas.to_string());
        m.insert("cap".into(), self.cap.to_string());
        m.insert("seed".into(), self.base_seed.to_string());
        m.insert("epsilon".into(), self.epsilon.to_string());
        m.insert("trees".into(), self.trees.to_string());
        m.insert("z_mult".into(), join(&self.z_mult));
        m.insert("y_mult".into(), join(&self.y_mult));
        if let Some(c) = self.dds_c {
            m.insert("dds_c".into(), c.to_string());
        }
        m.insert("repeats".into(), self.repeats.to_string());
        m.insert("free_trees".into(), self.free_trees.to_string());
        m.insert("geiger_k".into(), self.geiger_k.to_string());
        m
    }
}

fn is_sorted<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn parse_one<T: FromStr>(value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    let cleaned = value.replace('_', "");
    // integers may be written in scientific notation, e.g. 1e6
    if let Ok(v) = cleaned.parse::<T>() {
        return Ok(v);
    }
    if let Ok(f) = cleaned.parse::<f64>() {
        if f.fract() == 0.0 && (0.0..1.8e19).contains(&f) {
            if let Ok(v) = format!("{}", f as u64).parse::<T>() {
                return Ok(v);
            }
        }
    }
    cleaned
        .parse::<T>()
        .map_err(|e| Error::Config(format!("bad value `{value}`: {e}")))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|v| parse_one(v.trim())).collect()
}
