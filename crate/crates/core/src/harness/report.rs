//! Self-describing experiment reports.
//!
//! A report has a `data` section, which is a pure function of the config and
//! seed, and a `meta` section (runtime, thread count, timestamp) which is not.
//! Non-finite numbers never appear: a statistic that cannot be computed has
//! `value: null`.
//!
//! CSV columns: `experiment,cell,params,statistic,value,lo,hi,count,trials`,
//! one row per (cell, statistic); `params` is `key=value` pairs joined by `;`.
//! JSON lines: one object per cell with keys `experiment`, `seed`, `id`,
//! `params`, `trials`, `failures`, `capped`, `stats`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Format;
use super::stats::Proportion;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub name: String,
    pub value: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Number of successes for proportions.
    pub count: Option<u64>,
    /// Replicas the statistic was computed from.
    pub trials: u64,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl Stat {
    pub fn value(name: impl Into<String>, value: f64, trials: u64) -> Self {
        Stat {
            name: name.into(),
            value: finite(value),
            lo: None,
            hi: None,
            count: None,
            trials,
        }
    }

    pub fn proportion(name: impl Into<String>, p: &Proportion) -> Self {
        Stat {
            name: name.into(),
            value: finite(p.estimate),
            lo: finite(p.lo),
            hi: finite(p.hi),
            count: Some(p.count),
            trials: p.trials,
        }
    }

    /// A proportion divided by a positive reference value, interval included.
    pub fn ratio(name: impl Into<String>, p: &Proportion, reference: f64) -> Self {
        Stat {
            name: name.into(),
            value: finite(p.estimate / reference),
            lo: finite(p.lo / reference),
            hi: finite(p.hi / reference),
            count: Some(p.count),
            trials: p.trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub params: BTreeMap<String, f64>,
    /// Replicas attempted.
    pub trials: u64,
    /// Replicas lost to sampler errors.
    pub failures: u64,
    /// Replicas that hit the vertex cap.
    pub capped: u64,
    pub stats: Vec<Stat>,
}

impl Cell {
    pub fn new(id: impl Into<String>, trials: u64) -> Self {
        Cell {
            id: id.into(),
            params: BTreeMap::new(),
            trials,
            failures: 0,
            capped: 0,
            stats: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn push(&mut self, stat: Stat) {
        self.stats.push(stat);
    }

    pub fn stat(&self, name: &str) -> Option<&Stat> {
        self.stats.iter().find(|s| s.name == name)
    }

    /// Shorthand for the value of a named statistic.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.stat(name).and_then(|s| s.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Whether the tree dimension exceeds the critical dimension of the steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub d: f64,
    pub d_crit: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportData {
    pub experiment: String,
    pub config: BTreeMap<String, String>,
    pub base_seed: u64,
    pub seed_scheme: String,
    pub hypothesis: Option<Hypothesis>,
    /// Oracle `P(V > cap)` for experiments on free trees.
    pub truncation_bias: Option<f64>,
    pub cells: Vec<Cell>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub runtime_secs: f64,
    pub threads: usize,
    /// Seconds since the Unix epoch at completion.
    pub timestamp: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub data: ReportData,
    pub meta: Meta,
}

pub const SEED_SCHEME: &str =
    "chacha8(splitmix64 chain of seed, fnv1a(tag), cell, purpose); stream = replica";

impl ReportData {
    pub fn cell(&self, id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.id == id)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            experiment: &'a str,
            seed: u64,
            #[serde(flatten)]
            cell: &'a Cell,
        }
        let mut out = String::new();
        for cell in &self.data.cells {
            out.push_str(&serde_json::to_string(&Line {
                experiment: &self.data.experiment,
                seed: self.data.base_seed,
                cell,
            })?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record([
            "experiment",
            "cell",
            "params",
            "statistic",
            "value",
            "lo",
            "hi",
            "count",
            "trials",
        ])
        .map_err(io)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for cell in &self.data.cells {
            let params = cell
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";");
            for s in &cell.stats {
                w.write_record([
                    self.data.experiment.clone(),
                    cell.id.clone(),
                    params.clone(),
                    s.name.clone(),
                    opt(s.value),
                    opt(s.lo),
                    opt(s.hi),
                    s.count.map(|c| c.to_string()).unwrap_or_default(),
                    s.trials.to_string(),
                ])
                .map_err(io)?;
            }
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => self.to_json(),
            Format::Jsonl => self.to_jsonl(),
            Format::Csv => self.to_csv(),
        }
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        let text = self.render(format)?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    /// A one-screen text summary.
    pub fn summary(&self) -> String {
        let d = &self.data;
        let mut s = format!(
            "experiment {}  seed {}  cells {}\n",
            d.experiment,
            d.base_seed,
            d.cells.len()
        );
        if let Some(h) = d.hypothesis {
            s += &format!(
                "tree dimension D = {:.4}, D_crit = {:.4}: {}\n",
                h.d,
                h.d_crit,
                if h.holds {
                    "D > D_crit"
                } else {
                    "D <= D_crit (negative control)"
                }
            );
        }
        if let Some(b) = d.truncation_bias {
            s += &format!("truncation bias P(V > cap) = {b:.3e}\n");
        }
        const SHOWN: usize = 12;
        for cell in d.cells.iter().take(SHOWN) {
            let head: Vec<String> = cell
                .stats
                .iter()
                .take(4)
                .map(|st| match st.value {
                    Some(v) => format!("{}={:.4}", st.name, v),
                    None => format!("{}=-", st.name),
                })
                .collect();
            s += &format!(
                "  {:<28} n={:<7} {}\n",
                cell.id,
                cell.trials,
                head.join("  ")
            );
        }
        if d.cells.len() > SHOWN {
            s += &format!("  ... {} more cells\n", d.cells.len() - SHOWN);
        }
        for c in &d.checks {
            s += &format!(
                "[{}] {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        for w in &d.warnings {
            s += &format!("warning: {w}\n");
        }
        s += &format!(
            "runtime {:.2}s on {} thread(s)\n",
            self.meta.runtime_secs, self.meta.threads
        );
        s
    }
}
