//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 runtime failure, 3 an
//! embedded check failed (the report is still written).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand};

use super::config::{Experiment, ExperimentConfig, Format};
use super::experiments;
use crate::error::Error;

#[derive(Debug, Parser)]
#[command(
    name = "bigjump",
    version,
    about = "Single-big-jump experiments for heavy-tailed tree-indexed random walks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Walk maxima against the largest jump on size-conditioned trees.
    Thm1(Common),
    /// Tails of walk maxima on free trees against the exact jump tail.
    Thm2(Common),
    /// Event frequencies of the big-jump argument on fixed trees.
    Prop1(Common),
    /// Height, size-tail and spine-construction checks of the tree samplers.
    GwVerify(Common),
    /// Repeated estimates of the truncated-walk constant.
    Calibrate(Common),
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Config file (key = value lines).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Report destination; the report goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "jsonl", "csv"])]
    pub format: Option<String>,
    /// Upper end of the threshold grid (thm2).
    #[arg(long = "x-max")]
    pub x_max: Option<f64>,
    /// Suppress the summary.
    #[arg(long)]
    pub quiet: bool,
}

impl Command {
    fn parts(&self) -> (Experiment, &Common) {
        match self {
            Command::Thm1(c) => (Experiment::Thm1, c),
            Command::Thm2(c) => (Experiment::Thm2, c),
            Command::Prop1(c) => (Experiment::Prop1, c),
            Command::GwVerify(c) => (Experiment::GwVerify, c),
            Command::Calibrate(c) => (Experiment::Calibrate, c),
        }
    }
}

/// Loads the config and applies the flag overrides.
pub fn resolve(experiment: Experiment, common: &Common) -> crate::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config, experiment)?;
    if let Some(s) = common.seed {
        cfg.base_seed = s;
    }
    if let Some(r) = common.replicas {
        cfg.replicas = r;
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(f) = &common.format {
        cfg.format = f.parse::<Format>()?;
    }
    if let Some(x) = common.x_max {
        cfg.x_max = x;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (experiment, common) = cli.command.parts();
    let cfg = match resolve(experiment, common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}\n");
            eprintln!("{}", Cli::command().render_usage());
            return 1;
        }
    };
    let report = match experiments::run(&cfg) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return 1;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let written = match &cfg.out {
        Some(path) => report.write(path, cfg.format),
        None => report.render(cfg.format).map(|text| print!("{text}")),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return 2;
    }
    if !common.quiet {
        let summary = report.summary();
        // keep stdout clean when it carries the report
        if cfg.out.is_some() {
            print!("{summary}");
        } else {
            eprint!("{summary}");
        }
    }
    if report.data.all_checks_pass() {
        0
    } else {
        3
    }
}
