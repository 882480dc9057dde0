//! Command-line pipeline: descriptive statistics, in-sample risk measures, simulation
//! studies, dependence curves and rolling backtests.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "sysrisk", version, about = "Copula-based systemic risk measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summary statistics and Kendall's tau matrix of the log returns.
    Describe,
    /// In-sample VaR, CoVaR, SCoVaR, MCoVaR and VCoVaR with violation rates.
    Measure,
    /// Average violation rates of fitted measures on simulated copula samples.
    Simulate {
        /// Sample size per replication.
        #[arg(long)]
        n: Option<usize>,
        /// Number of replications per cell.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Dependence curves and nested-copula surfaces with a standard normal target.
    Curves,
    /// Rolling one-step-ahead forecasts with out-of-sample violation rates.
    Backtest {
        /// Continue from checkpoints in the output directory.
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Price file (delimited text with a date column).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Copula family or dynamic model; repeatable.
    #[arg(long, global = true)]
    pub copula: Vec<String>,
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// Conditioning asset; repeatable. Defaults to every non-target asset.
    #[arg(long, global = true)]
    pub conditioning: Vec<String>,
    /// Rolling window length.
    #[arg(long, global = true)]
    pub window: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; all available cores by default.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = config::OUT_ENV)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    /// Configuration file (if any) with flag overrides applied.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            c.data.path = Some(d.clone());
        }
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(b) = self.beta {
            c.beta = b;
        }
        if !self.copula.is_empty() {
            c.copulas = self.copula.clone();
        }
        if let Some(t) = &self.target {
            c.target = Some(t.clone());
        }
        if !self.conditioning.is_empty() {
            c.conditioning = self.conditioning.clone();
        }
        if let Some(w) = self.window {
            c.window = w;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(t) = self.threads {
            c.threads = Some(t);
        }
        if let Some(o) = &self.out {
            c.out = Some(o.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Describe => "describe",
            Command::Measure => "measure",
            Command::Simulate { .. } => "simulate",
            Command::Curves => "curves",
            Command::Backtest { .. } => "backtest",
        }
    }
}

/// Output of a completed subcommand.
pub struct Outcome {
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
}

/// Runs a subcommand with a resolved configuration and writes its manifest.
pub fn execute(command: &Command, cfg: &RunConfig) -> CliResult<Outcome> {
    let mut cfg = cfg.clone();
    if let Command::Simulate { n, replications } = command {
        if let Some(n) = n {
            cfg.simulate.n = *n;
        }
        if let Some(r) = replications {
            cfg.simulate.replications = *r;
        }
    }
    cfg.validate()?;
    let mut out = OutDir::create(cfg.out_dir())?;
    let summary = match command {
        Command::Describe => commands::describe(&cfg, &mut out)?,
        Command::Measure => commands::measure(&cfg, &mut out)?,
        Command::Simulate { .. } => commands::simulate(&cfg, &mut out)?,
        Command::Curves => commands::curves(&cfg, &mut out)?,
        Command::Backtest { resume } => commands::backtest(&cfg, &mut out, *resume)?,
    };
    out.write_manifest(command.name(), &cfg)?;
    Ok(Outcome { out_dir: out.root().to_path_buf(), artifacts: out.written().to_vec(), summary })
}

/// Sizes the global worker pool; later calls keep the first setting.
pub fn init_threads(threads: Option<usize>) {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    if b.build_global().is_err() {
        log::debug!("worker pool already initialized");
    }
}
