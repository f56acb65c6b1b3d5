//! `treeflow` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use treeflow_core::conic::SolverOptions;
use treeflow_core::network::{load_network_from_path, Network};
use treeflow_core::opf::{Mode, Objective, OpfOptions};

pub mod case_study;
pub mod compare;
pub mod plot;
pub mod solve;
pub mod validate;

/// Exit codes shared by the commands.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const INCONCLUSIVE: i32 = 3;
    /// Relaxation and oracle disagree on a network that violates the angle
    /// condition, where exactness is not expected.
    pub const DIVERGENCE: i32 = 4;
    /// Relaxation and oracle disagree although the angle condition holds.
    pub const MISMATCH: i32 = 5;
}

#[derive(Debug, Parser)]
#[command(
    name = "treeflow",
    version,
    about = "Convexified optimal power flow on radial networks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Network file (JSON).
    #[arg(long, global = true)]
    pub network: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 100)]
    pub trials: usize,
    /// Magnitude model; fixed when every bus has `v_fixed`, variable otherwise.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// `loss`, `linear:FILE` or `pwl:FILE`.
    #[arg(long, global = true, default_value = "loss")]
    pub objective: String,
    /// Conic solver tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Fixed,
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Every non-root bus gets randomized bounds around its load.
    A,
    /// A random fifth of the non-root buses get randomized bounds; the rest
    /// are held at their loads.
    B,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the convexified OPF and write the solution as JSON.
    Solve {
        /// Also write the conic program in text form.
        #[arg(long)]
        dump_program: Option<PathBuf>,
    },
    /// Randomized tightness study over perturbed bus bounds.
    CaseStudy {
        #[arg(long, value_enum, default_value = "a")]
        method: Method,
    },
    /// Plot the two-bus flow region of a line as SVG.
    PlotRegion(plot::PlotArgs),
    /// Compare the relaxed optimum with a brute-force grid optimum.
    OracleCompare {
        #[arg(long, default_value_t = 1e-3)]
        theta_step: f64,
        /// Magnitude grid step (variable mode).
        #[arg(long, default_value_t = 0.01)]
        vm_step: f64,
        /// Write the sampled region as CSV.
        #[arg(long)]
        dump_samples: Option<PathBuf>,
    },
    /// Check a network file and report per-line angle conditions.
    Validate {
        /// Also check the variable-magnitude exactness assumptions at this
        /// many magnitude levels per bus.
        #[arg(long)]
        assumptions: Option<usize>,
    },
}

/// Parse arguments and run, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit::USAGE
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    match &cli.command {
        Command::Solve { dump_program } => solve::run(g, dump_program.as_deref()),
        Command::CaseStudy { method } => case_study::run(g, *method),
        Command::PlotRegion(args) => plot::run(g, args),
        Command::OracleCompare {
            theta_step,
            vm_step,
            dump_samples,
        } => compare::run(g, *theta_step, *vm_step, dump_samples.as_deref()),
        Command::Validate { assumptions } => validate::run(g, *assumptions),
    }
}

impl Global {
    pub fn load(&self) -> Result<Network> {
        let path = self.network.as_ref().context("--network is required")?;
        load_network_from_path(path).with_context(|| format!("loading {}", path.display()))
    }

    pub fn mode_for(&self, net: &Network) -> Mode {
        match self.mode {
            Some(ModeArg::Fixed) => Mode::Fixed,
            Some(ModeArg::Variable) => Mode::Variable,
            None if net.fixed_magnitudes().is_some() => Mode::Fixed,
            None => Mode::Variable,
        }
    }

    pub fn objective_for(&self, net: &Network) -> Result<Objective> {
        parse_objective(&self.objective, net)
    }

    pub fn opf_options(&self) -> Result<OpfOptions> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            bail!("--tol must be positive");
        }
        Ok(OpfOptions {
            solver: SolverOptions {
                tol: self.tol,
                ..SolverOptions::default()
            },
            ..OpfOptions::default()
        })
    }

    /// Write `text` to `--out`, or to standard output.
    pub fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => write_file(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `loss`, `linear:FILE` or `pwl:FILE`, with files keyed by bus id.
pub fn parse_objective(spec: &str, net: &Network) -> Result<Objective> {
    let read = |p: &str| fs::read_to_string(p).with_context(|| format!("reading objective file {p}"));
    Ok(match spec.split_once(':') {
        None if spec == "loss" => Objective::Loss,
        Some(("linear", path)) => Objective::linear_from_json(net, &read(path)?)?,
        Some(("pwl", path)) => Objective::pwl_from_json(net, &read(path)?)?,
        _ => bail!("unknown objective `{spec}`; expected loss, linear:FILE or pwl:FILE"),
    })
}
