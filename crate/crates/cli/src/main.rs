//! `fpt`: solve, simulate, validate and tabulate first-passage problems.
//!
//! Exit codes: 0 ok, 2 invalid configuration, 3 solver failure,
//! 4 mismatch between artifacts, 5 failed validation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpt_core::config::{
    BoundaryKind, BoundarySection, GridSection, McSection, MethodChoice, OutputSection, RunConfig, SourceKind,
    SourceSection,
};

#[derive(Parser)]
#[command(name = "fpt", version, about = "First-passage densities through moving boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the density and write density.csv and run.json.
    Solve(CaseArgs),
    /// Monte Carlo simulation; writes hits.csv and mc.json (and ks.json next to a density).
    Simulate {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Run a validation suite: master, heat, mass, jump, delta or all.
    Validate {
        suite: String,
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Tabulate the Green function on a lattice into green.csv.
    Green {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
    },
}

#[derive(Args, Clone, Default)]
struct CaseArgs {
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Boundary samples with header `t,x` (implies --boundary csv).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    r0: Option<f64>,
    /// Centre of a uniform initial bump (smeared source).
    #[arg(long, allow_hyphen_values = true)]
    bump_center: Option<f64>,
    #[arg(long)]
    bump_width: Option<f64>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long = "N")]
    intervals: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct McArgs {
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable the Brownian-bridge crossing correction.
    #[arg(long)]
    no_bridge: bool,
}

#[derive(Args, Clone)]
struct LatticeArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = -3.0)]
    x_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    x_max: f64,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<f64>,
    #[arg(long, default_value_t = 50)]
    nx: usize,
    #[arg(long, default_value_t = 50)]
    nt: usize,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum BoundaryArg {
    Constant,
    Linear,
    Power,
    Csv,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum MethodArg {
    Marching,
    Picard,
    Both,
}

impl CaseArgs {
    fn flags(&self) -> RunConfig {
        let kind = self.boundary.map(|k| match k {
            BoundaryArg::Constant => BoundaryKind::Constant,
            BoundaryArg::Linear => BoundaryKind::Linear,
            BoundaryArg::Power => BoundaryKind::Power,
            BoundaryArg::Csv => BoundaryKind::Csv,
        });
        let kind = kind.or(self.csv.as_ref().map(|_| BoundaryKind::Csv));
        let bump = self.bump_center.is_some() || self.bump_width.is_some();
        RunConfig {
            boundary: BoundarySection {
                kind,
                a: self.a,
                b: self.b,
                theta: self.theta,
                gamma: self.gamma,
                csv_path: self.csv.clone(),
            },
            source: SourceSection {
                kind: if bump {
                    Some(SourceKind::Bump)
                } else {
                    self.r0.map(|_| SourceKind::Point)
                },
                r0: self.r0,
                center: self.bump_center,
                width: self.bump_width,
            },
            grid: GridSection { horizon: self.horizon, intervals: self.intervals, q: self.q },
            method: self.method.map(|m| match m {
                MethodArg::Marching => MethodChoice::Marching,
                MethodArg::Picard => MethodChoice::Picard,
                MethodArg::Both => MethodChoice::Both,
            }),
            mc: None,
            output: OutputSection { directory: self.out.clone(), formats: None },
        }
    }
}

impl McArgs {
    fn section(&self) -> McSection {
        McSection {
            n_paths: self.n_paths,
            dt: self.dt,
            horizon: None,
            seed: self.seed,
            bridge_correction: self.no_bridge.then_some(false),
        }
    }
}

fn init_threads() -> Result<(), commands::Failure> {
    let Ok(v) = std::env::var("FPT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| commands::Failure::config(anyhow::anyhow!("FPT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::Failure::config(e.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Solve(case) => commands::load(case.config.as_deref(), case.flags()).and_then(|cfg| commands::solve(&cfg)),
        Command::Simulate { case, mc } => {
            let mut flags = case.flags();
            flags.mc = Some(mc.section());
            commands::load(case.config.as_deref(), flags).and_then(|cfg| commands::simulate(&cfg))
        }
        Command::Validate { suite, case } => {
            commands::load(case.config.as_deref(), case.flags()).and_then(|cfg| commands::validate(&cfg, suite))
        }
        Command::Green { case, lattice } => commands::load(case.config.as_deref(), case.flags()).and_then(|cfg| {
            let l = lattice;
            commands::green(&cfg, [l.x_min, l.x_max], [l.t_min, l.t_max], [l.nx, l.nt])
        }),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
