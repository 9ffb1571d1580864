//! `bbmlab`: reproducible barrier-avoidance experiments from the command line.
//!
//! Exit codes: 0 success, 1 disagreement (`compare` only), 2 input error,
//! 3 numerical failure.

mod commands;
mod config;
mod emit;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ExperimentConfig, Format, QueryPoint, SchemeName};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "bbmlab",
    version,
    about = "Barrier avoidance for branching Brownian motion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON or TOML experiment config.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Cap on Monte Carlo worker threads. Results do not depend on it.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(usize))]
    threads: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Branching rate.
    #[arg(long)]
    lambda: Option<f64>,
    /// Offspring probabilities a_0,a_1,...
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Domain length L.
    #[arg(long)]
    length: Option<f64>,
    /// Grid spacing.
    #[arg(long)]
    dx: Option<f64>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// Query positions (replaces the config's query points).
    #[arg(long = "x", value_delimiter = ',')]
    xs: Option<Vec<f64>>,
    /// Replicates per query position.
    #[arg(long)]
    reps: Option<usize>,
    /// Simulation horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    /// Path discretization step.
    #[arg(long = "sim-dt")]
    sim_dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IcChoice {
    Zero,
    One,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Criticality, mean offspring and extinction probability of a law.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Offspring probabilities a_0,a_1,...
        #[arg(
            long,
            value_delimiter = ',',
            allow_negative_numbers = true,
            conflicts_with = "reaction"
        )]
        coeffs: Option<Vec<f64>>,
        /// Reaction coefficients f_0,f_1,... to decompose as lambda (G(u) - u).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        reaction: Option<Vec<f64>>,
        /// Rate to use when decomposing a reaction.
        #[arg(long, requires = "reaction")]
        lambda: Option<f64>,
    },
    /// Monte Carlo estimates of r(x, t) and s(x, t).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        query: QueryArgs,
        /// Query times, crossed with the query positions.
        #[arg(long = "t", value_delimiter = ',')]
        ts: Option<Vec<f64>>,
        /// Step naively, without the bridge crossing correction.
        #[arg(long)]
        no_bridge: bool,
    },
    /// Finite-difference profiles from the zero and/or unit initial condition.
    SolvePde {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "both")]
        ic: IcChoice,
        /// Snapshot times; the steady state when omitted.
        #[arg(long = "T", value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeName>,
        #[arg(long = "pde-dt")]
        pde_dt: Option<f64>,
    },
    /// Stationary profile by shooting on u'(0).
    SolveOde {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Far-field tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Far-field value u(L).
        #[arg(long)]
        target: Option<f64>,
    },
    /// Run all three routes on the same model and check they agree.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        query: QueryArgs,
    },
}

fn resolve(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.sim.seed = seed;
    }
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(CliError::Input("--threads must be at least 1".into()));
        }
        cfg.sim.threads = Some(threads);
    }
    if let Some(out) = &common.out {
        cfg.output_path = Some(out.clone());
    }
    if let Some(format) = common.format {
        cfg.format = format;
    }
    Ok(cfg)
}

impl ModelArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(l) = self.lambda {
            cfg.model.lambda = l;
        }
        if let Some(c) = &self.coeffs {
            cfg.model.offspring = c.clone();
        }
    }
}

impl GridArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(l) = self.length {
            cfg.grid.length = l;
        }
        if let Some(dx) = self.dx {
            cfg.grid.dx = dx;
        }
    }
}

impl QueryArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(xs) = &self.xs {
            cfg.query_points = xs.iter().map(|&x| QueryPoint { x, t: None }).collect();
        }
        if let Some(n) = self.reps {
            cfg.sim.n_reps = n;
        }
        if let Some(h) = self.horizon {
            cfg.sim.horizon = Some(h);
        }
        if let Some(dt) = self.sim_dt {
            cfg.sim.dt = dt;
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Classify {
            common,
            coeffs,
            reaction,
            lambda,
        } => {
            let mut cfg = resolve(&common)?;
            if let Some(c) = coeffs {
                cfg.model.offspring = c;
            }
            let input = match reaction {
                Some(f) => commands::ClassifyInput::Reaction { coeffs: f, lambda },
                None => commands::ClassifyInput::Offspring,
            };
            commands::classify(&cfg, input, common.format.is_some())
        }
        Command::Simulate {
            common,
            model,
            query,
            ts,
            no_bridge,
        } => {
            let mut cfg = resolve(&common)?;
            model.apply(&mut cfg);
            query.apply(&mut cfg);
            if let Some(ts) = ts {
                let xs: Vec<f64> = cfg.query_points.iter().map(|q| q.x).collect();
                cfg.query_points = xs
                    .iter()
                    .flat_map(|&x| ts.iter().map(move |&t| QueryPoint { x, t: Some(t) }))
                    .collect();
            }
            if no_bridge {
                cfg.sim.bridge_correction = false;
            }
            commands::simulate(&cfg)
        }
        Command::SolvePde {
            common,
            model,
            grid,
            ic,
            times,
            scheme,
            pde_dt,
        } => {
            let mut cfg = resolve(&common)?;
            model.apply(&mut cfg);
            grid.apply(&mut cfg);
            if let Some(t) = times {
                cfg.pde.times = t;
            }
            if let Some(s) = scheme {
                cfg.pde.scheme = s;
            }
            if let Some(dt) = pde_dt {
                cfg.pde.dt = dt;
            }
            let (zero, one) = match ic {
                IcChoice::Zero => (true, false),
                IcChoice::One => (false, true),
                IcChoice::Both => (true, true),
            };
            commands::solve_pde(&cfg, zero, one)
        }
        Command::SolveOde {
            common,
            model,
            grid,
            tol,
            target,
        } => {
            let mut cfg = resolve(&common)?;
            model.apply(&mut cfg);
            grid.apply(&mut cfg);
            if let Some(t) = tol {
                cfg.ode.tol = t;
            }
            if let Some(t) = target {
                cfg.ode.target = t;
            }
            commands::solve_ode(&cfg)
        }
        Command::Compare {
            common,
            model,
            grid,
            query,
        } => {
            let mut cfg = resolve(&common)?;
            model.apply(&mut cfg);
            grid.apply(&mut cfg);
            query.apply(&mut cfg);
            commands::compare(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors, which matches the input-error code.
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bbmlab: {e}");
            e.exit_code()
        }
    }
}
