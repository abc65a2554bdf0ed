use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::Overrides;

#[derive(Parser)]
#[command(name = "ssk", version, about = "Replica-symmetric theory and Monte Carlo checks for the spherical SK model")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// JSON config file, or a previous report (its "config" object is used).
    #[arg(long, global = true)]
    pub(crate) config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub(crate) seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub(crate) out: Option<PathBuf>,
    /// Also emit CSV (next to --out, or on stdout in place of JSON).
    #[arg(long, global = true)]
    pub(crate) csv: bool,
}

#[derive(Args, Clone, Default)]
pub struct Model {
    /// Mixture such as p2:1.0,p3:0.25
    #[arg(long)]
    pub(crate) mixture: Option<String>,
    #[arg(long)]
    pub(crate) beta: Option<f64>,
    #[arg(long)]
    pub(crate) h: Option<f64>,
}

#[derive(Args, Clone, Default)]
pub struct Mc {
    #[arg(long = "n", short = 'N')]
    pub(crate) n: Option<usize>,
    #[arg(long)]
    pub(crate) n_disorder: Option<usize>,
    #[arg(long)]
    pub(crate) n_chains: Option<usize>,
    #[arg(long)]
    pub(crate) sweeps: Option<u64>,
    #[arg(long)]
    pub(crate) burnin: Option<u64>,
    #[arg(long)]
    pub(crate) measure_every: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the fixed point and the fluctuation system.
    Theory {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Compare a limiting cavity moment with finite-N quadrature.
    Oracle1d {
        #[command(flatten)]
        model: Model,
        /// Exponents, e.g. 1,1 or (1,3)
        #[arg(long)]
        mono: Option<String>,
        /// Comma-separated N values
        #[arg(long)]
        ns: Option<String>,
        #[arg(long)]
        hermite_order: Option<usize>,
    },
    /// Run the Monte Carlo experiment.
    Simulate {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        mc: Mc,
        /// Write configurations of one chain to this SSKD file.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        dump_every: Option<u64>,
        /// Also integrate the free energy over this many temperatures in [0, beta].
        #[arg(long)]
        thermo_points: Option<usize>,
    },
    /// Theory, quadrature oracle and simulation side by side, with a pass/fail table.
    Verify {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        mc: Mc,
    },
}

fn init_threads() -> Result<(), commands::CliError> {
    if let Ok(v) = std::env::var("SSK_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| commands::CliError::Config(format!("SSK_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| commands::CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, commands::CliError> {
    init_threads()?;
    let common = &cli.common;
    match cli.command {
        Command::Theory { model, tol } => {
            let ov = Overrides::model(&model).with("tol", tol);
            commands::theory(common, ov)
        }
        Command::Oracle1d { model, mono, ns, hermite_order } => {
            let ov = Overrides::model(&model).monomial(mono).list("ns", ns).with("hermite_order", hermite_order);
            commands::oracle1d(common, ov)
        }
        Command::Simulate { model, mc, dump, dump_every, thermo_points } => {
            let ov = Overrides::model(&model)
                .mc(&mc)
                .with("seed", common.seed)
                .with("dump_every", dump_every)
                .with("thermo_points", thermo_points);
            commands::simulate(common, ov, dump.as_deref())
        }
        Command::Verify { model, mc } => {
            let ov = Overrides::model(&model).mc(&mc).with("seed", common.seed);
            commands::verify(common, ov)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            println!("{}", e.to_json());
            eprintln!("ssk: {e}");
            ExitCode::from(2)
        }
    }
}
