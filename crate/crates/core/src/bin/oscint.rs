use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oscint::experiments::{run_command, ExperimentSpec, IntegratorKind, ScanAxis, SystemKind};

#[derive(Parser)]
#[command(name = "oscint", version, about = "Run oscillatory-system integration experiments and write CSV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time series of energy and invariants for one run.
    Drift(Common),
    /// Extremal invariant variations over a parameter scan.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Scan axis as param:min:max:points (param: h, eps, h_over_eps, h_over_pi_eps).
        #[arg(long)]
        scan: ScanAxis,
        /// Also run a fine Verlet reference at every point.
        #[arg(long)]
        reference: bool,
    },
    /// Fast actions of the chosen integrator against a fine Verlet reference.
    Exchange(Common),
    /// Slow-force evaluations against maximal energy error.
    Efficiency {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scan: ScanAxis,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum)]
    system: SystemKind,
    #[arg(long, value_enum)]
    integrator: IntegratorKind,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 1e4)]
    t_max: f64,
    /// Record every k-th step (default: about 2000 samples).
    #[arg(long)]
    sample_every: Option<u64>,
    /// Inner step of the baselines and of the exchange reference (default eps/100).
    #[arg(long)]
    inner_dt: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn spec(&self, command: &str, scan: Option<ScanAxis>, reference: bool) -> ExperimentSpec {
        ExperimentSpec {
            command: command.into(),
            system: self.system,
            integrator: self.integrator,
            eps: self.eps,
            h: self.h,
            t_max: self.t_max,
            sample_every: self.sample_every,
            inner_dt: self.inner_dt,
            scan,
            reference,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, spec) = match &cli.command {
        Command::Drift(c) => (c, c.spec("drift", None, false)),
        Command::Scan { common, scan, reference } => (common, common.spec("scan", Some(*scan), *reference)),
        Command::Exchange(c) => (c, c.spec("exchange", None, false)),
        Command::Efficiency { common, scan } => (common, common.spec("efficiency", Some(*scan), false)),
    };
    let output = match run_command(&spec) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("oscint: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = output.table.write(&common.out) {
        eprintln!("oscint: cannot write {}: {e}", common.out.display());
        return ExitCode::FAILURE;
    }
    if output.complete {
        ExitCode::SUCCESS
    } else {
        eprintln!("oscint: some points diverged; see the diverged column");
        ExitCode::from(2)
    }
}
