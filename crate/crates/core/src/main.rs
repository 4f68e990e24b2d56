use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use critheat::commands::{
    cmd_constants, cmd_green, cmd_ode, cmd_phi0, cmd_simulate, cmd_verify, CommandOutput, Context, GreenRunConfig,
    OdeConfig, Phi0Config, RunConfig, SimulateConfig,
};
use critheat::pipeline::ConstantsConfig;
use critheat::{Error, Result};

#[derive(Parser)]
#[command(name = "critheat", version, about = "Blow-up constants, heat potentials and parameter dynamics")]
struct Cli {
    /// JSON run config with one optional block per command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "CRITHEAT_OUT", default_value = "out")]
    out: PathBuf,
    /// Cache for collocation solves, keyed by a hash of domain and settings.
    #[arg(long, global = true, env = "CRITHEAT_CACHE")]
    cache: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for sampled points and collocation nodes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dimension used when the config has no block for the command.
    #[arg(long, global = true, default_value_t = 5)]
    n: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile, quadrature and b, c_n for a domain and concentration point.
    Constants {
        /// Satellites of a tower profile; also writes its Gram matrix.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Dilation potential at the concentration point against its limit.
    Phi0,
    /// Reduced parameter system.
    Ode,
    /// Regular part of the Dirichlet Green function.
    Green,
    /// Radial blow-up run.
    Simulate,
    /// Acceptance suite; exits with 3 when a criterion fails.
    Verify,
}

fn run(cli: Cli) -> Result<CommandOutput> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    let cfg = cli.config.as_deref().map(RunConfig::load).transpose()?.unwrap_or_default();
    let ctx = Context { out: cli.out, cache: cli.cache, seed: cli.seed };
    let n = cli.n;
    match cli.command {
        Command::Constants { k } => {
            let mut c = cfg.constants.map_or_else(|| ConstantsConfig::unit_ball(n), Ok)?;
            if k.is_some() {
                c.k = k;
            }
            cmd_constants(&c, &ctx)
        }
        Command::Phi0 => cmd_phi0(&cfg.phi0.unwrap_or_else(|| Phi0Config::for_dimension(n)), &ctx),
        Command::Ode => cmd_ode(&cfg.ode.unwrap_or_else(|| OdeConfig::for_dimension(n)), &ctx),
        Command::Green => cmd_green(&cfg.green.map_or_else(|| GreenRunConfig::for_dimension(n), Ok)?, &ctx),
        Command::Simulate => cmd_simulate(&cfg.simulate.unwrap_or_else(|| SimulateConfig::for_dimension(n)), &ctx),
        Command::Verify => {
            let (out, outcomes) = cmd_verify(&cfg.verify.unwrap_or_default(), &ctx)?;
            for o in &outcomes {
                println!("{}", o.line());
            }
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            println!("{}", out.headline);
            for p in &out.artifacts {
                println!("wrote {}", p.display());
            }
            ExitCode::from(if out.failed { 3 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
