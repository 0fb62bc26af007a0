use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tlasdi::Error;
use tlasdi_cli::commands::{cmd_ablate, cmd_diagnose, cmd_evaluate, cmd_generate, cmd_linear_check, cmd_train, CHECKPOINT_FILE};
use tlasdi_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "tlasdi", about = "Thermodynamics-informed latent space dynamics identification", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for parallel evaluation (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate full-order snapshot data
    Generate(Common),
    /// Train a model and write its checkpoint and loss history
    Train(Common),
    /// Evaluate a checkpoint: extrapolation, heatmap, entropy
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Defaults to <out>/model.ckpt
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Loss-configuration ablation over seeds
    Ablate(Common),
    /// Error-bound components along a training trajectory
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Linear-system check of the error bound
    LinearCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        systems: usize,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        latent: usize,
    },
}

fn read_config(path: &std::path::Path) -> Result<RunConfig, Error> {
    RunConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
        e => e,
    })
}

fn load(c: &Common) -> Result<(RunConfig, u64), Error> {
    let cfg = read_config(&c.config)?;
    let seed = c.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn run(cli: Cli) -> Result<(), Error> {
    let out = &cli.out;
    match &cli.command {
        Command::Generate(c) => {
            let (cfg, seed) = load(c)?;
            for p in cmd_generate(&cfg, seed, out)? {
                println!("{}", p.display());
            }
        }
        Command::Train(c) => {
            let (cfg, seed) = load(c)?;
            println!("{}", cmd_train(&cfg, seed, out)?.display());
        }
        Command::Evaluate { common, checkpoint } => {
            let (cfg, seed) = load(common)?;
            let ck = checkpoint.clone().unwrap_or_else(|| out.join(CHECKPOINT_FILE));
            println!("{:e}", cmd_evaluate(&cfg, &ck, seed, out)?);
        }
        Command::Ablate(c) => {
            let cfg = read_config(&c.config)?;
            let seeds = c.seed.map_or_else(|| cfg.ablation.seeds.clone(), |s| vec![s]);
            for (v, m, s) in cmd_ablate(&cfg, &seeds, out)? {
                println!("{v:<10} {m:.3e} ± {s:.3e}");
            }
        }
        Command::Diagnose { common, checkpoint } => {
            let (cfg, seed) = load(common)?;
            let ck = checkpoint.clone().unwrap_or_else(|| out.join(CHECKPOINT_FILE));
            let r = cmd_diagnose(&cfg, &ck, seed, out)?;
            println!("empirical constant {:.4}", r.constant());
        }
        Command::LinearCheck { seed, systems, dim, latent } => {
            let (id, c) = cmd_linear_check(*seed, *systems, *dim, *latent, out)?;
            println!("identity residual {id:.3e}, empirical constant {c:.4}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Format(_) => ExitCode::from(2),
                e if e.is_numerical() || matches!(e, Error::NonFiniteLoss { .. }) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
