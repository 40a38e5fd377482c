use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fls_cli::{cmd_backtest, cmd_sim_fig2, cmd_sweep_sharpe, load_config, CliError, Fig2Mode, Overrides};

#[derive(Parser)]
#[command(name = "fls", version, about = "Time-varying regression backtests and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Backtest the trading system over a δ-grid.
    Backtest(RunArgs),
    /// Simulate a drifting coefficient and compare estimated paths to it.
    SimFig2 {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.98)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Sharpe ratio as a function of δ.
    SweepSharpe(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Replaces the configured grid; repeat for several values.
    #[arg(long = "delta")]
    deltas: Vec<f64>,
    /// `raw` or `svd:<k>`.
    #[arg(long)]
    features: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Online,
    Offline,
    Both,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            deltas: self.deltas.clone(),
            features: self.features.clone(),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Backtest(args) => {
            let cfg = load_config(args.config.as_deref(), &args.overrides())?;
            let table = cmd_backtest(&cfg)?;
            print!("{table}");
        }
        Command::SweepSharpe(args) => {
            let cfg = load_config(args.config.as_deref(), &args.overrides())?;
            for (d, s) in cmd_sweep_sharpe(&cfg)? {
                match s {
                    Some(s) => println!("{d:>8} {s:>10.4}"),
                    None => println!("{d:>8} {:>10}", "-"),
                }
            }
        }
        Command::SimFig2 {
            seed,
            delta,
            mode,
            out_dir,
        } => {
            let mode = match mode {
                ModeArg::Online => Fig2Mode::Online,
                ModeArg::Offline => Fig2Mode::Offline,
                ModeArg::Both => Fig2Mode::Both,
            };
            println!("{:>8} {:>10} {:>10} {:>10} {:>10} {:>10}", "mode", "mse_walk", "mse_still", "mse_sine", "mse_all", "roughness");
            for s in cmd_sim_fig2(seed, delta, mode, &out_dir)? {
                println!(
                    "{:>8} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                    s.mode, s.mse_walk, s.mse_still, s.mse_sine, s.mse_all, s.roughness
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
