use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddlink::harness::{emit_results, run_sweep, summary_table, with_threads, CellStatus, RawConfig, SweepConfig, SweepKind};
use ddlink::Error;

#[derive(Parser)]
#[command(name = "ddlink-sim", version, about = "OTFS link-level Monte Carlo sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an MSE and/or BER sweep and write CSV plus summary files
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// configuration file; omitted keys take reference defaults
    #[arg(long)]
    config: PathBuf,
    /// mse, ber or both
    #[arg(long)]
    mode: Option<String>,
    /// frames per grid cell (both sweeps)
    #[arg(long)]
    trials: Option<usize>,
    /// master seed; falls back to DDLINK_SEED, then the config
    #[arg(long)]
    seed: Option<u64>,
    /// SNR grid in dB, `start:stop:step` or a comma list
    #[arg(long)]
    snr: Option<String>,
    /// transmit quality factors, comma separated
    #[arg(long = "xi-i")]
    xi_i: Option<String>,
    /// receive quality factors, comma separated
    #[arg(long = "xi-o")]
    xi_o: Option<String>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn load(args: &RunArgs) -> Result<SweepConfig, Failure> {
    let mut raw = RawConfig::load(&args.config)?;
    let seed = match (args.seed, std::env::var("DDLINK_SEED")) {
        (Some(s), _) => Some(s.to_string()),
        (None, Ok(env)) if !raw.contains("sim.seed") => Some(env),
        _ => None,
    };
    let overrides = [
        ("sim.mode", args.mode.clone()),
        ("sim.trials", args.trials.map(|t| t.to_string())),
        ("sim.seed", seed),
        ("sim.snr_db", args.snr.clone()),
        ("hardware.xi_i", args.xi_i.clone()),
        ("hardware.xi_o", args.xi_o.clone()),
        ("sim.out_dir", args.out.as_ref().map(|p| p.display().to_string())),
        ("sim.threads", args.threads.map(|t| t.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            raw.set(key, &v)?;
        }
    }
    // a per-sweep count in the file would otherwise shadow --trials
    if let Some(t) = args.trials {
        raw.set("sim.mse_trials", &t.to_string())?;
        raw.set("sim.ber_trials", &t.to_string())?;
    }
    Ok(SweepConfig::from_raw(&raw)?)
}

fn run(args: RunArgs) -> Result<bool, Failure> {
    let cfg = load(&args)?;
    let mut converged = true;
    let mut failed = None;
    for kind in SweepKind::for_mode(cfg.mode) {
        let rows = with_threads(cfg.threads, || run_sweep(&cfg, kind))??;
        let files = emit_results(&cfg.out_dir, kind, &rows)?;
        println!("{} sweep", kind.name());
        print!("{}", summary_table(kind, &rows));
        for f in &files {
            println!("wrote {}", f.display());
        }
        for r in &rows {
            match &r.status {
                CellStatus::Ok => {}
                CellStatus::NotConverged => converged = false,
                CellStatus::Failed(m) => failed = Some(m.clone()),
            }
        }
    }
    if let Some(m) = failed {
        return Err(Failure::Runtime(Error::Model(format!("at least one cell failed: {m}"))));
    }
    Ok(converged)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => {
                eprintln!("warning: some BER cells did not reach SE <= BER/3");
                ExitCode::from(3)
            }
            Err(Failure::Config(e)) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
            Err(Failure::Runtime(e)) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
