use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phaseret::harness::{
    cmd_report, cmd_solve, cmd_sweep_measurements, cmd_sweep_noise, cmd_train, histogram_path,
    ExperimentConfig,
};
use phaseret::Error;

#[derive(Parser)]
#[command(name = "phaseret", version, about = "Phase retrieval workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Number of test images.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path, replacing the config's.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train e2e, vae or prcgan weights.
    Train(Common),
    /// Reconstruct the test subset and write per-sample rows.
    Solve(Common),
    /// Aggregate error and SNR over the noise levels of the config.
    SweepNoise(Common),
    /// Aggregate error over the measurement counts of the config.
    SweepMeasurements(Common),
    /// Summarize report CSVs and emit gradient histograms.
    Report {
        /// Report CSVs written by solve or the sweeps.
        #[arg(required = true)]
        rows: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

fn load(c: &Common) -> phaseret::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(l) = c.limit {
        cfg.limit = Some(l);
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> phaseret::Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = load(&c)?;
            for t in cmd_train(&cfg)? {
                println!("trained {} {} -> {} sha256={}", t.record.kind, t.record.operator, t.record.archive, t.record.archive_sha256);
            }
            println!("manifest {}", cfg.output.display());
        }
        Command::Solve(c) => {
            let cfg = load(&c)?;
            let r = cmd_solve(&cfg)?;
            let a = r.aggregate();
            println!(
                "{} {} n={} mse={:.6} mae={:.6} ssim={:.4} -> {}",
                cfg.method,
                cfg.operator,
                r.outcomes.len(),
                a.mse.unwrap_or(f64::NAN),
                a.mae.unwrap_or(f64::NAN),
                a.ssim.unwrap_or(f64::NAN),
                cfg.output.display()
            );
        }
        Command::SweepNoise(c) => {
            let cfg = load(&c)?;
            for r in cmd_sweep_noise(&cfg)? {
                match &r.error {
                    Some(e) => println!("alpha={} error: {e}", r.alpha),
                    None => println!("alpha={} mse={:.6} snr={:?}", r.alpha, r.mse.unwrap_or(f64::NAN), r.snr),
                }
            }
            println!("-> {}", cfg.output.display());
        }
        Command::SweepMeasurements(c) => {
            let cfg = load(&c)?;
            for r in cmd_sweep_measurements(&cfg)? {
                match &r.error {
                    Some(e) => println!("m={} error: {e}", r.m),
                    None => println!("m={} mse={:.6}", r.m, r.mse.unwrap_or(f64::NAN)),
                }
            }
            println!("-> {}", cfg.output.display());
        }
        Command::Report { rows, out, bins } => {
            let (summary, _) = cmd_report(&rows, &out, bins)?;
            for s in &summary {
                println!(
                    "{} {} {} alpha={} m={} n={} mse={:?} mae={:?} ssim={:?}",
                    s.dataset, s.method, s.operator, s.alpha, s.m, s.samples, s.mse, s.mae, s.ssim
                );
            }
            println!("-> {} {}", out.display(), histogram_path(&out).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::DatasetMissing(_) | Error::MissingWeights(_) => 3,
        Error::Provenance(_) => 4,
        _ => 1,
    }
}
