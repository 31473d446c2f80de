use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tomo_core::pipeline::commands::BatchReport;
use tomo_core::pipeline::{self, exit, ExportMode, Method, RunConfig};
use tomo_core::{Result, TomoError};

#[derive(Parser, Debug)]
#[command(name = "tomo", version, about = "Limited-angle low-photon X-ray tomography of synthetic circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON); omitted fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Photons per ray for simulate/recon/eval/export.
    #[arg(long, global = true)]
    photons: Option<f64>,
    /// Reconstruction method: mle or fbp.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Independent measurement sets per photon condition (sweep).
    #[arg(long, global = true, default_value_t = 1)]
    repeats: u32,
    /// Repeat index of the condition to operate on.
    #[arg(long, global = true, default_value_t = 0)]
    repeat: u32,
    /// Export approximant: mle, fbp or raw (default from config).
    #[arg(long, global = true)]
    mode: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate truth volumes and a fresh manifest.
    Gen,
    /// Simulate Poisson measurements for every sample.
    Simulate,
    /// Reconstruct every measured sample.
    Recon,
    /// Score the test split and append to results.csv.
    Eval,
    /// Full photon-grid sweep over all configured methods.
    Sweep,
    /// Write (approximant, truth) training pairs.
    Export,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn photons(cli: &Cli) -> Result<f64> {
    cli.photons.ok_or_else(|| TomoError::Config("--photons is required for this command".into()))
}

fn methods(cli: &Cli, cfg: &RunConfig) -> Result<Vec<Method>> {
    match &cli.method {
        Some(m) => Ok(vec![Method::parse(m)?]),
        None => Ok(cfg.methods.clone()),
    }
}

fn report_batch(label: &str, b: &BatchReport) -> i32 {
    println!("{label}: {} ok, {} not converged, {} failed", b.succeeded, b.not_converged, b.failures.len());
    for f in &b.failures {
        eprintln!("  sample {}: {}", f.id, f.message);
    }
    if b.is_complete() {
        exit::OK
    } else {
        exit::PARTIAL
    }
}

fn run(cli: &Cli) -> Result<i32> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Gen => {
            let m = pipeline::cmd_generate(&cfg, cli.workers)?;
            println!("generated {} samples in {}", m.samples.len(), cfg.out_dir.display());
            Ok(exit::OK)
        }
        Command::Simulate => {
            let n = photons(cli)?;
            let m = pipeline::cmd_simulate(&cfg, n, cli.repeat, cli.workers)?;
            println!("simulated {} samples at {n} photons/ray", m.samples.len());
            Ok(exit::OK)
        }
        Command::Recon => {
            let n = photons(cli)?;
            let mut code = exit::OK;
            for method in methods(cli, &cfg)? {
                let b = pipeline::cmd_reconstruct(&cfg, n, cli.repeat, method, None, cli.workers)?;
                code = code.max(report_batch(method.as_str(), &b));
            }
            Ok(code)
        }
        Command::Eval => {
            let n = photons(cli)?;
            for method in methods(cli, &cfg)? {
                let (row, r) = pipeline::cmd_evaluate(&cfg, n, cli.repeat, method)?;
                println!(
                    "{} at {} photons: ber {:.6e} over {} samples (threshold {:?})",
                    method.as_str(),
                    row.photons,
                    row.ber,
                    row.n_samples,
                    r.threshold
                );
            }
            Ok(exit::OK)
        }
        Command::Sweep => {
            let mut cfg = cfg;
            if cli.method.is_some() {
                cfg.methods = methods(cli, &cfg)?;
            }
            let r = pipeline::cmd_sweep(&cfg, cli.repeats, cli.workers)?;
            for row in &r.rows {
                println!("{:>4} {:>8} ber {:.6e}", row.method.as_str(), row.photons, row.ber);
            }
            Ok(report_batch("sweep", &r.batch))
        }
        Command::Export => {
            let mode = match &cli.mode {
                Some(m) => ExportMode::parse(m)?,
                None => cfg.export.mode,
            };
            let n = cli.photons.unwrap_or(cfg.export.photons);
            let (dir, m) = pipeline::cmd_export(&cfg, mode, n, cli.repeat)?;
            println!("exported {} pairs to {}", m.pairs.len(), dir.display());
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tomo: {e}");
            if e.is_config() {
                exit::CONFIG
            } else {
                exit::FAILURE
            }
        }
    };
    ExitCode::from(code as u8)
}
