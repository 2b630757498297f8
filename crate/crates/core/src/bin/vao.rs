//! Command-line front end for the sweep harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vao::channel::FiberSpan;
use vao::harness::{calibrate_discards, kernel_surface_command, run_to_files, ExperimentConfig};
use vao::kernels::{FrequencyGrid, KernelMode, KernelParams};
use vao::Error;

#[derive(Parser)]
#[command(name = "vao", version, about = "Volterra-assisted OPC simulation and DSP workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Force amplifier noise on or off.
    #[arg(long, value_enum)]
    ase: Option<OnOff>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        #[arg(short, long, default_value = "results.csv")]
        output: PathBuf,
        /// Continue from the partial-results file of an interrupted run.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write a normalised kernel magnitude surface as CSV.
    Kernels {
        #[arg(long, value_enum, default_value = "vsfe-forward")]
        mode: ModeArg,
        #[arg(long, default_value_t = 10)]
        spans: usize,
        #[arg(long, default_value_t = 100.0)]
        span_km: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 128)]
        points: usize,
        /// Total grid extent, GHz.
        #[arg(long, default_value_t = 192.0)]
        bandwidth_ghz: f64,
        /// The fixed output frequency, GHz.
        #[arg(long, default_value_t = 0.0)]
        omega_ghz: f64,
        #[arg(short, long, default_value = "kernel.csv")]
        output: PathBuf,
    },
    /// Find the converged discard of each windowed scheme in a config.
    CalibrateDiscard {
        config: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        tolerance_db: f64,
        /// Search step, symbols.
        #[arg(long, default_value_t = 16)]
        step: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    VsfeForward,
    VsfeBackward,
    VaoForward,
    VaoBackward,
    PerSpan,
}

impl From<ModeArg> for KernelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::VsfeForward => KernelMode::VsfeForward,
            ModeArg::VsfeBackward => KernelMode::VsfeBackward,
            ModeArg::VaoForward => KernelMode::VaoForward,
            ModeArg::VaoBackward => KernelMode::VaoBackward,
            ModeArg::PerSpan => KernelMode::PerSpan,
        }
    }
}

fn load(path: &Path, common: &Common) -> vao::Result<ExperimentConfig> {
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(a) = common.ase {
        cfg.link.ase = matches!(a, OnOff::On);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> vao::Result<()> {
    match cli.command {
        Command::Run {
            config,
            output,
            resume,
            common,
        } => {
            let cfg = load(&config, &common)?;
            let r = run_to_files(&cfg, &output, resume)?;
            eprintln!("{} rows -> {}", r.rows.len(), output.display());
            for (point, msg) in &r.failures {
                eprintln!("failed: {point}: {msg}");
            }
        }
        Command::Kernels {
            mode,
            spans,
            span_km,
            points,
            bandwidth_ghz,
            omega_ghz,
            output,
        } => {
            let params = KernelParams::from_span(&FiberSpan::ssmf(span_km * 1e3), spans);
            let two_pi = 2.0 * std::f64::consts::PI;
            let grid = FrequencyGrid::new(points, two_pi * bandwidth_ghz * 1e9 / points as f64)?;
            let s = kernel_surface_command(&params, &grid, mode.into(), two_pi * omega_ghz * 1e9, &output)?;
            eprintln!("peak {:.4} -> {}", s.peak(), output.display());
        }
        Command::CalibrateDiscard {
            config,
            tolerance_db,
            step,
            output,
            common,
        } => {
            let cfg = load(&config, &common)?;
            let cal = calibrate_discards(&cfg, tolerance_db, step)?;
            let mut text = String::from("scheme,window_symbols,discard,snr_db\n");
            for c in &cal {
                text.push_str(&format!(
                    "{},{},{},{:.4}\n",
                    c.scheme.name(),
                    c.window_symbols,
                    c.discard,
                    c.snr_db
                ));
            }
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|source| Error::Io { path: p, source })?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
