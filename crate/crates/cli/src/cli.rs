//! Argument surface of the `subrad` binary and the subcommand dispatcher.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

use subrad_core::io as core_io;
use subrad_core::synth::add_noise;
use subrad_core::Result;

use crate::config::ExperimentConfig;
use crate::experiment::{
    classic_map, derive_seed, detections_csv, recover_set, run_experiment, synthesize_mimo,
    synthesize_single, LABEL_NOISE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "subrad",
    version,
    about = "Sub-Nyquist pulse-Doppler radar: simulation, recovery, and hit-rate sweeps"
)]
pub struct Cli {
    /// Overrides the seed in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps; 0 picks the machine default.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output format for recovery results and reports.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Writes one synthesized coefficient set as a portable text file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Adds coefficient noise at this SNR before writing.
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Runs sparse recovery on a stored coefficient set.
    Recover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the Monte-Carlo sweep and writes report and detection tables.
    Mc {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's output_dir, then to "out".
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Writes the classic delay-Doppler map of the configured scene.
    Map {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesizes and recovers an array scene in one shot.
    Mimo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        snr_db: Option<f64>,
    },
}

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = core_io::read_json_file(path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Executes a parsed command line; every error here is a runtime error.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, snr_db } => {
            let cfg = load_config(&config, cli.seed)?;
            let mut x = synthesize_single(&cfg)?;
            if let Some(snr) = snr_db {
                x = add_noise(&x, snr, derive_seed(cfg.seed, LABEL_NOISE, 0))?;
            }
            core_io::write_xample_file(&out, &x)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Recover { config, input, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let x = core_io::read_xample_file(&input)?;
            let (result, azimuth_bins) = recover_set(&cfg, &x)?;
            match cli.format {
                OutputFormat::Csv => {
                    std::fs::write(&out, core_io::detections_to_csv(&result, azimuth_bins))?
                }
                OutputFormat::Json => core_io::write_json_file(&out, &result)?,
            }
            println!("wrote {} ({} detections)", out.display(), result.detections.len());
            Ok(())
        }
        Command::Mc { config, out_dir } => {
            let cfg = load_config(&config, cli.seed)?;
            let dir = out_dir
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&dir)?;
            let (report, records) = run_experiment(&cfg, cli.threads)?;
            match cli.format {
                OutputFormat::Csv => {
                    std::fs::write(dir.join("report.csv"), report.to_csv())?;
                    std::fs::write(
                        dir.join("detections.csv"),
                        detections_csv(&records, cfg.trials),
                    )?;
                }
                OutputFormat::Json => {
                    core_io::write_json_file(dir.join("report.json"), &report)?;
                    core_io::write_json_file(dir.join("detections.json"), &records)?;
                }
            }
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Map { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let map = classic_map(&cfg)?;
            std::fs::write(&out, core_io::map_to_csv(&map))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Mimo { config, out, snr_db } => {
            let cfg = load_config(&config, cli.seed)?;
            let (mut x, array, spectra) = synthesize_mimo(&cfg)?;
            if let Some(snr) = snr_db {
                x = add_noise(&x, snr, derive_seed(cfg.seed, LABEL_NOISE, 0))?;
            }
            let result = subrad_core::mimo::recover_mimo(
                &x,
                &array,
                &spectra,
                cfg.num_recover()?,
                &cfg.recover.options(),
            )?;
            match cli.format {
                OutputFormat::Csv => std::fs::write(
                    &out,
                    core_io::detections_to_csv(&result, Some(array.azimuth_bins())),
                )?,
                OutputFormat::Json => core_io::write_json_file(&out, &result)?,
            }
            println!("wrote {} ({} detections)", out.display(), result.detections.len());
            Ok(())
        }
    }
}

/// Maps a parse failure to the documented exit codes: help and version
/// requests succeed, bad usage exits 1.
pub fn parse_exit_code(err: &clap::Error) -> i32 {
    use clap::error::ErrorKind;
    match err.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
        _ => 1,
    }
}
