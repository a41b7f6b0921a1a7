use clap::{Parser, Subcommand};
use geodlab::config::RunConfig;
use geodlab::pipeline::{self, AnalyzeTask};
use std::path::PathBuf;
use std::process::ExitCode;

/// Length spectra, Poincare maps, and dynamical zeta functions on negatively
/// curved surfaces.
#[derive(Parser)]
#[command(name = "geodlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate free-homotopy classes, find their closed geodesics, and
    /// write the spectrum CSV plus the orbit sidecar.
    Enumerate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the orbit searches (default: machine parallelism).
        #[arg(long)]
        workers: Option<usize>,
        /// Dotted-path config overrides, e.g. --set analysis.k_max=400.
        #[arg(long = "set", value_parser = parse_kv)]
        set: Vec<(String, String)>,
    },
    /// Run one analysis task against a saved spectrum.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Spectrum CSV (defaults to <out>/spectrum.csv).
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// zeta | entropy | pressure | trace | pot | separation | corollary
        #[arg(long)]
        task: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_parser = parse_kv)]
        set: Vec<(String, String)>,
    },
    /// Construct and validate the configured model.
    ValidateModel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_parser = parse_kv)]
        set: Vec<(String, String)>,
    },
}

fn parse_kv(raw: &str) -> Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got '{raw}'"))
}

fn run() -> Result<(), geodlab::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Enumerate {
            config,
            out,
            workers,
            set,
        } => {
            let cfg = RunConfig::load(&config, &set)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            let summary = pipeline::cmd_enumerate(&cfg, &out_dir, workers)?;
            println!("orbits={} horizon={}", summary.orbits, summary.horizon);
            Ok(())
        }
        Command::Analyze {
            config,
            spectrum,
            task,
            out,
            set,
        } => {
            let cfg = RunConfig::load(&config, &set)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            let spectrum_path = spectrum.unwrap_or_else(|| out_dir.join("spectrum.csv"));
            let task = AnalyzeTask::parse(&task)?;
            let summary = pipeline::cmd_analyze(&cfg, &spectrum_path, task, &out_dir)?;
            println!("task={} records={}", summary.task, summary.records);
            Ok(())
        }
        Command::ValidateModel { config, set } => {
            let cfg = RunConfig::load(&config, &set)?;
            let summary = pipeline::cmd_validate_model(&cfg)?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
