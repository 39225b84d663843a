use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, LevelFilter};
use pacer_cli::output::{plot_data, write_table};
use pacer_cli::{config, load_config, presets, run_and_write, CliError, Overrides};

#[derive(Parser)]
#[command(name = "pacer", version, about = "Commitment planning and MPC experiments for illiquid assets")]
struct Cli {
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory, replacing `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Worker thread cap for the Monte Carlo paths. Results do not
        /// depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Merge metrics CSVs into one long-format table for plotting.
    PlotData {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, default_value = "plot_data.csv")]
        out: PathBuf,
    },
    /// Print a shipped config, or list them when no name is given.
    Preset { name: Option<String> },
    /// Print every config key with its default.
    Reference,
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config, out, seed, paths, threads } => {
            if threads == Some(0) {
                return Err(CliError::Usage("--threads must be at least 1".into()));
            }
            let cfg = Overrides { out, seed, paths }.apply(load_config(&config)?);
            let (files, failures) = run_and_write(&cfg, threads)?;
            for f in &files {
                info!("wrote {}", f.display());
            }
            for f in &failures {
                error!("{f}");
            }
            Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::PlotData { metrics, out } => {
            let mut table = plot_data(&metrics)?;
            table.name = out.file_stem().map_or_else(|| "plot_data".into(), |s| s.to_string_lossy().into_owned());
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), PathBuf::from);
            let path = write_table(&dir, "", &table)?;
            info!("wrote {} rows to {}", table.rows.len(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset { name: None } => {
            for (n, _) in presets::PRESETS {
                println!("{n}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset { name: Some(n) } => match presets::preset(&n) {
            Some(text) => {
                print!("{text}");
                Ok(ExitCode::SUCCESS)
            }
            None => Err(CliError::Usage(format!("no preset named `{n}`"))),
        },
        Command::Reference => {
            print!("{}", config::reference());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { LevelFilter::Warn } else { LevelFilter::Info };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
