use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use amphase_cli::commands::{self, FusionSearch};
use amphase_cli::config::{Overrides, RunConfig};
use amphase_cli::output::{write_rows, Format};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "amphase", version, about = "Transmission through embedded locally periodic potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML or JSON file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, env = "AMPHASE_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// T, R and T_min on an energy grid.
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// Band edges and edge types.
    Bands {
        #[command(flatten)]
        common: Common,
    },
    /// Total-transmission energies with quantum numbers.
    Peaks {
        #[command(flatten)]
        common: Common,
        /// Grid size of the general-route scan that also finds peaks
        /// outside bands; 0 searches bands only.
        #[arg(long, default_value_t = amphase::peaks::GENERAL_GRID_POINTS)]
        general_points: usize,
    },
    /// Band fusions (V_f, E_f + D) for the configured q and D.
    Fusion {
        #[command(flatten)]
        common: Common,
        /// Lower band of the fused pair; both 1 and 2 when absent.
        #[arg(long)]
        j: Option<u32>,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        v0_min: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        v0_max: f64,
        #[arg(long, default_value_t = 0.1)]
        v0_step: f64,
    },
    /// Cross-method, oracle and structural checks; exits 1 on failure.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn prepare(&self) -> Result<RunConfig> {
        if let Some(threads) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .context("configuring the thread pool")?;
        }
        RunConfig::resolve(self.config.as_deref(), self.overrides.clone())
    }

    fn emit<T: Serialize>(&self, rows: &[T]) -> Result<()> {
        match &self.output {
            Some(path) => {
                let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                write_rows(rows, self.format, BufWriter::new(file))
            }
            None => write_rows(rows, self.format, io::stdout().lock()),
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Scan { common } => {
            let config = common.prepare()?;
            common.emit(&commands::scan(&config)?)?;
        }
        Command::Bands { common } => {
            let config = common.prepare()?;
            common.emit(&commands::bands(&config)?)?;
        }
        Command::Peaks { common, general_points } => {
            let config = common.prepare()?;
            common.emit(&commands::peaks(&config, general_points)?)?;
        }
        Command::Fusion {
            common,
            j,
            v0_min,
            v0_max,
            v0_step,
        } => {
            let config = common.prepare()?;
            let search = FusionSearch {
                j,
                v0_min,
                v0_max,
                v0_step,
            };
            common.emit(&commands::fusion(&config, &search)?)?;
        }
        Command::Verify { common } => {
            let config = common.prepare()?;
            let rows = commands::verify(&config)?;
            common.emit(&rows)?;
            let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.check.as_str()).collect();
            if !failed.is_empty() {
                writeln!(io::stderr(), "verification failed: {}", failed.join(", "))?;
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        let io = cause
            .downcast_ref::<io::Error>()
            .or_else(|| cause.downcast_ref::<csv::Error>().and_then(|c| match c.kind() {
                csv::ErrorKind::Io(io) => Some(io),
                _ => None,
            }));
        io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        // A closed downstream pipe, as with `| head`, ends output normally.
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
