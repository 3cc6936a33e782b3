//! Command line front end: screening, sweeps, power optimization and self-checks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqsel::experiments::{validate, write_csv, Experiment, ExperimentConfig, SelectionArchive};
use seqsel::Result;

#[derive(Parser)]
#[command(name = "seqsel", version, about = "Sequence-selection rate bounds for the nonlinear fiber channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screen the N_t test sequences and store metrics and accepted set.
    Screen {
        #[arg(short, long)]
        config: PathBuf,
        /// Output archive; defaults to `run.selection_path`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every (power, equalization, eta) point and write the CSV table.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Screening archive to reuse; defaults to `run.selection_path` if it exists.
        #[arg(short, long)]
        selection: Option<PathBuf>,
        /// Output CSV; defaults to `run.csv_path`, else standard output.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print the launch power maximizing the unselected AIR over the power sweep.
    OptimalPower {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run the built-in invariant checks.
    Validate,
}

fn load(path: &Path) -> Result<Experiment> {
    Experiment::new(ExperimentConfig::load(path)?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Screen { config, out } => {
            let exp = load(&config)?;
            let power = exp.screening_power()?;
            let sel = exp.screen(power)?;
            let path = out
                .or_else(|| exp.config().run.selection_path.clone())
                .unwrap_or_else(|| PathBuf::from("selection.sqsl"));
            let mut w = BufWriter::new(File::create(&path)?);
            exp.archive(&sel, power).write(&mut w)?;
            w.flush()?;
            eprintln!(
                "screened {} sequences at {power} dBm -> {}",
                sel.num_tested(),
                path.display()
            );
            Ok(true)
        }
        Command::Sweep {
            config,
            selection,
            out,
        } => {
            let exp = load(&config)?;
            let archive_path = selection.or_else(|| {
                exp.config()
                    .run
                    .selection_path
                    .clone()
                    .filter(|p| p.exists())
            });
            let stored = match archive_path {
                Some(p) => {
                    let archive = SelectionArchive::read(&mut BufReader::new(File::open(p)?))?;
                    Some(exp.load_selection(&archive)?)
                }
                None => None,
            };
            let rows = exp.run_sweep(stored.as_ref())?;
            match out.or_else(|| exp.config().run.csv_path.clone()) {
                Some(p) => {
                    let mut w = BufWriter::new(File::create(p)?);
                    write_csv(&mut w, exp.config(), &rows)?;
                    w.flush()?;
                }
                None => write_csv(&mut std::io::stdout().lock(), exp.config(), &rows)?,
            }
            Ok(true)
        }
        Command::OptimalPower { config } => {
            let exp = load(&config)?;
            println!("{}", exp.find_optimal_power()?);
            Ok(true)
        }
        Command::Validate => {
            let checks = validate::run_checks()?;
            for c in &checks {
                println!(
                    "{} {}{}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    if c.detail.is_empty() {
                        String::new()
                    } else {
                        format!(" ({})", c.detail)
                    }
                );
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
