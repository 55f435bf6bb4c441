use std::path::PathBuf;
use std::process::ExitCode;

use asian_hermite_cli::config::ExperimentConfig;
use asian_hermite_cli::output::write_outputs;
use asian_hermite_cli::presets::{load_preset, preset_source, PRESETS};
use asian_hermite_cli::price::{price_command, PriceArgs};
use asian_hermite_cli::run::{run_experiment, RunOptions};
use asian_hermite_cli::{init_threads, CliError};
use clap::{Parser, Subcommand};

/// Generalized-Hermite pricing of Asian and European calls.
#[derive(Debug, Parser)]
#[command(name = "asian-hermite", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price one contract.
    Price(PriceArgs),
    /// Run a preset or a TOML config and write <out>/<id>.csv plus <id>.json.
    Experiment {
        /// Preset id (see `presets`).
        #[arg(required_unless_present = "config", conflicts_with = "config")]
        id: Option<String>,
        /// Experiment config file instead of a preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the Monte Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override grid.n_max.
        #[arg(long)]
        n_max: Option<usize>,
        /// Override the number of MC batches.
        #[arg(long)]
        mc_batches: Option<usize>,
        /// Override the paths per MC batch.
        #[arg(long)]
        mc_paths: Option<usize>,
        /// Skip Monte Carlo even if the config enables it.
        #[arg(long)]
        no_mc: bool,
        /// Fill the wall_ms column (makes output run-dependent).
        #[arg(long)]
        timing: bool,
        /// Exit with code 4 if any cell's stopping rule did not fire.
        #[arg(long)]
        strict: bool,
    },
    /// List presets, or print one as TOML.
    Presets { id: Option<String> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    init_threads()?;
    match cmd {
        Command::Price(args) => {
            let outcome = price_command(&args)?;
            print!("{}", outcome.render());
            if args.strict && !outcome.converged {
                return Err(CliError::NotConverged(format!(
                    "no N <= {} with gamma_tilde > {}",
                    args.n_max, args.threshold
                )));
            }
            Ok(())
        }
        Command::Experiment {
            id,
            config,
            out,
            seed,
            n_max,
            mc_batches,
            mc_paths,
            no_mc,
            timing,
            strict,
        } => {
            let mut cfg = match (id, config) {
                (Some(id), None) => load_preset(&id)?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                    ExperimentConfig::from_toml(&text)?
                }
                _ => unreachable!("clap enforces exactly one source"),
            };
            if let Some(s) = seed {
                cfg.mc.seed = s;
            }
            if let Some(n) = n_max {
                cfg.grid.n_max = Some(n);
            }
            if let Some(b) = mc_batches {
                cfg.mc.batches = b;
            }
            if let Some(p) = mc_paths {
                cfg.mc.paths = p;
            }
            if no_mc {
                cfg.mc.enabled = false;
            }
            let table = run_experiment(&cfg, RunOptions { timing })?;
            let (csv, json) = write_outputs(&cfg, &table, &out)?;
            eprintln!(
                "wrote {} ({} rows) and {}",
                csv.display(),
                table.rows.len(),
                json.display()
            );
            let unconverged = table.cells.iter().filter(|c| !c.converged).count();
            if unconverged > 0 {
                eprintln!(
                    "{unconverged} of {} cells did not meet the stopping rule",
                    table.cells.len()
                );
                if strict {
                    return Err(CliError::NotConverged(format!("{unconverged} cells")));
                }
            }
            Ok(())
        }
        Command::Presets { id: None } => {
            for (id, _) in PRESETS {
                let cfg = load_preset(id)?;
                println!("{id:<12} {}", cfg.description);
            }
            Ok(())
        }
        Command::Presets { id: Some(id) } => {
            let src = preset_source(&id).ok_or_else(|| CliError::Config(format!("unknown preset {id:?}")))?;
            print!("{src}");
            Ok(())
        }
    }
}
