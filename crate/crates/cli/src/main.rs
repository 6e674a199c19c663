use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bootstrap_bench::datagen::Method;
use bootstrap_bench::envs::EnvName;
use bootstrap_bench::harness::evaluate::evaluate_model;
use bootstrap_bench::harness::io::{self, DatasetFile, ModelArtifact, FORMAT_VERSION};
use bootstrap_bench::harness::run::{self, RunOptions, ERRORS_FILE, SUITE_FILE};
use bootstrap_bench::harness::{CellKey, ExperimentConfig};
use bootstrap_bench::metrics::{self, grid_of, records_from_errors, ErrorKind, ErrorRow};
use bootstrap_bench::Error;
use clap::{Args, Parser, Subcommand};

/// Compare random policies, random actions and their hybrid as bootstrap
/// data for learned dynamics models.
#[derive(Parser)]
#[command(name = "bootstrap-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML, see docs/config.md).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Override the environment.
    #[arg(long, value_name = "NAME")]
    env: Option<EnvName>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full grid: suite, datasets, models, errors, tables, histograms.
    Run {
        #[command(flatten)]
        common: Common,
        /// Maximum number of grid cells processed concurrently.
        #[arg(long, value_name = "N", default_value_t = 1)]
        jobs: usize,
    },
    /// Write the bootstrap datasets of the grid.
    Gather {
        #[command(flatten)]
        common: Common,
        /// Only this method.
        #[arg(long)]
        method: Option<Method>,
        /// Only this budget.
        #[arg(long)]
        budget: Option<usize>,
        /// Only this repetition.
        #[arg(long)]
        repetition: Option<usize>,
    },
    /// Fit an ensemble to a dataset file.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        dataset: PathBuf,
    },
    /// Score a model file against an evaluation suite file.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        suite: PathBuf,
    },
    /// Build the Novelty Search evaluation suite.
    Ns {
        #[command(flatten)]
        common: Common,
    },
    /// Tables (and, with a config, histograms) from an errors file.
    Report {
        #[command(flatten)]
        common: Common,
        /// Defaults to errors.csv in the output directory.
        #[arg(long, value_name = "PATH")]
        errors: Option<PathBuf>,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FAILURES: u8 = 3;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) => EXIT_USAGE,
        Error::Config(_) | Error::Io { .. } | Error::Format { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURES,
    }
}

fn load_config(common: &Common, env_hint: Option<EnvName>) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::for_env(common.env.or(env_hint).unwrap_or(EnvName::BallInCup)),
    };
    if let Some(env) = common.env {
        config.env = env;
    }
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run { common, jobs } => {
            let config = load_config(&common, None)?;
            let out_dir = config.resolve_out_dir(common.out.as_deref());
            let manifest = run::run_experiment(&config, &RunOptions { out_dir: out_dir.clone(), jobs })?;
            if let Ok(text) = std::fs::read_to_string(out_dir.join(run::TABLE_TEXT_FILE)) {
                print!("{text}");
            }
            println!("wrote {}", out_dir.join(run::MANIFEST_FILE).display());
            if manifest.has_failures() {
                for f in &manifest.failures {
                    eprintln!("failure: {f}");
                }
                return Ok(EXIT_FAILURES);
            }
            Ok(0)
        }
        Command::Gather {
            common,
            method,
            budget,
            repetition,
        } => {
            let config = load_config(&common, None)?;
            let out_dir = config.resolve_out_dir(common.out.as_deref());
            let cells: Vec<CellKey> = config
                .cells()
                .into_iter()
                .filter(|c| method.is_none_or(|m| m == c.method))
                .filter(|c| budget.is_none_or(|b| b == c.budget))
                .filter(|c| repetition.is_none_or(|r| r == c.repetition))
                .collect();
            if cells.is_empty() {
                return Err(Error::Usage("no grid cell matches the filters".into()));
            }
            for cell in cells {
                let dataset = run::gather_cell(&config, &cell)?;
                let path = out_dir.join("datasets").join(format!("{}.csv", cell.stem()));
                io::write_dataset(&path, &DatasetFile { cell, dataset })?;
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Train { common, dataset } => {
            let file = io::read_dataset(&dataset)?;
            let config = load_config(&common, Some(file.dataset.env))?;
            if config.env != file.dataset.env {
                return Err(Error::Config(format!(
                    "dataset is for {} but the config is for {}",
                    file.dataset.env, config.env
                )));
            }
            let out_dir = config.resolve_out_dir(common.out.as_deref());
            let model = run::train_cell(&config, &file.cell, &file.dataset)?;
            let path = out_dir.join("models").join(format!("{}.json", file.cell.stem()));
            io::write_json(
                &path,
                &ModelArtifact {
                    format_version: FORMAT_VERSION,
                    env: config.env,
                    cell: file.cell,
                    model,
                },
            )?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Evaluate { common, model, suite } => {
            let artifact = io::read_model(&model)?;
            let suite_file = io::read_suite(&suite)?;
            if suite_file.env != artifact.env {
                return Err(Error::Config(format!(
                    "suite is for {} but the model is for {}",
                    suite_file.env, artifact.env
                )));
            }
            let config = load_config(&common, Some(artifact.env))?;
            let out_dir = config.resolve_out_dir(common.out.as_deref());
            let spec = config.spec();
            let rows = evaluate_model(&artifact.model, &spec, &suite_file.suite(), &config.horizons())?;
            let rows = run::error_rows(artifact.env, &artifact.cell, &rows);
            let path = out_dir
                .join("errors")
                .join(format!("{}.csv", artifact.cell.stem()));
            io::write_atomic(&path, metrics::write_csv(&rows)?.as_bytes())?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Ns { common } => {
            let config = load_config(&common, None)?;
            let out_dir = config.resolve_out_dir(common.out.as_deref());
            let suite = run::build_suite(&config)?;
            let path = out_dir.join(SUITE_FILE);
            io::write_json(&path, &suite)?;
            println!(
                "{} ({} archive entries, {} in the suite)",
                path.display(),
                suite.archive.len(),
                suite.suite_indices.len()
            );
            Ok(0)
        }
        Command::Report { common, errors } => report(&common, errors.as_deref()),
    }
}

fn report(common: &Common, errors: Option<&Path>) -> Result<u8, Error> {
    let config = match &common.config {
        Some(_) => Some(load_config(common, None)?),
        None => None,
    };
    let out_dir = match &config {
        Some(c) => c.resolve_out_dir(common.out.as_deref()),
        None => common
            .out
            .clone()
            .ok_or_else(|| Error::Usage("report needs --out or --config".into()))?,
    };
    let errors_path = errors.map(Path::to_path_buf).unwrap_or_else(|| out_dir.join(ERRORS_FILE));
    let rows: Vec<ErrorRow> = metrics::parse_csv(&io::read_text(&errors_path)?, &errors_path.to_string_lossy())?;
    if rows.is_empty() {
        return Err(Error::Reporting(format!("{} has no rows", errors_path.display())));
    }
    let mut envs: Vec<EnvName> = rows.iter().map(|r| r.env).collect();
    envs.sort();
    envs.dedup();
    for env in envs {
        let env_rows: Vec<ErrorRow> = rows.iter().filter(|r| r.env == env).cloned().collect();
        let env_out = if rows.iter().all(|r| r.env == env) {
            out_dir.clone()
        } else {
            out_dir.join(env.as_str())
        };
        match &config {
            Some(c) if c.env == env => {
                run::write_tables(c, &env_rows, &env_out)?;
                run::write_histograms(c, &env_out)?;
            }
            _ => {
                let records = records_from_errors(&env_rows, ErrorKind::FullState)?;
                let (budgets, horizons, _) = grid_of(&records);
                run::write_tables_for_grid(&env_rows, &budgets, &horizons, &Method::ALL, &env_out)?;
            }
        }
        print!("{}", io::read_text(&env_out.join(run::TABLE_TEXT_FILE))?);
    }
    Ok(0)
}
