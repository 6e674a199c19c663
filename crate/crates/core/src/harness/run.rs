//! Grid orchestration: suite, per-cell gather/fit/evaluate, reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{gather, Dataset, Method};
use crate::envs::geometry::Segment;
use crate::envs::{EnvName, EnvSpec};
use crate::error::{Error, Result};
use crate::harness::config::{sha256_hex, CellKey, CellSeeds, ExperimentConfig};
use crate::harness::evaluate::{evaluate_model, TrajectoryError};
use crate::harness::io::{self, SuiteArtifact, FORMAT_VERSION};
use crate::metrics::{
    self, histogram, histogram_csv, histogram_svg, records_from_errors, render_table_for_grid, ErrorKind,
    ErrorRow, DEFAULT_BINS,
};
use crate::model::{fit, EnsembleModel};
use crate::ns::{evaluation_suite_indices, evolve, ArchiveEntry};

pub const VERSION_TAG: &str = concat!("bootstrap-bench ", env!("CARGO_PKG_VERSION"));

pub const SUITE_FILE: &str = "suite.json";
pub const ERRORS_FILE: &str = "errors.csv";
pub const TABLE_FILE: &str = "table.csv";
pub const TABLE_TEXT_FILE: &str = "table.txt";
pub const OUTCOME_TABLE_FILE: &str = "table_outcome.csv";
pub const OUTCOME_TABLE_TEXT_FILE: &str = "table_outcome.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CELLS_DIR: &str = "cells";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Computed,
    Resumed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: CellKey,
    pub seeds: CellSeeds,
    pub status: CellStatus,
    pub artifact: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub n_samples: usize,
    pub mean_episode_length: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub suite_seconds: f64,
    pub cells_seconds: f64,
    pub report_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    /// Digest of the config and the evaluation suite; cell artifacts are
    /// only reused when they carry the same value.
    pub run_hash: String,
    pub suite_file: PathBuf,
    pub suite_sha256: String,
    pub walls: Vec<Segment>,
    pub cells: Vec<CellRecord>,
    /// Report name → path relative to the output directory.
    pub artifacts: BTreeMap<String, PathBuf>,
    pub failures: Vec<String>,
    pub timings: Timings,
}

impl RunManifest {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Stored result of one grid cell, used for crash-resume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellArtifact {
    pub run_hash: String,
    pub cell: CellKey,
    pub seeds: CellSeeds,
    pub n_samples: usize,
    pub mean_episode_length: f64,
    pub rows: Vec<TrajectoryError>,
    /// SHA-256 of the JSON encoding of `rows`.
    pub rows_sha256: String,
}

impl CellArtifact {
    fn rows_digest(rows: &[TrajectoryError]) -> String {
        sha256_hex(serde_json::to_string(rows).expect("rows serialize").as_bytes())
    }

    fn is_valid_for(&self, run_hash: &str, cell: &CellKey, seeds: &CellSeeds) -> bool {
        self.run_hash == run_hash
            && self.cell == *cell
            && self.seeds == *seeds
            && self.rows_sha256 == Self::rows_digest(&self.rows)
    }
}

pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Maximum number of cells processed concurrently.
    pub jobs: usize,
}

/// Runs Novelty Search and draws the evaluation subset.
pub fn build_suite(config: &ExperimentConfig) -> Result<SuiteArtifact> {
    config.ns.validate()?;
    let spec = config.spec();
    let seeds = config.suite_seeds();
    let archive = evolve(&spec, &config.ns, seeds.evolve)?;
    let suite_indices = evaluation_suite_indices(archive.len(), config.ns.suite_size, seeds.sample)?;
    Ok(SuiteArtifact {
        format_version: FORMAT_VERSION,
        env: config.env,
        ns: config.ns.clone(),
        seeds,
        suite_indices,
        archive,
    })
}

/// Loads the configured frozen suite, reuses a matching one in `out_dir`,
/// or builds and stores a new one. Returns the suite and its file.
pub fn build_or_load_suite(config: &ExperimentConfig, out_dir: &Path) -> Result<(SuiteArtifact, PathBuf)> {
    if let Some(path) = &config.suite_file {
        let suite = io::read_suite(path)?;
        if suite.env != config.env {
            return Err(Error::Config(format!(
                "suite file {} is for {}, not {}",
                path.display(),
                suite.env,
                config.env
            )));
        }
        return Ok((suite, path.clone()));
    }
    let path = out_dir.join(SUITE_FILE);
    if path.exists() {
        if let Ok(existing) = io::read_suite(&path) {
            if existing.env == config.env && existing.ns == config.ns && existing.seeds == config.suite_seeds() {
                return Ok((existing, path));
            }
        }
    }
    let suite = build_suite(config)?;
    io::write_json(&path, &suite)?;
    Ok((suite, path))
}

pub fn gather_cell(config: &ExperimentConfig, cell: &CellKey) -> Result<Dataset> {
    let seeds = config.cell_seeds(cell);
    gather(&config.spec(), cell.method, cell.budget, config.action_repeat, seeds.gather)
}

pub fn train_cell(config: &ExperimentConfig, cell: &CellKey, dataset: &Dataset) -> Result<EnsembleModel> {
    fit(dataset, &config.train, config.cell_seeds(cell).fit)
}

pub fn error_rows(env: EnvName, cell: &CellKey, rows: &[TrajectoryError]) -> Vec<ErrorRow> {
    rows.iter()
        .map(|r| ErrorRow {
            env,
            method: cell.method,
            budget: cell.budget,
            horizon: r.horizon,
            repetition: cell.repetition,
            trajectory_id: r.trajectory_id,
            error: r.error,
            diverged: r.diverged,
            outcome_error: r.outcome_error,
        })
        .collect()
}

fn compute_cell(
    config: &ExperimentConfig,
    spec: &EnvSpec,
    suite: &[ArchiveEntry],
    cell: &CellKey,
    run_hash: &str,
) -> Result<CellArtifact> {
    let dataset = gather_cell(config, cell)?;
    let model = train_cell(config, cell, &dataset)?;
    let rows = evaluate_model(&model, spec, suite, &config.horizons())?;
    Ok(CellArtifact {
        run_hash: run_hash.to_string(),
        cell: *cell,
        seeds: config.cell_seeds(cell),
        n_samples: dataset.len(),
        mean_episode_length: dataset.mean_episode_length(),
        rows_sha256: CellArtifact::rows_digest(&rows),
        rows,
    })
}

fn cell_path(cell: &CellKey) -> PathBuf {
    Path::new(CELLS_DIR).join(format!("{}.json", cell.stem()))
}

/// Runs the full grid for one environment and writes every artifact
/// under `options.out_dir`. Cell failures are recorded in the manifest;
/// only startup problems are returned as errors.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunManifest> {
    let started = Instant::now();
    config.validate()?;
    if options.jobs == 0 {
        return Err(Error::Config("jobs must be at least 1".into()));
    }
    let out = &options.out_dir;
    std::fs::create_dir_all(out.join(CELLS_DIR)).map_err(|e| Error::io(out, e))?;

    let (suite_artifact, suite_file) = build_or_load_suite(config, out)?;
    let suite_sha256 = sha256_hex(io::to_json(&suite_artifact).as_bytes());
    let suite = suite_artifact.suite();
    let suite_seconds = started.elapsed().as_secs_f64();
    let run_hash = sha256_hex(format!("{}\n{}\n{}", VERSION_TAG, config.digest(), suite_sha256).as_bytes());
    let spec = config.spec();

    let cells_started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<(CellRecord, Option<CellArtifact>)> = pool.install(|| {
        config
            .cells()
            .par_iter()
            .map(|cell| {
                let t = Instant::now();
                let seeds = config.cell_seeds(cell);
                let rel = cell_path(cell);
                let path = out.join(&rel);
                let record = |status, error, artifact: Option<&CellArtifact>| CellRecord {
                    cell: *cell,
                    seeds,
                    status,
                    artifact: rel.clone(),
                    error,
                    n_samples: artifact.map_or(0, |a| a.n_samples),
                    mean_episode_length: artifact.map_or(0.0, |a| a.mean_episode_length),
                    seconds: t.elapsed().as_secs_f64(),
                };
                if let Ok(existing) = io::read_json::<CellArtifact>(&path) {
                    if existing.is_valid_for(&run_hash, cell, &seeds) {
                        return (record(CellStatus::Resumed, None, Some(&existing)), Some(existing));
                    }
                }
                match compute_cell(config, &spec, &suite, cell, &run_hash)
                    .and_then(|a| io::write_json(&path, &a).map(|_| a))
                {
                    Ok(a) => (record(CellStatus::Computed, None, Some(&a)), Some(a)),
                    Err(e) => (record(CellStatus::Failed, Some(e.to_string()), None), None),
                }
            })
            .collect()
    });
    let cells_seconds = cells_started.elapsed().as_secs_f64();

    let report_started = Instant::now();
    let mut failures: Vec<String> = outcomes
        .iter()
        .filter_map(|(r, _)| r.error.as_ref().map(|e| format!("cell {}: {e}", r.cell.stem())))
        .collect();
    let mut rows: Vec<ErrorRow> = Vec::new();
    let mut ordered: Vec<&CellArtifact> = outcomes.iter().filter_map(|(_, a)| a.as_ref()).collect();
    ordered.sort_by_key(|a| {
        let method_rank = config.methods.iter().position(|m| *m == a.cell.method);
        (a.cell.budget, method_rank, a.cell.repetition)
    });
    for a in ordered {
        let mut cell_rows = error_rows(config.env, &a.cell, &a.rows);
        cell_rows.sort_by_key(|r| (r.horizon, r.trajectory_id));
        rows.extend(cell_rows);
    }

    let mut artifacts = BTreeMap::new();
    io::write_atomic(&out.join(ERRORS_FILE), metrics::write_csv(&rows)?.as_bytes())?;
    artifacts.insert("errors".to_string(), PathBuf::from(ERRORS_FILE));
    match write_tables(config, &rows, out) {
        Ok(written) => artifacts.extend(written),
        Err(e) => failures.push(e.to_string()),
    }
    match write_histograms(config, out) {
        Ok(written) => artifacts.extend(written),
        Err(e) => failures.push(format!("histograms: {e}")),
    }
    let report_seconds = report_started.elapsed().as_secs_f64();

    let manifest = RunManifest {
        version: VERSION_TAG.to_string(),
        config: config.clone(),
        run_hash,
        suite_file,
        suite_sha256,
        walls: spec.walls.clone(),
        cells: outcomes.into_iter().map(|(r, _)| r).collect(),
        artifacts,
        failures,
        timings: Timings {
            suite_seconds,
            cells_seconds,
            report_seconds,
            total_seconds: started.elapsed().as_secs_f64(),
        },
    };
    io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Writes the full-state and outcome tables for the configured grid.
pub fn write_tables(
    config: &ExperimentConfig,
    rows: &[ErrorRow],
    out: &Path,
) -> Result<BTreeMap<String, PathBuf>> {
    write_tables_for_grid(rows, &config.budgets, &config.horizons(), &config.methods, out)
}

pub fn write_tables_for_grid(
    rows: &[ErrorRow],
    budgets: &[usize],
    horizons: &[usize],
    methods: &[Method],
    out: &Path,
) -> Result<BTreeMap<String, PathBuf>> {
    let mut written = BTreeMap::new();
    for (kind, csv_name, text_name, key) in [
        (ErrorKind::FullState, TABLE_FILE, TABLE_TEXT_FILE, "table"),
        (ErrorKind::Outcome, OUTCOME_TABLE_FILE, OUTCOME_TABLE_TEXT_FILE, "table_outcome"),
    ] {
        let records = records_from_errors(rows, kind)?;
        let table = render_table_for_grid(&records, budgets, horizons, methods)?;
        io::write_atomic(&out.join(csv_name), table.csv.as_bytes())?;
        io::write_atomic(&out.join(text_name), table.text.as_bytes())?;
        written.insert(key.to_string(), PathBuf::from(csv_name));
        written.insert(format!("{key}_text"), PathBuf::from(text_name));
    }
    Ok(written)
}

/// Histograms of the largest-budget datasets pooled over repetitions:
/// every outcome dimension and the first action dimension, as raw counts
/// and densities.
pub fn write_histograms(config: &ExperimentConfig, out: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let spec = config.spec();
    let budget = *config.budgets.iter().max().expect("validated non-empty budgets");
    let mut pooled: Vec<(Method, Vec<Vec<f64>>, Vec<f64>)> = Vec::new();
    for &method in &config.methods {
        let mut states: Vec<Vec<f64>> = vec![Vec::new(); spec.outcome_dims.len()];
        let mut actions = Vec::new();
        for repetition in 0..config.repetitions {
            let cell = CellKey {
                method,
                budget,
                repetition,
            };
            let d = gather_cell(config, &cell)?;
            for (k, &dim) in spec.outcome_dims.iter().enumerate() {
                states[k].extend(d.states.column(dim).iter());
            }
            actions.extend(d.actions.column(0).iter());
        }
        pooled.push((method, states, actions));
    }

    let mut written = BTreeMap::new();
    let mut emit = |name: String, label: String, range: (f64, f64), pick: &dyn Fn(&(Method, Vec<Vec<f64>>, Vec<f64>)) -> &[f64]| -> Result<()> {
        let hists: Vec<(Method, metrics::Histogram)> = pooled
            .iter()
            .map(|p| Ok((p.0, histogram(&label, pick(p), DEFAULT_BINS, range)?)))
            .collect::<Result<_>>()?;
        let refs: Vec<(Method, &metrics::Histogram)> = hists.iter().map(|(m, h)| (*m, h)).collect();
        let title = format!("{} {label}, budget {budget}", spec.name.title());
        for (suffix, density) in [("", false), ("_density", true)] {
            let stem = format!("{name}{suffix}");
            io::write_atomic(&out.join(format!("{stem}.csv")), histogram_csv(&refs, density)?.as_bytes())?;
            io::write_atomic(&out.join(format!("{stem}.svg")), histogram_svg(&title, &refs, density)?.as_bytes())?;
            written.insert(stem.clone(), PathBuf::from(format!("{stem}.csv")));
        }
        Ok(())
    };
    for (k, &dim) in spec.outcome_dims.iter().enumerate() {
        let label = spec.state_label(dim);
        emit(
            format!("hist_{}_{label}", spec.name),
            label,
            (spec.state_low[dim], spec.state_high[dim]),
            &|p| &p.1[k],
        )?;
    }
    emit(
        format!("hist_{}_action0", spec.name),
        "action0".to_string(),
        (spec.action_low[0], spec.action_high[0]),
        &|p| &p.2,
    )?;
    Ok(written)
}
