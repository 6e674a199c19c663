//! On-disk artifacts: datasets, models, evaluation suites.
//!
//! Floats are written in shortest round-trip form, so reading an artifact
//! back reproduces the in-memory values bit for bit.

use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, EpisodeInfo, Method};
use crate::envs::{EnvName, EnvSpec};
use crate::error::{Error, Result};
use crate::harness::config::{CellKey, SuiteSeeds};
use crate::model::EnsembleModel;
use crate::ns::{ArchiveEntry, NsArchive, NsConfig};

pub const FORMAT_VERSION: u32 = 1;
const DATASET_MAGIC: &str = "# bootstrap-bench dataset v1";

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes to JSON");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub cell: CellKey,
    pub dataset: Dataset,
}

/// CSV body with `#` header lines carrying provenance:
///
/// ```text
/// # bootstrap-bench dataset v1
/// # env=ball_in_cup
/// # method=rarph
/// # budget=5
/// # repetition=0
/// # action_repeat=10
/// # seed=1234
/// # episode start=0 len=300 source=random_policy termination=none seed=99
/// s0,...,a0,...,n0,...
/// ```
pub fn dataset_to_string(file: &DatasetFile) -> String {
    let d = &file.dataset;
    let mut out = String::new();
    out.push_str(DATASET_MAGIC);
    out.push('\n');
    for (k, v) in [
        ("env", d.env.to_string()),
        ("method", d.method.to_string()),
        ("budget", file.cell.budget.to_string()),
        ("repetition", file.cell.repetition.to_string()),
        ("action_repeat", d.action_repeat.to_string()),
        ("seed", d.seed.to_string()),
    ] {
        out.push_str(&format!("# {k}={v}\n"));
    }
    for e in &d.episodes {
        out.push_str(&format!(
            "# episode start={} len={} source={} termination={} seed={}\n",
            e.start, e.len, e.source, e.termination, e.seed
        ));
    }
    let (sd, ad) = (d.state_dim(), d.action_dim());
    let header: Vec<String> = (0..sd)
        .map(|i| format!("s{i}"))
        .chain((0..ad).map(|i| format!("a{i}")))
        .chain((0..sd).map(|i| format!("n{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..d.len() {
        let row: Vec<String> = d
            .states
            .row(r)
            .iter()
            .chain(d.actions.row(r).iter())
            .chain(d.next_states.row(r).iter())
            .map(|v| v.to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_field<T: std::str::FromStr>(path: &Path, key: &str, value: Option<&String>) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let value = value.ok_or_else(|| Error::format(path, format!("missing header field '{key}'")))?;
    value
        .parse()
        .map_err(|e| Error::format(path, format!("bad value for '{key}': {e}")))
}

pub fn dataset_from_str(text: &str, path: &Path) -> Result<DatasetFile> {
    let mut lines = text.lines();
    if lines.next() != Some(DATASET_MAGIC) {
        return Err(Error::format(path, "not a dataset file"));
    }
    let mut fields = std::collections::HashMap::new();
    let mut episodes_raw = Vec::new();
    let mut body = Vec::new();
    for line in lines {
        if let Some(comment) = line.strip_prefix("# ") {
            if let Some(rest) = comment.strip_prefix("episode ") {
                let kv: std::collections::HashMap<String, String> = rest
                    .split_whitespace()
                    .filter_map(|t| t.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
                    .collect();
                episodes_raw.push(kv);
            } else if let Some((k, v)) = comment.split_once('=') {
                fields.insert(k.to_string(), v.to_string());
            }
        } else {
            body.push(line);
        }
    }
    let env: EnvName = parse_field(path, "env", fields.get("env"))?;
    let method: Method = parse_field(path, "method", fields.get("method"))?;
    let cell = CellKey {
        method,
        budget: parse_field(path, "budget", fields.get("budget"))?,
        repetition: parse_field(path, "repetition", fields.get("repetition"))?,
    };
    let action_repeat = parse_field(path, "action_repeat", fields.get("action_repeat"))?;
    let seed = parse_field(path, "seed", fields.get("seed"))?;
    let episodes = episodes_raw
        .iter()
        .map(|kv| {
            Ok(EpisodeInfo {
                start: parse_field(path, "start", kv.get("start"))?,
                len: parse_field(path, "len", kv.get("len"))?,
                source: parse_field(path, "source", kv.get("source"))?,
                termination: parse_field(path, "termination", kv.get("termination"))?,
                seed: parse_field(path, "seed", kv.get("seed"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let spec = EnvSpec::new(env);
    let (sd, ad) = (spec.state_dim, spec.action_dim);
    let width = 2 * sd + ad;
    let mut rows = body.into_iter().filter(|l| !l.is_empty());
    let header = rows.next().ok_or_else(|| Error::format(path, "missing column header"))?;
    if header.split(',').count() != width {
        return Err(Error::format(path, format!("expected {width} columns")));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (i, line) in rows.enumerate() {
        let before = values.len();
        for cell in line.split(',') {
            values.push(cell.trim().parse::<f64>().map_err(|e| {
                Error::format(path, format!("data row {}: {e}", i + 1))
            })?);
        }
        if values.len() - before != width {
            return Err(Error::format(path, format!("data row {} has the wrong width", i + 1)));
        }
        n += 1;
    }
    let all = Array2::from_shape_vec((n, width), values).expect("row widths checked");
    let dataset = Dataset {
        env,
        method,
        action_repeat,
        seed,
        states: all.slice(ndarray::s![.., ..sd]).to_owned(),
        actions: all.slice(ndarray::s![.., sd..sd + ad]).to_owned(),
        next_states: all.slice(ndarray::s![.., sd + ad..]).to_owned(),
        episodes,
    };
    dataset.validate().map_err(|e| Error::format(path, e))?;
    Ok(DatasetFile { cell, dataset })
}

pub fn write_dataset(path: &Path, file: &DatasetFile) -> Result<()> {
    write_atomic(path, dataset_to_string(file).as_bytes())
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    dataset_from_str(&read_text(path)?, path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub env: EnvName,
    pub cell: CellKey,
    pub model: EnsembleModel,
}

pub fn read_model(path: &Path) -> Result<ModelArtifact> {
    let artifact: ModelArtifact = read_json(path)?;
    if artifact.format_version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported model format version {}", artifact.format_version),
        ));
    }
    Ok(artifact)
}

/// Novelty Search archive plus the frozen evaluation subset drawn from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteArtifact {
    pub format_version: u32,
    pub env: EnvName,
    pub ns: NsConfig,
    pub seeds: SuiteSeeds,
    pub suite_indices: Vec<usize>,
    pub archive: NsArchive,
}

impl SuiteArtifact {
    pub fn suite(&self) -> Vec<ArchiveEntry> {
        self.suite_indices
            .iter()
            .map(|&i| self.archive.entries[i].clone())
            .collect()
    }
}

pub fn read_suite(path: &Path) -> Result<SuiteArtifact> {
    let artifact: SuiteArtifact = read_json(path)?;
    if artifact.format_version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported suite format version {}", artifact.format_version),
        ));
    }
    if artifact.suite_indices.iter().any(|&i| i >= artifact.archive.len()) {
        return Err(Error::format(path, "suite index outside the archive"));
    }
    Ok(artifact)
}
