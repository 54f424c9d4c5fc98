//! Layout of a run directory:
//!
//! ```text
//! manifest.json    config, fingerprint, chain records, status
//! schema.toml      copy of the survey schema
//! responses.csv    copy of the fitted responses, canonical column order
//! trace.jsonl      one relabeled, aligned snapshot per line
//! tallies.csv      N×G allocation counts over all chains
//! membership.csv   probabilities, hard assignment, uncertainty
//! references.json  per-cluster reference loadings
//! report.json      posterior summaries and convergence advisories
//! diagnostics/     written by `diagnose`
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use mfamd::mcmc::{ItemAcceptance, RngRecord, Snapshot, Trace};
use mfamd::survey::{read_responses, ResponseMatrix, SurveySchema};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::invalid;

pub const MANIFEST: &str = "manifest.json";
pub const SCHEMA: &str = "schema.toml";
pub const RESPONSES: &str = "responses.csv";
pub const TRACE: &str = "trace.jsonl";
pub const TALLIES: &str = "tallies.csv";
pub const MEMBERSHIP: &str = "membership.csv";
pub const REFERENCES: &str = "references.json";
pub const REPORT: &str = "report.json";
pub const DIAGNOSTICS: &str = "diagnostics";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Written before sampling; a run left in this state did not finish.
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub seed: u64,
    pub snapshots: usize,
    pub decode_violations: u64,
    pub acceptance: Vec<ItemAcceptance>,
    pub rng: RngRecord,
    /// Cluster label of this chain shown as each pooled label.
    pub label_map: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relabel_converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub fingerprint: String,
    pub groups: usize,
    pub traits: usize,
    pub households: usize,
    pub config: RunConfig,
    pub chains: Vec<ChainRecord>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(config: &RunConfig, fingerprint: String, households: usize) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            status: RunStatus::Running,
            error: None,
            fingerprint,
            groups: config.groups,
            traits: config.traits,
            households,
            config: config.clone(),
            chains: Vec::new(),
            files: Vec::new(),
        }
    }
}

pub fn run_dir_name(groups: usize, traits: usize) -> String {
    format!("G{groups}_q{traits}")
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<D> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct TraceLine<T> {
    chain: usize,
    #[serde(flatten)]
    snapshot: Snapshot<T>,
}

/// Snapshots of every chain, one JSON object per line, chain by chain.
pub fn write_trace(path: &Path, chains: &[&[Snapshot<f64>]]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for (chain, snaps) in chains.iter().enumerate() {
        for snapshot in snaps.iter() {
            let line = TraceLine { chain, snapshot: snapshot.clone() };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> anyhow::Result<Vec<Snapshot<f64>>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine<f64> =
            serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), k + 1))?;
        out.push(parsed.snapshot);
    }
    Ok(out)
}

pub fn write_tallies(path: &Path, tallies: &Array2<u32>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=tallies.ncols()).map(|g| format!("cluster_{g}")))?;
    for row in tallies.rows() {
        w.write_record(row.iter().map(|c| c.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tallies(path: &Path) -> anyhow::Result<Array2<u32>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let g = r.headers()?.len();
    let mut data = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        for v in rec.iter() {
            data.push(v.parse::<u32>().with_context(|| format!("bad tally `{v}`"))?);
        }
    }
    let n = data.len() / g.max(1);
    Ok(Array2::from_shape_vec((n, g), data)?)
}

/// A finished run loaded back for diagnostics.
pub struct LoadedRun {
    pub manifest: Manifest,
    pub schema: SurveySchema,
    pub responses: ResponseMatrix,
    pub trace: Trace<f64>,
}

impl LoadedRun {
    pub fn open(dir: &Path) -> anyhow::Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.exists() {
            return Err(invalid(anyhow::anyhow!("{} is not a run directory (no {MANIFEST})", dir.display())));
        }
        let manifest: Manifest = read_json(&manifest_path).map_err(invalid)?;
        if manifest.status != RunStatus::Complete {
            bail!("run in {} is not complete (status {:?})", dir.display(), manifest.status);
        }
        let schema = SurveySchema::from_path(dir.join(SCHEMA))?;
        let responses = read_responses(dir.join(RESPONSES), &schema)?;
        let trace_path = dir.join(TRACE);
        if !trace_path.exists() {
            return Err(invalid(anyhow::anyhow!("missing {}", trace_path.display())));
        }
        let snapshots = read_trace(&trace_path)?;
        let tallies = read_tallies(&dir.join(TALLIES))?;
        let n = responses.n_rows();
        if tallies.dim() != (n, manifest.groups) {
            bail!("tallies are {:?}, expected ({n}, {})", tallies.dim(), manifest.groups);
        }
        let dim = schema.latent_dim();
        let trace = Trace {
            n_groups: manifest.groups,
            n_traits: manifest.traits,
            snapshots,
            tallies,
            z_mean: Array2::zeros((n, dim)),
            z_last: Array2::zeros((n, dim)),
            theta_last: Array2::zeros((n, manifest.traits)),
            alloc_last: vec![0; n],
            retained: None,
            acceptance: Vec::new(),
            decode_violations: 0,
            rng: manifest.chains.first().map(|c| c.rng.clone()).unwrap_or(RngRecord {
                generator: String::new(),
                seed: 0,
                sweeps: 0,
            }),
        };
        Ok(LoadedRun { manifest, schema, responses, trace })
    }
}
