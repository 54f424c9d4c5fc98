use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mfamd::mcmc::{run_chain, Trace};
use mfamd::postprocess::{
    align_trace, best_permutation, fit_reference_loadings_lenient, relabel_stephens, summarize, ClusterReport,
    MAX_RELABEL_ITERATIONS,
};
use mfamd::survey::{read_responses, write_responses, ResponseMatrix, SurveySchema};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Grid, RunConfig};
use crate::invalid;
use crate::rhat::{parameter_rhats, ScalarRhat};
use crate::rundir::*;

#[derive(Debug, Clone, Default)]
pub struct FitOverrides {
    pub grid: Option<Grid>,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub groups: usize,
    pub traits: usize,
    pub households: usize,
    pub chains: usize,
    /// Largest split-R̂ over all scalars; advisory only.
    pub max_split_rhat: f64,
    pub split_rhat: Vec<ScalarRhat>,
    pub clusters: ClusterReport<f64>,
}

struct Inputs {
    schema: SurveySchema,
    responses: ResponseMatrix,
    schema_bytes: Vec<u8>,
    data_bytes: Vec<u8>,
}

fn load_inputs(config: &RunConfig) -> anyhow::Result<Inputs> {
    let schema_bytes = fs::read(&config.schema)
        .with_context(|| format!("reading schema {}", config.schema.display()))
        .map_err(invalid)?;
    let data_bytes = fs::read(&config.data)
        .with_context(|| format!("reading data {}", config.data.display()))
        .map_err(invalid)?;
    let text = String::from_utf8(schema_bytes.clone()).map_err(invalid)?;
    let schema = mfamd::survey::parse_schema(&text).map_err(invalid)?;
    let responses = read_responses(&config.data, &schema).map_err(invalid)?;
    Ok(Inputs { schema, responses, schema_bytes, data_bytes })
}

/// Fits every requested (G, q) cell; returns the run directories.
pub fn cmd_fit(config_path: &Path, overrides: FitOverrides) -> anyhow::Result<Vec<PathBuf>> {
    let mut base = RunConfig::load(config_path)?;
    if let Some(seed) = overrides.seed {
        base.chain.seed = seed;
    }
    if let Some(chains) = overrides.chains {
        base.chain.chains = chains;
    }
    if let Some(out) = overrides.out {
        base.out = out;
    }
    let cells = match overrides.grid {
        Some(grid) => grid.cells(),
        None => vec![(base.groups, base.traits)],
    };
    for &(g, q) in &cells {
        RunConfig { groups: g, traits: q, ..base.clone() }.validate()?;
    }
    let inputs = load_inputs(&base)?;
    let mut dirs = Vec::with_capacity(cells.len());
    for (g, q) in cells {
        let config = RunConfig { groups: g, traits: q, ..base.clone() };
        let dir = config.out.join(run_dir_name(g, q));
        log::info!("fitting G = {g}, q = {q} into {}", dir.display());
        fit_one(&config, &inputs, &dir)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

fn fit_one(config: &RunConfig, inputs: &Inputs, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let fingerprint = config.fingerprint(&inputs.schema_bytes, &inputs.data_bytes);
    let mut manifest = Manifest::new(config, fingerprint, inputs.responses.n_rows());
    write_json(&dir.join(MANIFEST), &manifest)?;
    match fit_outputs(config, inputs, dir, &mut manifest) {
        Ok(()) => {
            manifest.status = RunStatus::Complete;
            write_json(&dir.join(MANIFEST), &manifest)
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(format!("{e:#}"));
            write_json(&dir.join(MANIFEST), &manifest)?;
            Err(e)
        }
    }
}

fn fit_outputs(config: &RunConfig, inputs: &Inputs, dir: &Path, manifest: &mut Manifest) -> anyhow::Result<()> {
    let (schema, y) = (&inputs.schema, &inputs.responses);
    let mut traces: Vec<Trace<f64>> = (0..config.chain.chains)
        .into_par_iter()
        .map(|c| run_chain(y, schema, config.groups, config.traits, config.priors(), config.chain_config(c)))
        .collect::<mfamd::Result<_>>()?;

    let mut relabel_flags = vec![None; traces.len()];
    for (t, flag) in traces.iter_mut().zip(&mut relabel_flags) {
        if t.retained.is_some() {
            *flag = Some(relabel_stephens(t, MAX_RELABEL_ITERATIONS)?.converged);
        }
        // Pooled outputs never need per-snapshot draws.
        t.retained = None;
    }
    let (first, rest) = traces.split_first_mut().expect("at least one chain");
    let mut label_maps = vec![(0..config.groups).collect::<Vec<_>>()];
    for t in rest.iter_mut() {
        label_maps.push(match_labels(first, t));
    }
    let references = fit_reference_loadings_lenient(first, config.chain.reference);
    for t in traces.iter_mut() {
        align_trace(t, &references)?;
    }

    for (c, t) in traces.iter().enumerate() {
        manifest.chains.push(ChainRecord {
            seed: config.chain_config(c).seed,
            snapshots: t.n_snapshots(),
            decode_violations: t.decode_violations,
            acceptance: t.acceptance.clone(),
            rng: t.rng.clone(),
            label_map: label_maps[c].clone(),
            relabel_converged: relabel_flags[c],
        });
    }
    let chains: Vec<&[mfamd::mcmc::Snapshot<f64>]> = traces.iter().map(|t| t.snapshots.as_slice()).collect();
    let rhats = parameter_rhats(&chains);
    let pooled = pool(&traces);
    let clusters = summarize(&pooled);

    fs::write(dir.join(SCHEMA), schema.to_toml_string())?;
    write_responses(fs::File::create(dir.join(RESPONSES))?, schema, y)?;
    write_trace(&dir.join(TRACE), &chains)?;
    write_tallies(&dir.join(TALLIES), &pooled.tallies)?;
    write_membership(&dir.join(MEMBERSHIP), &clusters)?;
    write_json(&dir.join(REFERENCES), &references)?;
    let report = RunReport {
        groups: config.groups,
        traits: config.traits,
        households: y.n_rows(),
        chains: traces.len(),
        max_split_rhat: rhats.iter().map(|r| r.split_rhat).filter(|v| v.is_finite()).fold(f64::NAN, f64::max),
        split_rhat: rhats,
        clusters,
    };
    write_json(&dir.join(REPORT), &report)?;
    manifest.files = [SCHEMA, RESPONSES, TRACE, TALLIES, MEMBERSHIP, REFERENCES, REPORT]
        .iter()
        .map(|s| s.to_string())
        .collect();
    Ok(())
}

/// Relabels `other` so its posterior cluster means best match `reference`'s;
/// returns the permutation applied (`perm[g]` = label of `other` shown as `g`).
fn match_labels(reference: &Trace<f64>, other: &mut Trace<f64>) -> Vec<usize> {
    let a = summarize(reference).loadings_mean;
    let b = summarize(other).loadings_mean;
    let g = a.len();
    let cost = Array2::from_shape_fn((g, g), |(k, h)| {
        a[k].column(0).iter().zip(b[h].column(0)).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
    });
    let perm = best_permutation(&cost);
    for s in &mut other.snapshots {
        s.permute(&perm);
    }
    let old = other.tallies.clone();
    for (k, &h) in perm.iter().enumerate() {
        other.tallies.column_mut(k).assign(&old.column(h));
    }
    let mut inv = vec![0; g];
    for (k, &h) in perm.iter().enumerate() {
        inv[h] = k;
    }
    other.alloc_last.iter_mut().for_each(|a| *a = inv[*a]);
    perm
}

fn pool(traces: &[Trace<f64>]) -> Trace<f64> {
    let mut pooled = traces[0].clone();
    for t in &traces[1..] {
        pooled.snapshots.extend(t.snapshots.iter().cloned());
        pooled.tallies += &t.tallies;
        pooled.z_mean += &t.z_mean;
        pooled.decode_violations += t.decode_violations;
    }
    pooled.z_mean /= traces.len() as f64;
    pooled
}

fn write_membership(path: &Path, report: &ClusterReport<f64>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let g = report.membership_probs.ncols();
    let mut header = vec!["household".to_string()];
    header.extend((1..=g).map(|k| format!("p_{k}")));
    header.extend(["assignment".into(), "uncertainty".into()]);
    w.write_record(&header)?;
    for (i, row) in report.membership_probs.rows().into_iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(|p| p.to_string()));
        rec.push((report.hard_assignment[i] + 1).to_string());
        rec.push(report.uncertainties[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
