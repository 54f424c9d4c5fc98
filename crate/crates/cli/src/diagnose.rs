use std::fs;
use std::path::{Path, PathBuf};

use mfamd::diagnostics::{
    bayesian_latent_residuals, cluster_item_profiles, hellinger_profile, modal_response_table, tsspr_replicates,
    ClusterItemProfile, ModalRow, ResidualOptions,
};
use mfamd::postprocess::summarize;

use crate::invalid;
use crate::rundir::{write_json, LoadedRun, DIAGNOSTICS};

#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    pub tsspr: bool,
    pub hellinger: bool,
    pub uncertainty: bool,
    pub residuals: bool,
    pub modal: bool,
    pub truncation: usize,
    pub replicates: usize,
    /// 1-based households for residuals; empty means evenly spaced ones.
    pub households: Vec<usize>,
    pub residual_households: usize,
    pub residual_sweeps: usize,
    pub residual_snapshots: usize,
    pub seed: u64,
}

impl DiagnoseOptions {
    fn any(&self) -> bool {
        self.tsspr || self.hellinger || self.uncertainty || self.residuals || self.modal
    }

    /// With no selection every diagnostic runs.
    pub fn or_all(mut self) -> Self {
        if !self.any() {
            self.tsspr = true;
            self.hellinger = true;
            self.uncertainty = true;
            self.residuals = true;
            self.modal = true;
        }
        self
    }
}

/// Profiles of the hard clustering stored in the run.
pub fn run_profiles(run: &LoadedRun) -> ClusterItemProfile {
    let report = summarize(&run.trace);
    cluster_item_profiles(&run.responses, &report.hard_assignment, &run.schema, run.trace.n_groups)
}

pub fn cmd_diagnose(dir: &Path, options: DiagnoseOptions) -> anyhow::Result<Vec<PathBuf>> {
    let options = options.or_all();
    let run = LoadedRun::open(dir)?;
    let out = dir.join(DIAGNOSTICS);
    fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    let g = run.trace.n_groups;

    if options.tsspr {
        if options.truncation == 0 || options.replicates == 0 {
            return Err(invalid(anyhow::anyhow!("-T and -R must be at least 1")));
        }
        let summary = tsspr_replicates(
            &run.trace,
            &run.responses,
            &run.schema,
            options.truncation,
            options.replicates,
            options.seed,
        )?;
        let path = out.join("tsspr.json");
        write_json(
            &path,
            &serde_json::json!({
                "groups": g,
                "traits": run.trace.n_traits,
                "truncation": summary.truncation,
                "replicates": summary.replicates,
                "median": summary.median,
                "q1": summary.q1,
                "q3": summary.q3,
                "iqr": summary.iqr(),
                "values": summary.values,
            }),
        )?;
        written.push(path);
    }

    if options.uncertainty {
        let report = summarize(&run.trace);
        let path = out.join("uncertainty.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["household", "assignment", "uncertainty"])?;
        for (i, u) in report.uncertainties.iter().enumerate() {
            w.write_record([(i + 1).to_string(), (report.hard_assignment[i] + 1).to_string(), u.to_string()])?;
        }
        w.flush()?;
        written.push(path);
    }

    if options.hellinger || options.modal {
        let profiles = run_profiles(&run);
        let path = out.join("profiles.json");
        write_json(&path, &profile_document(&run, &profiles))?;
        written.push(path);
        if options.hellinger {
            written.extend(write_hellinger(&run, &profiles, &out)?);
        }
        if options.modal {
            let rows = modal_response_table(&profiles, &run.schema);
            written.push(write_modal(&rows, g, &out)?);
        }
    }

    if options.residuals {
        let n = run.responses.n_rows();
        let households: Vec<usize> = if options.households.is_empty() {
            let k = options.residual_households.clamp(1, n);
            (0..k).map(|i| i * n / k).collect()
        } else {
            options
                .households
                .iter()
                .map(|&h| {
                    if h == 0 || h > n {
                        Err(invalid(anyhow::anyhow!("household {h} outside 1..={n}")))
                    } else {
                        Ok(h - 1)
                    }
                })
                .collect::<anyhow::Result<_>>()?
        };
        let opts = ResidualOptions {
            households,
            sweeps: options.residual_sweeps,
            max_snapshots: options.residual_snapshots,
            seed: options.seed,
        };
        let series = bayesian_latent_residuals(&run.trace, &run.responses, &run.schema, &opts)?;
        let path = out.join("residuals.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["household", "item", "dim", "draw", "residual"])?;
        for s in &series {
            for (k, v) in s.values.iter().enumerate() {
                w.write_record([
                    (s.household + 1).to_string(),
                    s.item.clone(),
                    (s.dim + 1).to_string(),
                    (k + 1).to_string(),
                    v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

fn profile_document(run: &LoadedRun, profiles: &ClusterItemProfile) -> serde_json::Value {
    let items: Vec<serde_json::Value> = run
        .schema
        .items()
        .iter()
        .enumerate()
        .map(|(j, item)| {
            let by_cluster: Vec<Option<&[f64]>> = (0..profiles.n_groups()).map(|g| profiles.get(g, j)).collect();
            serde_json::json!({ "item": item.name, "levels": item.levels, "probabilities": by_cluster })
        })
        .collect();
    serde_json::json!({ "cluster_sizes": profiles.sizes, "items": items })
}

fn write_hellinger(run: &LoadedRun, profiles: &ClusterItemProfile, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let g = profiles.n_groups();
    let mut written = Vec::new();
    let totals_path = out.join("hellinger_totals.csv");
    let mut totals = csv::Writer::from_path(&totals_path)?;
    totals.write_record(["first", "second", "total"])?;
    for a in 0..g {
        for b in a + 1..g {
            let cmp = hellinger_profile(profiles, a, b)?;
            let path = out.join(format!("hellinger_{}_{}.csv", a + 1, b + 1));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["item", "distance"])?;
            for (item, d) in run.schema.items().iter().zip(&cmp.per_item) {
                w.write_record([item.name.clone(), d.map_or(String::new(), |v| v.to_string())])?;
            }
            w.flush()?;
            totals.write_record([(a + 1).to_string(), (b + 1).to_string(), cmp.total.to_string()])?;
            written.push(path);
        }
    }
    totals.flush()?;
    written.push(totals_path);
    Ok(written)
}

fn write_modal(rows: &[ModalRow], g: usize, out: &Path) -> anyhow::Result<PathBuf> {
    let path = out.join("modal.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["item".to_string()];
    header.extend((1..=g).map(|k| format!("cluster_{k}")));
    header.push("ties".into());
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.item.clone()];
        rec.extend(row.modes.iter().map(|m| m.as_ref().map_or(String::new(), |m| m.label.clone())));
        let ties: Vec<String> = row
            .modes
            .iter()
            .enumerate()
            .filter(|(_, m)| m.as_ref().is_some_and(|m| m.tie))
            .map(|(k, _)| (k + 1).to_string())
            .collect();
        rec.push(ties.join(" "));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(path)
}
