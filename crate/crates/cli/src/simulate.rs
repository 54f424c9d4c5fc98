use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mfamd::model::simulate_dataset;
use mfamd::survey::{write_responses, SurveySchema};
use serde::Serialize;

use crate::invalid;
use crate::params::ParamsDoc;
use crate::rundir::write_json;

pub const SIMULATED_RESPONSES: &str = "responses.csv";
pub const TRUTH: &str = "truth.json";

#[derive(Debug, Serialize)]
struct Truth {
    seed: u64,
    households: usize,
    params: ParamsDoc,
    /// 1-based cluster of every household.
    allocations: Vec<usize>,
    traits: Vec<Vec<f64>>,
}

pub fn cmd_simulate(schema_path: &Path, params_path: &Path, n: usize, seed: u64, out: &Path) -> anyhow::Result<PathBuf> {
    if n == 0 {
        return Err(invalid(anyhow::anyhow!("need at least one household")));
    }
    let schema = SurveySchema::from_path(schema_path).map_err(invalid)?;
    let text = fs::read_to_string(params_path)
        .with_context(|| format!("reading {}", params_path.display()))
        .map_err(invalid)?;
    let (params, thresholds) = ParamsDoc::parse(&text)?.to_model(&schema)?;
    let (y, latent) = simulate_dataset(&schema, &params, &thresholds, n, seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let data_path = out.join(SIMULATED_RESPONSES);
    write_responses(fs::File::create(&data_path)?, &schema, &y)?;
    let truth = Truth {
        seed,
        households: n,
        params: ParamsDoc::from_model(&params, &thresholds),
        allocations: latent.alloc.iter().map(|a| a + 1).collect(),
        traits: latent.theta.rows().into_iter().map(|r| r.to_vec()).collect(),
    };
    write_json(&out.join(TRUTH), &truth)?;
    Ok(data_path)
}
