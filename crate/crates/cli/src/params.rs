use mfamd::model::{ClusterParams, Thresholds};
use mfamd::survey::SurveySchema;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::invalid;

/// Human-editable parameter file. `loadings[g][d]` is the augmented row
/// (intercept, trait loadings) of latent dimension `d` in cluster `g`;
/// `cuts[j]` lists the thresholds of ordered item `j` in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    pub pi: Vec<f64>,
    pub loadings: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub cuts: Option<Vec<Vec<f64>>>,
}

impl ParamsDoc {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(invalid)
        } else {
            toml::from_str(text).map_err(invalid)
        }
    }

    pub fn from_model(params: &ClusterParams<f64>, thresholds: &Thresholds<f64>) -> Self {
        ParamsDoc {
            pi: params.pi.clone(),
            loadings: params
                .loadings
                .iter()
                .map(|l| l.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
            cuts: Some(thresholds.cuts.clone()),
        }
    }

    /// Missing cuts default to binary items at 0 and ordinal cuts 0, 1, 2, ….
    pub fn to_model(&self, schema: &SurveySchema) -> anyhow::Result<(ClusterParams<f64>, Thresholds<f64>)> {
        let mut loadings = Vec::with_capacity(self.loadings.len());
        for (g, rows) in self.loadings.iter().enumerate() {
            let width = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != width) {
                return Err(invalid(anyhow::anyhow!("cluster {} loading rows differ in length", g + 1)));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            loadings.push(Array2::from_shape_vec((rows.len(), width), flat).expect("rectangular"));
        }
        let params = ClusterParams { pi: self.pi.clone(), loadings };
        params.validate(schema.latent_dim()).map_err(invalid)?;
        let thresholds = match &self.cuts {
            Some(cuts) => Thresholds { cuts: cuts.clone() },
            None => {
                let mut t = Thresholds::default_for(schema);
                for c in &mut t.cuts {
                    *c = (0..c.len()).map(|k| k as f64).collect();
                }
                t
            }
        };
        thresholds.validate(schema).map_err(invalid)?;
        Ok((params, thresholds))
    }
}
