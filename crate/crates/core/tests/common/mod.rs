#![allow(dead_code)]

use mfamd::model::{simulate_dataset, ClusterParams, LatentState, Thresholds};
use mfamd::survey::{parse_schema, ItemKind, ItemSpec, ResponseMatrix, SurveySchema};
use ndarray::Array2;

pub fn item(name: &str, kind: ItemKind, levels: usize) -> ItemSpec {
    ItemSpec { name: name.into(), kind, levels: (1..=levels).map(|l| format!("l{l}")).collect() }
}

pub fn asset_schema() -> SurveySchema {
    parse_schema(include_str!("../data/asset_survey.toml")).unwrap()
}

/// Two binary, one ordinal (K = 3) and one nominal (K = 3) item.
pub fn small_schema() -> SurveySchema {
    SurveySchema::new(vec![
        item("b1", ItemKind::Binary, 2),
        item("b2", ItemKind::Binary, 2),
        item("o", ItemKind::Ordinal, 3),
        item("n", ItemKind::Nominal, 3),
    ])
    .unwrap()
}

pub struct Simulated {
    pub schema: SurveySchema,
    pub params: ClusterParams<f64>,
    pub thresholds: Thresholds<f64>,
    pub y: ResponseMatrix,
    pub latent: LatentState<f64>,
}

// Mean offsets per cluster; every dimension separates all three clusters.
const MEAN_PATTERN: [[f64; 3]; 6] = [
    [1.0, -1.0, 0.0],
    [1.0, 0.0, -1.0],
    [0.0, 1.0, -1.0],
    [-1.0, 1.0, 0.0],
    [-1.0, 0.0, 1.0],
    [0.0, -1.0, 1.0],
];

/// Ten items (2 binary, 1 ordinal K = 3, 5 ordinal K = 5, 2 nominal K = 3),
/// three clusters, one trait, N = 2000. Ordered-item means are centred on
/// their cut range so every level is populated; sup-norm mean separation
/// between clusters is 2.5.
pub fn recovery_fixture() -> Simulated {
    let mut items = vec![item("b0", ItemKind::Binary, 2), item("b1", ItemKind::Binary, 2)];
    items.push(item("o3", ItemKind::Ordinal, 3));
    for k in 0..5 {
        items.push(item(&format!("o5_{k}"), ItemKind::Ordinal, 5));
    }
    for k in 0..2 {
        items.push(item(&format!("n{k}"), ItemKind::Nominal, 3));
    }
    let schema = SurveySchema::new(items).unwrap();
    let dim = schema.latent_dim();
    let centre = |d: usize| match d {
        0 | 1 => 0.0,
        2 => 0.5,
        3..=7 => 1.1,
        _ => 0.0,
    };
    let spread = |d: usize| if d < 8 { 1.25 } else { 0.5 };
    let slope = [0.48, -0.36, 0.6];
    let loadings = (0..3)
        .map(|g| {
            Array2::from_shape_fn((dim, 2), |(d, c)| match c {
                0 => centre(d) + spread(d) * MEAN_PATTERN[d % 6][g],
                _ => slope[g] * if d % 2 == 0 { 1.0 } else { -0.7 },
            })
        })
        .collect();
    let params = ClusterParams { pi: vec![0.4, 0.35, 0.25], loadings };
    let mut cuts = vec![vec![0.0], vec![0.0], vec![0.0, 1.0]];
    cuts.extend((0..5).map(|_| vec![0.0, 0.75, 1.5, 2.25]));
    let thresholds = Thresholds { cuts };
    let (y, latent) = simulate_dataset(&schema, &params, &thresholds, 2000, 7).unwrap();
    Simulated { schema, params, thresholds, y, latent }
}

/// Synthetic parameters shaped like the asset survey: `groups` clusters,
/// one trait, binary items spread around zero.
pub fn asset_params(schema: &SurveySchema, groups: usize) -> (ClusterParams<f64>, Thresholds<f64>) {
    let dim = schema.latent_dim();
    let loadings = (0..groups)
        .map(|g| {
            Array2::from_shape_fn((dim, 2), |(d, c)| {
                let phase = (d * 7 + g * 3) % 5;
                match c {
                    0 => 0.6 * (phase as f64 - 2.0) + 0.3 * g as f64,
                    _ => 0.5 + 0.1 * ((d + g) % 3) as f64,
                }
            })
        })
        .collect();
    let pi = vec![1.0 / groups as f64; groups];
    let mut thresholds = Thresholds::default_for(schema);
    for cuts in thresholds.cuts.iter_mut().filter(|c| c.len() > 1) {
        let k = cuts.len();
        *cuts = (0..k).map(|c| 0.6 * c as f64).collect();
    }
    (ClusterParams { pi, loadings }, thresholds)
}

pub fn rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
