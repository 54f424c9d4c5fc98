//! Joint-distribution check of the sampler.
//!
//! Two ways of drawing (parameters, latent state, data) must agree in law:
//! independent draws from the prior followed by data simulation, and a
//! chain that alternates re-simulating the data with one sampler sweep.
//! Tracked moments are compared with z-scores; the chain side uses
//! batch-means standard errors.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::Sampler;
use super::config::{ChainConfig, Corruption, Priors};
use super::updates::update_weights;
use super::ModelState;
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::model::{decode_nominal, decode_ordinal, ClusterParams, LatentState, Thresholds};
use crate::model::simulate_row;
use crate::rng::{open_unit, std_normal, Phase, StreamKey};
use crate::scalar::Real;
use crate::survey::{LatentLayout, ResponseMatrix, SurveySchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeConfig {
    pub n_rows: usize,
    pub n_groups: usize,
    pub n_traits: usize,
    pub rounds: usize,
    pub batches: usize,
    pub seed: u64,
    #[serde(skip)]
    pub corruption: Corruption,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        GewekeConfig {
            n_rows: 20,
            n_groups: 2,
            n_traits: 1,
            rounds: 100_000,
            batches: 100,
            seed: 2024,
            corruption: Corruption::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeMoment {
    pub name: String,
    pub prior_mean: f64,
    pub prior_se: f64,
    pub chain_mean: f64,
    pub chain_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub moments: Vec<GewekeMoment>,
    pub max_abs_z: f64,
    pub mh_accept_rate: Option<f64>,
}

impl GewekeReport {
    pub fn moment(&self, name: &str) -> Option<&GewekeMoment> {
        self.moments.iter().find(|m| m.name == name)
    }
}

fn moment_names(schema: &SurveySchema, g: usize, dim: usize, q: usize) -> Vec<String> {
    let mut params = Vec::new();
    for k in 0..g {
        params.push(format!("pi[{k}]"));
    }
    for k in 0..g {
        for d in 0..dim {
            for c in 0..=q {
                params.push(format!("loading[{k},{d},{c}]"));
            }
        }
    }
    for j in 0..schema.n_ordered() {
        for c in 1..schema.item(j).n_levels() - 1 {
            params.push(format!("cut[{j},{c}]"));
        }
    }
    let squares: Vec<String> = params.iter().map(|p| format!("{p}^2")).collect();
    params.extend(squares);
    for extra in ["cluster0_share", "trait_mean", "trait_sq_mean", "latent_mean", "latent_sq_mean"] {
        params.push(extra.into());
    }
    params
}

/// Parameter values and their squares, then summaries of L, Θ and Z.
fn moments<T: Real>(state: &ModelState<T>, out: &mut Vec<f64>) {
    out.clear();
    out.extend(state.params.pi.iter().map(|p| p.as_f64()));
    for l in &state.params.loadings {
        out.extend(l.iter().map(|v| v.as_f64()));
    }
    for c in &state.thresholds.cuts {
        out.extend(c.iter().skip(1).map(|v| v.as_f64()));
    }
    let firsts = out.len();
    for k in 0..firsts {
        let v = out[k];
        out.push(v * v);
    }
    let a = &state.latent.alloc;
    out.push(a.iter().filter(|&&g| g == 0).count() as f64 / a.len() as f64);
    for m in [&state.latent.theta, &state.latent.z] {
        let len = m.len() as f64;
        out.push(m.iter().map(|v| v.as_f64()).sum::<f64>() / len);
        out.push(m.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / len);
    }
}

/// Draws parameters from the (bounded) prior.
fn draw_params<T: Real, R: Rng + ?Sized>(
    schema: &SurveySchema,
    n_groups: usize,
    n_traits: usize,
    priors: &Priors<T>,
    upper: f64,
    rng: &mut R,
) -> Result<(ClusterParams<T>, Thresholds<T>)> {
    let dim = schema.latent_dim();
    let w = n_traits + 1;
    let pi = update_weights(&vec![0; n_groups], &priors.alpha, rng);
    let l = cholesky(priors.sigma_lambda.view())?;
    let mut loadings = Vec::with_capacity(n_groups);
    let mut eps = vec![T::zero(); w];
    for _ in 0..n_groups {
        let mut lt = Array2::<T>::zeros((dim, w));
        for d in 0..dim {
            eps.iter_mut().for_each(|e| *e = std_normal(rng));
            for r in 0..w {
                let mut v = priors.mu_lambda[r];
                for c in 0..=r {
                    v += l[[r, c]] * eps[c];
                }
                lt[[d, r]] = v;
            }
        }
        loadings.push(lt);
    }
    let cuts = (0..schema.n_ordered())
        .map(|j| {
            let k = schema.item(j).n_levels();
            let mut free: Vec<f64> = (0..k - 2).map(|_| open_unit(rng) * upper).collect();
            free.sort_by(f64::total_cmp);
            std::iter::once(T::zero()).chain(free.into_iter().map(T::of)).collect()
        })
        .collect();
    Ok((ClusterParams { pi, loadings }, Thresholds { cuts }))
}

/// Replaces (L, Θ, Z) by a draw given the parameters when `fresh_groups`,
/// otherwise only Z given (L, Θ); then decodes the responses.
fn simulate_data<T: Real, R: Rng + ?Sized>(
    state: &mut ModelState<T>,
    schema: &SurveySchema,
    layout: &LatentLayout,
    fresh_groups: bool,
    rng: &mut R,
) -> ResponseMatrix {
    let n = state.latent.alloc.len();
    let mut y = Array2::<u16>::zeros((n, schema.n_items()));
    let o = schema.n_ordered();
    for i in 0..n {
        if fresh_groups {
            let (th, z) = (state.latent.theta.row_mut(i), state.latent.z.row_mut(i));
            state.latent.alloc[i] = simulate_row(&state.params, th, z, rng);
        } else {
            let lt = &state.params.loadings[state.latent.alloc[i]];
            for d in 0..layout.dim() {
                let m = LatentState::conditional_mean(lt, d, state.latent.theta.row(i));
                state.latent.z[[i, d]] = m + std_normal::<T, _>(rng);
            }
        }
        let zr = state.latent.z.row(i);
        let zs = zr.as_slice().expect("latent rows are contiguous");
        for j in 0..schema.n_items() {
            let r = layout.range(j);
            y[[i, j]] = if j < o {
                decode_ordinal(zs[r.start], &state.thresholds.cuts[j])
            } else {
                decode_nominal(&zs[r])
            } as u16;
        }
    }
    ResponseMatrix::from_trusted(y)
}

fn batch_means_se(series: &[f64], batches: usize) -> f64 {
    let b = batches.max(2);
    let size = series.len() / b;
    let means: Vec<f64> = (0..b)
        .map(|k| series[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mu = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Compares prior-marginal and successive-conditional moments. The priors
/// must carry a finite threshold bound so the cut points have a proper prior;
/// threshold adaptation is disabled.
pub fn geweke_joint_test<T: Real>(
    schema: &SurveySchema,
    priors: &Priors<T>,
    config: &GewekeConfig,
) -> Result<GewekeReport> {
    let upper = priors
        .threshold_upper
        .ok_or_else(|| Error::Config("joint test needs a bounded threshold prior".into()))?
        .as_f64();
    let (g, q, n) = (config.n_groups, config.n_traits, config.n_rows);
    priors.validate(g, q)?;
    if config.rounds < 2 * config.batches.max(2) || n == 0 {
        return Err(Error::Config("joint test needs more rounds than batches".into()));
    }
    let layout = LatentLayout::new(schema);
    let dim = layout.dim();
    let names = moment_names(schema, g, dim, q);
    let m = names.len();

    let empty = |params: ClusterParams<T>, thresholds: Thresholds<T>| ModelState {
        latent: LatentState {
            z: Array2::zeros((n, dim)),
            theta: Array2::zeros((n, q)),
            alloc: vec![0; n],
        },
        params,
        thresholds,
    };

    let mut buf = Vec::with_capacity(m);
    let mut prior_sum = vec![0.0f64; m];
    let mut prior_sq = vec![0.0f64; m];
    let pkey = StreamKey::with_tag(config.seed, 0, Phase::Geweke, 1);
    for r in 0..config.rounds {
        let mut rng = pkey.stream(r as u64);
        let (params, thresholds) = draw_params(schema, g, q, priors, upper, &mut rng)?;
        let mut state = empty(params, thresholds);
        simulate_data(&mut state, schema, &layout, true, &mut rng);
        moments(&state, &mut buf);
        for k in 0..m {
            prior_sum[k] += buf[k];
            prior_sq[k] += buf[k] * buf[k];
        }
    }

    let ckey = StreamKey::with_tag(config.seed, 0, Phase::Geweke, 2);
    let mut rng = ckey.stream(0);
    let (params, thresholds) = draw_params(schema, g, q, priors, upper, &mut rng)?;
    let mut state = empty(params, thresholds);
    simulate_data(&mut state, schema, &layout, true, &mut rng);
    let mut series = vec![Vec::with_capacity(config.rounds); m];
    let (mut attempts, mut accepts) = (0u64, 0u64);
    for r in 0..config.rounds {
        let mut rng = ckey.stream(r as u64 + 1);
        let y = simulate_data(&mut state, schema, &layout, false, &mut rng);
        let chain = ChainConfig {
            iterations: 1,
            burn_in: 0,
            thin: 1,
            seed: config.seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            adapt_mh: false,
            ..ChainConfig::default()
        };
        let mut sampler = Sampler::from_state(&y, schema, state, priors.clone(), chain)?;
        sampler.set_corruption(config.corruption);
        sampler.sweep()?;
        let tuner = sampler.tuner();
        attempts += tuner.attempts.iter().sum::<u64>();
        accepts += tuner.accepts.iter().sum::<u64>();
        state = sampler.into_state();
        moments(&state, &mut buf);
        for k in 0..m {
            series[k].push(buf[k]);
        }
    }

    let rounds = config.rounds as f64;
    let moments = (0..m)
        .map(|k| {
            let pm = prior_sum[k] / rounds;
            let pvar = (prior_sq[k] / rounds - pm * pm).max(0.0) * rounds / (rounds - 1.0);
            let prior_se = (pvar / rounds).sqrt();
            let chain_mean = series[k].iter().sum::<f64>() / rounds;
            let chain_se = batch_means_se(&series[k], config.batches);
            let se = (prior_se * prior_se + chain_se * chain_se).sqrt();
            let z = if se > 0.0 { (chain_mean - pm) / se } else { 0.0 };
            GewekeMoment { name: names[k].clone(), prior_mean: pm, prior_se, chain_mean, chain_se, z }
        })
        .collect::<Vec<_>>();
    let max_abs_z = moments.iter().map(|m| m.z.abs()).fold(0.0, f64::max);
    Ok(GewekeReport {
        moments,
        max_abs_z,
        mh_accept_rate: (attempts > 0).then(|| accepts as f64 / attempts as f64),
    })
}
