use std::time::Instant;

use ndarray::Array2;

use super::config::{ChainConfig, Corruption, Priors};
use super::init::initialize;
use super::thresholds::{update_thresholds_mh, MhContext, ThresholdTuner};
use super::trace::{ItemAcceptance, RetainedDraws, RngRecord, Snapshot, Trace};
use super::updates::{
    cluster_counts, decode_mismatches, update_allocations, update_item_params, update_latent,
    update_traits, update_weights, LoadingPrior, Observed, SweepKey,
};
use super::{log_joint, ModelState};
use crate::error::{Error, Result};
use crate::model::ClusterFactor;
use crate::postprocess::OnlineRelabeler;
use crate::rng::Phase;
use crate::scalar::Real;
use crate::survey::{LatentLayout, ResponseMatrix, SurveySchema};

/// Which blocks a sweep refreshes; everything is on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateMask {
    pub latent: bool,
    pub allocations: bool,
    pub traits: bool,
    pub weights: bool,
    pub loadings: bool,
    pub thresholds: bool,
}

impl Default for UpdateMask {
    fn default() -> Self {
        UpdateMask {
            latent: true,
            allocations: true,
            traits: true,
            weights: true,
            loadings: true,
            thresholds: true,
        }
    }
}

impl UpdateMask {
    /// Only Z and Θ move; all parameters stay fixed.
    pub fn latent_only() -> Self {
        UpdateMask {
            latent: true,
            allocations: false,
            traits: true,
            weights: false,
            loadings: false,
            thresholds: false,
        }
    }
}

/// Metropolis-within-Gibbs sampler over one data set.
///
/// A sweep refreshes Z, then the allocations with the traits integrated
/// out, then the traits given the new allocations, then π, the loadings and
/// finally the cut points.
pub struct Sampler<'a, T: Real> {
    y: &'a ResponseMatrix,
    schema: &'a SurveySchema,
    layout: LatentLayout,
    priors: Priors<T>,
    config: ChainConfig,
    loading_prior: LoadingPrior<T>,
    state: ModelState<T>,
    tuner: ThresholdTuner,
    class_probs: Array2<f64>,
    sweeps_done: usize,
    mask: UpdateMask,
    corruption: Corruption,
    decode_violations: u64,
}

impl<'a, T: Real> Sampler<'a, T> {
    /// Validates the inputs and builds the initial state.
    pub fn new(
        y: &'a ResponseMatrix,
        schema: &'a SurveySchema,
        n_groups: usize,
        n_traits: usize,
        priors: Priors<T>,
        config: ChainConfig,
    ) -> Result<Self> {
        check_inputs(y, schema, n_groups, n_traits, &priors, &config)?;
        let layout = LatentLayout::new(schema);
        let loading_prior = LoadingPrior::new(&priors.mu_lambda, &priors.sigma_lambda)?;
        let obs = Observed { y, schema, layout: &layout };
        let state = initialize(obs, n_groups, n_traits, &loading_prior, config.seed)?;
        Self::assemble(y, schema, layout, priors, config, loading_prior, state)
    }

    /// Starts from a caller-supplied state, which must agree with the data.
    pub fn from_state(
        y: &'a ResponseMatrix,
        schema: &'a SurveySchema,
        state: ModelState<T>,
        priors: Priors<T>,
        config: ChainConfig,
    ) -> Result<Self> {
        let (g, q) = (state.params.n_groups(), state.params.n_traits());
        check_inputs(y, schema, g, q, &priors, &config)?;
        state.params.validate(schema.latent_dim())?;
        state.thresholds.validate(schema)?;
        if state.latent.z.dim() != (y.n_rows(), schema.latent_dim())
            || state.latent.theta.dim() != (y.n_rows(), q)
            || state.latent.alloc.len() != y.n_rows()
            || state.latent.alloc.iter().any(|&a| a >= g)
        {
            return Err(Error::DataShape("state does not match the data".into()));
        }
        let layout = LatentLayout::new(schema);
        let loading_prior = LoadingPrior::new(&priors.mu_lambda, &priors.sigma_lambda)?;
        Self::assemble(y, schema, layout, priors, config, loading_prior, state)
    }

    fn assemble(
        y: &'a ResponseMatrix,
        schema: &'a SurveySchema,
        layout: LatentLayout,
        priors: Priors<T>,
        config: ChainConfig,
        loading_prior: LoadingPrior<T>,
        state: ModelState<T>,
    ) -> Result<Self> {
        let g = state.params.n_groups();
        let tuner = ThresholdTuner::new(schema.n_ordered(), priors.sigma2_mh.as_f64());
        let mut class_probs = Array2::zeros((y.n_rows(), g));
        class_probs.fill(1.0 / g as f64);
        Ok(Sampler {
            y,
            schema,
            layout,
            priors,
            config,
            loading_prior,
            state,
            tuner,
            class_probs,
            sweeps_done: 0,
            mask: UpdateMask::default(),
            corruption: Corruption::None,
            decode_violations: 0,
        })
    }

    pub fn state(&self) -> &ModelState<T> {
        &self.state
    }

    pub fn into_state(self) -> ModelState<T> {
        self.state
    }

    /// Replaces the current state (used when data are re-simulated between sweeps).
    pub fn set_state(&mut self, state: ModelState<T>) {
        self.state = state;
    }

    pub fn class_probs(&self) -> &Array2<f64> {
        &self.class_probs
    }

    pub fn tuner(&self) -> &ThresholdTuner {
        &self.tuner
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    pub fn decode_violations(&self) -> u64 {
        self.decode_violations
    }

    pub fn set_mask(&mut self, mask: UpdateMask) {
        self.mask = mask;
    }

    #[doc(hidden)]
    pub fn set_corruption(&mut self, corruption: Corruption) {
        self.corruption = corruption;
    }

    fn observed(&self) -> Observed<'_> {
        Observed { y: self.y, schema: self.schema, layout: &self.layout }
    }

    pub fn log_joint(&self) -> Result<f64> {
        log_joint(&self.state, self.observed(), &self.priors)
    }

    /// One full scan. Returns the number of rows left inconsistent with the
    /// data (always 0 for a correct sampler).
    pub fn sweep(&mut self) -> Result<usize> {
        let key = SweepKey { seed: self.config.seed, sweep: self.sweeps_done as u64 };
        let obs = Observed { y: self.y, schema: self.schema, layout: &self.layout };
        let mask = self.mask;
        let st = &mut self.state;
        let g = st.params.n_groups();
        if mask.latent {
            update_latent(
                &mut st.latent.z,
                &st.latent.theta,
                &st.latent.alloc,
                &st.params,
                &st.thresholds,
                obs,
                key.phase(Phase::Latent),
            );
        }
        let factors = ClusterFactor::all(&st.params)?;
        if mask.allocations {
            update_allocations(
                &st.latent.z,
                &st.params,
                &factors,
                key.phase(Phase::Allocation),
                &mut st.latent.alloc,
                &mut self.class_probs,
            )?;
        }
        if mask.traits {
            let scale = match self.corruption {
                Corruption::TraitVariance(s) => s,
                Corruption::None => 1.0,
            };
            update_traits(
                &st.latent.z,
                &st.params,
                &factors,
                &st.latent.alloc,
                key.phase(Phase::Traits),
                scale,
                &mut st.latent.theta,
            );
        }
        if mask.weights {
            let counts = cluster_counts(&st.latent.alloc, g);
            st.params.pi = update_weights(&counts, &self.priors.alpha, &mut key.phase(Phase::Weights).stream(0));
        }
        if mask.loadings {
            st.params.loadings = update_item_params(
                &st.latent.z,
                &st.latent.theta,
                &st.latent.alloc,
                g,
                &self.loading_prior,
                key,
            )?;
        }
        if mask.thresholds {
            let burning = self.sweeps_done < self.config.burn_in;
            let (lo, hi) = self.config.target_accept;
            let ctx = MhContext {
                obs,
                params: &st.params,
                theta: &st.latent.theta,
                alloc: &st.latent.alloc,
                upper: self.priors.threshold_upper.map(|u| u.as_f64()),
                burning,
                adapt_target: (self.config.adapt_mh && burning).then_some(0.5 * (lo + hi)),
            };
            update_thresholds_mh(&ctx, &mut st.thresholds, &mut st.latent.z, &mut self.tuner, key);
        }
        let bad = decode_mismatches(&st.latent.z, &st.thresholds, obs);
        self.decode_violations += bad as u64;
        self.sweeps_done += 1;
        Ok(bad)
    }

    fn acceptance(&self) -> Vec<ItemAcceptance> {
        (0..self.schema.n_ordered())
            .map(|j| {
                let t = &self.tuner;
                ItemAcceptance {
                    item: self.schema.item(j).name.clone(),
                    attempts: t.attempts[j],
                    accepts: t.accepts[j],
                    rate: t.rate(j),
                    burn_in_rate: (t.burn_attempts[j] > 0)
                        .then(|| t.burn_accepts[j] as f64 / t.burn_attempts[j] as f64),
                    sigma2: t.sigma2(j),
                }
            })
            .collect()
    }

    /// Runs the configured number of sweeps and collects the thinned,
    /// online-relabeled trace.
    pub fn run(mut self) -> Result<Trace<T>> {
        let started = Instant::now();
        let n = self.y.n_rows();
        let g = self.state.params.n_groups();
        let q = self.state.params.n_traits();
        let dim = self.layout.dim();
        let total = self.config.iterations;
        let mut relabeler = OnlineRelabeler::new(n, g);
        let mut snapshots = Vec::with_capacity(self.config.n_snapshots());
        let mut tallies = Array2::<u32>::zeros((n, g));
        let mut z_sum = Array2::<f64>::zeros((n, dim));
        let mut retained = self.config.retain_draws.then(|| RetainedDraws {
            class_probs: Vec::new(),
            allocations: Vec::new(),
            theta: Vec::new(),
        });
        let mut last_perm: Vec<usize> = (0..g).collect();
        for t in 0..total {
            self.sweep()?;
            if (t + 1) % (total / 10).max(1) == 0 {
                log::info!("sweep {}/{} ({:.1}s)", t + 1, total, started.elapsed().as_secs_f64());
            }
            if !self.config.is_snapshot(t) {
                continue;
            }
            let perm = relabeler.assign(&self.class_probs);
            let mut inv = vec![0usize; g];
            for (k, &h) in perm.iter().enumerate() {
                inv[h] = k;
            }
            let st = &self.state;
            let counts_raw = cluster_counts(&st.latent.alloc, g);
            let mut trait_sums = vec![vec![0.0f64; q]; g];
            for (i, &a) in st.latent.alloc.iter().enumerate() {
                tallies[[i, inv[a]]] += 1;
                for k in 0..q {
                    trait_sums[a][k] += st.latent.theta[[i, k]].as_f64();
                }
            }
            z_sum.zip_mut_with(&st.latent.z, |s, &v| *s += v.as_f64());
            let trait_means_raw: Vec<Vec<T>> = trait_sums
                .iter()
                .zip(&counts_raw)
                .map(|(s, &c)| s.iter().map(|&v| T::of(if c > 0 { v / c as f64 } else { 0.0 })).collect())
                .collect();
            let mut snap = Snapshot {
                iteration: t + 1,
                pi: st.params.pi.clone(),
                loadings: st.params.loadings.clone(),
                cuts: st.thresholds.cuts.clone(),
                trait_means: trait_means_raw,
                counts: counts_raw,
                permutation: (0..g).collect(),
                rotations: None,
            };
            snap.permute(&perm);
            snapshots.push(snap);
            if let Some(r) = retained.as_mut() {
                let mut p = Array2::<f32>::zeros((n, g));
                for (k, &h) in perm.iter().enumerate() {
                    p.column_mut(k).assign(&self.class_probs.column(h).mapv(|v| v as f32));
                }
                r.class_probs.push(p);
                r.allocations.push(st.latent.alloc.iter().map(|&a| inv[a] as u16).collect());
                r.theta.push(st.latent.theta.clone());
            }
            last_perm = perm;
        }
        let s = snapshots.len().max(1) as f64;
        let mut inv = vec![0usize; g];
        for (k, &h) in last_perm.iter().enumerate() {
            inv[h] = k;
        }
        let acceptance = self.acceptance();
        log::info!(
            "chain finished: {} sweeps, {} snapshots, {:.1}s",
            total,
            snapshots.len(),
            started.elapsed().as_secs_f64()
        );
        let state = self.state;
        Ok(Trace {
            n_groups: g,
            n_traits: q,
            snapshots,
            tallies,
            z_mean: z_sum.mapv(|v| T::of(v / s)),
            z_last: state.latent.z,
            theta_last: state.latent.theta,
            alloc_last: state.latent.alloc.iter().map(|&a| inv[a]).collect(),
            retained,
            acceptance,
            decode_violations: self.decode_violations,
            rng: RngRecord {
                generator: "ChaCha8 keyed by (seed, sweep, phase)".into(),
                seed: self.config.seed,
                sweeps: total as u64,
            },
        })
    }
}

fn check_inputs<T: Real>(
    y: &ResponseMatrix,
    schema: &SurveySchema,
    n_groups: usize,
    n_traits: usize,
    priors: &Priors<T>,
    config: &ChainConfig,
) -> Result<()> {
    config.validate()?;
    if y.n_rows() == 0 {
        return Err(Error::DataShape("no respondents".into()));
    }
    if y.n_items() != schema.n_items() {
        return Err(Error::DataShape(format!(
            "{} response columns for {} items",
            y.n_items(),
            schema.n_items()
        )));
    }
    if n_groups == 0 || n_groups > config.max_groups {
        return Err(Error::Config(format!(
            "cluster count {n_groups} outside 1..={}",
            config.max_groups
        )));
    }
    if n_traits == 0 || n_traits > config.max_traits {
        return Err(Error::Config(format!(
            "trait dimension {n_traits} outside 1..={}",
            config.max_traits
        )));
    }
    if n_groups > u16::MAX as usize {
        return Err(Error::Config("too many clusters".into()));
    }
    priors.validate(n_groups, n_traits)
}

/// Builds a sampler and runs it to completion.
pub fn run_chain<T: Real>(
    y: &ResponseMatrix,
    schema: &SurveySchema,
    n_groups: usize,
    n_traits: usize,
    priors: Priors<T>,
    config: ChainConfig,
) -> Result<Trace<T>> {
    Sampler::new(y, schema, n_groups, n_traits, priors, config)?.run()
}
