use statrs::function::gamma::ln_gamma;

use super::updates::{decode_mismatches, Observed};
use super::{ModelState, Priors};
use crate::error::Result;
use crate::linalg::{chol_logdet, cholesky, forward_subst};
use crate::scalar::Real;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log density of the augmented state (Z, Θ, L, π, Λ̃, Γ) together with the
/// data, up to the constant of the flat threshold prior. Returns −∞ when Z
/// does not decode to Y or a cut lies outside a bounded prior.
pub fn log_joint<T: Real>(state: &ModelState<T>, obs: Observed<'_>, priors: &Priors<T>) -> Result<f64> {
    if decode_mismatches(&state.latent.z, &state.thresholds, obs) > 0 {
        return Ok(f64::NEG_INFINITY);
    }
    if let Some(u) = priors.threshold_upper {
        if state.thresholds.cuts.iter().flatten().any(|&c| c >= u) {
            return Ok(f64::NEG_INFINITY);
        }
    }
    let params = &state.params;
    let (z, theta, alloc) = (&state.latent.z, &state.latent.theta, &state.latent.alloc);
    let dim = z.ncols() as f64;
    let q = theta.ncols();
    let mut lp = 0.0;
    for (i, &g) in alloc.iter().enumerate() {
        lp += params.pi[g].as_f64().ln();
        let th = theta.row(i);
        let tt: f64 = th.iter().map(|t| t.as_f64() * t.as_f64()).sum();
        lp -= 0.5 * (q as f64 * LN_2PI + tt);
        let lt = &params.loadings[g];
        let mut rr = 0.0;
        for (d, &zv) in z.row(i).iter().enumerate() {
            let row = lt.row(d);
            let mut m = row[0].as_f64();
            for k in 0..q {
                m += row[k + 1].as_f64() * th[k].as_f64();
            }
            rr += (zv.as_f64() - m).powi(2);
        }
        lp -= 0.5 * (dim * LN_2PI + rr);
    }
    let alpha: Vec<f64> = priors.alpha.iter().map(|a| a.as_f64()).collect();
    lp += ln_gamma(alpha.iter().sum()) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>();
    lp += params
        .pi
        .iter()
        .zip(&alpha)
        .map(|(p, a)| (a - 1.0) * p.as_f64().ln())
        .sum::<f64>();
    let l = cholesky(priors.sigma_lambda.view())?;
    let w = q + 1;
    let logdet = chol_logdet(l.view()).as_f64();
    let mut r = vec![T::zero(); w];
    for lt in &params.loadings {
        for row in lt.rows() {
            for k in 0..w {
                r[k] = row[k] - priors.mu_lambda[k];
            }
            forward_subst(l.view(), &mut r);
            let quad: f64 = r.iter().map(|v| v.as_f64() * v.as_f64()).sum();
            lp -= 0.5 * (w as f64 * LN_2PI + logdet + quad);
        }
    }
    Ok(lp)
}
