use ndarray::ArrayView1;

use super::Thresholds;
use crate::scalar::Real;
use crate::special::log_interval_prob;
use crate::survey::{LatentLayout, SurveySchema};

/// P(y = k | λ̃, θ, γ) = Φ(γ_k − m) − Φ(γ_{k−1} − m) with m = μ + λᵀθ.
///
/// `lambda_tilde` is (μ, λ_1..λ_q); `cuts` is γ_1..γ_{K−1}; `k` is 1-based.
pub fn ordinal_response_prob<T: Real>(
    lambda_tilde: ArrayView1<'_, T>,
    theta: ArrayView1<'_, T>,
    cuts: &[T],
    k: usize,
) -> T {
    debug_assert!(k >= 1 && k <= cuts.len() + 1);
    let mut m = lambda_tilde[0].as_f64();
    for (l, t) in lambda_tilde.iter().skip(1).zip(theta.iter()) {
        m += l.as_f64() * t.as_f64();
    }
    let lo = if k == 1 { f64::NEG_INFINITY } else { cuts[k - 2].as_f64() };
    let hi = if k > cuts.len() { f64::INFINITY } else { cuts[k - 1].as_f64() };
    if lo >= hi {
        return T::zero();
    }
    T::of(log_interval_prob(lo - m, hi - m).exp())
}

/// Level k with γ_{k−1} ≤ z < γ_k.
#[inline]
pub fn decode_ordinal<T: Real>(z: T, cuts: &[T]) -> usize {
    1 + cuts.iter().take_while(|&&c| c <= z).count()
}

/// Level 1 when no latent utility is positive, otherwise 1 + the position
/// of the largest one (ties resolved towards the lower index).
#[inline]
pub fn decode_nominal<T: Real>(block: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in block.iter().enumerate().skip(1) {
        if v > block[best] {
            best = k;
        }
    }
    if block[best] > T::zero() {
        best + 2
    } else {
        1
    }
}

/// Which of the three nominal truncation regimes applies to one latent
/// dimension of a nominal block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NominalCase {
    /// y = 1: every utility negative.
    Baseline = 1,
    /// The dimension carrying the observed level: positive maximum.
    Chosen = 2,
    /// Any other dimension: below the chosen one.
    Other = 3,
}

/// Regime of dimension `dim` (1-based within the block) given level `y`.
pub fn nominal_case<T: Real>(y: usize, dim: usize, block: &[T]) -> NominalCase {
    if y == 1 {
        return NominalCase::Baseline;
    }
    if y == dim + 1 && decode_nominal(block) == y {
        NominalCase::Chosen
    } else {
        NominalCase::Other
    }
}

/// Decodes a full latent row into observed levels (canonical order).
pub fn decode_row<T: Real>(
    z: ArrayView1<'_, T>,
    thresholds: &Thresholds<T>,
    schema: &SurveySchema,
    layout: &LatentLayout,
) -> Vec<u16> {
    let o = schema.n_ordered();
    let mut out = Vec::with_capacity(schema.n_items());
    let zs = z.as_slice();
    for j in 0..schema.n_items() {
        let r = layout.range(j);
        let level = if j < o {
            decode_ordinal(z[r.start], &thresholds.cuts[j])
        } else {
            match zs {
                Some(s) => decode_nominal(&s[r]),
                None => decode_nominal(&z.slice(ndarray::s![r]).to_vec()),
            }
        };
        out.push(level as u16);
    }
    out
}
