//! Standard normal distribution functions evaluated in `f64`.
//!
//! All tail quantities are computed on the complementary side so that
//! probabilities of order 1e-300 keep full relative precision.

use libm::erfc;
use statrs::function::erf::erfc_inv;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Density of N(0, 1).
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn log_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x).
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x / SQRT_2)
    }
}

/// 1 − Φ(x), accurate for large positive `x`.
pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

/// Mills ratio R(x) = (1 − Φ(x)) / φ(x) for x ≥ 0; finite for every x.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0 || x.is_nan());
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < 25.0 {
        return norm_sf(x) / norm_pdf(x);
    }
    // Lentz continued fraction R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))).
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..200 {
        let a = n as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// ln Φ(x), finite for every finite `x`.
pub fn log_norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        mills_ratio(-x).ln() + log_norm_pdf(x)
    }
}

/// ln(Φ(b) − Φ(a)) for a < b, accurate in both tails.
pub fn log_interval_prob(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        // Φ(b) − Φ(a) = Q(a) − Q(b) = Q(a)(1 − Q(b)/Q(a)).
        let la = log_norm_cdf(-a);
        let lb = log_norm_cdf(-b);
        la + (-(lb - la).exp()).ln_1p()
    } else if b < 0.0 {
        log_interval_prob(-b, -a)
    } else {
        (norm_cdf(b) - norm_cdf(a)).ln()
    }
}

/// Φ⁻¹(p) for p in [0, 1].
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else if p > 0.5 {
        -lower_ppf(1.0 - p)
    } else {
        lower_ppf(p)
    }
}

/// Φ⁻¹(p) for p ≤ 1/2: initial guess polished by one Newton step on ln Φ.
fn lower_ppf(p: f64) -> f64 {
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() || x >= 0.0 {
        return x;
    }
    // d ln Φ(x)/dx = φ(x)/Φ(x) = 1/R(-x)
    x - (log_norm_cdf(x) - p.ln()) * mills_ratio(-x)
}

/// Q⁻¹(p): the `x` with 1 − Φ(x) = p, accurate for tiny `p`.
pub fn norm_isf(p: f64) -> f64 {
    -norm_ppf(p)
}
