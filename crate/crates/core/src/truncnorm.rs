//! Univariate Gaussians truncated to an interval.
//!
//! Sampling picks one of three exact schemes per standardized interval
//! `(a, b)`:
//!
//! * uniform proposal with rejection when the density varies by at most a
//!   factor `e` across the interval (narrow or central intervals);
//! * exponential proposal with rejection when the interval lies on one side
//!   of the mode;
//! * plain normal proposal with rejection when the interval contains the
//!   mode (acceptance is then at least 0.42).

use rand::Rng;
use rand_distr::Exp1;

use crate::rng::std_normal;
use crate::scalar::Real;
use crate::special::{mills_ratio, norm_cdf, norm_pdf};

const MAX_RETRIES: usize = 64;

/// Open interval `(lower, upper)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncInterval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Real> TruncInterval<T> {
    /// # Panics
    /// If `lower >= upper` or either end is NaN.
    #[track_caller]
    pub fn new(lower: T, upper: T) -> Self {
        assert!(
            lower < upper,
            "degenerate truncation interval ({lower}, {upper})"
        );
        TruncInterval { lower, upper }
    }

    pub fn try_new(lower: T, upper: T) -> Option<Self> {
        (lower < upper).then_some(TruncInterval { lower, upper })
    }

    pub fn real_line() -> Self {
        TruncInterval {
            lower: T::neg_infinity(),
            upper: T::infinity(),
        }
    }

    pub fn above(lower: T) -> Self {
        Self::new(lower, T::infinity())
    }

    pub fn below(upper: T) -> Self {
        Self::new(T::neg_infinity(), upper)
    }

    #[inline]
    pub fn contains_strictly(&self, x: T) -> bool {
        self.lower < x && x < self.upper
    }
}

/// Draw from N(mean, 1) restricted to `interval`.
pub fn sample_truncnorm<T: Real, R: Rng + ?Sized>(
    mean: T,
    interval: TruncInterval<T>,
    rng: &mut R,
) -> T {
    sample_truncnorm_scaled(mean, T::one(), interval, rng)
}

/// Draw from N(mean, sd²) restricted to `interval`.
pub fn sample_truncnorm_scaled<T: Real, R: Rng + ?Sized>(
    mean: T,
    sd: T,
    interval: TruncInterval<T>,
    rng: &mut R,
) -> T {
    debug_assert!(sd > T::zero());
    let (m, s) = (mean.as_f64(), sd.as_f64());
    let a = (interval.lower.as_f64() - m) / s;
    let b = (interval.upper.as_f64() - m) / s;
    for _ in 0..MAX_RETRIES {
        let x = T::of(m + s * standard_truncnorm(a, b, rng));
        if interval.contains_strictly(x) {
            return x;
        }
    }
    // Only reachable when the interval holds a handful of representable values.
    let mid = interval.lower / (T::one() + T::one()) + interval.upper / (T::one() + T::one());
    if interval.contains_strictly(mid) {
        mid
    } else {
        panic!("no representable value strictly inside ({}, {})", interval.lower, interval.upper)
    }
}

/// Draw from N(0, 1) restricted to (a, b), a < b.
pub fn standard_truncnorm<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b <= 0.0 {
        return -standard_truncnorm(-b, -a, rng);
    }
    // Here b > 0. Nearest point to the mode and farthest finite point.
    let near = if a > 0.0 { a } else { 0.0 };
    if b.is_finite() && a.is_finite() {
        let far = a.abs().max(b.abs());
        if 0.5 * (far * far - near * near) <= 1.0 {
            return uniform_rejection(a, b, near, rng);
        }
    }
    if a >= 0.0 {
        return exponential_rejection(a, b, rng);
    }
    // a < 0 < b and the interval is wide, so it holds at least Φ(√2) − ½ of the mass.
    loop {
        let x: f64 = std_normal(rng);
        if a < x && x < b {
            return x;
        }
    }
}

fn uniform_rejection<R: Rng + ?Sized>(a: f64, b: f64, near: f64, rng: &mut R) -> f64 {
    loop {
        let x = a + (b - a) * rng.random::<f64>();
        if rng.sample::<f64, _>(Exp1) >= 0.5 * (x * x - near * near) {
            return x;
        }
    }
}

fn exponential_rejection<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let x = a + rng.sample::<f64, _>(Exp1) / rate;
        if x >= b {
            continue;
        }
        let d = x - rate;
        if rng.sample::<f64, _>(Exp1) >= 0.5 * d * d {
            return x;
        }
    }
}

/// Mean and variance of N(mean, 1) truncated to `interval`.
pub fn truncnorm_moments<T: Real>(mean: T, interval: TruncInterval<T>) -> (T, T) {
    let m = mean.as_f64();
    let (mu, var) = standard_moments(interval.lower.as_f64() - m, interval.upper.as_f64() - m);
    (T::of(m + mu), T::of(var))
}

fn standard_moments(a: f64, b: f64) -> (f64, f64) {
    debug_assert!(a < b);
    if b <= 0.0 {
        let (mu, var) = standard_moments(-b, -a);
        return (-mu, var);
    }
    if a.is_finite() && b.is_finite() && b - a <= 2.0 {
        return simpson_moments(a, b);
    }
    if a >= 0.0 {
        // Divide numerator and normalizer by φ(a); r = φ(b)/φ(a).
        let (r, rm_b, br) = if b.is_finite() {
            let r = (-0.5 * (b - a) * (b + a)).exp();
            (r, r * mills_ratio(b), b * r)
        } else {
            (0.0, 0.0, 0.0)
        };
        let z = mills_ratio(a) - rm_b;
        let mu = (1.0 - r) / z;
        let second = 1.0 + (a - br) / z;
        (mu, (second - mu * mu).max(0.0))
    } else {
        let z = norm_cdf(b) - norm_cdf(a);
        let (pa, apa) = if a.is_finite() {
            (norm_pdf(a), a * norm_pdf(a))
        } else {
            (0.0, 0.0)
        };
        let (pb, bpb) = if b.is_finite() {
            (norm_pdf(b), b * norm_pdf(b))
        } else {
            (0.0, 0.0)
        };
        let mu = (pa - pb) / z;
        let second = 1.0 + (apa - bpb) / z;
        (mu, (second - mu * mu).max(0.0))
    }
}

/// Moments on a short finite interval by composite Simpson quadrature of
/// the density relative to its value at the point nearest the mode.
fn simpson_moments(a: f64, b: f64) -> (f64, f64) {
    let near = if a > 0.0 {
        a
    } else if b < 0.0 {
        b
    } else {
        0.0
    };
    let n = 2000;
    let h = (b - a) / n as f64;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for k in 0..=n {
        let x = a + h * k as f64;
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = w * (-0.5 * (x * x - near * near)).exp();
        s0 += f;
        s1 += f * x;
        s2 += f * x * x;
    }
    let mu = s1 / s0;
    (mu, (s2 / s0 - mu * mu).max(0.0))
}

/// CDF at `x` of N(mean, 1) truncated to `(lower, upper)`; used as a
/// goodness-of-fit reference.
pub fn truncnorm_cdf(x: f64, mean: f64, lower: f64, upper: f64) -> f64 {
    standard_cdf(x - mean, lower - mean, upper - mean)
}

fn standard_cdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= a {
        return 0.0;
    }
    if x >= b {
        return 1.0;
    }
    if a >= 0.0 {
        // Survival differences scaled by 1/φ(a) to survive deep tails.
        let rel = |t: f64| -> f64 {
            if t.is_infinite() {
                0.0
            } else {
                (-0.5 * (t - a) * (t + a)).exp() * mills_ratio(t)
            }
        };
        (rel(a) - rel(x)) / (rel(a) - rel(b))
    } else if b <= 0.0 {
        1.0 - standard_cdf(-x, -b, -a)
    } else {
        (norm_cdf(x) - norm_cdf(a)) / (norm_cdf(b) - norm_cdf(a))
    }
}
