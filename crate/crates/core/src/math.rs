//! Scalar numerics shared by the estimators: deterministic summation, sample
//! moments, special functions and goodness-of-fit statistics.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

/// A Monte Carlo (or regression) point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
        }
    }

    /// Sample mean and standard error of the mean.
    pub fn from_samples(xs: &[f64]) -> Self {
        let (mean, var) = mean_variance(xs);
        let n = xs.len() as f64;
        Estimate {
            value: mean,
            std_error: if xs.len() > 1 { libm::sqrt(var / n) } else { 0.0 },
        }
    }

    /// |value - target| <= k standard errors + slack.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        libm::fabs(self.value - target) <= k * self.std_error + slack
    }

    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

/// Pairwise summation; the order of additions depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        s
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Mean and unbiased sample variance (two-pass).
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (m, pairwise_sum(&dev) / (xs.len() - 1) as f64)
}

/// Sample variance with the standard error of the variance estimator,
/// `sqrt((m4 - s^4) / n)`.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let (m, var) = mean_variance(xs);
    let n = xs.len() as f64;
    let m4: Vec<f64> = xs.iter().map(|x| libm::pow(x - m, 4.0)).collect();
    let m4 = pairwise_sum(&m4) / n;
    Estimate {
        value: var,
        std_error: libm::sqrt(((m4 - var * var) / n).max(0.0)),
    }
}

/// `ln(sum exp(x_i))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let terms: Vec<f64> = xs.iter().map(|x| libm::exp(x - max)).collect();
    max + libm::log(pairwise_sum(&terms))
}

pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if libm::fabs(del) < libm::fabs(sum) * 1e-16 {
            break;
        }
    }
    sum * libm::exp(-x + a * libm::log(x) - ln_gamma(a))
}

// Lentz's method for the continued fraction of Q(a, x).
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if libm::fabs(d) < TINY {
            d = TINY;
        }
        c = b + an / c;
        if libm::fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if libm::fabs(del - 1.0) < 1e-16 {
            break;
        }
    }
    libm::exp(-x + a * libm::log(x) - ln_gamma(a)) * h
}

/// Chi-squared density with `k` degrees of freedom.
pub fn chi2_pdf(q: f64, k: u32) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    libm::exp(chi2_ln_pdf(q, k))
}

pub fn chi2_ln_pdf(q: f64, k: u32) -> f64 {
    let half = k as f64 / 2.0;
    (half - 1.0) * libm::log(q) - q / 2.0 - half * libm::log(2.0) - ln_gamma(half)
}

pub fn chi2_cdf(q: f64, k: u32) -> f64 {
    gamma_p(k as f64 / 2.0, q / 2.0)
}

pub fn chi2_sf(q: f64, k: u32) -> f64 {
    gamma_q(k as f64 / 2.0, q / 2.0)
}

/// Smallest `q` (found by bisection) with `chi2_sf(q, k) <= tail`.
pub fn chi2_upper_quantile(tail: f64, k: u32) -> f64 {
    let mut hi = k as f64 + 10.0;
    while chi2_sf(hi, k) > tail {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(mid, k) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`.
///
/// Samples above `censor_at` are treated as right-censored: they count in the
/// sample size, and the supremum is only taken over `x <= censor_at`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64, censor_at: f64) -> f64 {
    let mut xs: Vec<f64> = samples.iter().copied().filter(|x| *x <= censor_at).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above).max(below);
    }
    if censor_at.is_finite() {
        // Gap between the last observation and the censoring point.
        let f = cdf(censor_at);
        d = d.max(libm::fabs(f - xs.len() as f64 / n));
    }
    d
}

/// Asymptotic p-value of the KS statistic `d` for sample size `n`, using the
/// Stephens small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = libm::sqrt(n as f64);
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * libm::exp(-2.0 * kf * kf * lambda * lambda);
        sum += term;
        if libm::fabs(term) < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Hill estimator of the upper tail index from the logarithms of positive
/// samples, using the `k` largest order statistics.
///
/// Returns `+inf` when the top order statistics are all equal (no tail).
pub fn hill_tail_index(log_samples: &[f64], k: usize) -> f64 {
    let mut xs: Vec<f64> = log_samples.iter().copied().filter(|x| !x.is_nan()).collect();
    if xs.len() < 2 || k == 0 {
        return f64::NAN;
    }
    let k = k.min(xs.len() - 1);
    xs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let threshold = xs[k];
    if !threshold.is_finite() {
        return 0.0;
    }
    let excess: Vec<f64> = xs[..k].iter().map(|x| x - threshold).collect();
    if excess.iter().any(|x| x.is_infinite()) {
        return 0.0;
    }
    let s = pairwise_sum(&excess);
    if s <= 0.0 {
        f64::INFINITY
    } else {
        k as f64 / s
    }
}
