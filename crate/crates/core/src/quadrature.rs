//! Adaptive Gauss–Kronrod quadrature of positive integrands in log space.

use alloc::vec::Vec;

use crate::math::log_sum_exp;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// `ln int_a^b exp(g)` by a single 15-point Kronrod rule, with the embedded
/// 7-point Gauss value.
fn gk15(g: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut v = [0.0; 15];
    for j in 0..7 {
        v[2 * j] = g(c - h * XGK[j]);
        v[2 * j + 1] = g(c + h * XGK[j]);
    }
    v[14] = g(c);
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return (m, m);
    }
    let (mut kron, mut gauss) = (0.0, 0.0);
    for j in 0..7 {
        let pair = libm::exp(v[2 * j] - m) + libm::exp(v[2 * j + 1] - m);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let centre = libm::exp(v[14] - m);
    kron += WGK[7] * centre;
    gauss += WG[3] * centre;
    let lh = libm::log(h) + m;
    (libm::log(kron) + lh, libm::log(gauss) + lh)
}

/// `ln int_a^b exp(g)` by one fixed 15-point Kronrod rule; exact for
/// polynomial integrands up to degree 22.
pub fn kronrod15_log(mut g: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return f64::NEG_INFINITY;
    }
    gk15(&mut g, a, b).0
}

/// Nodes and weights of the `n`-point Gauss–Laguerre rule,
/// `int_0^inf e^{-x} f(x) dx ~ sum w_i f(x_i)`, by Newton iteration on the
/// three-term recurrence.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x: Vec<f64> = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => x[0] + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                x[i - 1] + (1.0 + 2.55 * ai) / (1.9 * ai) * (x[i - 1] - x[i - 2])
            }
        };
        let mut deriv = 1.0;
        let mut prev = 0.0;
        for _ in 0..100 {
            // L_n(z) and L_{n-1}(z).
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
            }
            deriv = nf * (p1 - p2) / z;
            prev = p2;
            let step = p1 / deriv;
            z -= step;
            if libm::fabs(step) <= 1e-15 * z {
                break;
            }
        }
        x.push(z);
        w.push(-1.0 / (deriv * nf * prev));
    }
    (x, w)
}

/// Result of [`integrate_log`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogIntegral {
    /// `ln int exp(g)`.
    pub log_value: f64,
    /// Estimated relative error of the integral.
    pub rel_error: f64,
    pub intervals: usize,
    pub converged: bool,
}

impl LogIntegral {
    pub fn value(&self) -> f64 {
        libm::exp(self.log_value)
    }
}

struct Piece {
    a: f64,
    b: f64,
    log_value: f64,
    log_error: f64,
}

fn piece(g: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Piece {
    let (k, gs) = gk15(g, a, b);
    let log_error = if k == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if gs == f64::NEG_INFINITY || !k.is_finite() || !gs.is_finite() {
        k
    } else {
        // |K - G| = K |1 - exp(G - K)|.
        k + libm::log(libm::fabs(-libm::expm1(gs - k)).max(1e-300))
    };
    Piece { a, b, log_value: k, log_error }
}

/// Globally adaptive integration of `exp(g)` over `[a, b]`, where `g` is the
/// log of a non-negative integrand (`-inf` for zeros). The interval with
/// the largest error estimate is bisected until the total error falls
/// below `rel_tol` times the value or `max_intervals` is reached.
pub fn integrate_log(mut g: impl FnMut(f64) -> f64, a: f64, b: f64, rel_tol: f64, max_intervals: usize) -> LogIntegral {
    if !(b > a) {
        return LogIntegral {
            log_value: f64::NEG_INFINITY,
            rel_error: 0.0,
            intervals: 0,
            converged: true,
        };
    }
    let mut pieces: Vec<Piece> = alloc::vec![piece(&mut g, a, b)];
    let log_tol = libm::log(rel_tol);
    loop {
        let values: Vec<f64> = pieces.iter().map(|p| p.log_value).collect();
        let errors: Vec<f64> = pieces.iter().map(|p| p.log_error).collect();
        let (total, err) = (log_sum_exp(&values), log_sum_exp(&errors));
        // A log of size L fixes the value only to relative ~L * eps; asking
        // for more is asking for rounding noise.
        let floor = libm::log(8.0 * f64::EPSILON * libm::fabs(total)).max(log_tol);
        let converged = total == f64::NEG_INFINITY || err <= total + floor;
        if converged || pieces.len() >= max_intervals || !total.is_finite() {
            return LogIntegral {
                log_value: total,
                rel_error: if total.is_finite() { libm::exp(err - total) } else { 0.0 },
                intervals: pieces.len(),
                converged,
            };
        }
        let worst = (0..pieces.len())
            .max_by(|&i, &j| pieces[i].log_error.total_cmp(&pieces[j].log_error))
            .unwrap_or(0);
        let Piece { a, b, .. } = pieces.swap_remove(worst);
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            // Interval below floating resolution; keep it as is.
            let mut p = piece(&mut g, a, b);
            p.log_error = f64::NEG_INFINITY;
            pieces.push(p);
            continue;
        }
        pieces.push(piece(&mut g, a, m));
        pieces.push(piece(&mut g, m, b));
    }
}
