use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::Cell;
use core::fmt;

use super::mc::{capped_lgd, lgd_factor};
use crate::credit::{simulate_default, DefaultModel, Intensity};
use crate::error::{Error, Result};
use crate::math::{chi2_cdf, chi2_ln_pdf, chi2_upper_quantile, log_sum_exp};
use crate::parallel::try_map_indexed;
use crate::paths::TimeGrid;
use crate::quadrature::{gauss_laguerre, integrate_log, kronrod15_log};

/// Law of the loss given default.
#[derive(Clone)]
pub enum LgdDensity {
    Point(f64),
    Uniform { lo: f64, hi: f64 },
    /// The deterministic capped rule of [`super::LgdLaw::Capped`].
    Capped { max: f64, cap: f64 },
    /// Density on `[0, 1]`.
    Fn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for LgdDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LgdDensity::Point(l) => f.debug_tuple("Point").field(l).finish(),
            LgdDensity::Uniform { lo, hi } => f.debug_struct("Uniform").field("lo", lo).field("hi", hi).finish(),
            LgdDensity::Capped { max, cap } => f.debug_struct("Capped").field("max", max).field("cap", cap).finish(),
            LgdDensity::Fn(_) => f.write_str("Fn(..)"),
        }
    }
}

/// Density of the default time.
#[derive(Debug, Clone)]
pub enum TauDensity {
    /// `g(t) = lambda_t exp(-Lambda_t)` for a deterministic intensity.
    Intensity(Intensity),
    /// Tabulated `g` on increasing `times`, linearly interpolated.
    Tabulated { times: Vec<f64>, density: Vec<f64>, std_error: Vec<f64> },
}

impl TauDensity {
    /// Breakpoints of `[0, t_max]` where the density may have a kink.
    fn cuts(&self, t_max: f64) -> Vec<f64> {
        let mut cuts = alloc::vec![0.0];
        if let TauDensity::Tabulated { times, .. } = self {
            cuts.extend(times.iter().copied().filter(|t| *t > 0.0 && *t < t_max));
        }
        cuts.push(t_max);
        cuts
    }

    fn ln_density(&self, t: f64) -> f64 {
        match self {
            TauDensity::Intensity(i) => {
                let l = i.rate(t).unwrap_or(0.0);
                if l > 0.0 {
                    libm::log(l) - i.cumulative(t).unwrap_or(0.0)
                } else {
                    f64::NEG_INFINITY
                }
            }
            TauDensity::Tabulated { times, density, .. } => {
                let k = times.partition_point(|x| *x <= t).clamp(1, times.len() - 1);
                let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                let g = density[k - 1] + w * (density[k] - density[k - 1]);
                if g > 0.0 {
                    libm::log(g)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// `g(t) = E[lambda_t exp(-Lambda_t)]` on `grid` for a stochastic intensity,
/// estimated from `n_paths` simulated intensity paths.
pub fn tau_density_from_simulation(model: &DefaultModel, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<TauDensity> {
    let sim = simulate_default(model, grid, n_paths, seed)?;
    let (Some(lam), Some(cum)) = (&sim.intensity, &sim.cumulative) else {
        return Err(Error::config("tabulated default density needs a stochastic intensity model"));
    };
    let mut density = Vec::with_capacity(grid.len());
    let mut std_error = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let xs: Vec<f64> = (0..n_paths)
            .map(|p| lam.value(p, i, 0) * libm::exp(-cum.value(p, i, 0)))
            .collect();
        let e = crate::math::Estimate::from_samples(&xs);
        density.push(e.value);
        std_error.push(e.std_error);
    }
    Ok(TauDensity::Tabulated {
        times: grid.times().to_vec(),
        density,
        std_error,
    })
}

/// Marginal laws of `(LGD_tau, tau, Q^2_tau)` for the quadrature.
#[derive(Debug, Clone)]
pub struct DensitySpec {
    pub lgd: LgdDensity,
    pub tau: TauDensity,
    /// Degrees of freedom of `Q^2`.
    pub k: u32,
    /// Condition on `tau <= window` (matching censored Monte Carlo); without
    /// it the default time is truncated where its mass reaches `1 - 1e-6`.
    pub tau_window: Option<f64>,
}

/// Joint density `rho(l, t, q)` on `[0, 1] x [0, T] x (0, inf)`.
pub type JointDensity = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone, Default)]
pub enum QuadratureMode {
    /// Product of the marginals in the `DensitySpec`.
    #[default]
    Independent,
    Joint(JointDensity),
}

/// Tolerances and refinement schedule of the quadrature.
#[derive(Debug, Clone)]
pub struct QuadratureSettings {
    /// Relative change below which two successive refinements count as
    /// converged.
    pub cauchy_tol: f64,
    /// Number of halvings of `q_min`.
    pub halvings: usize,
    /// Growth factor of the truncated integrals that certifies divergence.
    pub divergence_growth: f64,
    /// Mass of `tau` beyond the truncation point when unwindowed.
    pub tau_tail: f64,
    /// Chi-squared mass above `Q_max`.
    pub q_upper_tail: f64,
    /// Chi-squared mass below the first `q_min`.
    pub q_lower_tail: f64,
    /// Relative tolerance of the innermost adaptive integral.
    pub inner_tol: f64,
    /// Relative tolerance of the outer adaptive integrals.
    pub outer_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            cauchy_tol: 1e-4,
            halvings: 20,
            divergence_growth: 1e6,
            tau_tail: 1e-6,
            q_upper_tail: 1e-8,
            q_lower_tail: 1e-6,
            inner_tol: 1e-10,
            outer_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadratureOutcome {
    Converged { value: f64 },
    /// Truncated integrals grew monotonically by more than the certifying
    /// factor; `log_growth` is `ln(I_last / I_first)`.
    Divergent { log_growth: f64 },
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureReport {
    pub outcome: QuadratureOutcome,
    /// Lower truncation points, halving.
    pub q_min: Vec<f64>,
    /// `ln` of the truncated integral at each `q_min`.
    pub log_truncated: Vec<f64>,
    pub t_max: f64,
    pub q_max: f64,
    /// True when every inner adaptive integration met its tolerance.
    pub integrals_converged: bool,
}

impl QuadratureReport {
    pub fn value(&self) -> Option<f64> {
        match self.outcome {
            QuadratureOutcome::Converged { value } => Some(value),
            _ => None,
        }
    }
}

const MAX_PIECES: usize = 400;

fn chi2_lower_quantile(mass: f64, k: u32) -> f64 {
    let (mut lo, mut hi) = (-700.0f64, libm::log(k as f64 + 10.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(libm::exp(mid), k) < mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    libm::exp(hi)
}

fn validate(spec: &DensitySpec, t_max: f64) -> Result<f64> {
    match &spec.lgd {
        LgdDensity::Point(l) if !(0.0..=1.0).contains(l) => return Err(Error::config("LGD point outside [0, 1]")),
        LgdDensity::Uniform { lo, hi } if !(0.0 <= *lo && lo < hi && *hi <= 1.0) => {
            return Err(Error::config("LGD uniform law needs 0 <= lo < hi <= 1"))
        }
        LgdDensity::Capped { max, cap } if !((0.0..=1.0).contains(max) && *cap >= 0.0) => {
            return Err(Error::config("capped LGD needs max in [0, 1] and cap >= 0"))
        }
        LgdDensity::Fn(f) => {
            let mass = integrate_log(|l| ln_pos(f(l)), 0.0, 1.0, 1e-10, MAX_PIECES).value();
            if (mass - 1.0).abs() > 1e-6 {
                return Err(Error::config(alloc::format!("LGD density integrates to {mass}, not 1")));
            }
        }
        _ => {}
    }
    if spec.k == 0 {
        return Err(Error::config("Q^2 needs K >= 1"));
    }
    if let TauDensity::Tabulated { times, density, .. } = &spec.tau {
        if times.len() < 2 || times.len() != density.len() || density.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::config("tabulated default density is malformed"));
        }
    }
    // Mass of tau on [0, t_max], by quadrature of the density.
    let pieces: Vec<f64> = spec
        .tau
        .cuts(t_max)
        .windows(2)
        .map(|w| integrate_log(|t| spec.tau.ln_density(t), w[0], w[1], 1e-12, MAX_PIECES).log_value)
        .collect();
    let mass = libm::exp(log_sum_exp(&pieces));
    if !(mass > 0.0) {
        return Err(Error::config("default-time density has no mass on the domain"));
    }
    if spec.tau_window.is_none() {
        if let TauDensity::Intensity(i) = &spec.tau {
            let expected = -libm::expm1(-i.cumulative(t_max).unwrap_or(0.0));
            if (mass - expected).abs() > 1e-6 {
                return Err(Error::config(alloc::format!("default-time density integrates to {mass}, expected {expected}")));
            }
        }
    }
    Ok(mass)
}

fn ln_pos(x: f64) -> f64 {
    if x > 0.0 {
        libm::log(x)
    } else {
        f64::NEG_INFINITY
    }
}

/// Drop of the exponent `s w^2` across one Kronrod piece of [`UniformMgf`].
const MGF_STEP: f64 = 4.0;
/// Laguerre nodes used once the peak is sharp.
const MGF_LAGUERRE: usize = 24;
/// `s w_hi^2` above which the Laguerre rule is used; the largest node stays
/// well inside the region where `w > 0`.
const MGF_SHARP: f64 = 400.0;

/// `ln E[exp(c(L) s)]` for `L` uniform on `[lo, hi]` and `c(l) = (2l/(2-l))^2`.
///
/// In `w = 2l/(2-l)` the integrand is `4/(2+w)^2 exp(s w^2) / (hi - lo)`,
/// smooth on `[0, 2]`. With `x = s (w_hi^2 - w^2)` it becomes
/// `exp(s w_hi^2 - x) 2 / (s w (2+w)^2)`, whose non-exponential factor varies
/// on the scale `s w_hi^2`; a Gauss–Laguerre rule handles that when the
/// scale is large and the support spans more than 60 e-folds. Otherwise the
/// `w` interval is cut where `s w^2` has dropped by multiples of `MGF_STEP`,
/// with one fixed Kronrod rule per piece, until `40 + ln(1 + s)` below the
/// peak: the first piece is `O(1/s)` wide, so the rest is below `1e-16` of
/// the total.
#[derive(Debug, Clone)]
pub struct UniformMgf {
    lo: f64,
    hi: f64,
    wl: f64,
    wh: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UniformMgf {
    pub fn new(lo: f64, hi: f64) -> Self {
        let w = |l: f64| 2.0 * l / (2.0 - l);
        let (nodes, weights) = gauss_laguerre(MGF_LAGUERRE);
        UniformMgf {
            lo,
            hi,
            wl: w(lo),
            wh: w(hi),
            nodes,
            weights,
        }
    }

    pub fn ln(&self, s: f64) -> f64 {
        let (wl, wh) = (self.wl, self.wh);
        let peak = s * wh * wh;
        if peak >= MGF_SHARP && s * (wh * wh - wl * wl) >= 60.0 {
            let terms: Vec<f64> = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(x, wt)| {
                    let w = libm::sqrt(wh * wh - x / s);
                    libm::log(wt * 2.0 / (s * w * (2.0 + w) * (2.0 + w)))
                })
                .collect();
            return peak + log_sum_exp(&terms) - libm::log(self.hi - self.lo);
        }
        let g = |x: f64| libm::log(4.0) - 2.0 * libm::log(2.0 + x) + s * x * x;
        let max_drop = 40.0 + libm::log1p(s.max(0.0));
        let mut logs = Vec::new();
        let mut right = wh;
        let mut drop = 0.0;
        while drop < max_drop {
            drop += MGF_STEP;
            let w2 = if s > 0.0 { wh * wh - drop / s } else { f64::NEG_INFINITY };
            let left = if w2 > wl * wl { libm::sqrt(w2) } else { wl };
            logs.push(kronrod15_log(g, left, right));
            if left <= wl {
                break;
            }
            right = left;
        }
        log_sum_exp(&logs) - libm::log(self.hi - self.lo)
    }
}

fn t_max_of(spec: &DensitySpec, settings: &QuadratureSettings) -> Result<f64> {
    if let Some(w) = spec.tau_window {
        if !(w > 0.0) {
            return Err(Error::config("tau window must be positive"));
        }
        return Ok(w);
    }
    match &spec.tau {
        TauDensity::Intensity(i) => {
            let t = i.inverse_cumulative(-libm::log(settings.tau_tail)).unwrap_or(f64::INFINITY);
            if !t.is_finite() {
                return Err(Error::config("default time has too little mass to truncate; set a tau window"));
            }
            Ok(t)
        }
        TauDensity::Tabulated { times, .. } => Ok(times[times.len() - 1]),
    }
}

struct Problem<'a> {
    spec: &'a DensitySpec,
    mode: &'a QuadratureMode,
    t_max: f64,
    q_max: f64,
    ln_tau_mass: f64,
    inner_tol: f64,
    outer_tol: f64,
}

impl Problem<'_> {
    /// `ln int_0^{t_max} exp(g(t)) dt`, split where the density has kinks.
    fn over_tau(&self, mut g: impl FnMut(f64) -> f64) -> (f64, bool) {
        let mut logs = Vec::new();
        let mut ok = true;
        for w in self.spec.tau.cuts(self.t_max).windows(2) {
            let r = integrate_log(&mut g, w[0], w[1], self.outer_tol, MAX_PIECES);
            ok &= r.converged;
            logs.push(r.log_value);
        }
        (log_sum_exp(&logs), ok)
    }

    /// `ln int_{q_min}^{q_max} chi2(q) exp(expo(q)) dq` in `u = ln q`.
    fn q_integral(&self, q_min: f64, expo: impl Fn(f64) -> f64, kink: Option<f64>) -> (f64, bool) {
        let k = self.spec.k;
        let mut g = |u: f64| {
            let q = libm::exp(u);
            chi2_ln_pdf(q, k) + u + expo(q)
        };
        let (a, b) = (libm::log(q_min), libm::log(self.q_max));
        let mut cuts = alloc::vec![a];
        if let Some(q) = kink {
            let u = libm::log(q);
            if u > a && u < b {
                cuts.push(u);
            }
        }
        cuts.push(b);
        let mut logs = Vec::new();
        let mut ok = true;
        for w in cuts.windows(2) {
            let r = integrate_log(&mut g, w[0], w[1], self.inner_tol, MAX_PIECES);
            ok &= r.converged;
            logs.push(r.log_value);
        }
        (log_sum_exp(&logs), ok)
    }

    /// `ln E[exp(...); q >= q_min]` for a fixed LGD value.
    fn at_lgd(&self, q_min: f64, l: f64) -> (f64, bool) {
        let c = lgd_factor(l);
        let mut ok = true;
        let (v, conv) = self.over_tau(|t| {
            let (iq, conv) = self.q_integral(q_min, |q| c * t / q, None);
            ok &= conv;
            self.spec.tau.ln_density(t) + iq
        });
        (v - self.ln_tau_mass, ok && conv)
    }

    fn truncated(&self, q_min: f64) -> (f64, bool) {
        if let QuadratureMode::Joint(rho) = self.mode {
            return self.joint(q_min, rho);
        }
        match &self.spec.lgd {
            LgdDensity::Point(l) => self.at_lgd(q_min, *l),
            LgdDensity::Capped { max, cap } => {
                let c = lgd_factor(*max);
                let mut ok = true;
                let (v, conv) = self.over_tau(|t| {
                    let expo = |q: f64| lgd_factor(capped_lgd(*max, *cap, t, q)) * t / q;
                    // The cap binds below q = c t / cap.
                    let kink = if *cap > 0.0 { Some(c * t / cap) } else { None };
                    let (iq, conv) = self.q_integral(q_min, expo, kink);
                    ok &= conv;
                    self.spec.tau.ln_density(t) + iq
                });
                (v - self.ln_tau_mass, ok && conv)
            }
            LgdDensity::Uniform { lo, hi } => {
                let mgf = UniformMgf::new(*lo, *hi);
                self.over_lgd(q_min, |s| (mgf.ln(s), true))
            }
            LgdDensity::Fn(f) => self.over_lgd(q_min, |s| {
                let r = integrate_log(|l| ln_pos(f(l)) + lgd_factor(l) * s, 0.0, 1.0, self.inner_tol, MAX_PIECES);
                (r.log_value, r.converged)
            }),
        }
    }

    /// Integrates the LGD innermost: for fixed `(t, q)` the LGD integral is
    /// `ln E[exp(c(L) s)]` at `s = t / q`, smooth in `s` even where it peaks
    /// sharply in `l`.
    fn over_lgd(&self, q_min: f64, ln_mgf: impl Fn(f64) -> (f64, bool)) -> (f64, bool) {
        let ok = Cell::new(true);
        let (v, conv) = self.over_tau(|t| {
            let (iq, conv) = self.q_integral(
                q_min,
                |q| {
                    let (m, conv) = ln_mgf(t / q);
                    if !conv {
                        ok.set(false);
                    }
                    m
                },
                None,
            );
            if !conv {
                ok.set(false);
            }
            self.spec.tau.ln_density(t) + iq
        });
        (v - self.ln_tau_mass, ok.get() && conv)
    }

    /// Joint density integrated over the support of the LGD marginal; a
    /// point LGD fixes `l` and reads `rho` as a density in `(t, q)`.
    fn joint(&self, q_min: f64, rho: &JointDensity) -> (f64, bool) {
        let mut ok = true;
        let (a, b) = (libm::log(q_min), libm::log(self.q_max));
        let mut at_l = |l: f64| {
            let c = lgd_factor(l);
            let r = integrate_log(
                |t| {
                    let r = integrate_log(
                        |u| {
                            let q = libm::exp(u);
                            ln_pos(rho(l, t, q)) + u + c * t / q
                        },
                        a,
                        b,
                        self.inner_tol,
                        MAX_PIECES,
                    );
                    ok &= r.converged;
                    r.log_value
                },
                0.0,
                self.t_max,
                self.outer_tol,
                MAX_PIECES,
            );
            ok &= r.converged;
            r.log_value
        };
        let (lo, hi) = match &self.spec.lgd {
            LgdDensity::Point(l) => return (at_l(*l), ok),
            LgdDensity::Uniform { lo, hi } => (*lo, *hi),
            _ => (0.0, 1.0),
        };
        let r = integrate_log(&mut at_l, lo, hi, self.outer_tol, MAX_PIECES);
        (r.log_value, ok && r.converged)
    }
}

/// Quadrature of `E[exp((2l/(2-l))^2 t / q)]` over `[0,1] x [0,T] x [q_min, Q_max]`
/// with `q_min` halved repeatedly.
///
/// Returns a value once two successive refinements change the integral by
/// less than `cauchy_tol`; otherwise, if the truncated integrals grow
/// monotonically by more than `divergence_growth`, a divergence certificate.
pub fn novikov_quadrature(spec: &DensitySpec, mode: &QuadratureMode, settings: &QuadratureSettings) -> Result<QuadratureReport> {
    if matches!(mode, QuadratureMode::Joint(_)) && matches!(spec.lgd, LgdDensity::Capped { .. }) {
        return Err(Error::config("joint quadrature needs an LGD law with a density or a point mass"));
    }
    let t_max = t_max_of(spec, settings)?;
    let mass = validate(spec, t_max)?;
    let q_max = chi2_upper_quantile(settings.q_upper_tail, spec.k);
    let q0 = chi2_lower_quantile(settings.q_lower_tail, spec.k);
    let problem = Problem {
        spec,
        mode,
        t_max,
        q_max,
        ln_tau_mass: libm::log(mass),
        inner_tol: settings.inner_tol,
        outer_tol: settings.outer_tol,
    };
    let q_min: Vec<f64> = (0..=settings.halvings).map(|j| q0 / libm::pow(2.0, j as f64)).collect();
    let levels = try_map_indexed(q_min.len(), |j| Ok(problem.truncated(q_min[j])))?;
    let log_truncated: Vec<f64> = levels.iter().map(|l| l.0).collect();
    let integrals_converged = levels.iter().all(|l| l.1);

    let change = |j: usize| libm::fabs(libm::expm1(log_truncated[j] - log_truncated[j - 1]));
    let mut outcome = QuadratureOutcome::Unresolved;
    for j in 2..log_truncated.len() {
        if change(j) < settings.cauchy_tol && change(j - 1) < settings.cauchy_tol {
            outcome = QuadratureOutcome::Converged {
                value: libm::exp(log_truncated[j]),
            };
            break;
        }
    }
    if outcome == QuadratureOutcome::Unresolved {
        let monotone = log_truncated.windows(2).all(|w| w[1] >= w[0]);
        let log_growth = log_truncated[log_truncated.len() - 1] - log_truncated[0];
        if monotone && log_growth > libm::log(settings.divergence_growth) {
            outcome = QuadratureOutcome::Divergent { log_growth };
        }
    }
    Ok(QuadratureReport {
        outcome,
        q_min,
        log_truncated,
        t_max,
        q_max,
        integrals_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(lgd: LgdDensity, k: u32, window: Option<f64>) -> DensitySpec {
        DensitySpec {
            lgd,
            tau: TauDensity::Intensity(Intensity::Constant(0.02)),
            k,
            tau_window: window,
        }
    }

    #[test]
    fn uniform_mgf_matches_adaptive_quadrature() {
        for &(lo, hi) in &[(0.0, 1.0), (0.3, 0.5), (0.0, 1e-3)] {
            let mgf = UniformMgf::new(lo, hi);
            for &s in &[0.0, 0.5, 10.0, 150.0, 1e3, 1e4, 1e6, 1e10] {
                let slow = integrate_log(|l| lgd_factor(l) * s - libm::log(hi - lo), lo, hi, 1e-13, 2000);
                let fast = mgf.ln(s);
                assert!(slow.converged);
                // Absolute in the log, up to the resolution of the log itself.
                let tol = 1e-11 + 1e-15 * slow.log_value.abs();
                assert!((fast - slow.log_value).abs() < tol, "{lo} {hi} {s}: {fast} vs {slow:?}");
            }
        }
    }

    #[test]
    fn zero_lgd_limit_is_one() {
        let r = novikov_quadrature(
            &spec(LgdDensity::Uniform { lo: 0.0, hi: 1e-6 }, 4, Some(30.0)),
            &QuadratureMode::Independent,
            &QuadratureSettings { halvings: 4, ..Default::default() },
        )
        .unwrap();
        let v = r.value().unwrap();
        // Truncated chi-squared mass is 1 - 1e-6 - 1e-8 at most.
        assert!((v - 1.0).abs() < 2e-6, "{r:?}");
    }

    #[test]
    fn constant_lgd_diverges() {
        let r = novikov_quadrature(
            &spec(LgdDensity::Point(0.4), 4, None),
            &QuadratureMode::Independent,
            &QuadratureSettings::default(),
        )
        .unwrap();
        assert!(matches!(r.outcome, QuadratureOutcome::Divergent { .. }), "{r:?}");
        // Lower bound from the q -> 0 analysis: at the deepest q_min the
        // integrand over t near T_max alone exceeds exp(c t / q_min) times a
        // polynomial factor.
        let c = 0.25;
        let last = *r.log_truncated.last().unwrap();
        let q = *r.q_min.last().unwrap();
        assert!(last > 0.5 * c * r.t_max / q);
    }

    #[test]
    fn capped_family_converges_below_cap() {
        let r = novikov_quadrature(
            &spec(LgdDensity::Capped { max: 0.4, cap: 0.1 }, 4, Some(40.0)),
            &QuadratureMode::Independent,
            &QuadratureSettings::default(),
        )
        .unwrap();
        let v = r.value().expect("converges");
        assert!(v > 1.0 && v < libm::exp(0.1));
        assert!(r.integrals_converged);
    }

    #[test]
    fn joint_mode_matches_product_of_marginals() {
        let s = spec(LgdDensity::Uniform { lo: 0.0, hi: 1e-3 }, 4, Some(10.0));
        let settings = QuadratureSettings {
            halvings: 1,
            inner_tol: 1e-7,
            outer_tol: 1e-6,
            ..Default::default()
        };
        let ind = novikov_quadrature(&s, &QuadratureMode::Independent, &settings).unwrap();
        let mass = -libm::expm1(-0.2);
        let rho: JointDensity = Arc::new(move |l, t, q| {
            if l <= 1e-3 + 1e-15 {
                1e3 * 0.02 * libm::exp(-0.02 * t) / mass * crate::math::chi2_pdf(q, 4)
            } else {
                0.0
            }
        });
        let joint = novikov_quadrature(&s, &QuadratureMode::Joint(rho), &settings).unwrap();
        for (a, b) in ind.log_truncated.iter().zip(&joint.log_truncated) {
            assert!((a - b).abs() < 1e-6, "{a} {b}");
        }
    }

    #[test]
    fn bad_densities_are_rejected() {
        let s = spec(LgdDensity::Fn(Arc::new(|_| 2.0)), 4, Some(5.0));
        assert!(novikov_quadrature(&s, &QuadratureMode::Independent, &QuadratureSettings::default())
            .unwrap_err()
            .is_configuration());
        let s = spec(LgdDensity::Point(0.4), 4, None);
        let zero = DensitySpec { tau: TauDensity::Intensity(Intensity::Constant(0.0)), ..s };
        assert!(novikov_quadrature(&zero, &QuadratureMode::Independent, &QuadratureSettings::default()).is_err());
    }
}
