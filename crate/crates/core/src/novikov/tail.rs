use crate::math::hill_tail_index;

/// Reading of the upper tail of `exp(L)` from samples of `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The tail is light enough for a finite mean (or there is no tail).
    FiniteEvidence,
    /// Tail index at most 1: the expectation is infinite.
    DivergenceEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailDiagnostics {
    /// Hill estimate of the tail index of `exp(L)`.
    pub hill_index: f64,
    /// Number of order statistics used.
    pub tail_count: usize,
    /// One-sided 95% bounds `index * (1 -/+ 1.645 / sqrt(k))`.
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub verdict: Verdict,
}

const Z95: f64 = 1.645;

/// Hill diagnostics on the top 1% (at least 10) of the samples.
pub fn tail_diagnostics(log_samples: &[f64]) -> TailDiagnostics {
    if let Some(first) = log_samples.first() {
        if first.is_finite() && log_samples.iter().all(|x| x == first) {
            return TailDiagnostics {
                hill_index: f64::INFINITY,
                tail_count: 0,
                lower_bound: f64::INFINITY,
                upper_bound: f64::INFINITY,
                verdict: Verdict::FiniteEvidence,
            };
        }
    }
    let k = (log_samples.len() / 100).max(10).min(log_samples.len().saturating_sub(1));
    let hill_index = hill_tail_index(log_samples, k);
    let spread = Z95 / libm::sqrt(k.max(1) as f64);
    let (lower_bound, upper_bound) = if hill_index.is_infinite() {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (hill_index * (1.0 - spread), hill_index * (1.0 + spread))
    };
    let verdict = if hill_index.is_nan() {
        Verdict::Inconclusive
    } else if upper_bound <= 1.0 {
        Verdict::DivergenceEvidence
    } else if lower_bound > 1.0 {
        Verdict::FiniteEvidence
    } else {
        Verdict::Inconclusive
    };
    TailDiagnostics {
        hill_index,
        tail_count: k,
        lower_bound,
        upper_bound,
        verdict,
    }
}
