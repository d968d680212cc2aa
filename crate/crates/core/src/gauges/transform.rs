use alloc::vec::Vec;

use super::cashflow::CashflowVector;
use super::surface::{Gauge, TermStructureSurface};
use crate::error::{Error, Result};
use crate::paths::PathEnsemble;

/// Gauge transform by a cashflow intensity:
/// `D^pi_t = D_t sum_h pi_h P(t, t+h)` and
/// `P^pi(t, s) = sum_h pi_h P(t, s+h) / sum_h pi_h P(t, t+h)`.
///
/// The cashflow lattice must be a multiple of the maturity step. The result
/// loses the maturities that would need `s + h` beyond the input lattice.
pub fn gauge_transform(g: &Gauge, pi: &CashflowVector) -> Result<Gauge> {
    let ts = &g.term_structure;
    let pi = pi.on_lattice(ts.step())?;
    let w = pi.weights();
    let reach = w.len() - 1;
    let n_m = ts.n_maturities();
    if reach >= n_m {
        return Err(Error::domain(alloc::format!(
            "cashflow reaches offset {} beyond the last maturity {}",
            pi.max_offset(),
            (n_m - 1) as f64 * ts.step()
        )));
    }
    let out_m = n_m - reach;
    let n_t = ts.grid().len();
    let mut denom = Vec::with_capacity(ts.n_paths() * n_t);
    let mut values = Vec::with_capacity(ts.n_paths() * n_t * out_m);
    for p in 0..ts.n_paths() {
        for i in 0..n_t {
            let row = ts.row(p, i);
            let weighted = |m: usize| -> (f64, f64) {
                let mut acc = 0.0;
                let mut scale = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    let term = wk * row[m + k];
                    acc += term;
                    scale += term.abs();
                }
                (acc, scale)
            };
            let (d, scale) = weighted(0);
            if d == 0.0 || d.abs() <= 1e-14 * scale {
                return Err(Error::SingularTransform { path: p, step: i });
            }
            denom.push(d);
            values.push(1.0);
            for m in 1..out_m {
                values.push(weighted(m).0 / d);
            }
        }
    }
    let term_structure = TermStructureSurface::from_values(ts.grid().clone(), ts.step(), out_m, ts.n_paths(), values)?;
    let n_d = g.n_paths();
    let broadcast = ts.n_paths() == 1;
    let mut dvals = Vec::with_capacity(n_d * n_t);
    for p in 0..n_d {
        for i in 0..n_t {
            let d = denom[if broadcast { i } else { p * n_t + i }];
            dvals.push(g.deflator_at(p, i) * d);
        }
    }
    let deflator = PathEnsemble::from_values(ts.grid().clone(), n_d, 1, dvals, g.deflator.seed())?;
    Gauge::new(g.label.clone(), deflator, term_structure)
}
