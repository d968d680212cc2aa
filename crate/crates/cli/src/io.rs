//! Ensemble and term-structure file formats.
//!
//! Binary ensembles are little-endian `f64` throughout: `n_paths`, `steps`,
//! `dim`, the `steps + 1` grid times, then the values row-major as
//! `(path, time, component)`.

use std::io::{Read, Write};

use gat_core::gauges::TermStructureSurface;
use gat_core::{PathEnsemble, TimeGrid};

use crate::error::{ErrorObject, Result};
use crate::table::{fmt_f64, Cell, Table};

fn bad(msg: impl Into<String>) -> ErrorObject {
    ErrorObject::config(msg)
}

pub fn write_ensemble_binary<W: Write>(mut w: W, e: &PathEnsemble) -> std::io::Result<()> {
    let grid = e.grid();
    let mut buf = Vec::with_capacity(8 * (3 + grid.len() + e.values().len()));
    for x in [e.n_paths() as f64, grid.steps() as f64, e.dim() as f64] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for x in grid.times().iter().chain(e.values()) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

fn as_count(x: f64, what: &str) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) {
        Ok(x as usize)
    } else {
        Err(bad(format!("binary ensemble header: {what} = {x} is not a count")))
    }
}

pub fn read_ensemble_binary<R: Read>(mut r: R) -> Result<PathEnsemble> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| bad(format!("reading binary ensemble: {e}")))?;
    if bytes.len() % 8 != 0 || bytes.len() < 24 {
        return Err(bad("binary ensemble is not a whole number of f64 values"));
    }
    let xs: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let n_paths = as_count(xs[0], "n_paths")?;
    let steps = as_count(xs[1], "steps")?;
    let dim = as_count(xs[2], "dim")?;
    let n_t = steps + 1;
    let body = n_paths
        .checked_mul(n_t)
        .and_then(|x| x.checked_mul(dim))
        .ok_or_else(|| bad("binary ensemble header overflows"))?;
    if xs.len() != 3 + n_t + body {
        return Err(bad(format!(
            "binary ensemble has {} values, header implies {}",
            xs.len(),
            3 + n_t + body
        )));
    }
    let grid = TimeGrid::new(xs[3..3 + n_t].to_vec())?;
    Ok(PathEnsemble::from_values(grid, n_paths, dim, xs[3 + n_t..].to_vec(), 0)?)
}

/// Columns `path, t, x0, x1, ...`.
pub fn ensemble_table(e: &PathEnsemble) -> Table {
    let mut header = vec!["path".to_string(), "t".to_string()];
    header.extend((0..e.dim()).map(|j| format!("x{j}")));
    let mut table = Table {
        header,
        rows: Vec::with_capacity(e.n_paths() * e.grid().len()),
    };
    for p in 0..e.n_paths() {
        for (i, t) in e.grid().times().iter().enumerate() {
            let mut row = vec![Cell::from(p), Cell::from(*t)];
            row.extend(e.state(p, i).iter().map(|x| Cell::from(*x)));
            table.rows.push(row);
        }
    }
    table
}

pub fn write_ensemble_csv<W: Write>(w: W, e: &PathEnsemble) -> std::io::Result<()> {
    ensemble_table(e).write_csv(w)
}

fn csv_rows<R: Read>(r: R, header: &[&str], exact: bool) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let head: Vec<String> = rd
        .headers()
        .map_err(|e| bad(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let ok = if exact {
        head == header
    } else {
        head.len() > header.len() && head.iter().zip(header).all(|(a, b)| a == b)
    };
    if !ok {
        return Err(bad(format!("csv header {head:?} does not start with {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("csv record {}: {e}", line + 2)))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("csv record {}: {e}", line + 2)))?;
        if row.len() != head.len() {
            return Err(bad(format!("csv record {} has {} fields", line + 2, row.len())));
        }
        rows.push(row);
    }
    Ok((head, rows))
}

/// Reads the layout written by [`write_ensemble_csv`]: rows grouped by path,
/// every path on the same time grid.
pub fn read_ensemble_csv<R: Read>(r: R) -> Result<PathEnsemble> {
    let (head, rows) = csv_rows(r, &["path", "t"], false)?;
    let dim = head.len() - 2;
    let first: Vec<f64> = rows.iter().take_while(|row| row[0] == 0.0).map(|row| row[1]).collect();
    if first.is_empty() || rows.len() % first.len() != 0 {
        return Err(bad("ensemble csv must list every path on the same grid"));
    }
    let n_t = first.len();
    let n_paths = rows.len() / n_t;
    let mut values = Vec::with_capacity(rows.len() * dim);
    for (k, row) in rows.iter().enumerate() {
        if row[0] != (k / n_t) as f64 || row[1] != first[k % n_t] {
            return Err(bad(format!("ensemble csv row {} out of order", k + 2)));
        }
        values.extend_from_slice(&row[2..]);
    }
    Ok(PathEnsemble::from_values(TimeGrid::new(first)?, n_paths, dim, values, 0)?)
}

/// Long format `path, t, s, P` with `s = t + m * step`.
pub fn term_structure_table(ts: &TermStructureSurface) -> Table {
    let mut table = Table::new(&["path", "t", "s", "P"]);
    for p in 0..ts.n_paths() {
        for (i, t) in ts.grid().times().iter().enumerate() {
            for (m, v) in ts.row(p, i).iter().enumerate() {
                table.rows.push(vec![
                    Cell::from(p),
                    Cell::from(*t),
                    Cell::from(t + m as f64 * ts.step()),
                    Cell::from(*v),
                ]);
            }
        }
    }
    table
}

pub fn write_term_structure_csv<W: Write>(w: W, ts: &TermStructureSurface) -> std::io::Result<()> {
    term_structure_table(ts).write_csv(w)
}

/// Inverse of [`write_term_structure_csv`]. The maturity step is read from
/// the first two rows.
pub fn read_term_structure_csv<R: Read>(r: R) -> Result<TermStructureSurface> {
    let (_, rows) = csv_rows(r, &["path", "t", "s", "P"], true)?;
    if rows.len() < 2 {
        return Err(bad("term structure csv needs at least two rows"));
    }
    let (t0, p0) = (rows[0][1], rows[0][0]);
    let n_m = rows.iter().take_while(|row| row[0] == p0 && row[1] == t0).count();
    if n_m < 2 {
        return Err(bad("term structure csv needs at least two maturities"));
    }
    let step = rows[1][2] - rows[1][1];
    let per_path = rows.iter().take_while(|row| row[0] == p0).count();
    if per_path % n_m != 0 || rows.len() % per_path != 0 {
        return Err(bad("term structure csv is not a full (path, t, maturity) lattice"));
    }
    let n_t = per_path / n_m;
    let n_paths = rows.len() / per_path;
    let times: Vec<f64> = (0..n_t).map(|i| rows[i * n_m][1]).collect();
    for (k, row) in rows.iter().enumerate() {
        let (p, i, m) = (k / per_path, (k % per_path) / n_m, k % n_m);
        let s = times[i] + m as f64 * step;
        if row[0] != p as f64 || row[1] != times[i] || (row[2] - s).abs() > 1e-9 * s.abs().max(1.0) {
            return Err(bad(format!(
                "term structure csv row {} is not (path {p}, t {}, s {})",
                k + 2,
                fmt_f64(times[i]),
                fmt_f64(s)
            )));
        }
    }
    let values = rows.iter().map(|row| row[3]).collect();
    Ok(TermStructureSurface::from_values(TimeGrid::new(times)?, step, n_m, n_paths, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ensemble(n: usize, steps: usize, dim: usize, scale: f64) -> PathEnsemble {
        let grid = TimeGrid::uniform(1.5, steps).unwrap();
        PathEnsemble::from_fn(grid, n, dim, 0, move |p, i, o| {
            for (j, x) in o.iter_mut().enumerate() {
                *x = scale * ((p * 31 + i * 7 + j) as f64).sin() / 3.0;
            }
        })
        .unwrap()
    }

    #[test]
    fn binary_layout() {
        let e = ensemble(2, 3, 1, 1.0);
        let mut buf = Vec::new();
        write_ensemble_binary(&mut buf, &e).unwrap();
        assert_eq!(buf.len(), 8 * (3 + 4 + 8));
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 3.0);
        assert_eq!(f64::from_le_bytes(buf[24 + 8..32 + 8].try_into().unwrap()), 0.5);
        assert!(read_ensemble_binary(&buf[..buf.len() - 8]).is_err());
    }

    #[test]
    fn term_structure_round_trip() {
        let grid = TimeGrid::uniform(2.0, 4).unwrap();
        let ts = TermStructureSurface::from_fn(grid, 0.25, 9, 3, |p, t, tau| {
            (-(0.01 + 0.002 * p as f64 + 0.01 * t) * tau).exp()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_term_structure_csv(&mut buf, &ts).unwrap();
        let back = read_term_structure_csv(&buf[..]).unwrap();
        assert_eq!(back.values(), ts.values());
        assert_eq!(back.grid(), ts.grid());
        assert_eq!(back.n_maturities(), 9);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("path,t,s,P\n0,0.0,0.0,1.0\n0,0.0,0.25,"));
    }

    proptest! {
        #[test]
        fn ensembles_round_trip(n in 1usize..5, steps in 1usize..6, dim in 1usize..4, scale in -1e3f64..1e3) {
            let e = ensemble(n, steps, dim, scale);
            let mut bin = Vec::new();
            write_ensemble_binary(&mut bin, &e).unwrap();
            let b = read_ensemble_binary(&bin[..]).unwrap();
            prop_assert_eq!(b.values(), e.values());
            prop_assert_eq!(b.grid(), e.grid());
            let mut text = Vec::new();
            write_ensemble_csv(&mut text, &e).unwrap();
            let c = read_ensemble_csv(&text[..]).unwrap();
            prop_assert_eq!(c.values(), e.values());
            prop_assert_eq!(c.dim(), dim);
        }
    }
}
