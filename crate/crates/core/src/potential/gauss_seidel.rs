//! Gauss-Seidel backend.
//!
//! Each level starts from `f = 0` away from the boundary and sweeps the
//! unknowns in decreasing order of `|S|`, ties by decreasing mask. Sets of
//! equal size never appear in each other's equations, so the in-place update
//! reads the current sweep's value of `f_{S | i}` (already updated, larger)
//! and the previous sweep's `f_{S \ j}` (not yet updated, smaller).
//!
//! A level stops once the per-entry relative change is below `tol` and the
//! geometric tail implied by the observed contraction rate is too. This is
//! stricter than comparing the change against `tol * (1 + max |f|)`, which
//! lets the small entries of a level stop far from their limit.

use super::system::{assemble, Row};
use super::{check_solve_k, Backend, PotentialTable, ProbVector};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;

/// A finished sweep: the level iterate before and after it.
pub struct Sweep<'a> {
    /// 0-based top server of the level.
    pub top: usize,
    /// 1-based sweep counter within the level.
    pub sweep: usize,
    pub p: &'a [f64],
    /// `f^{t-1}` indexed by low mask; the last entry is the boundary.
    pub previous: &'a [f64],
    /// `f^t`, same indexing.
    pub current: &'a [f64],
}

pub fn solve_gauss_seidel(p: &ProbVector, tol: f64, max_sweeps: usize) -> Result<PotentialTable> {
    solve_gauss_seidel_observed(p, tol, max_sweeps, |_| {})
}

/// Like [`solve_gauss_seidel`], calling `observe` after every sweep.
pub fn solve_gauss_seidel_observed(
    p: &ProbVector,
    tol: f64,
    max_sweeps: usize,
    mut observe: impl FnMut(&Sweep<'_>),
) -> Result<PotentialTable> {
    check_solve_k(p.k())?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    if max_sweeps == 0 {
        return Err(Error::Invalid("max_sweeps must be at least 1".into()));
    }
    let rates = p.as_slice();
    let mut sweeps = Vec::with_capacity(p.k());
    let (phi, f) = assemble(rates, |top, rows, boundary| {
        let (values, used) = iterate_level(rates, top, rows, *boundary, tol, max_sweeps, &mut observe)?;
        sweeps.push(used);
        Ok(values)
    })?;
    Ok(PotentialTable::from_parts(p.clone(), phi, f, Backend::GaussSeidel, sweeps))
}

fn sweep_order(n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&s| std::cmp::Reverse((s.count_ones(), s)));
    order
}

fn iterate_level(
    p: &[f64],
    top: usize,
    rows: &[Row<f64>],
    boundary: f64,
    tol: f64,
    max_sweeps: usize,
    observe: &mut impl FnMut(&Sweep<'_>),
) -> Result<(Vec<f64>, usize)> {
    let n = rows.len();
    let mut f = vec![0.0; n + 1];
    f[n] = boundary;
    let mut previous = f.clone();
    let order = sweep_order(n);

    let mut last_change = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        previous.copy_from_slice(&f);
        // Largest change relative to the entry's own size.
        let mut change = 0f64;
        for &low in &order {
            let row = &rows[low];
            let mut acc = row.up.1 * f[row.up.0];
            for &(d, c) in &row.downs {
                acc += c * f[d];
            }
            let next = acc / row.diag;
            change = change.max((next - f[low]).abs() / (1.0 + next.abs()));
            f[low] = next;
        }
        observe(&Sweep { top, sweep, p, previous: &previous, current: &f });
        if !change.is_finite() {
            break;
        }
        // The iterates rise monotonically to the fixed point, so the
        // remaining error is about change * rho / (1 - rho), with rho the
        // observed contraction rate.
        let rho = if change < last_change { change / last_change } else { 1.0 };
        if change == 0.0 || (change <= tol && rho < 1.0 && change * rho <= tol * (1.0 - rho)) {
            return Ok((f, sweep));
        }
        last_change = change;
    }
    Err(Error::NotConverged { level: top + 1, sweeps: max_sweeps })
}
