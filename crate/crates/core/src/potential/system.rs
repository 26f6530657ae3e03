//! The per-level linear systems, shared by every backend.
//!
//! At level `top` the unknowns are indexed by the low part of the set,
//! `low = S & ((1 << top) - 1)`; the full low mask is the boundary value
//! `f_{[top+1]}`, fixed from the level below.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::Result;
use crate::lattice::{smallest_missing, Elements};

/// Field operations the level solver needs; implemented by `f64` and by
/// exact rationals.
pub(crate) trait Scalar:
    Clone
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> Scalar for T where
    T: Clone
        + PartialEq
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Div<Output = T>
        + Neg<Output = T>
{
}

/// `diag * f_S = up.1 * f_{S | i} + sum_j downs_j.1 * f_{S \ j}`.
#[derive(Debug, Clone)]
pub(crate) struct Row<T> {
    pub diag: T,
    pub up: (usize, T),
    pub downs: Vec<(usize, T)>,
}

/// Equations for every non-boundary unknown of level `top`, in `low` order.
pub(crate) fn level_rows<T: Scalar>(p: &[T], top: usize) -> Vec<Row<T>> {
    let full_low = (1u32 << top) - 1;
    (0..full_low)
        .map(|low| {
            let i = smallest_missing(low);
            debug_assert!(i < top);
            let mut diag = p[i].clone() + p[top].clone();
            let mut downs = Vec::with_capacity(low.count_ones() as usize);
            for j in Elements(low) {
                diag = diag + p[j].clone();
                downs.push(((low & !(1 << j)) as usize, p[j].clone()));
            }
            Row { diag, up: ((low | (1 << i)) as usize, p[i].clone()), downs }
        })
        .collect()
}

/// Boundary value `f_{[top+1]} = 1 + sum_{j < top} I([top] \ {j} -> [top])`.
pub(crate) fn boundary_value<T: Scalar>(p: &[T], phi: &[T], top: usize) -> T {
    let below = (1u32 << top) - 1;
    let mut value = T::one();
    for j in 0..top {
        let diff = phi[below as usize].clone() - phi[(below & !(1 << j)) as usize].clone();
        value = value + p[j].clone() * diff;
    }
    value
}

/// Runs `solve_level` on every level and assembles `phi` and `f`.
///
/// `solve_level(top, rows, boundary)` returns `f` for every low mask of the
/// level, including the boundary entry.
pub(crate) fn assemble<T: Scalar>(
    p: &[T],
    mut solve_level: impl FnMut(usize, &[Row<T>], &T) -> Result<Vec<T>>,
) -> Result<(Vec<T>, Vec<T>)> {
    let k = p.len();
    let n = 1usize << k;
    let mut phi = vec![T::zero(); n];
    let mut f = vec![T::zero(); n];
    for top in 0..k {
        let boundary = boundary_value(p, &phi, top);
        let rows = level_rows(p, top);
        let level_f = solve_level(top, &rows, &boundary)?;
        debug_assert_eq!(level_f.len(), 1 << top);
        for (low, value) in level_f.into_iter().enumerate() {
            let s = low | (1 << top);
            phi[s] = phi[low].clone() + value.clone() / p[top].clone();
            f[s] = value;
        }
    }
    Ok((phi, f))
}

/// Max defect over every level equation and boundary condition, each row
/// divided by its diagonal coefficient.
pub(crate) fn residual(p: &[f64], phi: &[f64], f: &[f64]) -> f64 {
    let mut worst = 0f64;
    for top in 0..p.len() {
        let level = 1usize << top;
        let boundary = boundary_value(p, phi, top);
        worst = worst.max((f[(level - 1) | level] - boundary).abs());
        for (low, row) in level_rows(p, top).iter().enumerate() {
            let mut rhs = row.up.1 * f[row.up.0 | level];
            for &(d, c) in &row.downs {
                rhs += c * f[d | level];
            }
            let defect = (f[low | level] - rhs / row.diag).abs();
            // Propagate NaN.
            if defect.is_nan() || defect > worst {
                worst = defect;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_strictly_diagonally_dominant() {
        let p = [0.9, 0.5, 0.3, 0.05];
        for top in 0..p.len() {
            for row in level_rows(&p, top) {
                let off: f64 = row.up.1 + row.downs.iter().map(|d| d.1).sum::<f64>();
                assert!(row.diag - off >= p[top] * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn level_one_has_no_unknowns() {
        assert!(level_rows(&[2.0], 0).is_empty());
        assert_eq!(boundary_value(&[2.0], &[0.0, 0.0], 0), 1.0);
    }
}
