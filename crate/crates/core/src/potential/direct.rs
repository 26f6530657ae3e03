//! Direct backend: exact elimination on each level system.

use super::system::{assemble, Row, Scalar};
use super::{check_solve_k, Backend, PotentialTable, ProbVector};
use crate::error::{Error, Result};

pub fn solve_direct(p: &ProbVector) -> Result<PotentialTable> {
    check_solve_k(p.k())?;
    let (phi, f) = assemble(p.as_slice(), eliminate)?;
    Ok(PotentialTable::from_parts(p.clone(), phi, f, Backend::Direct, Vec::new()))
}

/// Dense Gaussian elimination without pivoting.
///
/// Strict row diagonal dominance survives every Schur complement, so the
/// pivots stay nonzero and no row exchange is needed. Returns `f` for every
/// low mask of the level with the boundary value appended.
pub(crate) fn eliminate<T: Scalar>(top: usize, rows: &[Row<T>], boundary: &T) -> Result<Vec<T>> {
    let n = rows.len();
    let mut a = vec![T::zero(); n * n];
    let mut b = vec![T::zero(); n];
    for (r, row) in rows.iter().enumerate() {
        a[r * n + r] = row.diag.clone();
        let (up, coeff) = &row.up;
        if *up == n {
            b[r] = coeff.clone() * boundary.clone();
        } else {
            a[r * n + up] = -coeff.clone();
        }
        for (d, c) in &row.downs {
            a[r * n + d] = -c.clone();
        }
    }

    for col in 0..n {
        let (head, tail) = a.split_at_mut((col + 1) * n);
        let pivot_row = &head[col * n..];
        let pivot = pivot_row[col].clone();
        if pivot.is_zero() {
            return Err(Error::Singular { level: top + 1, row: col });
        }
        let pivot_rhs = b[col].clone();
        for (offset, row) in tail.chunks_exact_mut(n).enumerate() {
            if row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone() / pivot.clone();
            row[col] = T::zero();
            for c in col + 1..n {
                if !pivot_row[c].is_zero() {
                    row[c] = row[c].clone() - factor.clone() * pivot_row[c].clone();
                }
            }
            let r = col + 1 + offset;
            b[r] = b[r].clone() - factor * pivot_rhs.clone();
        }
    }

    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r].clone();
        for c in r + 1..n {
            if !a[r * n + c].is_zero() {
                acc = acc - a[r * n + c].clone() * x[c].clone();
            }
        }
        x[r] = acc / a[r * n + r].clone();
    }
    x.push(boundary.clone());
    Ok(x)
}
