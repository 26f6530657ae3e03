//! Currents into the full set, `I([k] \ {i} -> [k])`, without cancellation.
//!
//! Differencing `phi` loses everything once the rates spread over many
//! orders of magnitude (the optimal rates at k = 10 span about 10^100).
//! The route here only adds positive numbers.
//!
//! Write level `m`'s unknowns as `f_S = f_{[m]} (1 - p_m u(S \ {m}))`.
//! Substituting into the level equations gives, for `T` a proper subset of
//! `[m-1]` with smallest missing element `i`,
//!
//! ```text
//! (p_i + sum_{j in T} p_j + p_m) u(T) = 1 + p_i u(T | i) + sum_{j in T} p_j u(T \ j),
//! u([m-1]) = 0,
//! ```
//!
//! a diagonally dominant M-matrix system with positive right-hand side.
//! Then `I([m] \ {i} -> [m]) = I([m-1] \ {i} -> [m-1]) + f_{[m]} p_i u([m-1] \ {i})`
//! for `i < m`, and `I([m-1] -> [m]) = f_{[m]}`. The M-matrix system is
//! solved by elimination that tracks off-diagonal magnitudes and row-sum
//! excesses separately (the Grassmann-Taksar-Heyman arrangement), so no
//! step subtracts.

use serde::Serialize;

use super::{check_solve_k, ProbVector};
use crate::error::Result;
use crate::lattice::{smallest_missing, Elements};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopCurrents {
    values: Vec<f64>,
}

impl TopCurrents {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Subtraction-free evaluation, accurate to a small multiple of machine
    /// precision whatever the spread of `p`.
    pub fn accurate(p: &ProbVector) -> Result<Self> {
        check_solve_k(p.k())?;
        let rates = p.as_slice();
        let mut currents: Vec<f64> = Vec::with_capacity(rates.len());
        for top in 0..rates.len() {
            let boundary = 1.0 + currents.iter().sum::<f64>();
            let u = discounted_times(rates, top);
            let target = (1usize << top) - 1;
            for (i, current) in currents.iter_mut().enumerate() {
                *current += boundary * rates[i] * u[target & !(1 << i)];
            }
            currents.push(boundary);
        }
        Ok(Self { values: currents })
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Solves for `u(T)`, `T` a subset of `{0..top-1}`, with killing rate
/// `p[top]`. The returned vector is indexed by `T` and `u(full) = 0`.
fn discounted_times(p: &[f64], top: usize) -> Vec<f64> {
    let n = (1usize << top) - 1;
    let mut u = vec![0.0; n + 1];
    if n == 0 {
        return u;
    }
    // g[r][c]: magnitude of the off-diagonal entry; excess[r]: diagonal minus
    // the sum of off-diagonal magnitudes.
    let mut g = vec![0.0; n * n];
    let mut excess = vec![0.0; n];
    let mut rhs = vec![1.0; n];
    for t in 0..n {
        let i = smallest_missing(t as u32);
        excess[t] = p[top];
        let up = t | (1 << i);
        if up == n {
            excess[t] += p[i];
        } else {
            g[t * n + up] += p[i];
        }
        for j in Elements(t as u32) {
            g[t * n + (t & !(1 << j))] += p[j];
        }
    }

    let mut diag = vec![0.0; n];
    for q in 0..n {
        let (head, tail) = g.split_at_mut((q + 1) * n);
        let pivot_row = &head[q * n..];
        diag[q] = excess[q] + pivot_row[q + 1..].iter().sum::<f64>();
        let (pivot_excess, pivot_rhs) = (excess[q], rhs[q]);
        for (offset, row) in tail.chunks_exact_mut(n).enumerate() {
            let link = row[q];
            if link == 0.0 {
                continue;
            }
            let r = q + 1 + offset;
            let w = link / diag[q];
            row[q] = 0.0;
            for c in q + 1..n {
                if c != r && pivot_row[c] != 0.0 {
                    row[c] += w * pivot_row[c];
                }
            }
            excess[r] += w * pivot_excess;
            rhs[r] += w * pivot_rhs;
        }
    }
    for q in (0..n).rev() {
        let row = &g[q * n..(q + 1) * n];
        let mut acc = rhs[q];
        for c in q + 1..n {
            acc += row[c] * u[c];
        }
        u[q] = acc / diag[q];
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{solve_direct, ExactPotentials};

    #[test]
    fn k1_and_k2_closed_forms() {
        let t = TopCurrents::accurate(&ProbVector::new(vec![5.0]).unwrap()).unwrap();
        assert_eq!(t.values(), &[1.0]);
        let t = TopCurrents::accurate(&ProbVector::new(vec![3.0, 2.0]).unwrap()).unwrap();
        assert!((t.get(0) - 11.0 / 5.0).abs() < 1e-15);
        assert_eq!(t.get(1), 2.0);
    }

    #[test]
    fn agrees_with_direct_for_moderate_rates() {
        let p = ProbVector::new(vec![0.95, 0.6, 0.41, 0.3, 0.12, 0.07]).unwrap();
        let a = TopCurrents::accurate(&p).unwrap();
        let d = solve_direct(&p).unwrap().top_currents();
        for i in 0..p.k() {
            assert!((a.get(i) - d.get(i)).abs() <= 1e-11 * d.get(i), "{i}: {} vs {}", a.get(i), d.get(i));
        }
    }

    #[test]
    fn agrees_with_exact_for_extreme_spread() {
        // Rates spread over 30 orders of magnitude, where phi differences in
        // floating point are meaningless.
        let p = ProbVector::new(vec![1.0, 1e-6, 1e-13, 1e-21, 1e-30]).unwrap();
        let a = TopCurrents::accurate(&p).unwrap();
        let exact = ExactPotentials::from_prob(&p).unwrap();
        for (i, e) in exact.top_currents().iter().enumerate() {
            let e = super::super::exact::to_f64(e);
            assert!((a.get(i) - e).abs() <= 1e-13 * e, "{i}: {} vs {e}", a.get(i));
        }
    }
}
