//! Exact rational potentials for small `k`.
//!
//! All coefficients are rational in `p`, so with rational inputs every
//! `phi`, `f` and current is an exact rational. Floating inputs convert
//! exactly (every finite `f64` is a dyadic rational).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::direct::eliminate;
use super::system::{assemble, boundary_value, level_rows};
use super::ProbVector;
use crate::error::{Error, Result};
use crate::lattice::Elements;

/// Exact mode gets expensive fast: the top level has `2^(k-1)` unknowns and
/// the rationals grow with every elimination step.
pub const MAX_EXACT_K: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPotentials {
    p: Vec<BigRational>,
    phi: Vec<BigRational>,
    f: Vec<BigRational>,
}

pub fn solve_exact(p: &[BigRational]) -> Result<ExactPotentials> {
    if !(1..=MAX_EXACT_K).contains(&p.len()) {
        return Err(Error::DimensionOutOfRange { k: p.len(), max: MAX_EXACT_K });
    }
    if let Some(index) = p.iter().position(|x| !x.is_positive()) {
        return Err(Error::NonPositive { index, value: p[index].to_f64().unwrap_or(f64::NAN) });
    }
    let (phi, f) = assemble(p, eliminate)?;
    Ok(ExactPotentials { p: p.to_vec(), phi, f })
}

impl ExactPotentials {
    pub fn from_prob(p: &ProbVector) -> Result<Self> {
        let exact: Vec<BigRational> = p
            .as_slice()
            .iter()
            .map(|&x| BigRational::from_float(x).expect("ProbVector entries are finite"))
            .collect();
        solve_exact(&exact)
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[BigRational] {
        &self.p
    }

    pub fn phi(&self, s: u32) -> &BigRational {
        &self.phi[s as usize]
    }

    pub fn f(&self, s: u32) -> &BigRational {
        &self.f[s as usize]
    }

    /// `I(S \ {i} -> S)`, exactly. `i` must be in `s`.
    pub fn current(&self, s: u32, i: usize) -> BigRational {
        debug_assert!(s & (1 << i) != 0);
        &self.p[i] * (&self.phi[s as usize] - &self.phi[(s & !(1 << i)) as usize])
    }

    pub fn current_f64(&self, s: u32, i: usize) -> f64 {
        to_f64(&self.current(s, i))
    }

    pub fn top_currents(&self) -> Vec<BigRational> {
        let full = ((1u64 << self.k()) - 1) as u32;
        (0..self.k()).map(|i| self.current(full, i)).collect()
    }

    /// True iff every level equation and boundary condition holds exactly.
    pub fn satisfies_system(&self) -> bool {
        let k = self.k();
        (0..k).all(|top| {
            let level = 1usize << top;
            if self.f[(level - 1) | level] != boundary_value(&self.p, &self.phi, top) {
                return false;
            }
            level_rows(&self.p, top).iter().enumerate().all(|(low, row)| {
                let mut rhs = &row.up.1 * &self.f[row.up.0 | level];
                for (d, c) in &row.downs {
                    rhs += c * &self.f[d | level];
                }
                &row.diag * &self.f[low | level] == rhs
            })
        })
    }

    /// Current form of the tight system: for every `S` other than the full
    /// set, with `i` its smallest missing element,
    /// `I(S -> S | i) = 1 + sum_{j in S} I(S \ j -> S)`.
    pub fn tight_system_holds(&self) -> bool {
        let full = ((1u64 << self.k()) - 1) as u32;
        (0..full).all(|s| {
            let i = crate::lattice::smallest_missing(s);
            let mut rhs = BigRational::one();
            for j in Elements(s) {
                rhs += self.current(s, j);
            }
            self.current(s | (1 << i), i) == rhs
        })
    }
}

pub(crate) fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn ratio(num: &num_bigint::BigUint, den: &num_bigint::BigUint) -> BigRational {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

pub(crate) fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn k2_closed_form_exactly() {
        let t = solve_exact(&[q(3, 1), q(2, 1)]).unwrap();
        assert_eq!(t.f(0b10), &q(6, 5));
        assert_eq!(t.f(0b11), &q(2, 1));
        assert_eq!(t.phi(0b01), &q(1, 3));
        assert_eq!(t.phi(0b10), &q(3, 5));
        assert_eq!(t.phi(0b11), &q(4, 3));
        assert_eq!(t.current(0b11, 0), q(11, 5));
        assert_eq!(t.current(0b11, 1), q(2, 1));
        assert!(t.satisfies_system());
        assert!(t.tight_system_holds());
    }

    #[test]
    fn symmetric_rates_give_symmetric_potentials() {
        let t = solve_exact(&[q(7, 2), q(7, 2)]).unwrap();
        assert_eq!(t.phi(0b01), t.phi(0b10));
        assert_eq!(t.f(0b01), &q(1, 1));
        assert_eq!(t.f(0b10), &q(1, 1));
    }

    #[test]
    fn tight_system_is_exact_for_non_monotone_p() {
        let t = solve_exact(&[q(1, 3), q(5, 1), q(2, 7), q(9, 4)]).unwrap();
        assert!(t.satisfies_system());
        assert!(t.tight_system_holds());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(solve_exact(&[]).is_err());
        assert!(solve_exact(&[q(1, 1), q(0, 1)]).is_err());
        assert!(solve_exact(&vec![q(1, 1); MAX_EXACT_K + 1]).is_err());
    }
}
