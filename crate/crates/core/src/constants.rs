//! The integer constants `C_S` bounding the currents and the sequence
//! `alpha_m = alpha_{m-1}^2 + 3 alpha_{m-1} + 1`, `alpha_1 = 1`.
//!
//! With 0-based servers the recursion reads
//! `C_S = 1 + sum_{j in S} C_{(S \ {j}) | {0..j-1}}`, and every set on the
//! right-hand side is numerically smaller than `S`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, Elements, SubsetMask};

/// Largest `k` for which the full table of `2^k` constants is built.
///
/// `C_S` has roughly `0.68 * 2^max(S)` bits, so the table for `k` holds about
/// `2^(2k-4)` bytes; 16 already needs a few hundred megabytes.
pub const MAX_TABLE_K: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantTable {
    k: usize,
    c: Vec<BigUint>,
    alpha: Vec<BigUint>,
}

impl ConstantTable {
    pub fn build(k: usize) -> Result<Self> {
        if !(1..=MAX_TABLE_K).contains(&k) {
            return Err(Error::DimensionOutOfRange { k, max: MAX_TABLE_K });
        }
        let n = 1usize << k;
        let mut c: Vec<BigUint> = Vec::with_capacity(n);
        c.push(BigUint::one());
        for s in 1..n as u32 {
            let mut value = BigUint::one();
            for j in Elements(s) {
                let below = (s & !(1 << j)) | ((1u32 << j) - 1);
                debug_assert!(below < s);
                value += &c[below as usize];
            }
            c.push(value);
        }
        Ok(Self { k, c, alpha: alpha_sequence(k) })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c(&self, s: SubsetMask) -> &BigUint {
        &self.c[s.bits() as usize]
    }

    pub(crate) fn c_bits(&self, bits: u32) -> &BigUint {
        &self.c[bits as usize]
    }

    /// `alpha_m` for `0 <= m <= k`, with `alpha_0 = 0`.
    pub fn alpha(&self, m: usize) -> BigUint {
        match m {
            0 => BigUint::zero(),
            m => self.alpha[m - 1].clone(),
        }
    }

    /// `alpha_1 .. alpha_k`.
    pub fn alphas(&self) -> &[BigUint] {
        &self.alpha
    }

    /// `C_{[k] \ {i}}` for every server `i`, the profile the optimal
    /// probabilities are built from.
    pub fn complement_constants(&self) -> Vec<BigUint> {
        let full = lattice::full_mask(self.k);
        (0..self.k).map(|i| self.c[(full & !(1 << i)) as usize].clone()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ConstantTableJson::from(self)).expect("plain data serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: ConstantTableJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::Invalid(e.to_string()))?;
        raw.try_into()
    }
}

/// `alpha_1 .. alpha_k` by the quadratic recursion.
pub fn alpha_sequence(k: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(k);
    let mut a = BigUint::zero();
    for _ in 0..k {
        a = &a * &a + 3u32 * &a + 1u32;
        out.push(a.clone());
    }
    out
}

/// Outcome of the three identities tying `C_S` to `alpha`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConstantIdentities {
    /// `C_S = (alpha_{m-1} + 2) C_{S \ {m}}` when `m` is the largest element.
    pub scaling: bool,
    /// `alpha_m = sum_j C_{[m] \ {j}} = C_{[m]} - 1`.
    pub alpha_sums: bool,
    /// `C_{[m] \ {1}} > C_{[m] \ {2}} > ... > C_{[m] \ {m}}`.
    pub decreasing: bool,
    pub failures: Vec<String>,
}

impl ConstantIdentities {
    pub fn all_hold(&self) -> bool {
        self.scaling && self.alpha_sums && self.decreasing
    }
}

pub fn check_constant_identities(t: &ConstantTable) -> ConstantIdentities {
    let mut failures = Vec::new();
    let mut scaling = true;
    let mut alpha_sums = true;
    let mut decreasing = true;

    for s in 1..(1u32 << t.k) {
        let top = lattice::largest(s).expect("nonempty");
        // top is 0-based, so the factor uses alpha_{top}.
        let expected = (t.alpha(top) + 2u32) * t.c_bits(s & !(1 << top));
        if t.c_bits(s) != &expected {
            scaling = false;
            failures.push(format!("scaling fails at S={s:#b}"));
        }
    }

    for m in 1..=t.k {
        let full = lattice::full_mask(m);
        let sum: BigUint = (0..m).map(|j| t.c_bits(full & !(1 << j))).sum();
        let alpha = t.alpha(m);
        if sum != alpha || t.c_bits(full) != &(&alpha + 1u32) {
            alpha_sums = false;
            failures.push(format!("alpha sum identity fails at m={m}"));
        }
        for j in 1..m {
            if t.c_bits(full & !(1 << (j - 1))) <= t.c_bits(full & !(1 << j)) {
                decreasing = false;
                failures.push(format!("C_[m]\\{{{}}} <= C_[m]\\{{{}}} at m={m}", j - 1, j));
            }
        }
    }

    ConstantIdentities { scaling, alpha_sums, decreasing, failures }
}

/// Exact test of `alpha_k < 1.6^(2^k)`, i.e. `alpha_k * 5^(2^k) < 8^(2^k)`.
pub fn alpha_growth_bound(k: usize) -> Result<bool> {
    lattice::check_k(k)?;
    let alpha = alpha_sequence(k).pop().expect("k >= 1");
    let e = 1u32 << k;
    Ok(alpha * BigUint::from(5u32).pow(e) < BigUint::from(8u32).pow(e))
}

#[derive(Serialize, Deserialize)]
struct ConstantTableJson {
    k: usize,
    alpha: Vec<String>,
    #[serde(rename = "C")]
    c: BTreeMap<u32, String>,
}

impl From<&ConstantTable> for ConstantTableJson {
    fn from(t: &ConstantTable) -> Self {
        Self {
            k: t.k,
            alpha: t.alpha.iter().map(|a| a.to_str_radix(10)).collect(),
            c: t.c.iter().enumerate().map(|(s, v)| (s as u32, v.to_str_radix(10))).collect(),
        }
    }
}

impl TryFrom<ConstantTableJson> for ConstantTable {
    type Error = Error;

    fn try_from(raw: ConstantTableJson) -> Result<Self> {
        if !(1..=MAX_TABLE_K).contains(&raw.k) {
            return Err(Error::DimensionOutOfRange { k: raw.k, max: MAX_TABLE_K });
        }
        let parse = |s: &str| {
            BigUint::parse_bytes(s.as_bytes(), 10)
                .ok_or_else(|| Error::Invalid(format!("not a decimal integer: {s:?}")))
        };
        let n = 1usize << raw.k;
        if raw.c.len() != n || raw.alpha.len() != raw.k {
            return Err(Error::Invalid("constant table has the wrong number of entries".into()));
        }
        let c = (0..n as u32)
            .map(|s| raw.c.get(&s).ok_or_else(|| Error::Invalid(format!("missing C[{s}]"))).and_then(|v| parse(v)))
            .collect::<Result<Vec<_>>>()?;
        let alpha = raw.alpha.iter().map(|a| parse(a)).collect::<Result<Vec<_>>>()?;
        Ok(Self { k: raw.k, c, alpha })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn c_of(t: &ConstantTable, elements: &[usize]) -> BigUint {
        t.c(SubsetMask::from_elements(elements, t.k()).unwrap()).clone()
    }

    #[test]
    fn k1_base_recursion() {
        let t = ConstantTable::build(1).unwrap();
        assert_eq!(c_of(&t, &[]), big(1));
        assert_eq!(c_of(&t, &[0]), big(2));
        assert_eq!(t.alphas(), &[big(1)]);
    }

    #[test]
    fn k2_values() {
        let t = ConstantTable::build(2).unwrap();
        // C_{2} = 1 + C_{1} = 3; C_{1,2} = 1 + C_{2} + C_{1} = 6.
        assert_eq!(c_of(&t, &[1]), big(3));
        assert_eq!(c_of(&t, &[0, 1]), big(6));
        assert_eq!(t.alpha(2), big(5));
        // C_{1,2} = (alpha_1 + 2) C_{1}, and C_{2} + C_{1} = alpha_2.
        assert_eq!(c_of(&t, &[0, 1]), (t.alpha(1) + 2u32) * c_of(&t, &[0]));
        assert_eq!(c_of(&t, &[1]) + c_of(&t, &[0]), t.alpha(2));
    }

    #[test]
    fn alpha_values() {
        let a = alpha_sequence(4);
        assert_eq!(a, vec![big(1), big(5), big(41), big(41 * 41 + 3 * 41 + 1)]);
    }

    #[test]
    fn k1_alpha_is_c_minus_one() {
        let t = ConstantTable::build(1).unwrap();
        assert_eq!(c_of(&t, &[0]) - 1u32, t.alpha(1));
    }

    #[test]
    fn identities_hold_through_k12() {
        for k in 1..=12 {
            let t = ConstantTable::build(k).unwrap();
            let r = check_constant_identities(&t);
            assert!(r.all_hold(), "k={k}: {:?}", r.failures);
        }
    }

    #[test]
    fn identity_check_detects_corruption() {
        let mut t = ConstantTable::build(3).unwrap();
        t.c[0b110] += 1u32;
        let r = check_constant_identities(&t);
        assert!(!r.scaling);
        assert!(!r.all_hold());
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(ConstantTable::build(9).unwrap(), ConstantTable::build(9).unwrap());
    }

    #[test]
    fn range_checks() {
        assert!(ConstantTable::build(0).is_err());
        assert!(ConstantTable::build(MAX_TABLE_K + 1).is_err());
        assert!(alpha_growth_bound(0).is_err());
        assert!(alpha_growth_bound(21).is_err());
    }

    #[test]
    fn growth_bound_examples() {
        assert!(alpha_growth_bound(1).unwrap());
        assert!(alpha_growth_bound(2).unwrap());
        assert!(alpha_growth_bound(4).unwrap());
        // 5 < 1.6^4 = 6.5536, with room that the exact comparison must see.
        assert!(big(5) * big(5).pow(4) < big(8).pow(4));
        assert!(big(7) * big(5).pow(4) >= big(8).pow(4));
    }

    #[test]
    fn alpha_plus_two_below_square() {
        let a = alpha_sequence(14);
        for m in 1..a.len() {
            let prev = &a[m - 1] + 2u32;
            assert!(&a[m] + 2u32 < &prev * &prev);
        }
    }

    #[test]
    fn json_round_trip() {
        let t = ConstantTable::build(7).unwrap();
        let v = t.to_json();
        assert_eq!(v["k"], 7);
        assert_eq!(v["alpha"][1], "5");
        assert_eq!(v["C"]["3"], "6");
        assert_eq!(ConstantTable::from_json(&v).unwrap(), t);
    }
}
