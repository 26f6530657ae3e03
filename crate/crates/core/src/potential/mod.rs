//! Implicit potentials `phi_S(p)`, the per-level unknowns `f_S(p)` and the
//! currents `I(S \ {i} -> S) = p_i (phi_S - phi_{S \ {i}})`.
//!
//! The potentials are built level by level. Level `m` (0-based top server
//! `m`) owns every set whose largest element is `m`; its unknowns `f_S`
//! solve a strictly diagonally dominant system whose coefficients depend on
//! `p_0 .. p_m`, and `phi_S = phi_{S \ {m}} + f_S / p_m`.

mod direct;
pub(crate) mod exact;
mod gauss_seidel;
mod system;
mod top;
mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, SubsetMask};

pub use direct::solve_direct;
pub use exact::{solve_exact, ExactPotentials, MAX_EXACT_K};
pub use gauss_seidel::{solve_gauss_seidel, solve_gauss_seidel_observed, Sweep, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
pub use top::TopCurrents;
pub use verify::*;

/// Largest dimension the floating-point solvers accept. The direct backend
/// factors a dense `2^(k-1)` system at the top level.
pub const MAX_SOLVE_K: usize = 12;

/// Unnormalized move rates: server `i` moves with probability `p_i / sum(p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbVector {
    p: Vec<f64>,
    #[serde(skip)]
    monotone: bool,
}

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() > lattice::MAX_K {
            return Err(Error::DimensionOutOfRange { k: p.len(), max: lattice::MAX_K });
        }
        if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositive { index, value });
        }
        let monotone = p.windows(2).all(|w| w[0] >= w[1]);
        Ok(Self { p, monotone })
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, i: usize) -> f64 {
        self.p[i]
    }

    /// `p_1 >= p_2 >= ... >= p_k`, the hypothesis of the feasibility lemmas.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.p.iter().map(|x| x * c).collect())
    }

    /// Probabilities normalized to sum to one.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total();
        self.p.iter().map(|x| x / total).collect()
    }

    pub(crate) fn require_monotone(&self) -> Result<()> {
        if self.monotone {
            Ok(())
        } else {
            Err(Error::NonMonotone)
        }
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            p: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        ProbVector::new(raw.p).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Direct,
    GaussSeidel,
}

/// How to solve: the backend plus its iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SolverConfig {
    #[default]
    Direct,
    GaussSeidel { tol: f64, max_sweeps: usize },
}

impl SolverConfig {
    pub fn gauss_seidel() -> Self {
        SolverConfig::GaussSeidel { tol: DEFAULT_TOL, max_sweeps: DEFAULT_MAX_SWEEPS }
    }

    pub fn solve(&self, p: &ProbVector) -> Result<PotentialTable> {
        match *self {
            SolverConfig::Direct => solve_direct(p),
            SolverConfig::GaussSeidel { tol, max_sweeps } => solve_gauss_seidel(p, tol, max_sweeps),
        }
    }
}

/// Solved potentials for one `(k, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    p: ProbVector,
    phi: Vec<f64>,
    /// `f_S` for every nonempty `S`, stored at the level of its own largest
    /// element; index 0 is unused.
    f: Vec<f64>,
    residual: f64,
    backend: Backend,
    sweeps: Vec<usize>,
}

impl PotentialTable {
    pub(crate) fn from_parts(p: ProbVector, phi: Vec<f64>, f: Vec<f64>, backend: Backend, sweeps: Vec<usize>) -> Self {
        let residual = system::residual(p.as_slice(), &phi, &f);
        Self { p, phi, f, residual, backend, sweeps }
    }

    pub fn k(&self) -> usize {
        self.p.k()
    }

    pub fn p(&self) -> &ProbVector {
        &self.p
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Max defect of the level equations, each normalized by its diagonal
    /// coefficient so the defect is measured in units of `f`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Sweeps used per level (empty for the direct backend).
    pub fn sweeps(&self) -> &[usize] {
        &self.sweeps
    }

    pub fn phi(&self, s: SubsetMask) -> f64 {
        self.phi[s.bits() as usize]
    }

    pub fn f(&self, s: SubsetMask) -> f64 {
        self.f[s.bits() as usize]
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi
    }

    pub fn f_values(&self) -> &[f64] {
        &self.f
    }

    pub(crate) fn phi_bits(&self, s: u32) -> f64 {
        self.phi[s as usize]
    }

    pub(crate) fn f_bits(&self, s: u32) -> f64 {
        self.f[s as usize]
    }

    /// `I(S \ {i} -> S) = p_i (phi_S - phi_{S \ {i}})`.
    pub fn current(&self, s: SubsetMask, i: usize) -> Result<f64> {
        if s.k() != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), found: s.k() });
        }
        if !s.contains(i) {
            return Err(Error::Precondition(format!("server {i} is not in {s}")));
        }
        Ok(self.current_bits(s.bits(), i))
    }

    #[inline]
    pub(crate) fn current_bits(&self, s: u32, i: usize) -> f64 {
        self.p.get(i) * (self.phi[s as usize] - self.phi[(s & !(1 << i)) as usize])
    }

    /// `I([k] \ {i} -> [k])` for every server.
    pub fn top_currents(&self) -> TopCurrents {
        let full = lattice::full_mask(self.k());
        TopCurrents::from_values((0..self.k()).map(|i| self.current_bits(full, i)).collect())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nonempty = 1..self.phi.len() as u32;
        let json = PotentialTableJson {
            k: self.k(),
            p: self.p.as_slice().to_vec(),
            backend: self.backend,
            phi: (0..self.phi.len() as u32).map(|s| (s, self.phi[s as usize])).collect(),
            f: nonempty.map(|s| (s, self.f[s as usize])).collect(),
            residual: self.residual,
        };
        serde_json::to_value(json).expect("plain data serializes")
    }

    /// Rebuilds a table from its JSON dump without re-solving.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: PotentialTableJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::Invalid(e.to_string()))?;
        if raw.p.len() != raw.k {
            return Err(Error::DimensionMismatch { expected: raw.k, found: raw.p.len() });
        }
        let p = ProbVector::new(raw.p)?;
        let n = 1usize << raw.k;
        let mut phi = vec![0.0; n];
        let mut f = vec![0.0; n];
        for s in 0..n as u32 {
            phi[s as usize] = *raw.phi.get(&s).ok_or_else(|| Error::Invalid(format!("missing phi[{s}]")))?;
            if s > 0 {
                f[s as usize] = *raw.f.get(&s).ok_or_else(|| Error::Invalid(format!("missing f[{s}]")))?;
            }
        }
        Ok(Self { p, phi, f, residual: raw.residual, backend: raw.backend, sweeps: Vec::new() })
    }
}

#[derive(Serialize, Deserialize)]
struct PotentialTableJson {
    k: usize,
    p: Vec<f64>,
    backend: Backend,
    phi: BTreeMap<u32, f64>,
    f: BTreeMap<u32, f64>,
    residual: f64,
}

pub(crate) fn check_solve_k(k: usize) -> Result<()> {
    if (1..=MAX_SOLVE_K).contains(&k) {
        Ok(())
    } else {
        Err(Error::DimensionOutOfRange { k, max: MAX_SOLVE_K })
    }
}
