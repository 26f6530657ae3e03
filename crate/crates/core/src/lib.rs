//! Potentials, competitive-ratio bounds and adversary simulation for
//! randomized memoryless algorithms for the weighted k-server problem on
//! uniform metric spaces.
//!
//! Servers are 0-based throughout: bit `i` of a [`SubsetMask`] is server `i`.

pub mod constants;
pub mod error;
pub mod game;
pub mod lattice;
pub mod potential;
pub mod ratio;
pub mod report;
pub mod sample;

pub use constants::{alpha_growth_bound, check_constant_identities, ConstantTable};
pub use error::{Error, Result};
pub use lattice::{colex_precedes, SubsetMask};
pub use potential::{PotentialTable, ProbVector, SolverConfig};
pub use report::Report;
