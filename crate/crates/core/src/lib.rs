//! Pure Nash equilibria of user-generated-content reward games.
//!
//! Users with heterogeneous types `q_i` in `(0, 1]` contribute quality
//! `x_i <= q_i` at cost `c x_i / q_i` and share a reward `R`, either in
//! proportion to quality or equally among the top `K`. [`fullinfo`]
//! solves the known-types games (M1-M4), [`partialinfo`] the private-type
//! games (M5-M7), and [`verify`] holds the brute-force and Monte Carlo
//! oracles used to certify both.

pub mod distribution;
pub mod error;
pub mod fullinfo;
pub mod model;
pub mod numeric;
pub mod partialinfo;
pub mod svg;
pub mod verify;

pub use distribution::{DistributionKind, TypeDistribution};
pub use error::{Error, Result};
pub use fullinfo::{EquilibriumOutcome, SolveOptions, Verdict};
pub use model::{ActionProfile, GameConfig, Mechanism, Population};
pub use partialinfo::{CutoffEquilibrium, SymmetricStrategy};
pub use verify::{DeviationReport, GridScan};
