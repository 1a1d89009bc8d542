//! Numerical companion for self-similar sets of affine proper contractions.
//!
//! The crate covers:
//!
//! * [`ifs`]: contraction systems, words, attractor cells, sample grids and
//!   the coding map;
//! * [`region`]: open witness regions and exact affine region geometry;
//! * [`cograph`]: branch-set detection and the strong / graph / open-set
//!   separation checks, plus the path spaces used for tensor powers;
//! * [`bimodule`]: the sampled Hilbert bimodule `C(G)` over `C(K)` with its
//!   inner product, actions, finite-rank operators and the compactness probe;
//! * [`transfer`]: the endomorphisms `beta_i`, the transfer map and the
//!   constructive witnesses used for simplicity;
//! * [`classify`]: Cuntz-algebra classification and the built-in example
//!   registry.

pub mod bimodule;
pub mod classify;
pub mod cograph;
mod error;
pub mod ifs;
pub mod random;
pub mod region;
pub mod transfer;
pub mod verify;

pub use error::{Error, Result};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Schema version of every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

/// Complex scalar used by all function spaces.
pub type C64 = num_complex::Complex64;
