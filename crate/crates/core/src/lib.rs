//! Error-probability bounds for Gaussian-state quantum target detection with
//! a heralded noiseless linear amplifier at the receiver.
//!
//! The crate computes quantum Chernoff, Bhattacharyya, and fidelity-type
//! lower bounds for discriminating the target-absent/target-present states of
//! an entanglement-assisted detection protocol (TMSV source) and its
//! coherent-state benchmark, with amplification folded in through an
//! effective-parameter mapping and binomial post-selection averaging.
//!
//! Normalization: the vacuum covariance matrix is the **identity** everywhere
//! (thermal variance `2N + 1`, coherent amplitude `alpha` mean
//! `(2 Re alpha, 2 Im alpha)`). See [`symplectic`] for details; mixing in any
//! other convention corrupts every bound downstream.
//!
//! Module map:
//! - [`symplectic`]: Gaussian-state algebra, Williamson decomposition, the
//!   s-overlap and the generic bounds.
//! - [`qi_states`]: states of the detection protocol and the benchmark.
//! - [`nla_map`]: amplifier effective parameters, physicality limits,
//!   success probability.
//! - [`bounds`]: per-protocol bounds, binomial averaging, dB comparisons.
//! - [`fock_oracle`]: brute-force truncated-Fock validator for the whole
//!   pipeline.
//! - [`sweep`]: parameter sweeps, figure presets, CSV output.

use openblas_src as _; // link the system BLAS/LAPACK backend

pub mod bounds;
pub mod error;
pub mod fock_oracle;
mod linalg;
pub mod nla_map;
pub mod qi_states;
pub mod sweep;
pub mod symplectic;

pub use error::{Error, Result};
