//! Nonlinear models of the BPSK Costas loop and the tooling to study where
//! the simplified ones mislead.
//!
//! The crate provides five models of one loop, from the full signal-space
//! description down to the classic phase-detector-characteristic model, a
//! Runge–Kutta core suited to their slow-fast structure, and analysis
//! routines: lock detection, averaging discrepancy sweeps, Poincaré return
//! maps with limit-cycle location, and pull-in probes. The `experiments`
//! module bundles six reference scenarios and `cli` backs the binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod integrators;
pub mod models;

pub use analysis::{detect_lock, find_limit_cycles, return_map, LockCriterion, LockReport};
pub use error::{Error, Result};
pub use filters::{FilterSs, FilterState};
pub use integrators::{integrate, integrate_to_section, IntegratorConfig, Scheme, Trajectory};
pub use models::{pd_characteristic, DataSignal, LoopParams, ModelKind, StateVector};
