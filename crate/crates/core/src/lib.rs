//! Design and simulation toolkit for frequency-multiplexed heralded
//! single-photon sources.
//!
//! The crate is organised bottom-up:
//!
//! * [`photon_stats`]: closed-form statistics of a heralded two-mode squeezed
//!   source under bucket detection, with a truncated Fock-space oracle.
//! * [`mux`]: switching-network loss models (fixed-loss, log-tree,
//!   multi-pass, ideal), per-N squeezing optimisation and scaling sweeps.
//! * [`bsfwm`]: Bragg-scattering four-wave-mixing phase matching, conversion
//!   efficiency, acceptance bandwidth and multi-channel sweeps.
//! * [`sim`]: a seeded, counter-based Monte Carlo simulator of the
//!   multiplexed source with coincidence, CAR and heralded g² estimators.
//! * [`config`] and [`report`]: the structured configuration file and the
//!   CSV/JSON table emitters used by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsfwm;
pub mod config;
mod error;
pub mod mux;
pub mod numeric;
pub mod photon_stats;
pub mod report;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use photon_stats::{DetectionChain, LossEntry, SqueezedSource};
