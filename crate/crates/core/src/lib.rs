//! Simulation and analysis of CW-pumped photon-pair coincidence
//! experiments.
//!
//! The crate covers the whole measurement: a spectral model of the
//! band-pass filters ([`filters`]), a brute-force Monte Carlo of pair
//! emission, loss, and detection ([`sim`]), the time-interval histogram and
//! coincidence-to-accidental ratio estimator ([`coincidence`]), the
//! closed-form rate model ([`analytic`]), and the quasi-phase-matching
//! tuning model behind pump-detuning scans ([`phase_matching`]).

// `!(x > 0.0)` is the NaN-rejecting form used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod coincidence;
pub mod commands;
pub mod config;
pub mod exec;
pub mod filters;
pub mod phase_matching;
pub mod rng;
pub mod sim;
pub mod tags;
pub mod units;

pub use config::{load_spec, validate, ExperimentSpec};
pub use exec::Execution;
