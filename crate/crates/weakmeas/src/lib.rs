//! Simulation of unsharp spin-1/2 measurements with post-selection.
//!
//! A sharp measurement entangles the system with a pointer perfectly; an
//! unsharp one does so through an error channel parameterized by amplitudes
//! (a, b) with a² + b² = 1: with amplitude `a` the pointer swings the way it
//! should, with amplitude `b` the wrong way. Detecting the pointer and then
//! post-selecting the system produces the conditional statistics this crate
//! computes two ways: exactly, by enumerating joint outcome amplitudes, and
//! empirically, by seeded Monte Carlo over per-trial random streams.
//!
//! Modules build bottom-up: [`qstate`] (kets, observables, Born sampling),
//! [`unsharp`] (coupling channel, pointer detection, post-selection),
//! [`weakvalue`] (conditional pointer means and the weak-value estimator),
//! [`protocols`] (full experiment runners and exact distributions),
//! [`stats`] (sub-ensembles, rates, empirical-vs-exact comparison),
//! [`config`] and [`cli`] (the `weakmeas` command-line front end).

pub mod cli;
pub mod config;
pub mod error;
pub mod protocols;
pub mod qstate;
pub mod stats;
pub mod stream;
#[cfg(test)]
pub(crate) mod testutil;
pub mod unsharp;
pub mod weakvalue;

pub use error::{Error, Result};
pub use protocols::{
    exact_distribution, run_chain, run_pointer_first, run_postselect_first, run_trial,
    ExperimentConfig, FinalOutcome, MeasurementOrder, OutcomeKey, ProbabilityTable, RunLog,
    RunRecord, WeakStep,
};
pub use qstate::{
    born_probabilities, born_sample, eigenbasis, inner, partial_state_raw, spin_observable, tensor,
    BlochDirection, DensityMatrix, Ket, Operator, C64,
};
pub use stats::{
    compare, conditional_frequency, mismatch_rate, pointer_mean, subensemble, ComparisonReport,
    ComparisonRow, RateEstimate, SubEnsemble,
};
pub use unsharp::{
    couple, couple_continuous, detect_pointer, detect_pointer_in, kraus_ops, partial_state,
    postselect_system, GaussianPointer, JointState, PointerModel, PointerOutcome, Readout,
    Subsystem, UnsharpCoupling,
};
pub use weakvalue::{
    estimate_weak_value, exact_conditional_pointer_mean, weak_value, WeakValueEstimate,
};
