//! Online post-hoc calibration of binary classifiers.
//!
//! A base model's scores arrive one at a time. Each round a recalibrator
//! announces a probability, then sees the outcome. [`scalers`] holds the
//! batch, windowed and online (ONS-driven) Platt and beta maps;
//! [`calibeating`] adds tracking and hedging on top of any expert stream;
//! [`pipeline`] runs every method in lockstep over [`datagen`] streams and
//! reduces replications into a [`pipeline::RunReport`].

pub mod calibeating;
pub mod config;
pub mod datagen;
pub mod error;
pub mod metrics;
pub mod ons;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod prob;
pub mod scalers;
pub mod theorems;
pub mod trace;

pub use error::{CalibError, Result};
