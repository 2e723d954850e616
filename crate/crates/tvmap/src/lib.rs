//! Standard-library companion to `tvmap-core`: TNSR1, CSV, PGM and manifest
//! files, experiment configuration, synthetic phantoms, noise models,
//! dataset assembly and checkpoints. The `tvmap` binary wires these into
//! batch commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;
pub mod noise;
pub mod phantom;
pub mod tnsr;

pub use error::{Error, Result};
