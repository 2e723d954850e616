//! Weighted spatio-temporal total-variation reconstruction with learned
//! regularization parameter-maps.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical piece:
//! tensors and the finite-difference gradient, forward operators (identity,
//! multi-coil Cartesian MRI, parallel-beam Radon), proximal maps, the unrolled
//! PDHG and PD3O solvers, a small reverse-mode tape, the parameter-map CNN with
//! its training loop, and inversion-recovery T1 fitting.
//!
//! File formats, phantoms, noise models and the command-line tool live in the
//! `tvmap` companion crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod error;
pub mod fft;
pub mod grad;
pub mod linops;
pub mod metrics;
pub mod paramnet;
pub mod prox;
pub mod qmri;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use grad::{div, grad, tv_weighted, Gradient};
pub use linops::LinearMap;
pub use tensor::{expand_map, DType, GradField, Shape, SharingMode, Tensor};
