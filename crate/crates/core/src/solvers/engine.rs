//! The arithmetic surface the solvers are written against.
//!
//! [`Plain`] evaluates directly on vectors; the autodiff tape implements the
//! same trait and records every call. Both route through the same raw kernels,
//! so an unrolled solve on the tape reproduces a plain solve bit for bit.

use alloc::vec::Vec;

use crate::linops::LinearMap;
use crate::prox::{clip_raw, exp_neg_scaled, prox_l2_raw};

pub trait Engine<'op> {
    type V: Clone;

    fn value<'s>(&'s self, v: &'s Self::V) -> &'s [f64];
    fn constant(&mut self, data: Vec<f64>) -> Self::V;
    fn apply(&mut self, op: &'op dyn LinearMap, x: &Self::V) -> Self::V;
    fn apply_adjoint(&mut self, op: &'op dyn LinearMap, y: &Self::V) -> Self::V;
    /// `sum_k c_k v_k`, accumulated left to right.
    fn lincomb(&mut self, terms: &[(f64, &Self::V)]) -> Self::V;
    fn prox_l2(&mut self, p: &Self::V, ax: &Self::V, z: &[f64], sigma: f64) -> Self::V;
    fn clip(&mut self, q: &Self::V, lambda: &Self::V, comps: usize) -> Self::V;
    fn relu(&mut self, v: &Self::V) -> Self::V;
    /// `exp(-mu v)` with clamped exponents.
    fn exp_neg(&mut self, v: &Self::V, mu: f64) -> Self::V;
}

pub(crate) fn lincomb_raw(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let (c0, v0) = terms[0];
    let mut out: Vec<f64> = v0.iter().map(|&v| c0 * v).collect();
    for &(c, v) in &terms[1..] {
        for (o, &x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

pub(crate) fn relu_raw(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect()
}

/// Direct evaluation; counts clamped exponent arguments.
#[derive(Debug, Default, Clone)]
pub struct Plain {
    pub clamped: usize,
}

impl<'op> Engine<'op> for Plain {
    type V = Vec<f64>;

    fn value<'s>(&'s self, v: &'s Vec<f64>) -> &'s [f64] {
        v
    }

    fn constant(&mut self, data: Vec<f64>) -> Vec<f64> {
        data
    }

    fn apply(&mut self, op: &'op dyn LinearMap, x: &Vec<f64>) -> Vec<f64> {
        op.forward(x)
    }

    fn apply_adjoint(&mut self, op: &'op dyn LinearMap, y: &Vec<f64>) -> Vec<f64> {
        op.adjoint(y)
    }

    fn lincomb(&mut self, terms: &[(f64, &Vec<f64>)]) -> Vec<f64> {
        let raw: Vec<(f64, &[f64])> = terms.iter().map(|&(c, v)| (c, v.as_slice())).collect();
        lincomb_raw(&raw)
    }

    fn prox_l2(&mut self, p: &Vec<f64>, ax: &Vec<f64>, z: &[f64], sigma: f64) -> Vec<f64> {
        prox_l2_raw(p, ax, z, sigma)
    }

    fn clip(&mut self, q: &Vec<f64>, lambda: &Vec<f64>, comps: usize) -> Vec<f64> {
        clip_raw(q, lambda, comps)
    }

    fn relu(&mut self, v: &Vec<f64>) -> Vec<f64> {
        relu_raw(v)
    }

    fn exp_neg(&mut self, v: &Vec<f64>, mu: f64) -> Vec<f64> {
        let r = exp_neg_scaled(v, mu);
        self.clamped += r.clamped;
        r.value
    }
}
