use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{pdhg, pdhg_solve, StepParams, REFERENCE_TOL};
use crate::error::{Error, Result};
use crate::grad::Gradient;
use crate::linops::{to_dense, LinearMap, Stacked};
use crate::tensor::{norm, GradField, Tensor};
#[allow(unused_imports)]
use num_traits::Float;

/// Largest image (in real unknowns) for which the dense certificates run.
pub const CERTIFICATE_MAX_UNKNOWNS: usize = 64;

/// `sigma = tau = CERTIFICATE_SAFETY / ||K||`: strictly inside the step
/// condition so that `M` is positive definite rather than semidefinite.
pub const CERTIFICATE_SAFETY: f64 = 0.9;

/// Iteration cap for the reference solves behind the certificates.
pub const CERTIFICATE_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub iters: usize,
    pub measured: f64,
    pub bound: f64,
}

impl RatePoint {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound
    }
}

/// Constants of the sub-linear rate `||x_T - x*|| <= 3 C_{z,A} T^{-1/4} (1 + ||v_0 - v*||_M)`
/// together with measured errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    /// `sqrt` of the smallest and largest eigenvalue of `M`.
    pub c: f64,
    pub big_c: f64,
    pub mu_z: f64,
    pub l_z: f64,
    pub lambda_min: f64,
    pub op_norm: f64,
    pub lambda_bar: f64,
    pub c_za: f64,
    pub step: StepParams,
    /// `||v_0 - v*||_M`.
    pub init_distance: f64,
    pub reference_reached: f64,
    pub points: Vec<RatePoint>,
}

impl RateCertificate {
    pub fn holds(&self) -> bool {
        self.points.iter().all(RatePoint::holds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzProbe {
    pub lhs: f64,
    pub rhs: f64,
}

impl LipschitzProbe {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

fn eig_extremes(m: DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m).eigenvalues;
    (e.min(), e.max())
}

fn check_small(a: &dyn LinearMap, z: &[f64], x0: &Tensor) -> Result<()> {
    super::check_operands(a, z, x0)?;
    if x0.is_complex() {
        return Err(Error::invalid("certificates cover real-valued problems"));
    }
    if x0.data().len() > CERTIFICATE_MAX_UNKNOWNS {
        return Err(Error::invalid("problem too large for dense certificates"));
    }
    Ok(())
}

/// `(lambda_min(A^T A), ||A||)` from a dense eigensolve.
fn normal_spectrum(a: &dyn LinearMap) -> Result<(f64, f64)> {
    let ad = to_dense(a);
    let (lo, hi) = eig_extremes(ad.transpose() * &ad);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite(lo));
    }
    Ok((lo, hi.sqrt()))
}

/// Builds the rate certificate for `min 0.5 ||Ax - z||^2 + ||Lambda grad x||_1`.
pub fn rate_certificate(
    a: &dyn LinearMap,
    z: &[f64],
    lambda: &GradField,
    x0: &Tensor,
    t_list: &[usize],
) -> Result<RateCertificate> {
    check_small(a, z, x0)?;
    super::check_map(lambda, x0.shape())?;
    let grad = Gradient::new(x0.shape(), x0.dtype());
    let k = to_dense(&Stacked::new(a, &grad)?);
    let (_, kk) = eig_extremes(k.transpose() * &k);
    let step = StepParams::pdhg(kk.sqrt(), CERTIFICATE_SAFETY)?;

    let (n, m) = (k.ncols(), k.nrows());
    let mut big_m = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        big_m[(i, i)] = 1.0 / step.tau;
    }
    for i in 0..m {
        big_m[(n + i, n + i)] = 1.0 / step.sigma;
    }
    for r in 0..m {
        for c in 0..n {
            big_m[(n + r, c)] = -k[(r, c)];
            big_m[(c, n + r)] = -k[(r, c)];
        }
    }
    let (lo, hi) = eig_extremes(big_m.clone());
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite(lo));
    }
    let (c, big_c) = (lo.sqrt(), hi.sqrt());

    let (lambda_min, a_norm) = normal_spectrum(a)?;
    let (mu_z, l_z) = (1.0, 1.0);
    let lambda_bar = lambda.norm();
    let c_za = (big_c * l_z * a_norm)
        .max(4.0 * big_c * lambda_bar)
        .max(2.0)
        .max(lambda_min * mu_z)
        / (lambda_min * mu_z);

    let (reference, reached) = pdhg::run(a, z, lambda, x0, step, CERTIFICATE_MAX_ITER, Some(REFERENCE_TOL), false)?;
    let xs = reference.image.data();
    let ps: Vec<f64> = a.forward(xs).iter().zip(z).map(|(u, v)| u - v).collect();
    let mut d = Vec::with_capacity(n + m);
    d.extend(x0.data().iter().zip(xs).map(|(u, v)| u - v));
    d.extend(ps.iter().map(|v| -v));
    d.extend(reference.dual.data().iter().map(|v| -v));
    let d = DVector::from_vec(d);
    let init_distance = d.dot(&(&big_m * &d)).max(0.0).sqrt();

    let mut points = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let r = pdhg_solve(a, z, lambda, x0, t, step, false)?;
        let diff: Vec<f64> = r.image.data().iter().zip(xs).map(|(u, v)| u - v).collect();
        let bound = if t == 0 {
            f64::INFINITY
        } else {
            3.0 * c_za / (t as f64).powf(0.25) * (1.0 + init_distance)
        };
        points.push(RatePoint {
            iters: t,
            measured: norm(&diff),
            bound,
        });
    }
    Ok(RateCertificate {
        c,
        big_c,
        mu_z,
        l_z,
        lambda_min,
        op_norm: a_norm,
        lambda_bar,
        c_za,
        step,
        init_distance,
        reference_reached: reached,
        points,
    })
}

/// Compares `||S*(Lambda_1) - S*(Lambda_2)||` with
/// `2 ||grad|| / (lambda_min(A^T A) mu_z) ||Lambda_1 - Lambda_2||`.
pub fn lipschitz_probe(
    a: &dyn LinearMap,
    z: &[f64],
    lambda1: &GradField,
    lambda2: &GradField,
    x0: &Tensor,
) -> Result<LipschitzProbe> {
    check_small(a, z, x0)?;
    super::check_map(lambda1, x0.shape())?;
    super::check_map(lambda2, x0.shape())?;
    let (lambda_min, a_norm) = normal_spectrum(a)?;
    let g = Gradient::new(x0.shape(), x0.dtype()).norm();
    let step = StepParams::pdhg((a_norm * a_norm + g * g).sqrt(), 1.0)?;
    let s1 = pdhg::run(
        a,
        z,
        lambda1,
        x0,
        step,
        CERTIFICATE_MAX_ITER,
        Some(REFERENCE_TOL),
        false,
    )?
    .0;
    let s2 = pdhg::run(
        a,
        z,
        lambda2,
        x0,
        step,
        CERTIFICATE_MAX_ITER,
        Some(REFERENCE_TOL),
        false,
    )?
    .0;
    let diff: Vec<f64> = s1
        .image
        .data()
        .iter()
        .zip(s2.image.data())
        .map(|(u, v)| u - v)
        .collect();
    let dl: Vec<f64> = lambda1.data().iter().zip(lambda2.data()).map(|(u, v)| u - v).collect();
    Ok(LipschitzProbe {
        lhs: norm(&diff),
        rhs: 2.0 * g / lambda_min * norm(&dl),
    })
}
