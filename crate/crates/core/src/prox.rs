//! Proximal maps and fidelity derivatives shared by both solvers.
//!
//! The raw-slice kernels here are also what the differentiable tape records,
//! so a solve through the tape is bit-identical to a plain solve.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linops::{norm_estimate, LinearMap};
use crate::tensor::{DType, GradField};
#[allow(unused_imports)]
use num_traits::Float;

/// Exponent arguments are clamped to `[-EXP_CLAMP, EXP_CLAMP]`.
pub const EXP_CLAMP: f64 = 700.0;

/// A value together with the number of clamped exponent arguments met while
/// computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Clamped<T> {
    pub value: T,
    pub clamped: usize,
}

/// Entrywise projection onto `[-lambda, lambda]`; `lambda[i / comps]` bounds
/// `q[i]`, so real and imaginary parts share one corridor.
pub fn clip_raw(q: &[f64], lambda: &[f64], comps: usize) -> Vec<f64> {
    q.chunks_exact(comps)
        .zip(lambda)
        .flat_map(|(qs, &l)| qs.iter().map(move |&v| v.max(-l).min(l)))
        .collect()
}

/// Dual TV step: clip `q` to the parameter-map corridor.
pub fn clip(q: &GradField, lambda: &GradField) -> Result<GradField> {
    if q.shape() != lambda.shape() || q.ndirs() != lambda.ndirs() {
        return Err(Error::shape("dual variable and parameter-map differ in shape"));
    }
    if lambda.dtype() != DType::Real {
        return Err(Error::invalid("parameter-map must be real"));
    }
    let out = clip_raw(q.data(), lambda.data(), q.dtype().comps());
    GradField::from_vec(q.shape(), q.ndirs(), q.dtype(), out)
}

/// `(p + sigma (ax - z)) / (1 + sigma)`: the prox of the conjugate of
/// `0.5 ||. - z||^2`.
pub fn prox_l2_conj_step(p: &[f64], ax: &[f64], z: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if p.len() != ax.len() || p.len() != z.len() {
        return Err(Error::shape("dual L2 step operands differ in length"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    Ok(prox_l2_raw(p, ax, z, sigma))
}

pub(crate) fn prox_l2_raw(p: &[f64], ax: &[f64], z: &[f64], sigma: f64) -> Vec<f64> {
    let denom = 1.0 + sigma;
    p.iter()
        .zip(ax)
        .zip(z)
        .map(|((&p, &a), &z)| (p + sigma * (a - z)) / denom)
        .collect()
}

/// Projection onto the nonnegative orthant.
pub fn prox_nonneg(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// `exp(-mu v)` entrywise with the exponent clamped; returns the number of
/// clamped entries alongside.
pub fn exp_neg_scaled(v: &[f64], mu: f64) -> Clamped<Vec<f64>> {
    let mut clamped = 0;
    let value = v
        .iter()
        .map(|&x| {
            let arg = -mu * x;
            if arg > EXP_CLAMP {
                clamped += 1;
                EXP_CLAMP.exp()
            } else if arg < -EXP_CLAMP {
                clamped += 1;
                (-EXP_CLAMP).exp()
            } else {
                arg.exp()
            }
        })
        .collect();
    Clamped { value, clamped }
}

/// Parameters of the log-transformed Poisson (Kullback-Leibler) fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlParams {
    /// Attenuation normalization.
    pub mu: f64,
    /// Mean photon count per detector bin without attenuation.
    pub n0: f64,
}

impl KlParams {
    pub fn new(mu: f64, n0: f64) -> Result<Self> {
        if !(mu > 0.0) || !(n0 > 0.0) || !mu.is_finite() || !n0.is_finite() {
            return Err(Error::invalid("KL parameters need mu > 0 and N0 > 0"));
        }
        Ok(KlParams { mu, n0 })
    }

    /// Low-dose CT values used for the LoDoPaB-style setup.
    pub fn low_dose_ct() -> Self {
        KlParams {
            mu: 81.35858,
            n0: 4096.0,
        }
    }
}

/// `sum_i N0 e^{-(Ax)_i mu} - N0 e^{-z_i mu} (-(Ax)_i mu + log N0)`.
pub fn kl_value(ax: &[f64], z: &[f64], params: KlParams) -> Result<Clamped<f64>> {
    if ax.len() != z.len() {
        return Err(Error::shape("projection and data differ in length"));
    }
    let ea = exp_neg_scaled(ax, params.mu);
    let ez = exp_neg_scaled(z, params.mu);
    let log_n0 = params.n0.ln();
    let value = ea
        .value
        .iter()
        .zip(&ez.value)
        .zip(ax)
        .map(|((&ea, &ez), &a)| params.n0 * ea - params.n0 * ez * (-a * params.mu + log_n0))
        .sum();
    Ok(Clamped {
        value,
        clamped: ea.clamped + ez.clamped,
    })
}

/// `mu N0 A^T (e^{-z mu} - e^{-A x mu})`.
pub fn kl_grad_image(x: &[f64], op: &dyn LinearMap, z: &[f64], params: KlParams) -> Result<Clamped<Vec<f64>>> {
    if x.len() != op.domain_len() || z.len() != op.codomain_len() {
        return Err(Error::shape("KL gradient operands do not match the operator"));
    }
    let ea = exp_neg_scaled(&op.forward(x), params.mu);
    let ez = exp_neg_scaled(z, params.mu);
    let scale = params.mu * params.n0;
    let r: Vec<f64> = ez
        .value
        .iter()
        .zip(&ea.value)
        .map(|(e1, e2)| scale * e1 - scale * e2)
        .collect();
    Ok(Clamped {
        value: op.adjoint(&r),
        clamped: ea.clamped + ez.clamped,
    })
}

/// Upper bound `||A||^2 mu^2 N0` on the Lipschitz constant of the KL gradient
/// over the nonnegative orthant.
pub fn kl_lipschitz(op: &dyn LinearMap, params: KlParams) -> Result<f64> {
    let norm = norm_estimate(op)?;
    Ok(kl_lipschitz_from_norm(norm, params))
}

pub fn kl_lipschitz_from_norm(op_norm: f64, params: KlParams) -> f64 {
    op_norm * op_norm * params.mu * params.mu * params.n0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{Identity, MatrixOp};
    use crate::tensor::Shape;
    use alloc::vec;

    #[test]
    fn clip_cases() {
        let s = Shape::image(3, 1);
        let q = GradField::from_vec(s, 1, DType::Real, vec![1.5, -2.0, 0.3]).unwrap();
        let lam = GradField::constant(s, 1, 1.0);
        let c = clip(&q, &lam).unwrap();
        assert_eq!(c.data(), &[1.0, -1.0, 0.3]);
        assert_eq!(clip(&c, &lam).unwrap(), c);
        let tiny = GradField::constant(s, 1, 1e-12);
        assert!(clip(&q, &tiny).unwrap().data().iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn complex_clip_acts_per_part() {
        let s = Shape::image(1, 1);
        let q = GradField::from_vec(s, 1, DType::Complex, vec![2.0, -0.5]).unwrap();
        let lam = GradField::constant(s, 1, 1.0);
        assert_eq!(clip(&q, &lam).unwrap().data(), &[1.0, -0.5]);
    }

    #[test]
    fn l2_conj_step_examples() {
        assert_eq!(prox_l2_conj_step(&[0.0], &[3.0], &[3.0], 0.7).unwrap(), vec![0.0]);
        assert_eq!(prox_l2_conj_step(&[0.0], &[2.0], &[0.0], 1.0).unwrap(), vec![1.0]);
        let (ax, z, sigma) = (1.3, 0.4, 0.25);
        let p = ax - z;
        let next = prox_l2_conj_step(&[p], &[ax], &[z], sigma).unwrap()[0];
        assert!((next - p).abs() < 1e-15);
        assert!(prox_l2_conj_step(&[0.0], &[1.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn nonneg_examples() {
        assert_eq!(prox_nonneg(&[-1.0, 2.0]), vec![0.0, 2.0]);
        let p = prox_nonneg(&[-3.0, 0.5, 0.0]);
        assert_eq!(prox_nonneg(&p), p);
    }

    #[test]
    fn kl_single_bin_and_matched_gradient() {
        let params = KlParams::new(1.0, 1.0).unwrap();
        assert_eq!(kl_value(&[0.0], &[0.0], params).unwrap().value, 1.0);
        let a = MatrixOp::new(2, 2, vec![1.0, 0.5, 0.2, 1.0]).unwrap();
        let x = [0.3, 0.7];
        let z = a.forward(&x);
        let g = kl_grad_image(&x, &a, &z, KlParams::new(2.0, 50.0).unwrap()).unwrap();
        assert!(g.value.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponent_guard_is_flagged() {
        let params = KlParams::new(1.0, 1.0).unwrap();
        let v = kl_value(&[-800.0], &[0.0], params).unwrap();
        assert_eq!(v.clamped, 1);
        assert!(v.value.is_finite());
    }

    #[test]
    fn lipschitz_substitution() {
        let id = Identity::new(4);
        assert!((kl_lipschitz(&id, KlParams::new(1.0, 4096.0).unwrap()).unwrap() - 4096.0).abs() < 1e-6);
        assert!((kl_lipschitz(&id, KlParams::new(2.0, 1.0).unwrap()).unwrap() - 4.0).abs() < 1e-9);
        let ct = KlParams::low_dose_ct();
        assert_eq!(kl_lipschitz_from_norm(1.0, ct), 81.35858 * 81.35858 * 4096.0);
    }
}
