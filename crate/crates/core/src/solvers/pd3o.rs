use alloc::vec;
use alloc::vec::Vec;

use super::engine::{Engine, Plain};
use super::{check_map, check_operands, objective_raw, rel_change, Fidelity, IterDiag, SolveReport, StepParams};
use crate::error::{Error, Result};
use crate::grad::{weighted_l1, Gradient};
use crate::linops::{norm_estimate, LinearMap, RadonOp};
use crate::prox::{exp_neg_scaled, kl_lipschitz_from_norm, prox_nonneg, KlParams};
use crate::tensor::{norm, GradField, Tensor};

/// Iterates of the PD3O scheme; `gh` caches the smooth-term gradient at `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pd3oState<V> {
    pub p: V,
    pub q: V,
    pub xbar: V,
    pub gh: V,
    pub iter: usize,
}

/// One PD3O iteration's fixed ingredients. With `kl == None` the smooth term
/// is dropped and the scheme is PDHG on `iota_{>=0} + ||Lambda grad .||_1`.
#[derive(Clone)]
pub struct Pd3oOps<'op> {
    pub a: &'op dyn LinearMap,
    pub grad: &'op Gradient,
    pub kl: Option<KlParams>,
    pub step: StepParams,
    /// `exp(-mu z)` for the data.
    ez: Vec<f64>,
}

impl<'op> Pd3oOps<'op> {
    pub fn new(a: &'op dyn LinearMap, grad: &'op Gradient, z: &[f64], kl: Option<KlParams>, step: StepParams) -> Self {
        let ez = match kl {
            Some(k) => exp_neg_scaled(z, k.mu).value,
            None => Vec::new(),
        };
        Pd3oOps { a, grad, kl, step, ez }
    }

    /// `mu N0 A^T (e^{-z mu} - e^{-A p mu})`.
    pub fn grad_h<E: Engine<'op>>(&self, e: &mut E, p: &E::V) -> E::V {
        match self.kl {
            None => e.constant(vec![0.0; self.a.domain_len()]),
            Some(k) => {
                let scale = k.mu * k.n0;
                let ap = e.apply(self.a, p);
                let ea = e.exp_neg(&ap, k.mu);
                let ez = e.constant(self.ez.clone());
                let r = e.lincomb(&[(scale, &ez), (-scale, &ea)]);
                e.apply_adjoint(self.a, &r)
            }
        }
    }

    /// `p_0 = xbar_0`, `q_0 = 0`.
    pub fn start<E: Engine<'op>>(&self, e: &mut E, xbar0: E::V) -> Pd3oState<E::V> {
        let gh = self.grad_h(e, &xbar0);
        Pd3oState {
            p: xbar0.clone(),
            q: e.constant(vec![0.0; self.grad.codomain_len()]),
            xbar: xbar0,
            gh,
            iter: 0,
        }
    }

    pub fn step<E: Engine<'op>>(&self, e: &mut E, lambda: &E::V, s: Pd3oState<E::V>) -> Pd3oState<E::V> {
        let StepParams { sigma, tau, .. } = self.step;
        let gx = e.apply(self.grad, &s.xbar);
        let shifted = e.lincomb(&[(1.0, &s.q), (sigma, &gx)]);
        let q = e.clip(&shifted, lambda, self.grad.comps());
        let gtq = e.apply_adjoint(self.grad, &q);
        let v = e.lincomb(&[(1.0, &s.p), (-tau, &s.gh), (-tau, &gtq)]);
        let p = e.relu(&v);
        let gh = self.grad_h(e, &p);
        let xbar = e.lincomb(&[(2.0, &p), (-1.0, &s.p), (tau, &s.gh), (-tau, &gh)]);
        Pd3oState {
            p,
            q,
            xbar,
            gh,
            iter: s.iter + 1,
        }
    }
}

/// Exactly `iters` PD3O iterations; the returned image is the nonnegative
/// iterate `p_T` (projected once more so that `iters == 0` also qualifies).
#[allow(clippy::too_many_arguments)]
pub fn pd3o_solve(
    a: &dyn LinearMap,
    z: &[f64],
    lambda: &GradField,
    kl: Option<KlParams>,
    xbar0: &Tensor,
    iters: usize,
    step: StepParams,
    record: bool,
) -> Result<SolveReport> {
    run(a, z, lambda, kl, xbar0, step, iters, None, record).map(|(r, _)| r)
}

/// PD3O for low-dose CT with `tau = 0.9 * 2 / Lip` and
/// `sigma = 1 / (tau ||grad||^2)`.
pub fn pd3o_solve_ct(
    a: &RadonOp,
    z: &[f64],
    lambda: &GradField,
    kl: KlParams,
    xbar0: &Tensor,
    iters: usize,
) -> Result<SolveReport> {
    let lip = kl_lipschitz_from_norm(norm_estimate(a)?, kl);
    let g = Gradient::new(xbar0.shape(), xbar0.dtype()).norm();
    let step = StepParams::pd3o(lip, g)?;
    pd3o_solve(a, z, lambda, Some(kl), xbar0, iters, step, false)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run(
    a: &dyn LinearMap,
    z: &[f64],
    lambda: &GradField,
    kl: Option<KlParams>,
    xbar0: &Tensor,
    step: StepParams,
    iters: usize,
    tol: Option<f64>,
    record: bool,
) -> Result<(SolveReport, f64)> {
    check_operands(a, z, xbar0)?;
    check_map(lambda, xbar0.shape())?;
    if xbar0.is_complex() {
        return Err(Error::invalid("PD3O runs on real images"));
    }
    StepParams::new(step.sigma, step.tau, step.theta)?;
    let grad = Gradient::new(xbar0.shape(), xbar0.dtype());
    let ops = Pd3oOps::new(a, &grad, z, kl, step);
    let mut e = Plain::default();
    let lam = lambda.data().to_vec();
    let mut s = ops.start(&mut e, xbar0.data().to_vec());
    let mut diagnostics = Vec::new();
    let mut last = f64::INFINITY;
    while s.iter < iters {
        let prev = s.p.clone();
        s = ops.step(&mut e, &lam, s);
        if !s.p.iter().chain(&s.xbar).all(|v| v.is_finite()) {
            return Err(Error::Diverged(s.iter));
        }
        let (abs, rel) = rel_change(&prev, &s.p);
        last = rel;
        if record {
            let x = Tensor::from_vec(xbar0.shape(), xbar0.dtype(), s.p.clone())?;
            let objective = match kl {
                Some(k) => objective_raw(a, z, Fidelity::Kl(k), &x, lambda)?,
                None => weighted_l1(&grad.forward(&s.p), &lam, 1),
            };
            let ap = a.forward(&s.p);
            let r: Vec<f64> = ap.iter().zip(z).map(|(u, v)| u - v).collect();
            diagnostics.push(IterDiag {
                iter: s.iter,
                objective,
                step_norm: abs,
                data_residual: norm(&r),
            });
        }
        if tol.is_some_and(|t| rel <= t) {
            break;
        }
    }
    let report = SolveReport {
        image: Tensor::from_vec(xbar0.shape(), xbar0.dtype(), prox_nonneg(&s.p))?,
        dual: GradField::from_vec(xbar0.shape(), grad.ndirs(), xbar0.dtype(), s.q)?,
        data_dual: Vec::new(),
        iterations: s.iter,
        diagnostics,
        wall_time: None,
        clamped: e.clamped,
    };
    Ok((report, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{Identity, MatrixOp};
    use crate::prox::clip_raw;
    use crate::tensor::Shape;

    #[test]
    fn without_smooth_term_matches_projected_pdhg() {
        let shape = Shape::image(2, 2);
        let x0 = Tensor::real(shape, vec![0.4, -0.3, 1.2, 0.1]).unwrap();
        let lam = GradField::constant(shape, 2, 0.2);
        let grad = Gradient::new(shape, crate::DType::Real);
        let step = StepParams::new(0.3, 0.4, 1.0).unwrap();
        let id = Identity::new(4);
        let ops = Pd3oOps::new(&id, &grad, &[0.0; 4], None, step);
        let mut e = Plain::default();
        let mut s = ops.start(&mut e, x0.data().to_vec());
        let (mut x, mut xbar, mut q) = (x0.data().to_vec(), x0.data().to_vec(), vec![0.0; 8]);
        for _ in 0..25 {
            s = ops.step(&mut e, &lam.data().to_vec(), s);
            let gx = grad.forward(&xbar);
            let shifted: Vec<f64> = q.iter().zip(&gx).map(|(a, b)| a + 0.3 * b).collect();
            q = clip_raw(&shifted, lam.data(), 1);
            let gtq = grad.adjoint(&q);
            let next: Vec<f64> = x.iter().zip(&gtq).map(|(a, b)| (a - 0.4 * b).max(0.0)).collect();
            xbar = next.iter().zip(&x).map(|(n, o)| 2.0 * n - o).collect();
            x = next;
            for (u, v) in s.p.iter().zip(&x) {
                assert!((u - v).abs() < 1e-14);
            }
            for (u, v) in s.q.iter().zip(&q) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn output_is_nonnegative() {
        let shape = Shape::image(3, 1);
        let a = MatrixOp::new(2, 3, vec![1.0, 0.5, 0.0, 0.0, 0.5, 1.0]).unwrap();
        let kl = KlParams::new(1.0, 100.0).unwrap();
        let z = vec![0.2, 0.1];
        let lip = kl_lipschitz_from_norm(crate::linops::op_norm(&a, 1e-10, 10_000).unwrap(), kl);
        let step = StepParams::pd3o(lip, Gradient::new(shape, crate::DType::Real).norm()).unwrap();
        let x0 = Tensor::real(shape, vec![-1.0, 2.0, 0.5]).unwrap();
        let lam = GradField::constant(shape, 2, 0.01);
        for t in [0usize, 1, 2, 10, 100] {
            let r = pd3o_solve(&a, &z, &lam, Some(kl), &x0, t, step, false).unwrap();
            assert!(r.image.data().iter().all(|&v| v >= 0.0));
        }
    }
}
