use alloc::vec;
use alloc::vec::Vec;

use super::engine::{Engine, Plain};
use super::{check_map, check_operands, objective_raw, rel_change, Fidelity, IterDiag, SolveReport, StepParams};
use crate::error::{Error, Result};
use crate::grad::Gradient;
use crate::linops::LinearMap;
use crate::tensor::{norm, GradField, Tensor};

/// Iterates of the PDHG scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct PdhgState<V> {
    pub x: V,
    pub xbar: V,
    pub p: V,
    pub q: V,
    pub iter: usize,
}

/// Everything one PDHG iteration needs besides the parameter-map.
#[derive(Clone, Copy)]
pub struct PdhgOps<'op> {
    pub a: &'op dyn LinearMap,
    pub grad: &'op Gradient,
    pub z: &'op [f64],
    pub step: StepParams,
}

impl<'op> PdhgOps<'op> {
    /// `p_0 = 0`, `q_0 = 0`, `xbar_0 = x_0`.
    pub fn start<E: Engine<'op>>(&self, e: &mut E, x0: E::V) -> PdhgState<E::V> {
        let p = e.constant(vec![0.0; self.a.codomain_len()]);
        let q = e.constant(vec![0.0; self.grad.codomain_len()]);
        PdhgState {
            xbar: x0.clone(),
            x: x0,
            p,
            q,
            iter: 0,
        }
    }

    pub fn step<E: Engine<'op>>(&self, e: &mut E, lambda: &E::V, s: PdhgState<E::V>) -> PdhgState<E::V> {
        let StepParams { sigma, tau, theta } = self.step;
        let ax = e.apply(self.a, &s.xbar);
        let p = e.prox_l2(&s.p, &ax, self.z, sigma);
        let gx = e.apply(self.grad, &s.xbar);
        let shifted = e.lincomb(&[(1.0, &s.q), (sigma, &gx)]);
        let q = e.clip(&shifted, lambda, self.grad.comps());
        let ahp = e.apply_adjoint(self.a, &p);
        let gtq = e.apply_adjoint(self.grad, &q);
        let x = e.lincomb(&[(1.0, &s.x), (-tau, &ahp), (-tau, &gtq)]);
        let xbar = e.lincomb(&[(1.0 + theta, &x), (-theta, &s.x)]);
        PdhgState {
            x,
            xbar,
            p,
            q,
            iter: s.iter + 1,
        }
    }
}

/// Exactly `iters` PDHG iterations for `min_x 0.5 ||Ax - z||^2 + ||Lambda grad x||_1`
/// from `x0`.
pub fn pdhg_solve(
    a: &dyn LinearMap,
    z: &[f64],
    lambda: &GradField,
    x0: &Tensor,
    iters: usize,
    step: StepParams,
    record: bool,
) -> Result<SolveReport> {
    run(a, z, lambda, x0, step, iters, None, record).map(|(r, _)| r)
}

/// Runs until `iters` iterations or, with `tol`, until the relative step
/// `||x_k - x_{k-1}|| / max(||x_k||, eps)` is at most `tol`. Returns the
/// report and the last relative step.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run(
    a: &dyn LinearMap,
    z: &[f64],
    lambda: &GradField,
    x0: &Tensor,
    step: StepParams,
    iters: usize,
    tol: Option<f64>,
    record: bool,
) -> Result<(SolveReport, f64)> {
    check_operands(a, z, x0)?;
    check_map(lambda, x0.shape())?;
    StepParams::new(step.sigma, step.tau, step.theta)?;
    let grad = Gradient::new(x0.shape(), x0.dtype());
    let ops = PdhgOps {
        a,
        grad: &grad,
        z,
        step,
    };
    let mut e = Plain::default();
    let lam: Vec<f64> = lambda.data().to_vec();
    let mut s = ops.start(&mut e, x0.data().to_vec());
    let mut diagnostics = Vec::new();
    let mut last = f64::INFINITY;
    while s.iter < iters {
        let prev = s.x.clone();
        s = ops.step(&mut e, &lam, s);
        if !s.x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged(s.iter));
        }
        let (abs, rel) = rel_change(&prev, &s.x);
        last = rel;
        if record {
            let x = Tensor::from_vec(x0.shape(), x0.dtype(), s.x.clone())?;
            let ax = a.forward(&s.x);
            let r: Vec<f64> = ax.iter().zip(z).map(|(u, v)| u - v).collect();
            diagnostics.push(IterDiag {
                iter: s.iter,
                objective: objective_raw(a, z, Fidelity::L2, &x, lambda)?,
                step_norm: abs,
                data_residual: norm(&r),
            });
        }
        if tol.is_some_and(|t| rel <= t) {
            break;
        }
    }
    let report = SolveReport {
        image: Tensor::from_vec(x0.shape(), x0.dtype(), s.x)?,
        dual: GradField::from_vec(x0.shape(), grad.ndirs(), x0.dtype(), s.q)?,
        data_dual: s.p,
        iterations: s.iter,
        diagnostics,
        wall_time: None,
        clamped: 0,
    };
    Ok((report, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::Identity;
    use crate::tensor::Shape;

    fn two_pixel() -> (Identity, Tensor, GradField) {
        let shape = Shape::image(2, 1);
        let z = Tensor::real(shape, vec![0.0, 2.0]).unwrap();
        (Identity::new(2), z, GradField::constant(shape, 2, 0.5))
    }

    fn steps(shape: Shape) -> StepParams {
        let k = (1.0 + Gradient::new(shape, crate::DType::Real).norm().powi(2)).sqrt();
        StepParams::pdhg(k, 1.0).unwrap()
    }

    #[test]
    fn single_pixel_returns_data() {
        let shape = Shape::image(1, 1);
        let z = Tensor::real(shape, vec![0.7]).unwrap();
        let lam = GradField::constant(shape, 2, 3.0);
        let r = pdhg_solve(&Identity::new(1), z.data(), &lam, &z, 200, steps(shape), false).unwrap();
        assert!((r.image.data()[0] - 0.7).abs() < 1e-8);
    }

    #[test]
    fn two_pixel_rof() {
        let (id, z, lam) = two_pixel();
        let r = pdhg_solve(&id, z.data(), &lam, &z, 5000, steps(z.shape()), true).unwrap();
        assert!((r.image.data()[0] - 0.5).abs() < 1e-6);
        assert!((r.image.data()[1] - 1.5).abs() < 1e-6);
        assert_eq!(r.diagnostics.len(), 5000);
        assert_eq!(r.iterations, 5000);
    }

    #[test]
    fn huge_weight_gives_the_mean() {
        let (id, z, _) = two_pixel();
        let lam = GradField::constant(z.shape(), 2, 1e6);
        let r = pdhg_solve(&id, z.data(), &lam, &z, 5000, steps(z.shape()), false).unwrap();
        assert!((r.image.data()[0] - 1.0).abs() < 1e-6);
        assert!((r.image.data()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_iterations_return_the_start() {
        let (id, z, lam) = two_pixel();
        let r = pdhg_solve(&id, z.data(), &lam, &z, 0, steps(z.shape()), false).unwrap();
        assert_eq!(r.image, z);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (id, z, lam) = two_pixel();
        let bad = StepParams {
            sigma: -1.0,
            tau: 1.0,
            theta: 1.0,
        };
        assert!(pdhg_solve(&id, z.data(), &lam, &z, 1, bad, false).is_err());
        let wrong = GradField::constant(Shape::image(3, 1), 2, 0.5);
        assert!(pdhg_solve(&id, z.data(), &wrong, &z, 1, steps(z.shape()), false).is_err());
        assert!(steps(z.shape()).check_pdhg(10.0).is_err());
    }
}
