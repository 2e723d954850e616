//! Unrolled PDHG (L2 fidelity) and PD3O (log-Poisson fidelity) with a fixed
//! parameter-map, converged reference solves, scalar grid search and the
//! rate/Lipschitz certificates.

mod certify;
pub mod engine;
mod pd3o;
mod pdhg;
mod search;

pub use certify::{lipschitz_probe, rate_certificate, LipschitzProbe, RateCertificate, RatePoint};
pub use engine::{Engine, Plain};
pub use pd3o::{pd3o_solve, pd3o_solve_ct, Pd3oOps, Pd3oState};
pub use pdhg::{pdhg_solve, PdhgOps, PdhgState};
pub use search::{
    grid_search_scalar, reference_solve, select_best, GridSearch, ReferenceSolution, ScalarLambda, REFERENCE_MAX_ITER,
    REFERENCE_TOL,
};

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grad::{weighted_l1, Gradient};
use crate::linops::{norm_estimate, LinearMap};
use crate::prox::{kl_lipschitz_from_norm, kl_value, KlParams};
use crate::tensor::{norm, DType, GradField, Shape, Tensor};
#[allow(unused_imports)]
use num_traits::Float;

/// Step sizes and extrapolation weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
}

/// Safety factor applied to `2 / Lip(grad h)` for the PD3O primal step.
pub const PD3O_SAFETY: f64 = 0.9;

impl StepParams {
    pub fn new(sigma: f64, tau: f64, theta: f64) -> Result<Self> {
        let s = StepParams { sigma, tau, theta };
        s.check_basic()?;
        Ok(s)
    }

    fn check_basic(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.tau > 0.0 && self.sigma.is_finite() && self.tau.is_finite()) {
            return Err(Error::StepSize(format!(
                "sigma = {}, tau = {} must be positive and finite",
                self.sigma, self.tau
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::StepSize(format!("theta = {} outside (0, 1]", self.theta)));
        }
        Ok(())
    }

    /// `sigma = tau = safety / L`, `theta = 1`, for `L >= ||[A; grad]||`.
    pub fn pdhg(k_norm: f64, safety: f64) -> Result<Self> {
        if !(k_norm > 0.0) || !(safety > 0.0 && safety <= 1.0) {
            return Err(Error::StepSize(format!("operator norm {k_norm}, safety {safety}")));
        }
        StepParams::new(safety / k_norm, safety / k_norm, 1.0)
    }

    /// PD3O steps: `tau = 0.9 * 2 / Lip(grad h)` and
    /// `sigma = 1 / (tau ||grad||^2)`.
    pub fn pd3o(lip: f64, grad_norm: f64) -> Result<Self> {
        if !(lip > 0.0) || !(grad_norm > 0.0) {
            return Err(Error::StepSize(format!(
                "Lipschitz constant {lip}, gradient norm {grad_norm}"
            )));
        }
        let tau = PD3O_SAFETY * 2.0 / lip;
        StepParams::new(1.0 / (tau * grad_norm * grad_norm), tau, 1.0)
    }

    pub fn check_pdhg(&self, k_norm: f64) -> Result<()> {
        self.check_basic()?;
        let prod = self.tau * self.sigma * k_norm * k_norm;
        if prod > 1.0 + 1e-12 {
            return Err(Error::StepSize(format!("tau sigma L^2 = {prod} > 1")));
        }
        Ok(())
    }

    pub fn check_pd3o(&self, lip: f64, grad_norm: f64) -> Result<()> {
        self.check_basic()?;
        if self.tau > 2.0 / lip * (1.0 + 1e-12) {
            return Err(Error::StepSize(format!(
                "tau = {} exceeds 2 / Lip = {}",
                self.tau,
                2.0 / lip
            )));
        }
        let prod = self.sigma * self.tau * grad_norm * grad_norm;
        if prod > 1.0 + 1e-12 {
            return Err(Error::StepSize(format!("sigma tau ||grad||^2 = {prod} > 1")));
        }
        Ok(())
    }
}

/// Upper bound `sqrt(||A||^2 + ||grad||^2)` on `||[A; grad]||`, exact when
/// `A^H A` is a multiple of the identity.
pub fn stacked_norm(op: &dyn LinearMap, shape: Shape, dtype: DType) -> Result<f64> {
    let a = norm_estimate(op)?;
    let g = Gradient::new(shape, dtype).norm();
    Ok((a * a + g * g).sqrt())
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterDiag {
    pub iter: usize,
    pub objective: f64,
    pub step_norm: f64,
    pub data_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub image: Tensor,
    /// Final TV dual variable.
    pub dual: GradField,
    /// Final data-term variable (`p` of PDHG; empty for PD3O).
    pub data_dual: Vec<f64>,
    pub iterations: usize,
    pub diagnostics: Vec<IterDiag>,
    /// Filled in by callers that can read a clock.
    pub wall_time: Option<f64>,
    /// Clamped exponent arguments met during the solve.
    pub clamped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fidelity {
    L2,
    Kl(KlParams),
}

/// One reconstruction task: forward model, data, initialization and
/// (optionally) the ground truth, with step sizes fixed at construction.
#[derive(Clone)]
pub struct Problem {
    pub op: Arc<dyn LinearMap>,
    pub data: Vec<f64>,
    pub init: Tensor,
    pub truth: Option<Tensor>,
    pub fidelity: Fidelity,
    pub step: StepParams,
}

impl core::fmt::Debug for Problem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Problem")
            .field("shape", &self.init.shape())
            .field("dtype", &self.init.dtype())
            .field("fidelity", &self.fidelity)
            .field("step", &self.step)
            .finish()
    }
}

impl Problem {
    /// Quadratic fidelity; `sigma = tau = 1 / ||[A; grad]||`.
    pub fn l2(op: Arc<dyn LinearMap>, data: Vec<f64>, init: Tensor, truth: Option<Tensor>) -> Result<Self> {
        Self::check(&*op, &data, &init, truth.as_ref())?;
        let k = stacked_norm(&*op, init.shape(), init.dtype())?;
        Ok(Problem {
            op,
            data,
            init,
            truth,
            fidelity: Fidelity::L2,
            step: StepParams::pdhg(k, 1.0)?,
        })
    }

    /// Log-Poisson fidelity for real images.
    pub fn kl(
        op: Arc<dyn LinearMap>,
        data: Vec<f64>,
        init: Tensor,
        truth: Option<Tensor>,
        params: KlParams,
    ) -> Result<Self> {
        Self::check(&*op, &data, &init, truth.as_ref())?;
        if init.is_complex() {
            return Err(Error::invalid("the log-Poisson fidelity needs real images"));
        }
        let a = norm_estimate(&*op)?;
        let g = Gradient::new(init.shape(), init.dtype()).norm();
        let step = StepParams::pd3o(kl_lipschitz_from_norm(a, params), g)?;
        Ok(Problem {
            op,
            data,
            init,
            truth,
            fidelity: Fidelity::Kl(params),
            step,
        })
    }

    fn check(op: &dyn LinearMap, data: &[f64], init: &Tensor, truth: Option<&Tensor>) -> Result<()> {
        if op.domain_len() != init.data().len() {
            return Err(Error::shape("operator domain does not match the initial image"));
        }
        if op.codomain_len() != data.len() {
            return Err(Error::shape("data length does not match the operator"));
        }
        if let Some(t) = truth {
            if !t.same_layout(init) {
                return Err(Error::shape("ground truth and initial image differ in layout"));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        self.init.shape()
    }

    pub fn dtype(&self) -> DType {
        self.init.dtype()
    }

    pub fn ndirs(&self) -> usize {
        self.init.shape().ndirs()
    }

    pub fn solve(&self, lambda: &GradField, iters: usize, record: bool) -> Result<SolveReport> {
        match self.fidelity {
            Fidelity::L2 => pdhg_solve(&*self.op, &self.data, lambda, &self.init, iters, self.step, record),
            Fidelity::Kl(params) => pd3o_solve(
                &*self.op,
                &self.data,
                lambda,
                Some(params),
                &self.init,
                iters,
                self.step,
                record,
            ),
        }
    }

    /// Data term plus weighted TV at `x`.
    pub fn objective(&self, x: &Tensor, lambda: &GradField) -> Result<f64> {
        check_map(lambda, x.shape())?;
        objective_raw(&*self.op, &self.data, self.fidelity, x, lambda)
    }
}

pub(crate) fn objective_raw(
    op: &dyn LinearMap,
    z: &[f64],
    fidelity: Fidelity,
    x: &Tensor,
    lambda: &GradField,
) -> Result<f64> {
    let ax = op.forward(x.data());
    let data = match fidelity {
        Fidelity::L2 => {
            let r: Vec<f64> = ax.iter().zip(z).map(|(a, b)| a - b).collect();
            0.5 * norm(&r).powi(2)
        }
        Fidelity::Kl(params) => kl_value(&ax, z, params)?.value,
    };
    let g = Gradient::new(x.shape(), x.dtype());
    Ok(data + weighted_l1(&g.forward(x.data()), lambda.data(), x.dtype().comps()))
}

pub(crate) fn check_map(lambda: &GradField, shape: Shape) -> Result<()> {
    if lambda.shape() != shape || lambda.ndirs() != shape.ndirs() || lambda.dtype() != DType::Real {
        return Err(Error::shape("parameter-map does not match the image grid"));
    }
    if !lambda.is_positive() {
        return Err(Error::invalid("parameter-map must be strictly positive"));
    }
    Ok(())
}

pub(crate) fn check_operands(op: &dyn LinearMap, z: &[f64], x0: &Tensor) -> Result<()> {
    if op.domain_len() != x0.data().len() {
        return Err(Error::shape("operator domain does not match the initial image"));
    }
    if op.codomain_len() != z.len() {
        return Err(Error::shape("data length does not match the operator"));
    }
    Ok(())
}

pub(crate) fn rel_change(prev: &[f64], next: &[f64]) -> (f64, f64) {
    let d: f64 = prev
        .iter()
        .zip(next)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    (d, d / norm(next).max(1e-12))
}
