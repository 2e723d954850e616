use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Tape, Var};
use crate::error::{Error, Result};

pub const FD_EPS: f64 = 1e-6;

/// Settings for [`finite_diff_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdCheck {
    pub eps: f64,
    /// Coordinates to compare.
    pub trials: usize,
    pub seed: u64,
}

impl Default for FdCheck {
    fn default() -> Self {
        FdCheck {
            eps: FD_EPS,
            trials: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSample {
    pub index: usize,
    pub autodiff: f64,
    pub finite: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub samples: Vec<FdSample>,
    /// Coordinates rejected because a perturbation switched a branch of a
    /// piecewise primitive.
    pub skipped: usize,
}

fn evaluate<'op, F>(f: &mut F, theta: Vec<f64>) -> Result<(f64, u64)>
where
    F: FnMut(&mut Tape<'op>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let p = tape.param(theta);
    let out = f(&mut tape, p)?;
    Ok((tape.value(out)[0], tape.branch_signature()))
}

/// Compares reverse-mode gradients of the scalar `f(theta)` with central
/// differences on randomly drawn coordinates.
///
/// A coordinate is only compared when both perturbed evaluations take the
/// same branches as the unperturbed one; otherwise another is drawn (up to
/// twenty draws per requested trial).
pub fn finite_diff_check<'op, F>(mut f: F, theta: &[f64], cfg: FdCheck) -> Result<FdReport>
where
    F: FnMut(&mut Tape<'op>, Var) -> Result<Var>,
{
    if theta.is_empty() {
        return Err(Error::invalid("no coordinates to check"));
    }
    if !(cfg.eps > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let (grad, base) = {
        let mut tape = Tape::new();
        let p = tape.param(theta.to_vec());
        let out = f(&mut tape, p)?;
        let g = tape.backward(out)?;
        (g.get_or_zero(p, theta.len()), tape.branch_signature())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.trials);
    let mut skipped = 0;
    let mut attempts = 0;
    while samples.len() < cfg.trials && attempts < 20 * cfg.trials {
        attempts += 1;
        let i = rng.random_range(0..theta.len());
        let mut plus = theta.to_vec();
        plus[i] += cfg.eps;
        let mut minus = theta.to_vec();
        minus[i] -= cfg.eps;
        let (fp, sp) = evaluate(&mut f, plus)?;
        let (fm, sm) = evaluate(&mut f, minus)?;
        if sp != base || sm != base {
            skipped += 1;
            continue;
        }
        let fd = (fp - fm) / (2.0 * cfg.eps);
        let ad = grad[i];
        let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-8);
        samples.push(FdSample {
            index: i,
            autodiff: ad,
            finite: fd,
            rel_error: rel,
        });
    }
    let max_rel_error = samples.iter().map(|s| s.rel_error).fold(0.0, f64::max);
    Ok(FdReport {
        max_rel_error,
        samples,
        skipped,
    })
}
