use alloc::vec::Vec;

use super::{pd3o, pdhg, Fidelity, Problem, SolveReport};
use crate::error::{Error, Result};
use crate::metrics::psnr;
use crate::tensor::{GradField, Shape, SharingMode};

pub const REFERENCE_TOL: f64 = 1e-10;
pub const REFERENCE_MAX_ITER: usize = 20_000;

/// A long-run solve standing in for the exact minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub report: SolveReport,
    /// Relative step at the last iteration.
    pub reached: f64,
    pub converged: bool,
}

/// Runs the problem's solver until the relative primal step drops to `tol`
/// or `max_iter` iterations have been taken.
pub fn reference_solve(problem: &Problem, lambda: &GradField, tol: f64, max_iter: usize) -> Result<ReferenceSolution> {
    let (report, reached) = match problem.fidelity {
        Fidelity::L2 => pdhg::run(
            &*problem.op,
            &problem.data,
            lambda,
            &problem.init,
            problem.step,
            max_iter,
            Some(tol),
            false,
        )?,
        Fidelity::Kl(params) => pd3o::run(
            &*problem.op,
            &problem.data,
            lambda,
            Some(params),
            &problem.init,
            problem.step,
            max_iter,
            Some(tol),
            false,
        )?,
    };
    Ok(ReferenceSolution {
        report,
        reached,
        converged: reached <= tol,
    })
}

/// A scalar regularization choice: one weight for the spatial directions and
/// one for time (equal in the `xyt` mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLambda {
    pub xy: f64,
    pub t: f64,
}

impl ScalarLambda {
    pub fn uniform(value: f64) -> Self {
        ScalarLambda { xy: value, t: value }
    }

    pub fn to_map(&self, shape: Shape) -> GradField {
        let ndirs = shape.ndirs();
        let n = shape.voxels();
        let mut data = Vec::with_capacity(ndirs * n);
        for d in 0..ndirs {
            let v = if d < 2 { self.xy } else { self.t };
            data.extend(core::iter::repeat_n(v, n));
        }
        GradField::param_map(shape, ndirs, data).expect("positive scalar weights")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best: ScalarLambda,
    pub best_score: f64,
    /// Every candidate with its mean PSNR, in evaluation order.
    pub scores: Vec<(ScalarLambda, f64)>,
}

/// Index of the highest score; candidates are expected in ascending order of
/// smoothing, so keeping the first maximum breaks ties toward less smoothing.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if s > scores[b] => best = Some(i),
            _ => {}
        }
    }
    best
}

/// Mean-PSNR grid search over scalar weights. `Xyt` scans `grid_xy` alone;
/// `XyT` scans the Cartesian product `grid_xy x grid_t`.
pub fn grid_search_scalar(
    problems: &[Problem],
    mode: SharingMode,
    grid_xy: &[f64],
    grid_t: &[f64],
    iters: usize,
) -> Result<GridSearch> {
    if problems.is_empty() {
        return Err(Error::invalid("grid search needs at least one problem"));
    }
    if problems.iter().any(|p| p.truth.is_none()) {
        return Err(Error::invalid("grid search needs ground truth for every problem"));
    }
    let positive = |g: &[f64]| !g.is_empty() && g.iter().all(|&v| v > 0.0 && v.is_finite());
    let mut candidates: Vec<ScalarLambda> = match mode {
        SharingMode::Xyt => {
            if !positive(grid_xy) {
                return Err(Error::invalid("grid must be nonempty and strictly positive"));
            }
            grid_xy.iter().map(|&v| ScalarLambda::uniform(v)).collect()
        }
        SharingMode::XyT => {
            if !positive(grid_xy) || !positive(grid_t) {
                return Err(Error::invalid("grids must be nonempty and strictly positive"));
            }
            if problems.iter().any(|p| !p.shape().is_dynamic()) {
                return Err(Error::invalid("separate temporal weights need dynamic data"));
            }
            grid_xy
                .iter()
                .flat_map(|&xy| grid_t.iter().map(move |&t| ScalarLambda { xy, t }))
                .collect()
        }
        SharingMode::XYT => return Err(Error::invalid("scalar grid search covers the xyt and xy_t modes")),
    };
    candidates.sort_by(|a, b| {
        (a.xy + a.t, a.xy)
            .partial_cmp(&(b.xy + b.t, b.xy))
            .expect("finite grid")
    });
    let mut scores = Vec::with_capacity(candidates.len());
    for c in &candidates {
        let mut total = 0.0;
        for p in problems {
            let r = p.solve(&c.to_map(p.shape()), iters, false)?;
            total += psnr(&r.image, p.truth.as_ref().expect("checked above"))?;
        }
        scores.push(total / problems.len() as f64);
    }
    let best = select_best(&scores).expect("nonempty grid");
    Ok(GridSearch {
        best: candidates[best],
        best_score: scores[best],
        scores: candidates.into_iter().zip(scores).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::Identity;
    use crate::tensor::Tensor;
    use alloc::sync::Arc;
    use alloc::vec;

    fn rof() -> Problem {
        let shape = Shape::image(2, 1);
        let z = Tensor::real(shape, vec![0.0, 2.0]).unwrap();
        let truth = Tensor::real(shape, vec![0.5, 1.5]).unwrap();
        Problem::l2(Arc::new(Identity::new(2)), z.data().to_vec(), z, Some(truth)).unwrap()
    }

    #[test]
    fn reference_matches_closed_form() {
        let p = rof();
        let r = reference_solve(
            &p,
            &GradField::constant(p.shape(), 2, 0.5),
            REFERENCE_TOL,
            REFERENCE_MAX_ITER,
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.report.image.data()[0] - 0.5).abs() < 1e-9);
        assert!((r.report.image.data()[1] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn grid_picks_the_true_weight() {
        let g = grid_search_scalar(&[rof()], SharingMode::Xyt, &[1.0, 0.25, 0.5], &[], 5000).unwrap();
        assert_eq!(g.best, ScalarLambda::uniform(0.5));
        let one = grid_search_scalar(&[rof()], SharingMode::Xyt, &[0.7], &[], 100).unwrap();
        assert_eq!(one.best, ScalarLambda::uniform(0.7));
        assert!(grid_search_scalar(&[], SharingMode::Xyt, &[0.7], &[], 100).is_err());
        assert!(grid_search_scalar(&[rof()], SharingMode::Xyt, &[0.0], &[], 100).is_err());
    }

    #[test]
    fn ties_go_to_the_first_candidate() {
        assert_eq!(select_best(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(select_best(&[]), None);
    }
}
