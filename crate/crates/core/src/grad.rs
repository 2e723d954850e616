//! Forward-difference spatio-temporal gradient, its exact adjoint and the
//! anisotropic weighted TV functional.
//!
//! Differences are taken along x (direction 0), y (1) and, for dynamic data,
//! t (2). The difference at the last index of an axis is zero (Neumann
//! boundary), which makes `div(grad(x))` the graph Laplacian and keeps
//! `||grad||^2 <= 4 * ndirs`.

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::linops::LinearMap;
use crate::tensor::{DType, GradField, Shape, Tensor};
#[allow(unused_imports)]
use num_traits::Float;

/// The difference operator as a [`LinearMap`] on raw (interleaved) storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gradient {
    shape: Shape,
    comps: usize,
    ndirs: usize,
}

impl Gradient {
    pub fn new(shape: Shape, dtype: DType) -> Self {
        Gradient {
            shape,
            comps: dtype.comps(),
            ndirs: shape.ndirs(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn ndirs(&self) -> usize {
        self.ndirs
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    /// Exact operator norm. `grad^T grad` is a Kronecker sum of path-graph
    /// Laplacians whose largest eigenvalue on `n` nodes is
    /// `4 sin^2(pi (n - 1) / (2 n))`.
    pub fn norm(&self) -> f64 {
        (0..self.ndirs)
            .map(|d| {
                let n = self.axis(d).0 as f64;
                let s = (core::f64::consts::PI * (n - 1.0) / (2.0 * n)).sin();
                4.0 * s * s
            })
            .sum::<f64>()
            .sqrt()
    }

    /// (axis length, voxel stride) for direction `d`.
    fn axis(&self, d: usize) -> (usize, usize) {
        let s = self.shape;
        match d {
            0 => (s.nx, s.ny),
            1 => (s.ny, 1),
            _ => (s.nt, s.nx * s.ny),
        }
    }

    fn coord(&self, d: usize, v: usize) -> usize {
        let s = self.shape;
        match d {
            0 => (v / s.ny) % s.nx,
            1 => v % s.ny,
            _ => v / (s.nx * s.ny),
        }
    }
}

impl LinearMap for Gradient {
    fn norm_bound(&self) -> Option<f64> {
        Some(self.norm())
    }

    fn domain_len(&self) -> usize {
        self.shape.voxels() * self.comps
    }

    fn codomain_len(&self) -> usize {
        self.ndirs * self.domain_len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.domain_len();
        let c = self.comps;
        for d in 0..self.ndirs {
            let (len, stride) = self.axis(d);
            let block = &mut out[d * n..(d + 1) * n];
            for v in 0..self.shape.voxels() {
                let last = self.coord(d, v) + 1 == len;
                for k in 0..c {
                    let i = v * c + k;
                    block[i] = if last { 0.0 } else { x[i + stride * c] - x[i] };
                }
            }
        }
    }

    fn apply_adjoint(&self, g: &[f64], out: &mut [f64]) {
        let n = self.domain_len();
        let c = self.comps;
        out.iter_mut().for_each(|v| *v = 0.0);
        for d in 0..self.ndirs {
            let (len, stride) = self.axis(d);
            let block = &g[d * n..(d + 1) * n];
            for v in 0..self.shape.voxels() {
                let pos = self.coord(d, v);
                for k in 0..c {
                    let i = v * c + k;
                    let mut acc = 0.0;
                    if pos > 0 {
                        acc += block[i - stride * c];
                    }
                    if pos + 1 < len {
                        acc -= block[i];
                    }
                    out[i] += acc;
                }
            }
        }
    }
}

/// Forward differences of `x`; complex parts are differenced independently.
pub fn grad(x: &Tensor) -> GradField {
    let op = Gradient::new(x.shape(), x.dtype());
    let mut out = vec![0.0; op.codomain_len()];
    op.apply(x.data(), &mut out);
    GradField::from_vec(x.shape(), op.ndirs(), x.dtype(), out).expect("gradient of a finite tensor")
}

/// The exact adjoint of [`grad`] (no sign flip).
pub fn div(g: &GradField) -> Result<Tensor> {
    let op = Gradient::new(g.shape(), g.dtype());
    if g.ndirs() != op.ndirs() {
        return Err(Error::shape(format!(
            "{:?} expects {} directions, field has {}",
            g.shape(),
            op.ndirs(),
            g.ndirs()
        )));
    }
    let mut out = vec![0.0; op.domain_len()];
    op.apply_adjoint(g.data(), &mut out);
    Tensor::from_vec(g.shape(), g.dtype(), out)
}

/// `sum_z sum_d lambda_d(z) (|grad_d Re x(z)| + |grad_d Im x(z)|)`.
pub fn tv_weighted(x: &Tensor, lambda: &GradField) -> Result<f64> {
    if lambda.shape() != x.shape() || lambda.ndirs() != x.shape().ndirs() {
        return Err(Error::shape("parameter-map does not match the image grid"));
    }
    if lambda.dtype() != DType::Real {
        return Err(Error::invalid("parameter-map must be real"));
    }
    let g = grad(x);
    Ok(weighted_l1(g.data(), lambda.data(), x.dtype().comps()))
}

/// `sum_i lambda[i / comps] * |g[i]|` on raw storage.
pub fn weighted_l1(g: &[f64], lambda: &[f64], comps: usize) -> f64 {
    g.chunks_exact(comps)
        .zip(lambda)
        .map(|(gs, l)| l * gs.iter().map(|v| v.abs()).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::dot;
    use alloc::vec::Vec;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(values: &[f64]) -> Tensor {
        Tensor::real(Shape::image(values.len(), 1), values.to_vec()).unwrap()
    }

    #[test]
    fn constant_has_zero_gradient() {
        for shape in [Shape::image(3, 5), Shape::new(4, 2, 3)] {
            let x = Tensor::filled(shape, 2.5);
            assert!(grad(&x).data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ramp_and_two_pixel() {
        let g = grad(&line(&[0.0, 1.0, 2.0, 3.0]));
        assert_eq!(g.component(0), &[1.0, 1.0, 1.0, 0.0]);
        let g = grad(&line(&[0.0, 2.0]));
        assert_eq!(g.component(0), &[2.0, 0.0]);
    }

    #[test]
    fn divergence_of_ramp_gradient() {
        let g = grad(&line(&[0.0, 1.0, 2.0, 3.0]));
        assert_eq!(div(&g).unwrap().data(), &[-1.0, 0.0, 0.0, 1.0]);
        let zero = GradField::zeros(Shape::image(4, 1), 2, DType::Real);
        assert!(div(&zero).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_on_random_5x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = Shape::image(5, 4);
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor::real(shape, x).unwrap();
        let gf = GradField::from_vec(shape, 2, DType::Real, g).unwrap();
        let lhs = dot(grad(&x).data(), gf.data());
        let rhs = dot(x.data(), div(&gf).unwrap().data());
        assert!((lhs - rhs).abs() <= 1e-12 * x.norm() * gf.norm());
    }

    #[test]
    fn tv_examples() {
        let x = line(&[0.0, 1.0]);
        let lam = GradField::constant(x.shape(), 2, 2.0);
        assert_eq!(tv_weighted(&x, &lam).unwrap(), 2.0);

        let z = Tensor::complex(
            Shape::image(2, 1),
            &[Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)],
        )
        .unwrap();
        let ones = GradField::constant(z.shape(), 2, 1.0);
        assert_eq!(tv_weighted(&z, &ones).unwrap(), 1.0);

        let c = Tensor::filled(Shape::new(3, 3, 2), 1.0);
        let lam = GradField::constant(c.shape(), 3, 0.7);
        assert_eq!(tv_weighted(&c, &lam).unwrap(), 0.0);

        let bad = GradField::constant(Shape::image(3, 1), 2, 1.0);
        assert!(tv_weighted(&x, &bad).is_err());
    }
}
