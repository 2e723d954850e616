//! Forward models `A`, operator-norm estimation and the normal-equation
//! initializer.
//!
//! Every operator acts on raw real storage; complex images and k-space data
//! use interleaved `(re, im)` pairs, so the adjoint with respect to the real
//! inner product is the Hermitian adjoint.

mod mri;
mod radon;

pub use mri::{make_cartesian_mask, synth_coil_maps, CoilMaps, MriEncoder, SamplingMask};
pub use radon::{fbp, RadonOp};

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{dot, norm, DType, Shape};
#[allow(unused_imports)]
use num_traits::Float;

/// A bounded linear map between real vector spaces, given as a
/// forward/adjoint pair.
pub trait LinearMap: Send + Sync {
    fn domain_len(&self) -> usize;
    fn codomain_len(&self) -> usize;
    /// `out = A x`; `out` is overwritten.
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = A^H y`; `out` is overwritten.
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]);

    /// A known upper bound on `||A||`. Operators that can certify one
    /// analytically skip the power iteration in [`norm_estimate`].
    fn norm_bound(&self) -> Option<f64> {
        None
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.codomain_len()];
        self.apply(x, &mut out);
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.domain_len()];
        self.apply_adjoint(y, &mut out);
        out
    }
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn domain_len(&self) -> usize {
        (**self).domain_len()
    }
    fn codomain_len(&self) -> usize {
        (**self).codomain_len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply(x, out)
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint(y, out)
    }
    fn norm_bound(&self) -> Option<f64> {
        (**self).norm_bound()
    }
}

impl<T: LinearMap + ?Sized> LinearMap for Box<T> {
    fn domain_len(&self) -> usize {
        (**self).domain_len()
    }
    fn codomain_len(&self) -> usize {
        (**self).codomain_len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply(x, out)
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint(y, out)
    }
    fn norm_bound(&self) -> Option<f64> {
        (**self).norm_bound()
    }
}

impl<T: LinearMap + ?Sized> LinearMap for Arc<T> {
    fn domain_len(&self) -> usize {
        (**self).domain_len()
    }
    fn codomain_len(&self) -> usize {
        (**self).codomain_len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply(x, out)
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        (**self).apply_adjoint(y, out)
    }
    fn norm_bound(&self) -> Option<f64> {
        (**self).norm_bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity {
    len: usize,
}

impl Identity {
    pub fn new(len: usize) -> Self {
        Identity { len }
    }
}

impl LinearMap for Identity {
    fn domain_len(&self) -> usize {
        self.len
    }
    fn norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }
    fn codomain_len(&self) -> usize {
        self.len
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// Dense row-major matrix; mostly for tests and small certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOp {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixOp {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(MatrixOp { rows, cols, data })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        MatrixOp { rows: n, cols: n, data }
    }
}

impl LinearMap for MatrixOp {
    fn domain_len(&self) -> usize {
        self.cols
    }
    fn codomain_len(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(&self.data[r * self.cols..(r + 1) * self.cols], x);
        }
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &yr) in y.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
    }
}

/// The vertical stack `[top; bottom]`, e.g. `K = [A; grad]`.
pub struct Stacked<'a> {
    top: &'a dyn LinearMap,
    bottom: &'a dyn LinearMap,
}

impl<'a> Stacked<'a> {
    pub fn new(top: &'a dyn LinearMap, bottom: &'a dyn LinearMap) -> Result<Self> {
        if top.domain_len() != bottom.domain_len() {
            return Err(Error::shape("stacked operators must share a domain"));
        }
        Ok(Stacked { top, bottom })
    }
}

impl LinearMap for Stacked<'_> {
    fn domain_len(&self) -> usize {
        self.top.domain_len()
    }
    fn codomain_len(&self) -> usize {
        self.top.codomain_len() + self.bottom.codomain_len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = out.split_at_mut(self.top.codomain_len());
        self.top.apply(x, a);
        self.bottom.apply(x, b);
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let (a, b) = y.split_at(self.top.codomain_len());
        self.top.apply_adjoint(a, out);
        let tmp = self.bottom.adjoint(b);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
}

pub const OP_NORM_TOL: f64 = 1e-6;
pub const OP_NORM_MAX_ITER: usize = 50_000;

/// Estimates `||K||` by power iteration on `K^H K` from a fixed seed.
///
/// Stops once the eigen-residual `||K^H K v - rho v||` drops below
/// `tol * rho` and returns `sqrt(rho + residual)`, which brackets the
/// dominant eigenvalue from above to within the tolerance.
pub fn op_norm(op: &dyn LinearMap, tol: f64, max_iter: usize) -> Result<f64> {
    let n = op.domain_len();
    if n == 0 {
        return Err(Error::invalid("operator has an empty domain"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6f70_6e6f_726d);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut kv = vec![0.0; op.codomain_len()];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        op.apply(&v, &mut kv);
        op.apply_adjoint(&kv, &mut w);
        let rho = dot(&v, &w);
        if rho <= 0.0 {
            return Err(Error::invalid("operator vanishes on the probe vector"));
        }
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - rho * vi) * (wi - rho * vi))
            .sum::<f64>()
            .sqrt();
        estimate = (rho + residual).sqrt();
        if residual <= tol * rho {
            return Ok(estimate);
        }
        let nw = norm(&w);
        v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / nw);
    }
    Err(Error::NoConvergence {
        iters: max_iter,
        estimate,
    })
}

/// `||A||` from the operator's own bound when it has one, otherwise by power
/// iteration with the default tolerance.
pub fn norm_estimate(op: &dyn LinearMap) -> Result<f64> {
    match op.norm_bound() {
        Some(b) => Ok(b),
        None => op_norm(op, OP_NORM_TOL, OP_NORM_MAX_ITER),
    }
}

/// `|<A x, y> - <x, A^H y>| / (||x|| ||y||)`.
pub fn adjoint_defect(op: &dyn LinearMap, x: &[f64], y: &[f64]) -> f64 {
    let lhs = dot(&op.forward(x), y);
    let rhs = dot(x, &op.adjoint(y));
    (lhs - rhs).abs() / (norm(x) * norm(y)).max(f64::MIN_POSITIVE)
}

/// Conjugate gradients on `A^H A x = A^H z` from zero.
///
/// `iters == 0` returns the adjoint `A^H z` itself; a vanishing residual ends
/// the iteration early with the current iterate.
pub fn cg_normal_init(op: &dyn LinearMap, z: &[f64], iters: usize) -> Vec<f64> {
    let b = op.adjoint(z);
    if iters == 0 {
        return b;
    }
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b;
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut ap = vec![0.0; op.codomain_len()];
    let mut ahap = vec![0.0; n];
    for _ in 0..iters {
        if rs == 0.0 {
            break;
        }
        op.apply(&p, &mut ap);
        op.apply_adjoint(&ap, &mut ahap);
        let pap = dot(&p, &ahap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ahap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    x
}

/// Assembles the dense matrix of a (small) operator column by column.
pub fn to_dense(op: &dyn LinearMap) -> DMatrix<f64> {
    let (m, n) = (op.codomain_len(), op.domain_len());
    let mut mat = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        for i in 0..m {
            mat[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    mat
}

/// A shared forward model together with its image-domain layout and a
/// cached norm estimate.
#[derive(Clone)]
pub struct LinearOperator {
    map: Arc<dyn LinearMap>,
    shape: Shape,
    dtype: DType,
    norm: f64,
}

impl LinearOperator {
    /// Wraps `map` and estimates its norm with the default tolerance.
    pub fn new(map: Arc<dyn LinearMap>, shape: Shape, dtype: DType) -> Result<Self> {
        if map.domain_len() != shape.voxels() * dtype.comps() {
            return Err(Error::shape("operator domain does not match the image layout"));
        }
        let norm = norm_estimate(map.as_ref())?;
        Ok(LinearOperator {
            map,
            shape,
            dtype,
            norm,
        })
    }

    pub fn identity(shape: Shape, dtype: DType) -> Self {
        LinearOperator {
            map: Arc::new(Identity::new(shape.voxels() * dtype.comps())),
            shape,
            dtype,
            norm: 1.0,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn map(&self) -> &dyn LinearMap {
        self.map.as_ref()
    }
}

impl LinearMap for LinearOperator {
    fn domain_len(&self) -> usize {
        self.map.domain_len()
    }
    fn codomain_len(&self) -> usize {
        self.map.codomain_len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.map.apply(x, out)
    }
    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        self.map.apply_adjoint(y, out)
    }
    fn norm_bound(&self) -> Option<f64> {
        Some(self.norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::Gradient;

    #[test]
    fn identity_basics() {
        let id = Identity::new(5);
        let x = [1.0, -2.0, 3.0, 0.5, 0.0];
        assert_eq!(id.forward(&x), x.to_vec());
        assert_eq!(id.adjoint(&x), x.to_vec());
        assert!((op_norm(&id, 1e-6, 100).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_norm() {
        let d = MatrixOp::diagonal(&[1.0, 3.0]);
        let est = op_norm(&d, 1e-6, 1000).unwrap();
        assert!((est - 3.0).abs() <= 3e-6, "{est}");
    }

    #[test]
    fn difference_operator_norm_on_line() {
        let g = Gradient::new(Shape::image(64, 1), DType::Real);
        let est = op_norm(&g, 1e-6, 50_000).unwrap();
        let exact = 2.0 * (63.0 * core::f64::consts::PI / 128.0).sin().abs();
        assert!((est - exact).abs() <= 1e-6 * exact, "{est} vs {exact}");
        assert!((est - 1.9994).abs() < 1e-4);
    }

    #[test]
    fn op_norm_reports_last_estimate_on_failure() {
        let g = Gradient::new(Shape::image(64, 1), DType::Real);
        match op_norm(&g, 1e-12, 3) {
            Err(Error::NoConvergence { iters, estimate }) => {
                assert_eq!(iters, 3);
                assert!(estimate > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cg_on_identity() {
        let id = Identity::new(3);
        let z = [1.0, 2.0, -1.0];
        assert_eq!(cg_normal_init(&id, &z, 0), z.to_vec());
        assert_eq!(cg_normal_init(&id, &z, 1), z.to_vec());
        assert_eq!(cg_normal_init(&id, &[0.0; 3], 5), vec![0.0; 3]);
    }

    #[test]
    fn stacked_adjoint_and_norm() {
        let id = Identity::new(8);
        let g = Gradient::new(Shape::image(8, 1), DType::Real);
        let k = Stacked::new(&id, &g).unwrap();
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..24).map(|i| (i as f64 * 1.3).cos()).collect();
        assert!(adjoint_defect(&k, &x, &y) < 1e-14);
        let l = op_norm(&k, 1e-8, 100_000).unwrap();
        let exact = (1.0 + 4.0 * (7.0 * core::f64::consts::PI / 16.0).sin().powi(2)).sqrt();
        assert!((l - exact).abs() < 1e-7);
    }
}
