//! Dense real/complex tensors over an `(nx, ny, nt)` grid and stacks of
//! directional components ([`GradField`]).
//!
//! Storage is a flat `Vec<f64>`. Voxel `(i, j, t)` lives at
//! `(t * nx + i) * ny + j`, i.e. row-major `(nx, ny)` frames stacked with time
//! outermost. Complex values are interleaved `(re, im)` per voxel, so every
//! linear map in the crate acts on plain real slices and the real inner
//! product of two interleaved vectors is `Re <a, b>`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    Real,
    Complex,
}

impl DType {
    /// Number of reals stored per voxel.
    pub fn comps(self) -> usize {
        match self {
            DType::Real => 1,
            DType::Complex => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl Shape {
    pub fn new(nx: usize, ny: usize, nt: usize) -> Self {
        Shape { nx, ny, nt }
    }

    pub fn image(nx: usize, ny: usize) -> Self {
        Shape { nx, ny, nt: 1 }
    }

    pub fn voxels(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    pub fn frame_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_dynamic(&self) -> bool {
        self.nt > 1
    }

    /// Number of difference directions: 2 for static images, 3 with time.
    pub fn ndirs(&self) -> usize {
        if self.is_dynamic() {
            3
        } else {
            2
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, t: usize) -> usize {
        (t * self.nx + i) * self.ny + j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dtype: DType,
    shape: Shape,
    data: Vec<f64>,
}

fn check_finite(data: &[f64], what: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

impl Tensor {
    pub fn zeros(shape: Shape, dtype: DType) -> Self {
        Tensor {
            dtype,
            shape,
            data: vec![0.0; shape.voxels() * dtype.comps()],
        }
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Tensor {
            dtype: DType::Real,
            shape,
            data: vec![value; shape.voxels()],
        }
    }

    /// Builds a tensor from raw storage (interleaved for complex).
    pub fn from_vec(shape: Shape, dtype: DType, data: Vec<f64>) -> Result<Self> {
        let want = shape.voxels() * dtype.comps();
        if data.len() != want {
            return Err(Error::shape(format!(
                "tensor of {:?} {:?} needs {} values, got {}",
                dtype,
                shape,
                want,
                data.len()
            )));
        }
        check_finite(&data, "tensor data")?;
        Ok(Tensor { dtype, shape, data })
    }

    pub fn real(shape: Shape, data: Vec<f64>) -> Result<Self> {
        Self::from_vec(shape, DType::Real, data)
    }

    pub fn complex(shape: Shape, values: &[Complex64]) -> Result<Self> {
        let mut data = Vec::with_capacity(values.len() * 2);
        for v in values {
            data.push(v.re);
            data.push(v.im);
        }
        Self::from_vec(shape, DType::Complex, data)
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn is_complex(&self) -> bool {
        self.dtype == DType::Complex
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn value(&self, voxel: usize) -> Complex64 {
        match self.dtype {
            DType::Real => Complex64::new(self.data[voxel], 0.0),
            DType::Complex => Complex64::new(self.data[2 * voxel], self.data[2 * voxel + 1]),
        }
    }

    pub fn to_complex_vec(&self) -> Vec<Complex64> {
        (0..self.shape.voxels()).map(|v| self.value(v)).collect()
    }

    /// Promotes a real tensor to complex storage; complex input is cloned.
    pub fn to_complex(&self) -> Tensor {
        match self.dtype {
            DType::Complex => self.clone(),
            DType::Real => {
                let mut data = Vec::with_capacity(self.data.len() * 2);
                for &v in &self.data {
                    data.push(v);
                    data.push(0.0);
                }
                Tensor {
                    dtype: DType::Complex,
                    shape: self.shape,
                    data,
                }
            }
        }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        match self.dtype {
            DType::Real => self.data.iter().map(|v| v.abs()).collect(),
            DType::Complex => self.data.chunks_exact(2).map(|c| c[0].hypot(c[1])).collect(),
        }
    }

    /// One frame as its own static tensor.
    pub fn frame(&self, t: usize) -> Tensor {
        let len = self.shape.frame_len() * self.dtype.comps();
        Tensor {
            dtype: self.dtype,
            shape: Shape::image(self.shape.nx, self.shape.ny),
            data: self.data[t * len..(t + 1) * len].to_vec(),
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn same_layout(&self, other: &Tensor) -> bool {
        self.dtype == other.dtype && self.shape == other.shape
    }
}

/// Euclidean norm of a raw slice.
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Real inner product of two raw slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A stack of `ndirs` per-direction components sharing one grid.
///
/// Layout is `[direction][voxel][comp]`. Used for gradients, the dual
/// variable `q` and (real, positive) regularization parameter-maps.
#[derive(Debug, Clone, PartialEq)]
pub struct GradField {
    ndirs: usize,
    shape: Shape,
    dtype: DType,
    data: Vec<f64>,
}

impl GradField {
    pub fn zeros(shape: Shape, ndirs: usize, dtype: DType) -> Self {
        GradField {
            ndirs,
            shape,
            dtype,
            data: vec![0.0; ndirs * shape.voxels() * dtype.comps()],
        }
    }

    /// A real map with every entry equal to `value`.
    pub fn constant(shape: Shape, ndirs: usize, value: f64) -> Self {
        GradField {
            ndirs,
            shape,
            dtype: DType::Real,
            data: vec![value; ndirs * shape.voxels()],
        }
    }

    pub fn from_vec(shape: Shape, ndirs: usize, dtype: DType, data: Vec<f64>) -> Result<Self> {
        let want = ndirs * shape.voxels() * dtype.comps();
        if data.len() != want {
            return Err(Error::shape(format!(
                "field with {} directions over {:?} needs {} values, got {}",
                ndirs,
                shape,
                want,
                data.len()
            )));
        }
        check_finite(&data, "field data")?;
        Ok(GradField {
            ndirs,
            shape,
            dtype,
            data,
        })
    }

    /// Builds a real parameter-map and checks strict positivity.
    pub fn param_map(shape: Shape, ndirs: usize, data: Vec<f64>) -> Result<Self> {
        let f = Self::from_vec(shape, ndirs, DType::Real, data)?;
        if !f.is_positive() {
            return Err(Error::invalid("parameter-map entries must be strictly positive"));
        }
        Ok(f)
    }

    pub fn from_components(components: &[Tensor]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("field needs at least one component"))?;
        let mut data = Vec::with_capacity(first.data().len() * components.len());
        for c in components {
            if !c.same_layout(first) {
                return Err(Error::shape("field components must share one shape and dtype"));
            }
            data.extend_from_slice(c.data());
        }
        Ok(GradField {
            ndirs: components.len(),
            shape: first.shape(),
            dtype: first.dtype(),
            data,
        })
    }

    pub fn ndirs(&self) -> usize {
        self.ndirs
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component_len(&self) -> usize {
        self.shape.voxels() * self.dtype.comps()
    }

    pub fn component(&self, d: usize) -> &[f64] {
        let len = self.component_len();
        &self.data[d * len..(d + 1) * len]
    }

    pub fn component_tensor(&self, d: usize) -> Tensor {
        Tensor {
            dtype: self.dtype,
            shape: self.shape,
            data: self.component(d).to_vec(),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.dtype == DType::Real && self.data.iter().all(|&v| v > 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> GradField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }
}

/// How a network's output channels are shared across difference directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SharingMode {
    /// One map for every direction.
    Xyt,
    /// One spatial map (x and y) and one temporal map.
    XyT,
    /// One map per direction.
    XYT,
}

impl SharingMode {
    /// Number of channels the mode consumes for a problem with `ndirs` directions.
    pub fn channels(self, ndirs: usize) -> usize {
        match self {
            SharingMode::Xyt => 1,
            SharingMode::XyT => 2,
            SharingMode::XYT => ndirs,
        }
    }

    /// Which channel feeds direction `d`.
    pub fn source_channel(self, d: usize) -> usize {
        match self {
            SharingMode::Xyt => 0,
            SharingMode::XyT => usize::from(d >= 2),
            SharingMode::XYT => d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SharingMode::Xyt => "xyt",
            SharingMode::XyT => "xy_t",
            SharingMode::XYT => "x_y_t",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "xyt" => Some(SharingMode::Xyt),
            "xy_t" | "xy,t" => Some(SharingMode::XyT),
            "x_y_t" | "x,y,t" => Some(SharingMode::XYT),
            _ => None,
        }
    }
}

/// Expands `channels` (1, 2 or 3 components) to a full `ndirs`-direction map.
pub fn expand_map(channels: &GradField, mode: SharingMode, ndirs: usize) -> Result<GradField> {
    if mode == SharingMode::XyT && ndirs != 3 {
        return Err(Error::invalid("xy_t sharing needs a temporal direction"));
    }
    if channels.ndirs() != mode.channels(ndirs) {
        return Err(Error::invalid(format!(
            "mode {} expects {} channels, got {}",
            mode.name(),
            mode.channels(ndirs),
            channels.ndirs()
        )));
    }
    let mut data = Vec::with_capacity(ndirs * channels.component_len());
    for d in 0..ndirs {
        data.extend_from_slice(channels.component(mode.source_channel(d)));
    }
    Ok(GradField {
        ndirs,
        shape: channels.shape(),
        dtype: channels.dtype(),
        data,
    })
}
