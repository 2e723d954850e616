//! The TNSR1 binary tensor format.
//!
//! ```text
//! b"TNSR" | version u8 = 1 | dtype u8 (0 real64, 1 complex128) | ndim u8
//! dims: ndim x u32 LE | payload: f64 LE, complex as (re, im), row-major
//! ```
//!
//! Images use dims `[nx, ny]`, videos `[nt, nx, ny]` (time outermost), which
//! is exactly the in-memory order of [`Tensor`].

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use tvmap_core::{DType, Shape, Tensor};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNSR";
pub const VERSION: u8 = 1;

/// A tensor as stored on disk, before any interpretation of its dims.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dtype: DType,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl RawTensor {
    pub fn new(dtype: DType, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let want = dims.iter().product::<usize>() * dtype.comps();
        if data.len() != want {
            return Err(Error::format(format!(
                "dims {dims:?} need {want} values, got {}",
                data.len()
            )));
        }
        Ok(RawTensor { dtype, dims, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        RawTensor {
            dtype: DType::Real,
            dims: vec![data.len()],
            data,
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let s = t.shape();
        let dims = if s.is_dynamic() {
            vec![s.nt, s.nx, s.ny]
        } else {
            vec![s.nx, s.ny]
        };
        RawTensor {
            dtype: t.dtype(),
            dims,
            data: t.data().to_vec(),
        }
    }

    pub fn shape(&self) -> Result<Shape> {
        match self.dims[..] {
            [nx, ny] => Ok(Shape::image(nx, ny)),
            [nt, nx, ny] => Ok(Shape::new(nx, ny, nt)),
            _ => Err(Error::format(format!("expected 2 or 3 dims, found {:?}", self.dims))),
        }
    }

    pub fn into_tensor(self) -> Result<Tensor> {
        let shape = self.shape()?;
        Ok(Tensor::from_vec(shape, self.dtype, self.data)?)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.dims.len() > u8::MAX as usize {
            return Err(Error::format("too many dimensions"));
        }
        let mut out = Vec::with_capacity(7 + 4 * self.dims.len() + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(match self.dtype {
            DType::Real => 0,
            DType::Complex => 1,
        });
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| Error::format("dimension exceeds u32"))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(mut bytes: &[u8]) -> Result<Self> {
        let mut head = [0u8; 7];
        bytes
            .read_exact(&mut head)
            .map_err(|_| Error::format("truncated header"))?;
        if &head[..4] != MAGIC {
            return Err(Error::format("bad magic, not a TNSR file"));
        }
        if head[4] != VERSION {
            return Err(Error::format(format!("unsupported version {}", head[4])));
        }
        let dtype = match head[5] {
            0 => DType::Real,
            1 => DType::Complex,
            d => return Err(Error::format(format!("unknown dtype code {d}"))),
        };
        let mut dims = Vec::with_capacity(head[6] as usize);
        for _ in 0..head[6] {
            let mut b = [0u8; 4];
            bytes.read_exact(&mut b).map_err(|_| Error::format("truncated dims"))?;
            dims.push(u32::from_le_bytes(b) as usize);
        }
        let count = dims
            .iter()
            .try_fold(dtype.comps(), |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format("dims overflow"))?;
        if bytes.len() != count * 8 {
            return Err(Error::format(format!(
                "payload holds {} bytes, dims {dims:?} need {}",
                bytes.len(),
                count * 8
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(RawTensor { dtype, dims, data })
    }
}

pub fn write_raw(path: impl AsRef<Path>, t: &RawTensor) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&t.encode()?).map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    RawTensor::decode(&bytes).map_err(|e| e.context(path))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    write_raw(path, &RawTensor::from_tensor(t))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    read_raw(path)?.into_tensor()
}
