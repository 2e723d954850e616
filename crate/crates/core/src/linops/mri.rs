//! Multi-coil Cartesian MRI encoding `A = (I_nc (x) E) C`, where `C` stacks
//! the coil sensitivities and `E` applies a per-frame orthonormal 2-D FFT
//! followed by the frame's sampling mask.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::fft2_ortho;
use crate::linops::LinearMap;
use crate::tensor::{DType, Shape, Tensor};
#[allow(unused_imports)]
use num_traits::Float;

/// Per-frame phase-encode line selection.
///
/// A sampled line `j` keeps every `(i, j)` entry of the frame's k-space
/// (second array axis = ky). Lines are stored in plain FFT order, so the
/// low frequencies sit at `j = 0` and wrap around from `ny - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    nx: usize,
    ny: usize,
    lines: Vec<Vec<bool>>,
}

impl SamplingMask {
    pub fn new(nx: usize, ny: usize, lines: Vec<Vec<bool>>) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::invalid("mask needs at least one frame"));
        }
        for (t, l) in lines.iter().enumerate() {
            if l.len() != ny {
                return Err(Error::shape(format!("frame {t} mask has {} lines, want {ny}", l.len())));
            }
            if !l.iter().any(|&b| b) {
                return Err(Error::invalid(format!("frame {t} samples nothing")));
            }
        }
        Ok(SamplingMask { nx, ny, lines })
    }

    pub fn full(nx: usize, ny: usize, nt: usize) -> Self {
        SamplingMask {
            nx,
            ny,
            lines: vec![vec![true; ny]; nt],
        }
    }

    pub fn frames(&self) -> usize {
        self.lines.len()
    }

    pub fn lines(&self, t: usize) -> &[bool] {
        &self.lines[t]
    }

    pub fn sampled_lines(&self, t: usize) -> usize {
        self.lines[t].iter().filter(|&&b| b).count()
    }

    /// 0/1 image of shape `(nx, ny, nt)`.
    pub fn to_tensor(&self) -> Tensor {
        let shape = Shape::new(self.nx, self.ny, self.frames());
        let mut data = vec![0.0; shape.voxels()];
        for t in 0..self.frames() {
            for i in 0..self.nx {
                for j in 0..self.ny {
                    if self.lines[t][j] {
                        data[shape.index(i, j, t)] = 1.0;
                    }
                }
            }
        }
        Tensor::real(shape, data).expect("finite mask")
    }

    /// Inverse of [`SamplingMask::to_tensor`]; a line counts as sampled when
    /// its first row entry is nonzero.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let s = t.shape();
        if t.is_complex() {
            return Err(Error::invalid("mask tensor must be real"));
        }
        let lines = (0..s.nt)
            .map(|f| (0..s.ny).map(|j| t.data()[s.index(0, j, f)] != 0.0).collect())
            .collect();
        Self::new(s.nx, s.ny, lines)
    }
}

/// Signed frequency of FFT bin `j` out of `n`.
fn signed_freq(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Cartesian undersampling: the `center_fraction` lowest-|ky| lines of every
/// frame, plus uniformly drawn further lines until about `ny / r` lines are
/// sampled. Frames are drawn independently from one seeded stream.
pub fn make_cartesian_mask(
    nx: usize,
    ny: usize,
    nt: usize,
    r: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if !(r >= 1.0) || !(0.0..=1.0).contains(&center_fraction) || ny == 0 || nt == 0 {
        return Err(Error::invalid(
            "mask needs R >= 1, center fraction in [0, 1] and a nonempty grid",
        ));
    }
    let mut by_freq: Vec<usize> = (0..ny).collect();
    by_freq.sort_by_key(|&j| {
        let f = signed_freq(j, ny);
        (f.abs(), f < 0)
    });
    let n_center = ((center_fraction * ny as f64).round() as usize).clamp(1, ny);
    let target = ((ny as f64 / r).round() as usize).clamp(n_center, ny);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::with_capacity(nt);
    for _ in 0..nt {
        let mut frame = vec![false; ny];
        for &j in &by_freq[..n_center] {
            frame[j] = true;
        }
        let rest = &by_freq[n_center..];
        let picks = rand::seq::index::sample(&mut rng, rest.len(), target - n_center);
        for k in picks.iter() {
            frame[rest[k]] = true;
        }
        lines.push(frame);
    }
    SamplingMask::new(nx, ny, lines)
}

/// Complex coil sensitivities, normalized so that `sum_k |C_k|^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilMaps {
    nx: usize,
    ny: usize,
    maps: Vec<Vec<Complex64>>,
}

impl CoilMaps {
    /// Wraps raw maps and renormalizes them pixel-wise.
    pub fn normalized(nx: usize, ny: usize, mut maps: Vec<Vec<Complex64>>) -> Result<Self> {
        if maps.is_empty() || maps.iter().any(|m| m.len() != nx * ny) {
            return Err(Error::shape("coil maps must be nonempty nx*ny images"));
        }
        for p in 0..nx * ny {
            let energy: f64 = maps.iter().map(|m| m[p].norm_sqr()).sum();
            if !(energy > 0.0) || !energy.is_finite() {
                return Err(Error::invalid(format!("coil maps vanish at pixel {p}")));
            }
            let s = energy.sqrt();
            for m in maps.iter_mut() {
                m[p] /= s;
            }
        }
        Ok(CoilMaps { nx, ny, maps })
    }

    pub fn count(&self) -> usize {
        self.maps.len()
    }

    pub fn map(&self, k: usize) -> &[Complex64] {
        &self.maps[k]
    }

    /// Complex tensor `(nx, ny, nc)` with the coil index on the frame axis.
    pub fn to_tensor(&self) -> Tensor {
        let values: Vec<Complex64> = self.maps.iter().flatten().copied().collect();
        Tensor::complex(Shape::new(self.nx, self.ny, self.count()), &values).expect("finite coils")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let s = t.shape();
        let values = t.to_complex_vec();
        let maps = values.chunks_exact(s.frame_len()).map(|c| c.to_vec()).collect();
        Self::normalized(s.nx, s.ny, maps)
    }
}

/// Gaussian-bump coils centred on a ring through the image border, each with
/// a gentle linear phase.
pub fn synth_coil_maps(nx: usize, ny: usize, nc: usize) -> Result<CoilMaps> {
    if nc == 0 {
        return Err(Error::invalid("need at least one coil"));
    }
    let (cx, cy) = ((nx as f64 - 1.0) / 2.0, (ny as f64 - 1.0) / 2.0);
    let radius = 0.5 * nx.max(ny) as f64;
    let width = 0.6 * nx.max(ny) as f64;
    let maps = (0..nc)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / nc as f64;
            let (px, py) = (cx + radius * a.cos(), cy + radius * a.sin());
            let mut m = Vec::with_capacity(nx * ny);
            for i in 0..nx {
                for j in 0..ny {
                    let (dx, dy) = (i as f64 - px, j as f64 - py);
                    let mag = (-(dx * dx + dy * dy) / (2.0 * width * width)).exp();
                    let phase =
                        0.5 * PI * (a.cos() * (i as f64 - cx) / nx as f64 + a.sin() * (j as f64 - cy) / ny as f64);
                    m.push(Complex64::from_polar(mag, phase));
                }
            }
            m
        })
        .collect();
    CoilMaps::normalized(nx, ny, maps)
}

/// The encoding operator. Domain: complex `(nx, ny, nt)` images; codomain:
/// sampled k-space entries ordered by coil, then frame, then sampled pixel.
#[derive(Debug, Clone)]
pub struct MriEncoder {
    shape: Shape,
    coils: CoilMaps,
    mask: SamplingMask,
    sampled: Vec<Vec<usize>>,
    per_coil: usize,
}

impl MriEncoder {
    pub fn new(shape: Shape, coils: CoilMaps, mask: SamplingMask) -> Result<Self> {
        if coils.nx != shape.nx || coils.ny != shape.ny {
            return Err(Error::shape("coil maps do not match the image grid"));
        }
        if mask.nx != shape.nx || mask.ny != shape.ny || mask.frames() != shape.nt {
            return Err(Error::shape("mask does not match the image grid"));
        }
        let sampled: Vec<Vec<usize>> = (0..shape.nt)
            .map(|t| {
                let mut idx = Vec::new();
                for i in 0..shape.nx {
                    for j in 0..shape.ny {
                        if mask.lines(t)[j] {
                            idx.push(i * shape.ny + j);
                        }
                    }
                }
                idx
            })
            .collect();
        let per_coil = sampled.iter().map(Vec::len).sum();
        Ok(MriEncoder {
            shape,
            coils,
            mask,
            sampled,
            per_coil,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn coils(&self) -> &CoilMaps {
        &self.coils
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    /// Number of complex samples per coil.
    pub fn samples_per_coil(&self) -> usize {
        self.per_coil
    }

    pub fn forward_tensor(&self, x: &Tensor) -> Result<Vec<f64>> {
        if x.shape() != self.shape {
            return Err(Error::shape("image does not match the encoder grid"));
        }
        Ok(self.forward(x.to_complex().data()))
    }

    pub fn adjoint_tensor(&self, y: &[f64]) -> Result<Tensor> {
        if y.len() != self.codomain_len() {
            return Err(Error::shape("k-space length does not match the encoder"));
        }
        Tensor::from_vec(self.shape, DType::Complex, self.adjoint(y))
    }
}

impl LinearMap for MriEncoder {
    /// `A^H A = sum_k C_k^H F^H M F C_k <= sum_k |C_k|^2 = I` for normalized
    /// coils and a 0/1 mask.
    fn norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }

    fn domain_len(&self) -> usize {
        2 * self.shape.voxels()
    }

    fn codomain_len(&self) -> usize {
        2 * self.coils.count() * self.per_coil
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let nxy = self.shape.frame_len();
        let mut buf = vec![Complex64::new(0.0, 0.0); nxy];
        let mut pos = 0;
        for k in 0..self.coils.count() {
            let c = self.coils.map(k);
            for t in 0..self.shape.nt {
                let frame = &x[2 * t * nxy..2 * (t + 1) * nxy];
                for p in 0..nxy {
                    buf[p] = c[p] * Complex64::new(frame[2 * p], frame[2 * p + 1]);
                }
                fft2_ortho(&mut buf, self.shape.nx, self.shape.ny, false);
                for &p in &self.sampled[t] {
                    out[pos] = buf[p].re;
                    out[pos + 1] = buf[p].im;
                    pos += 2;
                }
            }
        }
    }

    fn apply_adjoint(&self, y: &[f64], out: &mut [f64]) {
        let nxy = self.shape.frame_len();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![Complex64::new(0.0, 0.0); nxy];
        let mut pos = 0;
        for k in 0..self.coils.count() {
            let c = self.coils.map(k);
            for t in 0..self.shape.nt {
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for &p in &self.sampled[t] {
                    buf[p] = Complex64::new(y[pos], y[pos + 1]);
                    pos += 2;
                }
                fft2_ortho(&mut buf, self.shape.nx, self.shape.ny, true);
                let frame = &mut out[2 * t * nxy..2 * (t + 1) * nxy];
                for p in 0..nxy {
                    let v = c[p].conj() * buf[p];
                    frame[2 * p] += v.re;
                    frame[2 * p + 1] += v.im;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::adjoint_defect;
    use rand::Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn full_sampling_single_coil_is_unitary() {
        let shape = Shape::new(8, 6, 2);
        let coils = CoilMaps::normalized(8, 6, vec![vec![Complex64::new(1.0, 0.0); 48]]).unwrap();
        let enc = MriEncoder::new(shape, coils, SamplingMask::full(8, 6, 2)).unwrap();
        let x = random(enc.domain_len(), 1);
        let back = enc.adjoint(&enc.forward(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let shape = Shape::image(8, 8);
        let coils = CoilMaps::normalized(8, 8, vec![vec![Complex64::new(1.0, 0.0); 64]]).unwrap();
        let enc = MriEncoder::new(shape, coils, SamplingMask::full(8, 8, 1)).unwrap();
        let mut x = vec![0.0; 128];
        x[2 * shape.index(4, 4, 0)] = 1.0;
        let y = enc.forward(&x);
        for c in y.chunks_exact(2) {
            assert!((c[0].hypot(c[1]) - 0.125).abs() < 1e-14);
        }
    }

    #[test]
    fn adjoint_with_r4_mask_and_coils() {
        let shape = Shape::new(16, 16, 3);
        let mask = make_cartesian_mask(16, 16, 3, 4.0, 0.08, 7).unwrap();
        let enc = MriEncoder::new(shape, synth_coil_maps(16, 16, 4).unwrap(), mask).unwrap();
        for seed in 0..5 {
            let x = random(enc.domain_len(), 10 + seed);
            let y = random(enc.codomain_len(), 20 + seed);
            assert!(adjoint_defect(&enc, &x, &y) <= 1e-10);
        }
    }

    #[test]
    fn mask_counts() {
        let full = make_cartesian_mask(8, 16, 2, 1.0, 0.08, 0).unwrap();
        assert!((0..2).all(|t| full.sampled_lines(t) == 16));
        let m = make_cartesian_mask(32, 32, 8, 4.0, 0.08, 11).unwrap();
        for t in 0..8 {
            let n = m.sampled_lines(t);
            assert!((7..=9).contains(&n), "{n}");
            assert!(m.lines(t)[0] && m.lines(t)[1] && m.lines(t)[31]);
        }
        assert_eq!(m, make_cartesian_mask(32, 32, 8, 4.0, 0.08, 11).unwrap());
        assert_ne!(m, make_cartesian_mask(32, 32, 8, 4.0, 0.08, 12).unwrap());
        assert_eq!(SamplingMask::from_tensor(&m.to_tensor()).unwrap(), m);
    }

    #[test]
    fn coils_are_normalized() {
        let c = synth_coil_maps(12, 10, 4).unwrap();
        for p in 0..120 {
            let e: f64 = (0..4).map(|k| c.map(k)[p].norm_sqr()).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
        let again = CoilMaps::from_tensor(&c.to_tensor()).unwrap();
        for k in 0..4 {
            for (a, b) in again.map(k).iter().zip(c.map(k)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_mask_is_rejected() {
        let shape = Shape::new(8, 8, 2);
        let coils = synth_coil_maps(8, 8, 2).unwrap();
        assert!(MriEncoder::new(shape, coils, SamplingMask::full(8, 8, 3)).is_err());
    }
}
