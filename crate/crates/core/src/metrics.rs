//! Image-quality metrics. Complex inputs are compared through their complex
//! differences (PSNR, NRMSE) or their magnitudes (SSIM).
//!
//! SSIM uses a 7x7 uniform window per frame (shrunk for smaller frames),
//! `K1 = 0.01`, `K2 = 0.03`, sample covariances, and a dynamic range of
//! `max |ref|`. PSNR also takes `max |ref|` as the peak.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
#[allow(unused_imports)]
use num_traits::Float;

/// Returned by [`psnr`] when the two images coincide.
pub const PSNR_IDENTICAL: f64 = f64::INFINITY;

pub const SSIM_WINDOW: usize = 7;

fn check(x: &Tensor, reference: &Tensor) -> Result<()> {
    if x.shape() != reference.shape() {
        return Err(Error::shape("metric inputs have different shapes"));
    }
    Ok(())
}

fn squared_error(x: &Tensor, reference: &Tensor) -> f64 {
    (0..x.shape().voxels())
        .map(|v| (x.value(v) - reference.value(v)).norm_sqr())
        .sum()
}

fn peak(reference: &Tensor) -> f64 {
    reference.magnitudes().into_iter().fold(0.0, f64::max)
}

pub fn rmse(x: &Tensor, reference: &Tensor) -> Result<f64> {
    check(x, reference)?;
    Ok((squared_error(x, reference) / x.shape().voxels() as f64).sqrt())
}

pub fn psnr(x: &Tensor, reference: &Tensor) -> Result<f64> {
    let e = rmse(x, reference)?;
    if e == 0.0 {
        return Ok(PSNR_IDENTICAL);
    }
    Ok(20.0 * (peak(reference) / e).log10())
}

pub fn nrmse(x: &Tensor, reference: &Tensor) -> Result<f64> {
    check(x, reference)?;
    let r: f64 = (0..reference.shape().voxels())
        .map(|v| reference.value(v).norm_sqr())
        .sum();
    if r == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((squared_error(x, reference) / r).sqrt())
}

pub fn ssim(x: &Tensor, reference: &Tensor) -> Result<f64> {
    check(x, reference)?;
    let shape = x.shape();
    let (a, b) = (x.magnitudes(), reference.magnitudes());
    let range = b.iter().cloned().fold(0.0, f64::max);
    let range = if range > 0.0 { range } else { 1.0 };
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let (wx, wy) = (SSIM_WINDOW.min(shape.nx), SSIM_WINDOW.min(shape.ny));
    let np = (wx * wy) as f64;
    let cov_norm = if np > 1.0 { np / (np - 1.0) } else { 1.0 };
    let frame = shape.frame_len();
    let mut values = Vec::new();
    for t in 0..shape.nt {
        let fa = &a[t * frame..(t + 1) * frame];
        let fb = &b[t * frame..(t + 1) * frame];
        for i0 in 0..=shape.nx - wx {
            for j0 in 0..=shape.ny - wy {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in i0..i0 + wx {
                    for j in j0..j0 + wy {
                        let (p, q) = (fa[i * shape.ny + j], fb[i * shape.ny + j]);
                        sa += p;
                        sb += q;
                        saa += p * p;
                        sbb += q * q;
                        sab += p * q;
                    }
                }
                let (ma, mb) = (sa / np, sb / np);
                let va = cov_norm * (saa / np - ma * ma);
                let vb = cov_norm * (sbb / np - mb * mb);
                let vab = cov_norm * (sab / np - ma * mb);
                let s = ((2.0 * ma * mb + c1) * (2.0 * vab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                values.push(s);
            }
        }
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(shape: Shape, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::real(shape, (0..shape.voxels()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identical_inputs() {
        let r = random_image(Shape::new(9, 8, 2), 1);
        assert_eq!(nrmse(&r, &r).unwrap(), 0.0);
        assert!((ssim(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(psnr(&r, &r).unwrap(), PSNR_IDENTICAL);
    }

    #[test]
    fn constant_offset_psnr() {
        let shape = Shape::image(8, 8);
        let mut data = vec![0.0; 64];
        data[5] = 1.0;
        let r = Tensor::real(shape, data.clone()).unwrap();
        let x = Tensor::real(shape, data.iter().map(|v| v + 0.1).collect()).unwrap();
        assert!((psnr(&x, &r).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn zero_reference_is_an_error() {
        let z = Tensor::zeros(Shape::image(3, 3), crate::DType::Real);
        let x = random_image(Shape::image(3, 3), 2);
        assert_eq!(nrmse(&x, &z), Err(Error::ZeroReference));
    }

    #[test]
    fn ssim_range_on_random_pairs() {
        for seed in 0..20 {
            let a = random_image(Shape::image(10, 12), seed);
            let b = random_image(Shape::image(10, 12), seed + 100);
            let s = ssim(&a, &b).unwrap();
            assert!((-1.0..=1.0).contains(&s));
        }
    }
}
