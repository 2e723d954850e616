//! Inversion-recovery T1 mapping: `q_t = M0 (1 - 2 exp(-t / T1))`.
//!
//! Synthesis builds piecewise-constant `(M0, T1)` maps from labelled regions
//! (optionally with a smooth quadratic phase) and evaluates the model at each
//! inversion time. Fitting minimizes the complex residual
//! `sum_i |x_i - M0 b_i(T1)|^2`: `M0` has a closed form for fixed `T1`, and
//! `T1` is found by a log-spaced grid scan refined with golden-section search.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::{DType, Shape, Tensor};
#[allow(unused_imports)]
use num_traits::Float;

/// Inversion times (seconds) of the reference protocol.
pub const INVERSION_TIMES: [f64; 10] = [0.05, 0.1, 0.2, 0.35, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0];

pub const T1_BOUNDS: (f64, f64) = (0.05, 6.0);
pub const T1_GRID: usize = 64;
pub const GOLDEN_ITERS: usize = 20;

/// Coefficients `(a, b, c)` of the phase `a u^2 + b v^2 + c u v` (radians),
/// with `u, v` the pixel coordinates scaled to `[-1, 1]`.
pub const PHASE_COEFFS: (f64, f64, f64) = (0.3, -0.2, 0.15);

pub fn signal_model(m0: Complex64, t1: f64, t: f64) -> Complex64 {
    m0 * (1.0 - 2.0 * (-t / t1).exp())
}

/// Images at increasing inversion times; frame `k` belongs to `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionSeries {
    times: Vec<f64>,
    images: Tensor,
}

impl InversionSeries {
    pub fn new(times: Vec<f64>, images: Tensor) -> Result<Self> {
        if times.is_empty() || times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::invalid("inversion times must be positive"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("inversion times must be strictly increasing"));
        }
        if images.shape().nt != times.len() {
            return Err(Error::shape("one frame per inversion time is required"));
        }
        Ok(InversionSeries { times, images })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }
}

/// Per-pixel `T1` (seconds) and complex `M0`.
#[derive(Debug, Clone, PartialEq)]
pub struct T1Map {
    pub t1: Tensor,
    pub m0: Tensor,
    /// Pixels whose series was identically zero.
    pub degenerate: Vec<bool>,
}

/// A tissue class: every pixel with this label shares `(M0, T1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub m0: Complex64,
    pub t1: f64,
}

/// Smooth phase at pixel `(i, j)` of an `nx x ny` image.
pub fn phase_at(i: usize, j: usize, nx: usize, ny: usize) -> f64 {
    let scale = |k: usize, n: usize| {
        if n > 1 {
            2.0 * k as f64 / (n - 1) as f64 - 1.0
        } else {
            0.0
        }
    };
    let (u, v) = (scale(i, nx), scale(j, ny));
    let (a, b, c) = PHASE_COEFFS;
    a * u * u + b * v * v + c * u * v
}

/// Options for [`synth_qmri_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    /// Standard deviation of the complex Gaussian noise (split evenly between
    /// real and imaginary parts).
    pub sigma: f64,
    pub seed: u64,
    pub phase: bool,
}

/// Builds the series for a labelled `nx x ny` image and returns it with the
/// ground-truth map. Label `k` selects `regions[k]`.
pub fn synth_qmri_series(
    labels: &[usize],
    nx: usize,
    ny: usize,
    regions: &[Region],
    times: &[f64],
    opts: SynthOptions,
) -> Result<(InversionSeries, T1Map)> {
    if labels.len() != nx * ny {
        return Err(Error::shape("label image does not match the grid"));
    }
    if labels.iter().any(|&l| l >= regions.len()) {
        return Err(Error::invalid("label without a region"));
    }
    if regions.iter().any(|r| !(r.t1 > 0.0)) {
        return Err(Error::invalid("T1 must be positive"));
    }
    if !(opts.sigma >= 0.0) {
        return Err(Error::invalid("noise level must be nonnegative"));
    }
    let n = nx * ny;
    let m0: Vec<Complex64> = (0..n)
        .map(|v| {
            let r = regions[labels[v]].m0;
            if opts.phase {
                r * Complex64::from_polar(1.0, phase_at(v / ny, v % ny, nx, ny))
            } else {
                r
            }
        })
        .collect();
    let t1: Vec<f64> = labels.iter().map(|&l| regions[l].t1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let s = opts.sigma / core::f64::consts::SQRT_2;
    let mut values = Vec::with_capacity(n * times.len());
    for &t in times {
        for v in 0..n {
            let mut q = signal_model(m0[v], t1[v], t);
            if opts.sigma > 0.0 {
                let g1: f64 = StandardNormal.sample(&mut rng);
                let g2: f64 = StandardNormal.sample(&mut rng);
                q += Complex64::new(s * g1, s * g2);
            }
            values.push(q);
        }
    }
    let images = Tensor::complex(Shape::new(nx, ny, times.len()), &values)?;
    let series = InversionSeries::new(times.to_vec(), images)?;
    let truth = T1Map {
        t1: Tensor::real(Shape::image(nx, ny), t1)?,
        m0: Tensor::complex(Shape::image(nx, ny), &m0)?,
        degenerate: vec![false; n],
    };
    Ok((series, truth))
}

/// Closed-form `M0` and residual for one pixel at a given `T1`.
fn residual(x: &[Complex64], times: &[f64], t1: f64, energy: f64) -> (f64, Complex64) {
    let mut sbb = 0.0;
    let mut sxb = Complex64::new(0.0, 0.0);
    for (&xi, &t) in x.iter().zip(times) {
        let b = 1.0 - 2.0 * (-t / t1).exp();
        sbb += b * b;
        sxb += xi * b;
    }
    if sbb == 0.0 {
        return (energy, Complex64::new(0.0, 0.0));
    }
    ((energy - sxb.norm_sqr() / sbb).max(0.0), sxb / sbb)
}

pub fn t1_grid(bounds: (f64, f64), size: usize) -> Vec<f64> {
    let (lo, hi) = (bounds.0.ln(), bounds.1.ln());
    if size == 1 {
        return vec![bounds.0];
    }
    (0..size)
        .map(|k| (lo + (hi - lo) * k as f64 / (size - 1) as f64).exp())
        .collect()
}

/// Fits `(T1, M0)` per pixel.
pub fn fit_t1(series: &InversionSeries, bounds: (f64, f64), grid_size: usize) -> Result<T1Map> {
    let times = series.times();
    if times.len() < 3 {
        return Err(Error::invalid("at least three inversion times are needed"));
    }
    if !(bounds.0 > 0.0 && bounds.1 > bounds.0) || grid_size < 2 {
        return Err(Error::invalid("need 0 < lower < upper and at least two grid points"));
    }
    let img = series.images();
    let shape = img.shape();
    let n = shape.frame_len();
    let grid = t1_grid(bounds, grid_size);
    let (mut t1_out, mut m0_out, mut degenerate) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for v in 0..n {
        let x: Vec<Complex64> = (0..times.len()).map(|k| img.value(k * n + v)).collect();
        let energy: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        if energy == 0.0 {
            t1_out.push(bounds.0);
            m0_out.push(Complex64::new(0.0, 0.0));
            degenerate.push(true);
            continue;
        }
        let (mut best_k, mut best_r) = (0, f64::INFINITY);
        for (k, &t1) in grid.iter().enumerate() {
            let r = residual(&x, times, t1, energy).0;
            if r < best_r {
                best_k = k;
                best_r = r;
            }
        }
        let mut a = grid[best_k.saturating_sub(1)].ln();
        let mut b = grid[(best_k + 1).min(grid_size - 1)].ln();
        let f = |s: f64| residual(&x, times, s.exp(), energy).0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..GOLDEN_ITERS {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f(d);
            }
        }
        let refined = (0.5 * (a + b)).exp();
        let (r_ref, m_ref) = residual(&x, times, refined, energy);
        let (t1, m0) = if r_ref <= best_r {
            (refined, m_ref)
        } else {
            (grid[best_k], residual(&x, times, grid[best_k], energy).1)
        };
        t1_out.push(t1);
        m0_out.push(m0);
        degenerate.push(false);
    }
    let frame = Shape::image(shape.nx, shape.ny);
    Ok(T1Map {
        t1: Tensor::real(frame, t1_out)?,
        m0: Tensor::complex(frame, &m0_out)?,
        degenerate,
    })
}

/// Residual `sum_i |x_i - M0 b_i(T1)|^2` of one pixel's series.
pub fn pixel_residual(series: &InversionSeries, pixel: usize, t1: f64, m0: Complex64) -> f64 {
    let img = series.images();
    let n = img.shape().frame_len();
    series
        .times()
        .iter()
        .enumerate()
        .map(|(k, &t)| (img.value(k * n + pixel) - signal_model(m0, t1, t)).norm_sqr())
        .sum()
}

/// Relative RMSE `||a - b|| / ||b||` of two real maps.
pub fn relative_rmse(estimate: &Tensor, truth: &Tensor) -> Result<f64> {
    if estimate.shape() != truth.shape() || estimate.dtype() != DType::Real || truth.dtype() != DType::Real {
        return Err(Error::shape("maps differ in layout"));
    }
    let num: f64 = estimate
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = truth.data().iter().map(|b| b * b).sum();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(m0: Complex64, t1: f64) -> InversionSeries {
        let (s, _) = synth_qmri_series(
            &[0],
            1,
            1,
            &[Region { m0, t1 }],
            &INVERSION_TIMES,
            SynthOptions {
                sigma: 0.0,
                seed: 0,
                phase: false,
            },
        )
        .unwrap();
        s
    }

    #[test]
    fn model_landmarks() {
        let m0 = Complex64::new(0.7, -0.2);
        assert!(signal_model(m0, 1.3, 1.3 * core::f64::consts::LN_2).norm() < 1e-15);
        assert!((signal_model(m0, 1.3, 65.0) - m0).norm() < 1e-12);
        assert_eq!(signal_model(m0, 1.3, 0.0), -m0);
    }

    #[test]
    fn recovers_a_noiseless_pixel() {
        let fit = fit_t1(&single(Complex64::new(1.0, 0.0), 0.8), T1_BOUNDS, T1_GRID).unwrap();
        assert!((fit.t1.data()[0] - 0.8).abs() / 0.8 < 1e-3);
        let m0 = Complex64::from_polar(1.2, core::f64::consts::FRAC_PI_3);
        let fit = fit_t1(&single(m0, 1.7), T1_BOUNDS, T1_GRID).unwrap();
        assert!((fit.m0.value(0).arg() - core::f64::consts::FRAC_PI_3).abs() < 1e-3);
    }

    #[test]
    fn zero_pixel_is_flagged() {
        let s = single(Complex64::new(0.0, 0.0), 1.0);
        let fit = fit_t1(&s, T1_BOUNDS, T1_GRID).unwrap();
        assert!(fit.degenerate[0]);
        assert_eq!(fit.t1.data()[0], T1_BOUNDS.0);
        assert_eq!(fit.m0.value(0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn series_validation() {
        let img = Tensor::zeros(Shape::new(1, 1, 2), DType::Complex);
        assert!(InversionSeries::new(vec![0.2, 0.1], img.clone()).is_err());
        assert!(InversionSeries::new(vec![0.1], img.clone()).is_err());
        let s = InversionSeries::new(vec![0.1, 0.2], img).unwrap();
        assert!(fit_t1(&s, T1_BOUNDS, T1_GRID).is_err());
    }
}
