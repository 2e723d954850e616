//! Small complex FFT: iterative radix-2 for power-of-two lengths and a direct
//! DFT otherwise. Sizes here are desk scale, so the fallback is acceptable.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Unnormalized transform in place; `inverse` flips the exponent sign.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, inverse);
    } else {
        let out = dft(buf, inverse);
        buf.copy_from_slice(&out);
    }
}

fn dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let ang = sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                    v * Complex64::new(ang.cos(), ang.sin())
                })
                .sum()
        })
        .collect()
}

fn radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| {
                let ang = sign * 2.0 * PI * k as f64 / len as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}

/// Orthonormal 2-D transform of a row-major `rows x cols` array.
pub fn fft2_ortho(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    debug_assert_eq!(data.len(), rows * cols);
    for r in 0..rows {
        fft_in_place(&mut data[r * cols..(r + 1) * cols], inverse);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        fft_in_place(&mut column, inverse);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    data.iter_mut().for_each(|v| *v *= scale);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.1).cos() - 0.2))
            .collect()
    }

    #[test]
    fn radix2_matches_direct_dft() {
        for n in [2, 4, 8, 32] {
            let x = signal(n);
            let want = dft(&x, false);
            let mut got = x.clone();
            fft_in_place(&mut got, false);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ortho_roundtrip_and_impulse() {
        let (r, c) = (8, 6);
        let x = signal(r * c);
        let mut y = x.clone();
        fft2_ortho(&mut y, r, c, false);
        let energy_x: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let energy_y: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        assert!((energy_x - energy_y).abs() < 1e-12);
        fft2_ortho(&mut y, r, c, true);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }

        let mut d = vec![Complex64::new(0.0, 0.0); 16];
        d[2 * 4 + 2] = Complex64::new(1.0, 0.0);
        fft2_ortho(&mut d, 4, 4, false);
        for v in &d {
            assert!((v.norm() - 0.25).abs() < 1e-14);
        }
    }
}
