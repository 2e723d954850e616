//! Convolution and resampling kernels on channel-major volumes
//! `[channel][t][x][y]`.

use alloc::vec;
use alloc::vec::Vec;

/// Stride-1 convolution with zero padding that keeps the volume size.
/// Kernels are laid out `[cout][cin][kt][kx][ky]`; extents must be odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    /// `(nt, nx, ny)`.
    pub dims: [usize; 3],
    pub kernel: [usize; 3],
}

impl ConvGeom {
    pub fn volume(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn kernel_len(&self) -> usize {
        self.cout * self.cin * self.kernel.iter().product::<usize>()
    }

    pub fn input_len(&self) -> usize {
        self.cin * self.volume()
    }

    pub fn output_len(&self) -> usize {
        self.cout * self.volume()
    }

    /// Calls `f(kernel_index, in_offset, out_offset, run)` for every kernel tap
    /// and every maximal row segment along y that stays inside the volume.
    fn for_each_run(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let [nt, nx, ny] = self.dims;
        let [kt, kx, ky] = self.kernel;
        let vol = self.volume();
        let centre = [kt / 2, kx / 2, ky / 2];
        let range = |k: usize, c: usize, n: usize| -> (isize, usize, usize) {
            let d = k as isize - c as isize;
            let lo = (-d).max(0) as usize;
            let hi = (n as isize - d.max(0)).max(0) as usize;
            (d, lo, hi)
        };
        for co in 0..self.cout {
            for ci in 0..self.cin {
                for a in 0..kt {
                    let (dt, t_lo, t_hi) = range(a, centre[0], nt);
                    for b in 0..kx {
                        let (dx, x_lo, x_hi) = range(b, centre[1], nx);
                        for c in 0..ky {
                            let (dy, y_lo, y_hi) = range(c, centre[2], ny);
                            if y_hi <= y_lo {
                                continue;
                            }
                            let widx = (((co * self.cin + ci) * kt + a) * kx + b) * ky + c;
                            for t in t_lo..t_hi {
                                let ts = (t as isize + dt) as usize;
                                for x in x_lo..x_hi {
                                    let xs = (x as isize + dx) as usize;
                                    let out = co * vol + (t * nx + x) * ny + y_lo;
                                    let inp = ci * vol + (ts * nx + xs) * ny + (y_lo as isize + dy) as usize;
                                    f(widx, inp, out, y_hi - y_lo);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward(input: &[f64], kernel: &[f64], bias: &[f64], g: &ConvGeom) -> Vec<f64> {
    let vol = g.volume();
    let mut out = vec![0.0; g.output_len()];
    for (co, chunk) in out.chunks_exact_mut(vol).enumerate() {
        chunk.fill(bias[co]);
    }
    g.for_each_run(|w, i, o, n| {
        let w = kernel[w];
        for (dst, src) in out[o..o + n].iter_mut().zip(&input[i..i + n]) {
            *dst += w * src;
        }
    });
    out
}

/// Returns `(d input, d kernel, d bias)` for the upstream gradient `gout`.
pub(crate) fn conv_backward(
    input: &[f64],
    kernel: &[f64],
    gout: &[f64],
    g: &ConvGeom,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let vol = g.volume();
    let mut gin = vec![0.0; g.input_len()];
    let mut gw = vec![0.0; g.kernel_len()];
    let gb = gout.chunks_exact(vol).map(|c| c.iter().sum()).collect();
    g.for_each_run(|w, i, o, n| {
        let kw = kernel[w];
        let mut acc = 0.0;
        for ((dst, src), go) in gin[i..i + n].iter_mut().zip(&input[i..i + n]).zip(&gout[o..o + n]) {
            *dst += kw * go;
            acc += go * src;
        }
        gw[w] += acc;
    });
    (gin, gw, gb)
}

/// Resampling between a volume `dims` and its coarse version `dims / factor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeom {
    pub channels: usize,
    /// Fine `(nt, nx, ny)`; each must be divisible by its factor.
    pub dims: [usize; 3],
    pub factor: [usize; 3],
}

impl PoolGeom {
    pub fn coarse(&self) -> [usize; 3] {
        [
            self.dims[0] / self.factor[0],
            self.dims[1] / self.factor[1],
            self.dims[2] / self.factor[2],
        ]
    }

    pub fn fine_len(&self) -> usize {
        self.channels * self.dims.iter().product::<usize>()
    }

    pub fn coarse_len(&self) -> usize {
        self.channels * self.coarse().iter().product::<usize>()
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|d| self.factor[d] > 0 && self.dims[d].is_multiple_of(self.factor[d]))
    }

    /// Coarse index of every fine voxel.
    fn parent(&self) -> Vec<usize> {
        let [nt, nx, ny] = self.dims;
        let [ct, cx, cy] = self.coarse();
        let [ft, fx, fy] = self.factor;
        let mut out = Vec::with_capacity(self.fine_len());
        for c in 0..self.channels {
            for t in 0..nt {
                for x in 0..nx {
                    for y in 0..ny {
                        out.push(((c * ct + t / ft) * cx + x / fx) * cy + y / fy);
                    }
                }
            }
        }
        out
    }

    fn block(&self) -> f64 {
        self.factor.iter().product::<usize>() as f64
    }
}

pub(crate) fn avg_pool(x: &[f64], g: &PoolGeom) -> Vec<f64> {
    let mut out = vec![0.0; g.coarse_len()];
    for (v, p) in x.iter().zip(g.parent()) {
        out[p] += v;
    }
    let b = g.block();
    out.iter_mut().for_each(|v| *v /= b);
    out
}

pub(crate) fn avg_pool_backward(gout: &[f64], g: &PoolGeom) -> Vec<f64> {
    let b = g.block();
    g.parent().into_iter().map(|p| gout[p] / b).collect()
}

pub(crate) fn upsample(x: &[f64], g: &PoolGeom) -> Vec<f64> {
    g.parent().into_iter().map(|p| x[p]).collect()
}

pub(crate) fn upsample_backward(gout: &[f64], g: &PoolGeom) -> Vec<f64> {
    let mut out = vec![0.0; g.coarse_len()];
    for (v, p) in gout.iter().zip(g.parent()) {
        out[p] += v;
    }
    out
}
