//! The parameter-map estimator: an encoder/decoder CNN `u` with
//! `Lambda = t * softplus(u(x0))`, the unrolled reconstruction it feeds,
//! and the training loop.

mod train;

pub use train::{adam_step, loss, mean_mse, train, train_from, AdamState, HistoryEntry, TrainConfig, TrainOutcome};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ConvGeom, PoolGeom, Tape, Var};
use crate::error::{Error, Result};
use crate::grad::Gradient;
use crate::solvers::{Fidelity, Pd3oOps, PdhgOps, Problem};
use crate::tensor::{expand_map, DType, GradField, Shape, SharingMode, Tensor};
#[allow(unused_imports)]
use num_traits::Float;

/// Architecture of the map network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UNetConfig {
    /// 2 for single images, 3 for image sequences.
    pub rank: usize,
    pub stages: usize,
    pub convs_per_stage: usize,
    pub filters: usize,
    /// Odd kernel extent per convolved axis.
    pub kernel: usize,
    /// 1 for real inputs, 2 for complex (real and imaginary parts).
    pub in_channels: usize,
    pub out_channels: usize,
    /// Negative slope of the leaky ReLU.
    pub alpha: f64,
    /// Output scale `t`.
    pub scale: f64,
}

impl UNetConfig {
    /// Desk defaults (2 stages, 2 convolutions each, 8 filters, 3-tap kernels)
    /// for images of `shape` and `dtype` and the given sharing mode.
    pub fn for_problem(shape: Shape, dtype: DType, mode: SharingMode, scale: f64) -> Self {
        UNetConfig {
            rank: if shape.is_dynamic() { 3 } else { 2 },
            stages: 2,
            convs_per_stage: 2,
            filters: 8,
            kernel: 3,
            in_channels: dtype.comps(),
            out_channels: mode.channels(shape.ndirs()),
            alpha: 0.01,
            scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank != 2 && self.rank != 3 {
            return Err(Error::invalid("network rank must be 2 or 3"));
        }
        if self.stages == 0 || self.convs_per_stage == 0 || self.filters == 0 {
            return Err(Error::invalid("stages, convolutions and filters must be positive"));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::invalid("kernel extent must be odd"));
        }
        if !(1..=2).contains(&self.in_channels) || !(1..=3).contains(&self.out_channels) {
            return Err(Error::invalid("channel counts out of range"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) || !self.alpha.is_finite() {
            return Err(Error::invalid("scale must be positive"));
        }
        Ok(())
    }

    fn width(&self, stage: usize) -> usize {
        self.filters << stage
    }

    fn kernel3(&self) -> [usize; 3] {
        if self.rank == 3 {
            [self.kernel; 3]
        } else {
            [1, self.kernel, self.kernel]
        }
    }

    fn pool_factor(&self) -> [usize; 3] {
        if self.rank == 3 {
            [2, 2, 2]
        } else {
            [1, 2, 2]
        }
    }

    /// Every convolution in evaluation order: encoder stages, decoder stages
    /// (coarse to fine), then the 1x1 output layer.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let k = self.kernel3();
        let mut out = Vec::new();
        for s in 0..self.stages {
            for c in 0..self.convs_per_stage {
                let cin = match (s, c) {
                    (0, 0) => self.in_channels,
                    (_, 0) => self.width(s - 1),
                    _ => self.width(s),
                };
                out.push(LayerSpec {
                    cin,
                    cout: self.width(s),
                    kernel: k,
                });
            }
        }
        for s in (0..self.stages - 1).rev() {
            for c in 0..self.convs_per_stage {
                let cin = if c == 0 {
                    self.width(s + 1) + self.width(s)
                } else {
                    self.width(s)
                };
                out.push(LayerSpec {
                    cin,
                    cout: self.width(s),
                    kernel: k,
                });
            }
        }
        out.push(LayerSpec {
            cin: self.width(0),
            cout: self.out_channels,
            kernel: [1, 1, 1],
        });
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.kernel_len() + l.cout).sum()
    }

    /// Volume `(nt, nx, ny)` the network sees for images of `shape`.
    fn dims(&self, shape: Shape) -> Result<[usize; 3]> {
        let dims = [shape.nt, shape.nx, shape.ny];
        if self.rank == 2 && shape.nt != 1 {
            return Err(Error::shape("a rank-2 network takes single images"));
        }
        let div = 1usize << (self.stages - 1);
        let f = self.pool_factor();
        for d in 0..3 {
            if f[d] > 1 && !dims[d].is_multiple_of(div) {
                return Err(Error::shape(format!(
                    "image extent {} is not divisible by {div}",
                    dims[d]
                )));
            }
        }
        Ok(dims)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub cin: usize,
    pub cout: usize,
    pub kernel: [usize; 3],
}

impl LayerSpec {
    pub fn kernel_len(&self) -> usize {
        self.cin * self.cout * self.kernel.iter().product::<usize>()
    }

    pub fn fan_in(&self) -> usize {
        self.cin * self.kernel.iter().product::<usize>()
    }
}

/// Kernels and biases of every layer, stored as one flat vector
/// (`kernel, bias` per layer in [`UNetConfig::layers`] order).
#[derive(Debug, Clone, PartialEq)]
pub struct NetWeights {
    pub config: UNetConfig,
    pub theta: Vec<f64>,
}

impl NetWeights {
    pub fn zeros(config: UNetConfig) -> Result<Self> {
        config.validate()?;
        Ok(NetWeights {
            config,
            theta: vec![0.0; config.param_count()],
        })
    }

    /// Kernels uniform in `+-sqrt(1 / fan_in)`, biases zero except the output
    /// bias, which starts at -1.
    pub fn init(config: UNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config.layers();
        let mut theta = Vec::with_capacity(config.param_count());
        for (i, l) in layers.iter().enumerate() {
            let bound = (1.0 / l.fan_in() as f64).sqrt();
            theta.extend((0..l.kernel_len()).map(|_| rng.random_range(-bound..=bound)));
            let bias = if i + 1 == layers.len() { -1.0 } else { 0.0 };
            theta.extend(core::iter::repeat_n(bias, l.cout));
        }
        Ok(NetWeights { config, theta })
    }

    pub fn from_flat(config: UNetConfig, theta: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if theta.len() != config.param_count() {
            return Err(Error::shape(format!(
                "expected {} weights, got {}",
                config.param_count(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network weights"));
        }
        Ok(NetWeights { config, theta })
    }

    /// `(kernel, bias)` slices of each layer.
    pub fn split(&self) -> Vec<(&[f64], &[f64])> {
        let mut off = 0;
        self.config
            .layers()
            .iter()
            .map(|l| {
                let k = &self.theta[off..off + l.kernel_len()];
                let b = &self.theta[off + l.kernel_len()..off + l.kernel_len() + l.cout];
                off += l.kernel_len() + l.cout;
                (k, b)
            })
            .collect()
    }
}

/// Channel-major network input: the image, or its real and imaginary parts.
fn input_channels(x0: &Tensor) -> Vec<f64> {
    match x0.dtype() {
        DType::Real => x0.data().to_vec(),
        DType::Complex => {
            let d = x0.data();
            d.iter()
                .step_by(2)
                .chain(d.iter().skip(1).step_by(2))
                .copied()
                .collect()
        }
    }
}

/// Records the network on `tape`; returns the `out_channels x voxels` maps.
pub fn net_forward_tape<'op>(tape: &mut Tape<'op>, x0: &Tensor, theta: Var, cfg: &UNetConfig) -> Result<Var> {
    cfg.validate()?;
    if x0.dtype().comps() != cfg.in_channels {
        return Err(Error::shape("input channels do not match the image type"));
    }
    if tape.value(theta).len() != cfg.param_count() {
        return Err(Error::shape("weight vector does not match the architecture"));
    }
    let dims = cfg.dims(x0.shape())?;
    let layers = cfg.layers();
    let mut off = 0;
    let mut next_layer = |tape: &mut Tape<'op>, x: Var, level: usize, li: usize| -> Result<Var> {
        let l = layers[li];
        let scale = 1usize << level;
        let f = cfg.pool_factor();
        let ldims = [dims[0] / f[0].pow(level as u32), dims[1] / scale, dims[2] / scale];
        let w = tape.slice(theta, off, l.kernel_len())?;
        let b = tape.slice(theta, off + l.kernel_len(), l.cout)?;
        off += l.kernel_len() + l.cout;
        let geom = ConvGeom {
            cin: l.cin,
            cout: l.cout,
            dims: ldims,
            kernel: l.kernel,
        };
        tape.conv(x, w, b, geom)
    };
    let pool_geom = |level: usize, channels: usize| {
        let f = cfg.pool_factor();
        let scale = 1usize << level;
        PoolGeom {
            channels,
            dims: [dims[0] / f[0].pow(level as u32), dims[1] / scale, dims[2] / scale],
            factor: f,
        }
    };

    let mut li = 0;
    let mut h = tape.constant(input_channels(x0));
    let mut skips = Vec::with_capacity(cfg.stages);
    for s in 0..cfg.stages {
        if s > 0 {
            h = tape.avg_pool(h, pool_geom(s - 1, cfg.width(s - 1)))?;
        }
        for _ in 0..cfg.convs_per_stage {
            let c = next_layer(tape, h, s, li)?;
            li += 1;
            h = tape.leaky_relu(c, cfg.alpha);
        }
        skips.push(h);
    }
    for s in (0..cfg.stages - 1).rev() {
        let up = tape.upsample(h, pool_geom(s, cfg.width(s + 1)))?;
        h = tape.concat(&[up, skips[s]])?;
        for _ in 0..cfg.convs_per_stage {
            let c = next_layer(tape, h, s, li)?;
            li += 1;
            h = tape.leaky_relu(c, cfg.alpha);
        }
    }
    let u = next_layer(tape, h, 0, li)?;
    let sp = tape.softplus(u);
    Ok(tape.scale(sp, cfg.scale))
}

/// `t * softplus(u(x0))` as a field with one component per output channel.
pub fn net_forward(x0: &Tensor, weights: &NetWeights) -> Result<GradField> {
    let mut tape = Tape::new();
    let theta = tape.constant(weights.theta.clone());
    let out = net_forward_tape(&mut tape, x0, theta, &weights.config)?;
    GradField::param_map(x0.shape(), weights.config.out_channels, tape.value(out).to_vec())
}

/// Records the full map `Lambda = expand(t softplus(u(x0)))`, `ndirs x voxels`.
pub fn map_tape<'op>(
    tape: &mut Tape<'op>,
    x0: &Tensor,
    theta: Var,
    cfg: &UNetConfig,
    mode: SharingMode,
) -> Result<Var> {
    let ndirs = x0.shape().ndirs();
    if mode.channels(ndirs) != cfg.out_channels || (mode == SharingMode::XyT && ndirs != 3) {
        return Err(Error::invalid("sharing mode does not match the network outputs"));
    }
    let channels = net_forward_tape(tape, x0, theta, cfg)?;
    let n = x0.shape().voxels();
    let index = (0..ndirs)
        .flat_map(|d| {
            let c = mode.source_channel(d);
            (0..n).map(move |v| c * n + v)
        })
        .collect();
    tape.gather(channels, index)
}

/// Records `T` unrolled solver iterations driven by the network's map and
/// returns the final image.
pub fn reconstruct_tape<'op>(
    tape: &mut Tape<'op>,
    problem: &'op Problem,
    grad: &'op Gradient,
    theta: Var,
    cfg: &UNetConfig,
    mode: SharingMode,
    iters: usize,
) -> Result<Var> {
    if grad.shape() != problem.shape() || grad.comps() != problem.dtype().comps() {
        return Err(Error::shape("gradient operator does not match the problem"));
    }
    let lambda = map_tape(tape, &problem.init, theta, cfg, mode)?;
    let x0 = tape.constant(problem.init.data().to_vec());
    match problem.fidelity {
        Fidelity::L2 => {
            let ops = PdhgOps {
                a: &*problem.op,
                grad,
                z: &problem.data,
                step: problem.step,
            };
            let mut s = ops.start(tape, x0);
            for _ in 0..iters {
                s = ops.step(tape, &lambda, s);
            }
            Ok(s.x)
        }
        Fidelity::Kl(params) => {
            let ops = Pd3oOps::new(&*problem.op, grad, &problem.data, Some(params), problem.step);
            let mut s = ops.start(tape, x0);
            for _ in 0..iters {
                s = ops.step(tape, &lambda, s);
            }
            Ok(tape.relu(s.p))
        }
    }
}

/// The map the network assigns to `problem`, expanded to every direction.
pub fn predict_map(problem: &Problem, weights: &NetWeights, mode: SharingMode) -> Result<GradField> {
    let channels = net_forward(&problem.init, weights)?;
    expand_map(&channels, mode, problem.ndirs())
}

/// `T` solver iterations from `x0` with the network's map held fixed.
pub fn reconstruct(problem: &Problem, weights: &NetWeights, mode: SharingMode, iters: usize) -> Result<Tensor> {
    let lambda = predict_map(problem, weights, mode)?;
    Ok(problem.solve(&lambda, iters, false)?.image)
}
