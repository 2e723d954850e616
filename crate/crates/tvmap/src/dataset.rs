//! Dataset assembly: phantoms, forward models and noisy measurements for a
//! task, split into train / validation / test.
//!
//! Item `k` draws its phantom from seed `seed + k` and its noise from
//! `(seed + k) ^ NOISE_SALT`; operator randomness (MRI masks) uses
//! `seed ^ OPERATOR_SALT`. Items are therefore independent of generation
//! order.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use tvmap_core::linops::{
    fbp, make_cartesian_mask, synth_coil_maps, CoilMaps, Identity, MriEncoder, RadonOp, SamplingMask,
};
use tvmap_core::qmri::{synth_qmri_series, InversionSeries, SynthOptions, T1Map, INVERSION_TIMES};
use tvmap_core::solvers::Problem;
use tvmap_core::{LinearMap, Tensor};

use crate::config::{ExperimentConfig, Task};
use crate::error::{Error, Result};
use crate::noise::{add_gaussian, ct_poisson_log};
use crate::phantom::{ellipse_ct, moving_disks, qmri_labels, qmri_region_table};
use crate::tnsr::{read_raw, read_tensor, write_raw, write_tensor, RawTensor};

pub const NOISE_SALT: u64 = 0x6e6f_6973_6500;
pub const OPERATOR_SALT: u64 = 0x6f70_6572_6100;

pub fn item_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One measured item: ground truth, raw data and the solver's starting image.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub truth: Tensor,
    pub data: Vec<f64>,
    pub init: Tensor,
}

/// The task's forward model, shared by every item.
#[derive(Clone)]
pub enum Operator {
    Identity(Arc<Identity>),
    Mri(Arc<MriEncoder>),
    Radon(Arc<RadonOp>),
}

impl Operator {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let shape = cfg.shape();
        let op = &cfg.operator;
        Ok(match cfg.task {
            Task::Denoise | Task::Qmri => Operator::Identity(Arc::new(Identity::new(shape.voxels()))),
            Task::Mri => {
                let coils = synth_coil_maps(shape.nx, shape.ny, op.coils)?;
                let mask = make_cartesian_mask(
                    shape.nx,
                    shape.ny,
                    shape.nt,
                    op.acceleration as f64,
                    op.center_lines as f64 / shape.ny as f64,
                    cfg.seed ^ OPERATOR_SALT,
                )?;
                Operator::Mri(Arc::new(MriEncoder::new(shape, coils, mask)?))
            }
            Task::Ct => Operator::Radon(Arc::new(RadonOp::new(shape.nx, op.side, op.angles, op.bins)?)),
        })
    }

    pub fn map(&self) -> Arc<dyn LinearMap> {
        match self {
            Operator::Identity(a) => a.clone(),
            Operator::Mri(a) => a.clone(),
            Operator::Radon(a) => a.clone(),
        }
    }

    /// Writes any operator state that is not a pure function of the config.
    pub fn save(&self, dir: &Path) -> Result<()> {
        if let Operator::Mri(e) = self {
            write_tensor(dir.join("mask.tnsr"), &e.mask().to_tensor())?;
            write_tensor(dir.join("coils.tnsr"), &e.coils().to_tensor())?;
        }
        Ok(())
    }

    pub fn load(cfg: &ExperimentConfig, dir: &Path) -> Result<Self> {
        if cfg.task != Task::Mri {
            return Self::build(cfg);
        }
        let mask = SamplingMask::from_tensor(&read_tensor(dir.join("mask.tnsr"))?)?;
        let coils = CoilMaps::from_tensor(&read_tensor(dir.join("coils.tnsr"))?)?;
        Ok(Operator::Mri(Arc::new(MriEncoder::new(cfg.shape(), coils, mask)?)))
    }
}

fn truth_for(cfg: &ExperimentConfig, seed: u64) -> Result<Tensor> {
    let p = &cfg.phantom;
    match cfg.task {
        Task::Denoise => moving_disks(cfg.shape(), p.disks, seed),
        Task::Mri => Ok(moving_disks(cfg.shape(), p.disks, seed)?.to_complex()),
        Task::Ct => ellipse_ct(p.nx, p.ellipses, seed),
        Task::Qmri => Err(Error::config("qMRI items are inversion series, see qmri_item")),
    }
}

/// Builds item `index` of the dataset.
pub fn make_item(cfg: &ExperimentConfig, op: &Operator, index: usize) -> Result<Item> {
    let seed = item_seed(cfg.seed, index);
    let truth = truth_for(cfg, seed)?;
    let noise_seed = seed ^ NOISE_SALT;
    let (data, init) = match op {
        Operator::Identity(_) => {
            let data = add_gaussian(truth.data(), cfg.sigma, noise_seed, truth.is_complex())?;
            let init = Tensor::from_vec(truth.shape(), truth.dtype(), data.clone())?;
            (data, init)
        }
        Operator::Mri(e) => {
            let clean = e.forward(truth.data());
            let data = add_gaussian(&clean, cfg.sigma, noise_seed, true)?;
            let init = e.adjoint_tensor(&data)?;
            (data, init)
        }
        Operator::Radon(r) => {
            let (data, _) = ct_poisson_log(&**r, truth.data(), cfg.operator.kl, noise_seed)?;
            let fb = fbp(r, &data)?;
            let init = Tensor::real(fb.shape(), fb.data().iter().map(|v| v.max(0.0)).collect())?;
            (data, init)
        }
    };
    Ok(Item { truth, data, init })
}

/// Inversion-recovery series for the qMRI task with its ground-truth map.
pub fn qmri_item(cfg: &ExperimentConfig, index: usize) -> Result<(InversionSeries, T1Map)> {
    let p = &cfg.phantom;
    let seed = item_seed(cfg.seed, index);
    let labels = qmri_labels(p.nx, p.ny, p.regions)?;
    let table = qmri_region_table(p.regions, seed);
    let opts = SynthOptions {
        sigma: cfg.sigma,
        seed: seed ^ NOISE_SALT,
        phase: true,
    };
    Ok(synth_qmri_series(&labels, p.nx, p.ny, &table, &INVERSION_TIMES, opts)?)
}

pub fn problem(cfg: &ExperimentConfig, op: &Operator, item: &Item) -> Result<Problem> {
    let map = op.map();
    let p = match cfg.task {
        Task::Ct => Problem::kl(
            map,
            item.data.clone(),
            item.init.clone(),
            Some(item.truth.clone()),
            cfg.operator.kl,
        )?,
        _ => Problem::l2(map, item.data.clone(), item.init.clone(), Some(item.truth.clone()))?,
    };
    Ok(p)
}

/// All items of a task with their split.
pub struct Dataset {
    pub op: Operator,
    pub items: Vec<(Split, Item)>,
}

impl Dataset {
    pub fn split_of(cfg: &ExperimentConfig, index: usize) -> Split {
        let d = &cfg.dataset;
        if index < d.train {
            Split::Train
        } else if index < d.train + d.val {
            Split::Val
        } else {
            Split::Test
        }
    }

    pub fn generate(cfg: &ExperimentConfig) -> Result<Self> {
        let op = Operator::build(cfg)?;
        let items = (0..cfg.dataset.total())
            .map(|k| Ok((Self::split_of(cfg, k), make_item(cfg, &op, k)?)))
            .collect::<Result<_>>()?;
        Ok(Dataset { op, items })
    }

    fn item_paths(dir: &Path, split: Split, k: usize) -> [PathBuf; 3] {
        let stem = format!("{}_{k:03}", split.name());
        [
            dir.join(format!("{stem}_truth.tnsr")),
            dir.join(format!("{stem}_data.tnsr")),
            dir.join(format!("{stem}_init.tnsr")),
        ]
    }

    /// Writes `mask/coils` (MRI) and three tensors per item into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.op.save(dir)?;
        let mut written = Vec::new();
        for (k, (split, item)) in self.items.iter().enumerate() {
            let [t, d, i] = Self::item_paths(dir, *split, k);
            write_tensor(&t, &item.truth)?;
            write_raw(&d, &RawTensor::vector(item.data.clone()))?;
            write_tensor(&i, &item.init)?;
            written.extend([t, d, i]);
        }
        Ok(written)
    }

    pub fn load(cfg: &ExperimentConfig, dir: &Path) -> Result<Self> {
        let op = Operator::load(cfg, dir)?;
        let mut items = Vec::with_capacity(cfg.dataset.total());
        for k in 0..cfg.dataset.total() {
            let split = Self::split_of(cfg, k);
            let [t, d, i] = Self::item_paths(dir, split, k);
            let truth = read_tensor(t)?;
            let data = read_raw(d)?.data;
            let init = read_tensor(i)?;
            if truth.shape() != cfg.shape() {
                return Err(Error::config("stored items do not match the configured shape"));
            }
            items.push((split, Item { truth, data, init }));
        }
        Ok(Dataset { op, items })
    }

    pub fn problems(&self, cfg: &ExperimentConfig, split: Split) -> Result<Vec<Problem>> {
        self.items
            .iter()
            .filter(|(s, _)| *s == split)
            .map(|(_, item)| problem(cfg, &self.op, item))
            .collect()
    }
}
