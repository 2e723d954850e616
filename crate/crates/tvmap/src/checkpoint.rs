//! Network checkpoints: one TNSR1 vector per kernel and bias, plus a
//! `checkpoint.txt` manifest describing the architecture and training run.

use std::path::{Path, PathBuf};

use tvmap_core::paramnet::{NetWeights, UNetConfig};
use tvmap_core::SharingMode;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::io::write_manifest;
use crate::tnsr::{read_raw, write_raw, RawTensor};

pub const MANIFEST: &str = "checkpoint.txt";

/// Everything stored next to the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub weights: NetWeights,
    pub mode: SharingMode,
    /// Extra `key = value` pairs (training settings, seed, validation loss).
    pub info: KeyValues,
}

fn layer_paths(dir: &Path, k: usize) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("layer{k:02}_kernel.tnsr")),
        dir.join(format!("layer{k:02}_bias.tnsr")),
    )
}

fn net_kv(cfg: &UNetConfig, mode: SharingMode, kv: &mut KeyValues) {
    kv.set("net.rank", cfg.rank);
    kv.set("net.stages", cfg.stages);
    kv.set("net.convs_per_stage", cfg.convs_per_stage);
    kv.set("net.filters", cfg.filters);
    kv.set("net.kernel", cfg.kernel);
    kv.set("net.in_channels", cfg.in_channels);
    kv.set("net.out_channels", cfg.out_channels);
    kv.set("net.alpha", cfg.alpha);
    kv.set("net.scale", cfg.scale);
    kv.set("net.mode", mode.name());
}

fn required<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<T> {
    kv.parsed(key)?
        .ok_or_else(|| Error::format(format!("checkpoint manifest lacks {key}")))
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, (kernel, bias)) in self.weights.split().into_iter().enumerate() {
            let (kp, bp) = layer_paths(dir, k);
            write_raw(kp, &RawTensor::vector(kernel.to_vec()))?;
            write_raw(bp, &RawTensor::vector(bias.to_vec()))?;
        }
        let mut kv = self.info.clone();
        net_kv(&self.weights.config, self.mode, &mut kv);
        write_manifest(dir.join(MANIFEST), &kv)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let all = KeyValues::read(dir.join(MANIFEST))?;
        let config = UNetConfig {
            rank: required(&all, "net.rank")?,
            stages: required(&all, "net.stages")?,
            convs_per_stage: required(&all, "net.convs_per_stage")?,
            filters: required(&all, "net.filters")?,
            kernel: required(&all, "net.kernel")?,
            in_channels: required(&all, "net.in_channels")?,
            out_channels: required(&all, "net.out_channels")?,
            alpha: required(&all, "net.alpha")?,
            scale: required(&all, "net.scale")?,
        };
        config.validate()?;
        let mode_name: String = required(&all, "net.mode")?;
        let mode =
            SharingMode::parse(&mode_name).ok_or_else(|| Error::format(format!("unknown mode {mode_name:?}")))?;
        let mut theta = Vec::with_capacity(config.param_count());
        for (k, layer) in config.layers().iter().enumerate() {
            let (kp, bp) = layer_paths(dir, k);
            let kernel = read_raw(kp)?.data;
            let bias = read_raw(bp)?.data;
            if kernel.len() != layer.kernel_len() || bias.len() != layer.cout {
                return Err(Error::format(format!("layer {k} has the wrong number of weights")));
            }
            theta.extend(kernel);
            theta.extend(bias);
        }
        let mut info = KeyValues::default();
        for key in all.keys().filter(|k| !k.starts_with("net.")) {
            info.set(key, all.get(key).unwrap_or_default());
        }
        Ok(Checkpoint {
            weights: NetWeights::from_flat(config, theta)?,
            mode,
            info,
        })
    }
}
