//! Synthetic ground truths: moving disks, nested ellipses and concentric
//! tissue regions.

use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvmap_core::qmri::Region;
use tvmap_core::{Shape, Tensor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    MovingDisks,
    EllipseCt,
    QmriRegions,
}

impl PhantomKind {
    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::MovingDisks => "moving-disks",
            PhantomKind::EllipseCt => "ellipse-ct",
            PhantomKind::QmriRegions => "qmri-regions",
        }
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moving-disks" => Ok(PhantomKind::MovingDisks),
            "ellipse-ct" => Ok(PhantomKind::EllipseCt),
            "qmri-regions" => Ok(PhantomKind::QmriRegions),
            _ => Err(Error::config(format!("unknown phantom {s:?}"))),
        }
    }
}

/// Intensity of the static background behind the disks.
pub const DISK_BACKGROUND: f64 = 0.1;

/// `disks` disks of random radius and intensity, each moving on a straight
/// line whose end points keep the whole disk inside the frame. Later disks
/// are painted over earlier ones, so every frame is piecewise constant with
/// values in `[0, 1]`.
pub fn moving_disks(shape: Shape, disks: usize, seed: u64) -> Result<Tensor> {
    let Shape { nx, ny, nt } = shape;
    if nx < 4 || ny < 4 || nt == 0 {
        return Err(Error::config("moving disks need frames of at least 4x4"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = nx.min(ny) as f64;
    let mut data = vec![DISK_BACKGROUND; shape.voxels()];
    for _ in 0..disks {
        let r = rng.random_range(0.08 * side..=0.22 * side).max(1.0);
        let value = rng.random_range(0.3..=1.0);
        let mut inside = |n: usize| {
            let hi = n as f64 - 1.0 - r;
            if hi <= r {
                (n as f64 - 1.0) / 2.0
            } else {
                rng.random_range(r..=hi)
            }
        };
        let start = (inside(nx), inside(ny));
        let goal = (inside(nx), inside(ny));
        let speed: f64 = rng.random_range(0.0..=1.0);
        let end = (
            start.0 + speed * (goal.0 - start.0),
            start.1 + speed * (goal.1 - start.1),
        );
        for t in 0..nt {
            let s = if nt > 1 { t as f64 / (nt - 1) as f64 } else { 0.0 };
            let (ci, cj) = (start.0 + s * (end.0 - start.0), start.1 + s * (end.1 - start.1));
            for i in 0..nx {
                for j in 0..ny {
                    let (di, dj) = (i as f64 - ci, j as f64 - cj);
                    if di * di + dj * dj <= r * r {
                        data[shape.index(i, j, t)] = value;
                    }
                }
            }
        }
    }
    Ok(Tensor::real(shape, data)?)
}

/// A body ellipse filled with a soft-tissue value and `ellipses - 1`
/// structures nested inside it; the sum is clipped to `[0, 1]`.
pub fn ellipse_ct(n: usize, ellipses: usize, seed: u64) -> Result<Tensor> {
    if n < 4 {
        return Err(Error::config("CT phantoms need at least 4x4 pixels"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shapes: Vec<(f64, f64, f64, f64, f64, f64)> = Vec::with_capacity(ellipses.max(1));
    let (ba, bb) = (rng.random_range(0.75..=0.9), rng.random_range(0.6..=0.8));
    shapes.push((
        0.0,
        0.0,
        ba,
        bb,
        rng.random_range(-0.3..=0.3),
        rng.random_range(0.2..=0.3),
    ));
    for _ in 1..ellipses {
        let a: f64 = rng.random_range(0.08..=0.35);
        let b = rng.random_range(0.08..=0.35);
        let reach = a.max(b);
        let cx = rng.random_range(-1.0..=1.0) * (ba - reach).max(0.0) * 0.8;
        let cy = rng.random_range(-1.0..=1.0) * (bb - reach).max(0.0) * 0.8;
        let rot = rng.random_range(0.0..=std::f64::consts::PI);
        let value = rng.random_range(-0.2..=0.3);
        shapes.push((cx, cy, a, b, rot, value));
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let x = 2.0 * (i as f64 + 0.5) / n as f64 - 1.0;
            let y = 2.0 * (j as f64 + 0.5) / n as f64 - 1.0;
            let mut v = 0.0;
            for &(cx, cy, a, b, rot, value) in &shapes {
                let (s, c) = rot.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let (u, w) = (c * dx + s * dy, -s * dx + c * dy);
                if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                    v += value;
                }
            }
            data[i * n + j] = v.clamp(0.0, 1.0);
        }
    }
    Ok(Tensor::real(Shape::image(n, n), data)?)
}

/// Concentric labels: 0 outside the largest disk, then `1..=regions` from
/// the outer ring inwards.
pub fn qmri_labels(nx: usize, ny: usize, regions: usize) -> Result<Vec<usize>> {
    if regions == 0 || nx == 0 || ny == 0 {
        return Err(Error::config("need at least one region on a nonempty grid"));
    }
    let (cx, cy) = ((nx as f64 - 1.0) / 2.0, (ny as f64 - 1.0) / 2.0);
    let rmax = 0.45 * nx.min(ny) as f64;
    let mut labels = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let r = ((i as f64 - cx).powi(2) + (j as f64 - cy).powi(2)).sqrt();
            labels.push(if r > rmax {
                0
            } else {
                let ring = ((r / rmax) * regions as f64).floor() as usize;
                regions - ring.min(regions - 1)
            });
        }
    }
    Ok(labels)
}

/// Tissue parameters for labels `0..=regions`. Label 0 is a faint
/// background so that every pixel carries signal.
pub fn qmri_region_table(regions: usize, seed: u64) -> Vec<Region> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = vec![Region {
        m0: Complex64::new(0.2, 0.0),
        t1: 3.0,
    }];
    for _ in 0..regions {
        table.push(Region {
            m0: Complex64::new(rng.random_range(0.5..=1.0), 0.0),
            t1: rng.random_range(0.3..=2.0),
        });
    }
    table
}
