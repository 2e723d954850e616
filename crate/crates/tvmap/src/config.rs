//! Flat `key = value` configuration with `[section]` headers.
//!
//! Parse rules:
//! * lines are trimmed; empty lines and lines starting with `#` are ignored;
//! * `[name]` opens a section, keys that follow are addressed as `name.key`;
//! * the first `=` splits key from value, both trimmed; values are never quoted;
//! * a key may appear once; unknown keys in the config sections are rejected
//!   by [`ExperimentConfig`], other sections are left to their readers;
//! * numbers use Rust's `str::parse` (decimal or scientific, correctly
//!   rounded) and are written back with `{}` formatting, which is the
//!   shortest representation that parses to the same bits;
//! * lists are comma separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tvmap_core::prox::KlParams;
use tvmap_core::{DType, SharingMode};

use crate::error::{Error, Result};

/// Ordered `section.key -> value` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::default();
        let mut section = String::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(format!("line {}: unterminated section header", n + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            if kv.entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::config(format!("line {}: duplicate key {key}", n + 1)));
            }
        }
        Ok(kv)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::config(format!("{key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }

    /// Renders sections in key order, one `[section]` header per group.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for (key, value) in &self.entries {
            let (section, name) = key.split_once('.').unwrap_or(("", key.as_str()));
            if current != Some(section) {
                if current.is_some() {
                    out.push('\n');
                }
                if !section.is_empty() {
                    let _ = writeln!(out, "[{section}]");
                }
                current = Some(section);
            }
            let _ = writeln!(out, "{name} = {value}");
        }
        out
    }
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::config(format!("{key}: cannot parse list entry {s:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Denoise,
    Mri,
    Ct,
    Qmri,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Denoise => "denoise",
            Task::Mri => "mri",
            Task::Ct => "ct",
            Task::Qmri => "qmri",
        }
    }

    /// Value type of the reconstructed images.
    pub fn dtype(self) -> DType {
        match self {
            Task::Mri | Task::Qmri => DType::Complex,
            Task::Denoise | Task::Ct => DType::Real,
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "denoise" => Ok(Task::Denoise),
            "mri" => Ok(Task::Mri),
            "ct" => Ok(Task::Ct),
            "qmri" => Ok(Task::Qmri),
            _ => Err(Error::config(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomParams {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Disks per video (moving-disks).
    pub disks: usize,
    /// Ellipses per phantom (ellipse-ct).
    pub ellipses: usize,
    /// Concentric regions (qmri-regions).
    pub regions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorParams {
    pub coils: usize,
    pub acceleration: usize,
    pub center_lines: usize,
    pub angles: usize,
    pub bins: usize,
    /// Physical side length of the CT field of view.
    pub side: f64,
    pub kl: KlParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub iters: usize,
    pub mode: SharingMode,
    pub grid_xy: Vec<f64>,
    pub grid_t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    pub t_train: usize,
    pub t_test: Vec<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub val_every: usize,
    pub stages: usize,
    pub convs_per_stage: usize,
    pub filters: usize,
    pub kernel: usize,
    /// Output scale `t` of `Lambda = t softplus(.)`.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetParams {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl DatasetParams {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

/// Fully resolved experiment description; every field has a desk-scale default.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub phantom: PhantomParams,
    pub operator: OperatorParams,
    pub sigma: f64,
    pub solver: SolverParams,
    pub train: TrainParams,
    pub dataset: DatasetParams,
}

/// Sections read by [`ExperimentConfig::from_kv`]; keys in any other section
/// (run records, network descriptions, results) are ignored, so manifests
/// and checkpoint files double as configs.
pub const CONFIG_SECTIONS: &[&str] = &[
    "experiment",
    "phantom",
    "operator",
    "noise",
    "solver",
    "train",
    "dataset",
];

const KNOWN_KEYS: &[&str] = &[
    "experiment.task",
    "experiment.seed",
    "experiment.out_dir",
    "phantom.nx",
    "phantom.ny",
    "phantom.nt",
    "phantom.disks",
    "phantom.ellipses",
    "phantom.regions",
    "operator.coils",
    "operator.acceleration",
    "operator.center_lines",
    "operator.angles",
    "operator.bins",
    "operator.side",
    "operator.mu",
    "operator.n0",
    "noise.sigma",
    "solver.iters",
    "solver.mode",
    "solver.grid_xy",
    "solver.grid_t",
    "train.t_train",
    "train.t_test",
    "train.lr",
    "train.weight_decay",
    "train.epochs",
    "train.batch_size",
    "train.val_every",
    "train.stages",
    "train.convs_per_stage",
    "train.filters",
    "train.kernel",
    "train.scale",
    "dataset.train",
    "dataset.val",
    "dataset.test",
];

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Desk-scale defaults for `task`.
    pub fn defaults(task: Task, seed: u64) -> Self {
        let (nx, ny, nt) = match task {
            Task::Denoise | Task::Mri => (32, 32, 8),
            Task::Ct => (64, 64, 1),
            Task::Qmri => (32, 32, 1),
        };
        let sigma = match task {
            Task::Denoise => 0.2,
            Task::Mri => 0.05,
            Task::Ct => 0.0,
            Task::Qmri => 0.02,
        };
        let (grid_xy, grid_t) = match task {
            Task::Ct => (vec![10.0, 20.0, 30.0, 50.0, 70.0, 100.0, 150.0], vec![1.0]),
            _ => (
                vec![0.05, 0.07, 0.08, 0.09, 0.1, 0.11, 0.12, 0.14],
                vec![0.05, 0.07, 0.08, 0.09, 0.1, 0.11, 0.12, 0.14],
            ),
        };
        ExperimentConfig {
            task,
            seed,
            out_dir: PathBuf::from("out"),
            phantom: PhantomParams {
                nx,
                ny,
                nt,
                disks: 4,
                ellipses: 6,
                regions: 4,
            },
            operator: OperatorParams {
                coils: 4,
                acceleration: 4,
                center_lines: 4,
                angles: 180,
                bins: 95,
                side: 0.26,
                kl: KlParams::low_dose_ct(),
            },
            sigma,
            solver: SolverParams {
                iters: if task == Task::Ct { 1024 } else { 256 },
                mode: if nt > 1 { SharingMode::XyT } else { SharingMode::Xyt },
                grid_xy,
                grid_t,
            },
            train: TrainParams {
                t_train: 64,
                t_test: vec![16, 32, 64, 128, 256],
                lr: 3e-3,
                weight_decay: 0.0,
                epochs: 60,
                batch_size: 4,
                val_every: 1,
                stages: 2,
                convs_per_stage: 1,
                filters: 8,
                kernel: 3,
                scale: 0.5,
            },
            dataset: DatasetParams {
                train: 16,
                val: 4,
                test: 4,
            },
        }
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let is_config = |k: &str| {
            CONFIG_SECTIONS
                .iter()
                .any(|s| k.split_once('.').is_some_and(|(sec, _)| sec == *s))
        };
        if let Some(k) = kv.keys().find(|k| is_config(k) && !KNOWN_KEYS.contains(k)) {
            return Err(Error::config(format!("unknown key {k}")));
        }
        let task: Task = kv
            .parsed("experiment.task")?
            .ok_or_else(|| Error::config("experiment.task is required"))?;
        let seed: u64 = kv
            .parsed("experiment.seed")?
            .ok_or_else(|| Error::config("experiment.seed is required"))?;
        let mut c = Self::defaults(task, seed);
        macro_rules! take {
            ($field:expr, $key:literal) => {
                if let Some(v) = kv.parsed($key)? {
                    $field = v;
                }
            };
        }
        if let Some(v) = kv.get("experiment.out_dir") {
            c.out_dir = PathBuf::from(v);
        }
        take!(c.phantom.nx, "phantom.nx");
        take!(c.phantom.ny, "phantom.ny");
        take!(c.phantom.nt, "phantom.nt");
        take!(c.phantom.disks, "phantom.disks");
        take!(c.phantom.ellipses, "phantom.ellipses");
        take!(c.phantom.regions, "phantom.regions");
        take!(c.operator.coils, "operator.coils");
        take!(c.operator.acceleration, "operator.acceleration");
        take!(c.operator.center_lines, "operator.center_lines");
        take!(c.operator.angles, "operator.angles");
        take!(c.operator.bins, "operator.bins");
        take!(c.operator.side, "operator.side");
        take!(c.operator.kl.mu, "operator.mu");
        take!(c.operator.kl.n0, "operator.n0");
        take!(c.sigma, "noise.sigma");
        take!(c.solver.iters, "solver.iters");
        if let Some(m) = kv.get("solver.mode") {
            c.solver.mode = SharingMode::parse(m).ok_or_else(|| Error::config(format!("unknown mode {m:?}")))?;
        }
        if let Some(v) = kv.list("solver.grid_xy")? {
            c.solver.grid_xy = v;
        }
        if let Some(v) = kv.list("solver.grid_t")? {
            c.solver.grid_t = v;
        }
        take!(c.train.t_train, "train.t_train");
        if let Some(v) = kv.list("train.t_test")? {
            c.train.t_test = v;
        }
        take!(c.train.lr, "train.lr");
        take!(c.train.weight_decay, "train.weight_decay");
        take!(c.train.epochs, "train.epochs");
        take!(c.train.batch_size, "train.batch_size");
        take!(c.train.val_every, "train.val_every");
        take!(c.train.stages, "train.stages");
        take!(c.train.convs_per_stage, "train.convs_per_stage");
        take!(c.train.filters, "train.filters");
        take!(c.train.kernel, "train.kernel");
        take!(c.train.scale, "train.scale");
        take!(c.dataset.train, "dataset.train");
        take!(c.dataset.val, "dataset.val");
        take!(c.dataset.test, "dataset.test");
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KeyValues::read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.phantom;
        if p.nx == 0 || p.ny == 0 || p.nt == 0 {
            return Err(Error::config("phantom dimensions must be positive"));
        }
        if matches!(self.task, Task::Ct | Task::Qmri) && p.nt != 1 {
            return Err(Error::config(format!(
                "{} phantoms are static (nt = 1)",
                self.task.name()
            )));
        }
        if self.task == Task::Ct && p.nx != p.ny {
            return Err(Error::config("CT phantoms must be square"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("noise.sigma must be nonnegative"));
        }
        KlParams::new(self.operator.kl.mu, self.operator.kl.n0)?;
        if self.task == Task::Mri && (self.operator.coils == 0 || self.operator.acceleration == 0) {
            return Err(Error::config("MRI needs at least one coil and acceleration >= 1"));
        }
        if self
            .solver
            .grid_xy
            .iter()
            .chain(&self.solver.grid_t)
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::config("grid values must be nonnegative"));
        }
        if self.dataset.train == 0 || self.dataset.val == 0 || self.dataset.test == 0 {
            return Err(Error::config("every dataset split needs at least one item"));
        }
        if self.train.t_test.is_empty() {
            return Err(Error::config("train.t_test must list at least one T"));
        }
        if !(self.train.scale > 0.0) {
            return Err(Error::config("train.scale must be positive"));
        }
        Ok(())
    }

    /// Every resolved field, in the same syntax [`ExperimentConfig::from_kv`] reads.
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("experiment.task", self.task.name());
        kv.set("experiment.seed", self.seed);
        kv.set("experiment.out_dir", self.out_dir.display());
        kv.set("phantom.nx", self.phantom.nx);
        kv.set("phantom.ny", self.phantom.ny);
        kv.set("phantom.nt", self.phantom.nt);
        kv.set("phantom.disks", self.phantom.disks);
        kv.set("phantom.ellipses", self.phantom.ellipses);
        kv.set("phantom.regions", self.phantom.regions);
        kv.set("operator.coils", self.operator.coils);
        kv.set("operator.acceleration", self.operator.acceleration);
        kv.set("operator.center_lines", self.operator.center_lines);
        kv.set("operator.angles", self.operator.angles);
        kv.set("operator.bins", self.operator.bins);
        kv.set("operator.side", self.operator.side);
        kv.set("operator.mu", self.operator.kl.mu);
        kv.set("operator.n0", self.operator.kl.n0);
        kv.set("noise.sigma", self.sigma);
        kv.set("solver.iters", self.solver.iters);
        kv.set("solver.mode", self.solver.mode.name());
        kv.set("solver.grid_xy", fmt_list(&self.solver.grid_xy));
        kv.set("solver.grid_t", fmt_list(&self.solver.grid_t));
        kv.set("train.t_train", self.train.t_train);
        kv.set("train.t_test", fmt_list(&self.train.t_test));
        kv.set("train.lr", self.train.lr);
        kv.set("train.weight_decay", self.train.weight_decay);
        kv.set("train.epochs", self.train.epochs);
        kv.set("train.batch_size", self.train.batch_size);
        kv.set("train.val_every", self.train.val_every);
        kv.set("train.stages", self.train.stages);
        kv.set("train.convs_per_stage", self.train.convs_per_stage);
        kv.set("train.filters", self.train.filters);
        kv.set("train.kernel", self.train.kernel);
        kv.set("train.scale", self.train.scale);
        kv.set("dataset.train", self.dataset.train);
        kv.set("dataset.val", self.dataset.val);
        kv.set("dataset.test", self.dataset.test);
        kv
    }

    pub fn shape(&self) -> tvmap_core::Shape {
        tvmap_core::Shape::new(self.phantom.nx, self.phantom.ny, self.phantom.nt)
    }
}
