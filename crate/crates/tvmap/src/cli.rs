//! Command implementations behind the `tvmap` binary.
//!
//! Every command resolves an [`ExperimentConfig`] (from `--config`, or task
//! defaults), applies its flag overrides, and writes
//! `<out_dir>/<command>.manifest`: the resolved config plus a `[run]`
//! section. Passing that manifest back as `--config` repeats the run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvmap_core::linops::Identity;
use tvmap_core::metrics::{nrmse, psnr, ssim};
use tvmap_core::paramnet::{reconstruct, train, TrainConfig, UNetConfig};
use tvmap_core::qmri::{fit_t1, InversionSeries, GOLDEN_ITERS, INVERSION_TIMES, T1_BOUNDS, T1_GRID};
use tvmap_core::solvers::{grid_search_scalar, lipschitz_probe, rate_certificate, ScalarLambda};
use tvmap_core::{GradField, Shape, SharingMode, Tensor};

use crate::checkpoint::Checkpoint;
use crate::config::{parse_list, ExperimentConfig, KeyValues, Task};
use crate::dataset::{make_item, qmri_item, Dataset, Operator, Split};
use crate::error::{Error, Result};
use crate::io::{num, write_manifest, write_previews, Table};
use crate::tnsr::{read_raw, write_tensor};

#[derive(Debug, Parser)]
#[command(
    name = "tvmap",
    version,
    about = "Weighted TV reconstruction with learned parameter-maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config or a previous run's manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Task used when no config is given.
    #[arg(long)]
    pub task: Option<Task>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `experiment.out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate phantoms and corrupted measurements.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct one dataset item with a scalar weight or a stored map.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Scalar weight for every direction (or the spatial ones with --lambda-t).
        #[arg(long, conflicts_with = "map")]
        lambda: Option<f64>,
        /// Separate temporal weight.
        #[arg(long, requires = "lambda")]
        lambda_t: Option<f64>,
        /// TNSR1 parameter map with dims `[ndirs, (nt,) nx, ny]`.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long = "T")]
        iters: Option<usize>,
        /// Dataset item index.
        #[arg(long, default_value_t = 0)]
        item: usize,
    },
    /// Grid search of scalar weights over the training split.
    Gridsearch {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SharingMode>,
        /// Spatial (or shared) weights, comma separated.
        #[arg(long)]
        grid: Option<String>,
        /// Temporal weights for the xy_t mode.
        #[arg(long)]
        grid_t: Option<String>,
        #[arg(long = "T")]
        iters: Option<usize>,
    },
    /// Train the parameter-map network.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on the test split for several iteration counts.
    Eval {
        /// Checkpoint directory written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated iteration counts.
        #[arg(long)]
        t_test: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence-rate or Lipschitz certificate on a small denoising instance.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "lipschitz", required_unless_present = "lipschitz")]
        rate: bool,
        #[arg(long)]
        lipschitz: bool,
        /// Scalar weight of the rate certificate.
        #[arg(long, default_value_t = 0.3)]
        lambda: f64,
        /// Random weight pairs for the Lipschitz probe.
        #[arg(long, default_value_t = 100)]
        pairs: usize,
    },
    /// Fit T1 and M0 maps to an inversion-recovery series.
    FitT1 {
        /// Complex TNSR1 series with dims `[ntimes, nx, ny]`.
        #[arg(long)]
        series: PathBuf,
        /// Inversion times in seconds; defaults to the built-in schedule.
        #[arg(long)]
        times: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write an 8-bit PGM per frame of a tensor.
    Preview {
        tensor: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<SharingMode, String> {
    SharingMode::parse(s).ok_or_else(|| format!("unknown sharing mode {s:?} (xyt, xy_t or x_y_t)"))
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&common.config, common.task) {
        (Some(path), _) => {
            let cfg = ExperimentConfig::read(path)?;
            if let Some(t) = common.task {
                if t != cfg.task {
                    return Err(Error::config(format!(
                        "--task {} contradicts the config's {}",
                        t.name(),
                        cfg.task.name()
                    )));
                }
            }
            cfg
        }
        (None, Some(task)) => ExperimentConfig::defaults(task, common.seed.unwrap_or(0)),
        (None, None) => return Err(Error::config("give --config or --task")),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join("data")
}

fn run_manifest(cfg: &ExperimentConfig, command: &str, extra: &[(&str, String)]) -> Result<PathBuf> {
    let mut kv = cfg.to_kv();
    kv.set("run.command", command);
    kv.set("run.seed", cfg.seed);
    for (k, v) in extra {
        kv.set(&format!("run.{k}"), v);
    }
    let path = cfg.out_dir.join(format!("{command}.manifest"));
    write_manifest(&path, &kv)?;
    Ok(path)
}

/// Loads the stored dataset, or regenerates it (deterministically) when
/// `gen` has not been run for this config.
fn dataset(cfg: &ExperimentConfig) -> Result<(Dataset, &'static str)> {
    let dir = data_dir(cfg);
    if dir.join("train_000_truth.tnsr").exists() {
        Ok((Dataset::load(cfg, &dir)?, "stored"))
    } else {
        Ok((Dataset::generate(cfg)?, "regenerated"))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn gen(cfg: &ExperimentConfig) -> Result<()> {
    let dir = data_dir(cfg);
    ensure_dir(&dir)?;
    let written = if cfg.task == Task::Qmri {
        let mut written = Vec::new();
        for k in 0..cfg.dataset.total() {
            let (series, truth) = qmri_item(cfg, k)?;
            let stem = format!("{}_{k:03}", Dataset::split_of(cfg, k).name());
            for (name, t) in [("series", series.images()), ("t1", &truth.t1), ("m0", &truth.m0)] {
                let p = dir.join(format!("{stem}_{name}.tnsr"));
                write_tensor(&p, t)?;
                written.push(p);
            }
        }
        written
    } else {
        Dataset::generate(cfg)?.save(&dir)?
    };
    eprintln!("wrote {} files to {}", written.len(), dir.display());
    run_manifest(cfg, "gen", &[("files", written.len().to_string())])?;
    Ok(())
}

fn diagnostics_table(report: &tvmap_core::solvers::SolveReport) -> Table {
    let mut t = Table::new(&["iter", "objective", "step_norm", "data_residual"]);
    for d in &report.diagnostics {
        t.push(vec![
            d.iter.to_string(),
            num(d.objective),
            num(d.step_norm),
            num(d.data_residual),
        ]);
    }
    t
}

fn read_map(path: &Path, shape: Shape) -> Result<GradField> {
    let raw = read_raw(path)?;
    let ndirs = *raw.dims.first().ok_or_else(|| Error::format("empty map dims"))?;
    let want = if shape.is_dynamic() {
        vec![shape.nt, shape.nx, shape.ny]
    } else {
        vec![shape.nx, shape.ny]
    };
    if raw.dims[1..] != want[..] {
        return Err(Error::format(format!(
            "map dims {:?} do not match the image {:?}",
            raw.dims, want
        )));
    }
    Ok(GradField::param_map(shape, ndirs, raw.data)?)
}

fn metric_row(x: &Tensor, truth: &Tensor) -> Result<[f64; 3]> {
    Ok([psnr(x, truth)?, nrmse(x, truth)?, ssim(x, truth)?])
}

fn solve(
    cfg: &mut ExperimentConfig,
    lambda: Option<(f64, Option<f64>)>,
    map: Option<&Path>,
    iters: Option<usize>,
    item: usize,
) -> Result<()> {
    if cfg.task == Task::Qmri {
        return Err(Error::config("the qmri task is solved with fit-t1"));
    }
    if let Some(t) = iters {
        cfg.solver.iters = t;
    }
    if item >= cfg.dataset.total() {
        return Err(Error::config(format!("item {item} out of range")));
    }
    let dir = data_dir(cfg);
    let (op, it, source) = if dir.join("train_000_truth.tnsr").exists() {
        let mut ds = Dataset::load(cfg, &dir)?;
        (ds.op, ds.items.swap_remove(item).1, "stored")
    } else {
        let op = Operator::build(cfg)?;
        let it = make_item(cfg, &op, item)?;
        (op, it, "regenerated")
    };
    let it = &it;
    let problem = crate::dataset::problem(cfg, &op, it)?;
    let lam = match (lambda, map) {
        (Some((xy, t)), None) => ScalarLambda { xy, t: t.unwrap_or(xy) }.to_map(problem.shape()),
        (None, Some(p)) => read_map(p, problem.shape())?,
        _ => return Err(Error::config("give exactly one of --lambda or --map")),
    };
    let start = Instant::now();
    let mut report = problem.solve(&lam, cfg.solver.iters, true)?;
    report.wall_time = Some(start.elapsed().as_secs_f64());
    ensure_dir(&cfg.out_dir)?;
    let recon = cfg.out_dir.join(format!("solve_{item:03}.tnsr"));
    write_tensor(&recon, &report.image)?;
    diagnostics_table(&report).write(cfg.out_dir.join(format!("solve_{item:03}_diagnostics.csv")))?;
    let [p, n, s] = metric_row(&report.image, &it.truth)?;
    println!(
        "psnr {p:.4}  nrmse {n:.6}  ssim {s:.6}  ({} iterations, {:.2}s)",
        report.iterations,
        report.wall_time.unwrap_or(0.0)
    );
    let mut extra = vec![
        ("item", item.to_string()),
        ("data", source.to_string()),
        ("psnr", num(p)),
        ("nrmse", num(n)),
        ("ssim", num(s)),
        ("clamped", report.clamped.to_string()),
    ];
    match (lambda, map) {
        (Some((xy, t)), _) => {
            extra.push(("lambda", num(xy)));
            extra.push(("lambda_t", num(t.unwrap_or(xy))));
        }
        (_, Some(p)) => extra.push(("map", p.display().to_string())),
        _ => {}
    }
    run_manifest(cfg, "solve", &extra)?;
    Ok(())
}

fn gridsearch(
    cfg: &mut ExperimentConfig,
    mode: Option<SharingMode>,
    grid: Option<&str>,
    grid_t: Option<&str>,
    iters: Option<usize>,
) -> Result<()> {
    if let Some(m) = mode {
        cfg.solver.mode = m;
    }
    if let Some(g) = grid {
        cfg.solver.grid_xy = parse_list("--grid", g)?;
    }
    if let Some(g) = grid_t {
        cfg.solver.grid_t = parse_list("--grid-t", g)?;
    }
    if let Some(t) = iters {
        cfg.solver.iters = t;
    }
    let (ds, source) = dataset(cfg)?;
    let problems = ds.problems(cfg, Split::Train)?;
    let g = grid_search_scalar(
        &problems,
        cfg.solver.mode,
        &cfg.solver.grid_xy,
        &cfg.solver.grid_t,
        cfg.solver.iters,
    )?;
    ensure_dir(&cfg.out_dir)?;
    let mut table = Table::new(&["lambda_xy", "lambda_t", "mean_psnr"]);
    for (c, s) in &g.scores {
        table.push(vec![num(c.xy), num(c.t), num(*s)]);
    }
    table.write(cfg.out_dir.join("gridsearch.csv"))?;
    println!(
        "best {}: lambda_xy {} lambda_t {} (mean train PSNR {:.4})",
        cfg.solver.mode.name(),
        g.best.xy,
        g.best.t,
        g.best_score
    );
    run_manifest(
        cfg,
        "gridsearch",
        &[
            ("data", source.to_string()),
            ("best_lambda_xy", num(g.best.xy)),
            ("best_lambda_t", num(g.best.t)),
            ("best_mean_psnr", num(g.best_score)),
        ],
    )?;
    Ok(())
}

pub fn net_config(cfg: &ExperimentConfig) -> UNetConfig {
    let t = &cfg.train;
    let mut net = UNetConfig::for_problem(cfg.shape(), cfg.task.dtype(), cfg.solver.mode, t.scale);
    net.stages = t.stages;
    net.convs_per_stage = t.convs_per_stage;
    net.filters = t.filters;
    net.kernel = t.kernel;
    net
}

pub fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    let t = &cfg.train;
    TrainConfig {
        t_train: t.t_train,
        t_test: t.t_test.last().copied().unwrap_or(t.t_train),
        lr: t.lr,
        weight_decay: t.weight_decay,
        epochs: t.epochs,
        batch_size: t.batch_size,
        val_every: t.val_every,
        seed: cfg.seed,
        mode: cfg.solver.mode,
        ..TrainConfig::default()
    }
}

fn train_cmd(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.task == Task::Qmri {
        return Err(Error::config("no network is trained for the qmri task"));
    }
    let (ds, source) = dataset(cfg)?;
    let tr = ds.problems(cfg, Split::Train)?;
    let va = ds.problems(cfg, Split::Val)?;
    let net = net_config(cfg);
    let tc = train_config(cfg);
    let start = Instant::now();
    let outcome = train(&tr, &va, &net, &tc, &mut |h| {
        let val = h.val_loss.map(num).unwrap_or_default();
        let tr = if h.train_loss.is_nan() {
            "-".to_string()
        } else {
            num(h.train_loss)
        };
        eprintln!(
            "epoch {:>4}  train {tr}  val {val}  [{:.1}s]",
            h.epoch,
            start.elapsed().as_secs_f64()
        );
    })?;
    ensure_dir(&cfg.out_dir)?;
    let mut hist = Table::new(&["epoch", "train_loss", "val_loss"]);
    for h in &outcome.history {
        let train_loss = if h.train_loss.is_nan() {
            String::new()
        } else {
            num(h.train_loss)
        };
        hist.push(vec![
            h.epoch.to_string(),
            train_loss,
            h.val_loss.map(num).unwrap_or_default(),
        ]);
    }
    hist.write(cfg.out_dir.join("history.csv"))?;
    let mut info = cfg.to_kv();
    info.set("result.best_epoch", outcome.best_epoch);
    info.set("result.best_val", num(outcome.best_val));
    info.set("result.initial_val", num(outcome.initial_val));
    let ckpt = Checkpoint {
        weights: outcome.weights,
        mode: cfg.solver.mode,
        info,
    };
    ckpt.save(&cfg.out_dir.join("checkpoint"))?;
    println!("best epoch {} val mse {}", outcome.best_epoch, num(outcome.best_val));
    run_manifest(
        cfg,
        "train",
        &[
            ("data", source.to_string()),
            ("best_epoch", outcome.best_epoch.to_string()),
            ("best_val", num(outcome.best_val)),
        ],
    )?;
    Ok(())
}

fn eval(checkpoint: &Path, t_test: Option<&str>, out: Option<&Path>) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut cfg = ExperimentConfig::from_kv(&ckpt.info)?;
    if let Some(o) = out {
        cfg.out_dir = o.to_path_buf();
    }
    if let Some(t) = t_test {
        cfg.train.t_test = parse_list("--t-test", t)?;
    }
    let (ds, source) = dataset(&cfg)?;
    let test = ds.problems(&cfg, Split::Test)?;
    let mut table = Table::new(&["t_test", "item", "psnr", "nrmse", "ssim"]);
    for &t in &cfg.train.t_test {
        let mut sum = [0.0; 3];
        for (k, p) in test.iter().enumerate() {
            let x = reconstruct(p, &ckpt.weights, ckpt.mode, t)?;
            let m = metric_row(&x, p.truth.as_ref().expect("dataset problems carry truth"))?;
            table.push(vec![t.to_string(), k.to_string(), num(m[0]), num(m[1]), num(m[2])]);
            sum.iter_mut().zip(m).for_each(|(s, v)| *s += v / test.len() as f64);
        }
        table.push(vec![
            t.to_string(),
            "mean".into(),
            num(sum[0]),
            num(sum[1]),
            num(sum[2]),
        ]);
        println!(
            "T = {t:>5}: psnr {:.4}  nrmse {:.6}  ssim {:.6}",
            sum[0], sum[1], sum[2]
        );
    }
    ensure_dir(&cfg.out_dir)?;
    table.write(cfg.out_dir.join("eval_metrics.csv"))?;
    run_manifest(
        &cfg,
        "eval",
        &[
            ("data", source.to_string()),
            ("checkpoint", checkpoint.display().to_string()),
        ],
    )?;
    Ok(())
}

/// Uniform random image used by the certificate instances.
pub fn certificate_instance(shape: Shape, seed: u64) -> Result<(Identity, Tensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Tensor::real(shape, (0..shape.voxels()).map(|_| rng.random_range(0.0..1.0)).collect())?;
    Ok((Identity::new(shape.voxels()), z))
}

fn certify(cfg: &ExperimentConfig, rate: bool, lambda: f64, pairs: usize) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    if rate {
        let (a, z) = certificate_instance(Shape::image(4, 4), cfg.seed)?;
        let t_list: Vec<usize> = (0..=10).map(|k| 1 << k).collect();
        let lam = GradField::constant(z.shape(), 2, lambda);
        let c = rate_certificate(&a, z.data(), &lam, &z, &t_list)?;
        let mut table = Table::new(&["T", "measured", "bound", "holds"]);
        for p in &c.points {
            table.push(vec![
                p.iters.to_string(),
                num(p.measured),
                num(p.bound),
                p.holds().to_string(),
            ]);
        }
        table.write(cfg.out_dir.join("certify_rate.csv"))?;
        println!(
            "rate certificate {} (C_zA = {:.4}, ||v0 - v*||_M = {:.4})",
            if c.holds() { "holds" } else { "VIOLATED" },
            c.c_za,
            c.init_distance
        );
        run_manifest(
            cfg,
            "certify",
            &[
                ("kind", "rate".into()),
                ("lambda", num(lambda)),
                ("c", num(c.c)),
                ("big_c", num(c.big_c)),
                ("lambda_min", num(c.lambda_min)),
                ("c_za", num(c.c_za)),
                ("init_distance", num(c.init_distance)),
                ("reference_reached", num(c.reference_reached)),
                ("holds", c.holds().to_string()),
            ],
        )?;
        if !c.holds() {
            return Err(Error::Numerics(tvmap_core::Error::NoConvergence {
                iters: c.points.iter().find(|p| !p.holds()).map_or(0, |p| p.iters),
                estimate: c.c_za,
            }));
        }
    } else {
        let (a, z) = certificate_instance(Shape::image(4, 2), cfg.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6c69_7073);
        let mut table = Table::new(&["pair", "lhs", "rhs", "holds"]);
        let mut failures = 0;
        for k in 0..pairs {
            let mut draw = || {
                GradField::param_map(
                    z.shape(),
                    2,
                    (0..2 * z.shape().voxels())
                        .map(|_| rng.random_range(0.01..1.0))
                        .collect(),
                )
            };
            let (l1, l2) = (draw()?, draw()?);
            let p = lipschitz_probe(&a, z.data(), &l1, &l2, &z)?;
            failures += usize::from(!p.holds());
            table.push(vec![k.to_string(), num(p.lhs), num(p.rhs), p.holds().to_string()]);
        }
        table.write(cfg.out_dir.join("certify_lipschitz.csv"))?;
        println!("lipschitz probe: {} of {pairs} pairs violate the bound", failures);
        run_manifest(
            cfg,
            "certify",
            &[
                ("kind", "lipschitz".into()),
                ("pairs", pairs.to_string()),
                ("violations", failures.to_string()),
            ],
        )?;
    }
    Ok(())
}

fn fit_t1_cmd(series: &Path, times: Option<&str>, out: &Path) -> Result<()> {
    let images = read_raw(series)?;
    if images.dims.len() != 3 {
        return Err(Error::format("series needs dims [ntimes, nx, ny]"));
    }
    let images = images.into_tensor()?.to_complex();
    let times = match times {
        Some(t) => parse_list("--times", t)?,
        None => INVERSION_TIMES.to_vec(),
    };
    let s = InversionSeries::new(times.clone(), images)?;
    let map = fit_t1(&s, T1_BOUNDS, T1_GRID)?;
    ensure_dir(out)?;
    write_tensor(out.join("t1.tnsr"), &map.t1)?;
    write_tensor(out.join("m0.tnsr"), &map.m0)?;
    let degenerate = map.degenerate.iter().filter(|&&d| d).count();
    println!("fitted {} pixels ({degenerate} degenerate)", map.degenerate.len());
    let mut kv = KeyValues::default();
    kv.set("run.command", "fit-t1");
    kv.set("run.series", series.display());
    kv.set("run.times", times.iter().map(|t| num(*t)).collect::<Vec<_>>().join(","));
    kv.set("run.t1_bounds", format!("{},{}", T1_BOUNDS.0, T1_BOUNDS.1));
    kv.set("run.t1_grid", T1_GRID);
    kv.set("run.golden_iters", GOLDEN_ITERS);
    kv.set("run.degenerate", degenerate);
    write_manifest(out.join("fit-t1.manifest"), &kv)
}

fn preview(tensor: &Path, out: Option<&Path>) -> Result<()> {
    let t = read_raw(tensor)?.into_tensor()?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| tensor.parent().unwrap_or(Path::new(".")).to_path_buf());
    let stem = tensor.file_stem().and_then(|s| s.to_str()).unwrap_or("tensor");
    let written = write_previews(&t, &dir, stem)?;
    println!("wrote {} frames to {}", written.len(), dir.display());
    let mut kv = KeyValues::default();
    kv.set("run.command", "preview");
    kv.set("run.tensor", tensor.display());
    kv.set("run.frames", written.len());
    write_manifest(dir.join(format!("{stem}.preview.manifest")), &kv)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common } => gen(&resolve(&common)?),
        Command::Solve {
            common,
            lambda,
            lambda_t,
            map,
            iters,
            item,
        } => solve(
            &mut resolve(&common)?,
            lambda.map(|l| (l, lambda_t)),
            map.as_deref(),
            iters,
            item,
        ),
        Command::Gridsearch {
            common,
            mode,
            grid,
            grid_t,
            iters,
        } => gridsearch(&mut resolve(&common)?, mode, grid.as_deref(), grid_t.as_deref(), iters),
        Command::Train { common } => train_cmd(&resolve(&common)?),
        Command::Eval {
            checkpoint,
            t_test,
            out,
        } => eval(&checkpoint, t_test.as_deref(), out.as_deref()),
        Command::Certify {
            common,
            rate,
            lambda,
            pairs,
            ..
        } => certify(&resolve(&common)?, rate, lambda, pairs),
        Command::FitT1 { series, times, out } => fit_t1_cmd(&series, times.as_deref(), &out),
        Command::Preview { tensor, out } => preview(&tensor, out.as_deref()),
    }
}
