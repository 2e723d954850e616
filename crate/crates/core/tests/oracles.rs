//! Checks against independently computed values: dense spectra, closed
//! forms, hand-rolled optimizer steps and exact model inversions.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use tvmap_core::autodiff::Tape;
use tvmap_core::linops::{to_dense, Identity};
use tvmap_core::metrics::{nrmse, psnr, ssim};
use tvmap_core::paramnet::{
    adam_step, mean_mse, reconstruct, reconstruct_tape, train, AdamState, NetWeights, TrainConfig, UNetConfig,
};
use tvmap_core::qmri::{fit_t1, signal_model, InversionSeries, INVERSION_TIMES, T1_BOUNDS, T1_GRID};
use tvmap_core::solvers::{reference_solve, Problem, ScalarLambda, REFERENCE_MAX_ITER, REFERENCE_TOL};
use tvmap_core::{DType, Gradient, Shape, SharingMode, Tensor};

fn wave(n: usize, f: f64) -> Vec<f64> {
    (0..n).map(|k| 0.5 + 0.4 * (f * k as f64).sin()).collect()
}

fn denoise_problem(shape: Shape, seed: u64) -> Problem {
    let n = shape.voxels();
    let truth: Vec<f64> = (0..n)
        .map(|k| if (k / 3 + seed as usize) % 4 < 2 { 0.8 } else { 0.2 })
        .collect();
    let noise = wave(n, 1.7 + seed as f64);
    let z: Vec<f64> = truth.iter().zip(&noise).map(|(t, w)| t + 0.3 * (w - 0.5)).collect();
    Problem::l2(
        Arc::new(Identity::new(n)),
        z.clone(),
        Tensor::real(shape, z).unwrap(),
        Some(Tensor::real(shape, truth).unwrap()),
    )
    .unwrap()
}

#[test]
fn gradient_norm_matches_the_dense_spectrum() {
    for (shape, dtype) in [
        (Shape::image(5, 3), DType::Real),
        (Shape::image(1, 7), DType::Real),
        (Shape::new(3, 4, 3), DType::Real),
        (Shape::new(2, 3, 2), DType::Complex),
    ] {
        let g = Gradient::new(shape, dtype);
        let d = to_dense(&g);
        let top = SymmetricEigen::new(d.transpose() * &d).eigenvalues.max().sqrt();
        assert!((g.norm() - top).abs() <= 1e-10, "{shape:?}: {} vs {top}", g.norm());
    }
}

#[test]
fn pdhg_limit_minimizes_the_objective() {
    let shape = Shape::new(4, 3, 2);
    let p = denoise_problem(shape, 1);
    let lam = ScalarLambda { xy: 0.08, t: 0.05 }.to_map(shape);
    let r = reference_solve(&p, &lam, REFERENCE_TOL, REFERENCE_MAX_ITER).unwrap();
    assert!(r.converged);
    let x = r.report.image;
    let f = p.objective(&x, &lam).unwrap();
    for k in 0..40 {
        let dir = wave(shape.voxels(), 0.3 + 0.41 * k as f64);
        for eps in [1e-3, -1e-4] {
            let y: Vec<f64> = x.data().iter().zip(&dir).map(|(a, d)| a + eps * (d - 0.5)).collect();
            let fy = p.objective(&Tensor::real(shape, y).unwrap(), &lam).unwrap();
            assert!(fy >= f - 1e-9, "perturbation {k} lowers the objective: {fy} < {f}");
        }
    }
    // A further iteration leaves the limit in place.
    let more = p.solve(&lam, 20_000, false).unwrap().image;
    let again = p.solve(&lam, 20_001, false).unwrap().image;
    let step: f64 = more
        .data()
        .iter()
        .zip(again.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(step <= 1e-10);
}

#[test]
fn recorded_unrolling_reproduces_the_plain_solver_bit_for_bit() {
    for (shape, mode) in [
        (Shape::new(8, 8, 4), SharingMode::XyT),
        (Shape::image(8, 8), SharingMode::Xyt),
    ] {
        let p = denoise_problem(shape, 2);
        let cfg = UNetConfig::for_problem(shape, DType::Real, mode, 0.5);
        let w = NetWeights::init(cfg, 9).unwrap();
        let plain = reconstruct(&p, &w, mode, 12).unwrap();
        let grad = Gradient::new(shape, DType::Real);
        let mut tape = Tape::new();
        let theta = tape.constant(w.theta.clone());
        let x = reconstruct_tape(&mut tape, &p, &grad, theta, &cfg, mode, 12).unwrap();
        assert_eq!(tape.value(x), plain.data());
    }
}

#[test]
fn zero_weights_reduce_to_a_scalar_weight_of_t_ln2() {
    let shape = Shape::image(8, 8);
    let p = denoise_problem(shape, 3);
    let cfg = UNetConfig::for_problem(shape, DType::Real, SharingMode::Xyt, 0.2);
    let w = NetWeights::zeros(cfg).unwrap();
    let scalar = ScalarLambda::uniform(0.2 * std::f64::consts::LN_2).to_map(shape);
    let a = reconstruct(&p, &w, SharingMode::Xyt, 30).unwrap();
    let b = p.solve(&scalar, 30, false).unwrap().image;
    assert_eq!(a.data(), b.data());
}

#[test]
fn first_adam_step_moves_each_weight_by_the_learning_rate() {
    let cfg = TrainConfig {
        lr: 0.01,
        ..TrainConfig::default()
    };
    let mut w = vec![1.0, -2.0, 0.5];
    let g = [3.0, -0.25, 1e-3];
    let mut state = AdamState::new(3);
    adam_step(&mut w, &g, &mut state, &cfg).unwrap();
    // m_hat = g and v_hat = g^2 after one step, so the update is lr g / (|g| + eps).
    for ((wi, w0), gi) in w.iter().zip([1.0, -2.0, 0.5]).zip(g) {
        let want = w0 - 0.01 * gi / (gi.abs() + cfg.eps);
        assert!((wi - want).abs() <= 1e-15);
    }
    // Second step by hand.
    let g2 = [1.0, 1.0, 1.0];
    let before = w.clone();
    adam_step(&mut w, &g2, &mut state, &cfg).unwrap();
    for i in 0..3 {
        let m = 0.9 * (0.1 * g[i]) + 0.1 * g2[i];
        let v = 0.999 * (0.001 * g[i] * g[i]) + 0.001 * g2[i] * g2[i];
        let (mh, vh) = (m / (1.0 - 0.81), v / (1.0 - 0.999f64.powi(2)));
        assert!((w[i] - (before[i] - 0.01 * mh / (vh.sqrt() + cfg.eps))).abs() <= 1e-14);
    }
}

#[test]
fn decoupled_decay_shrinks_weights_without_gradient() {
    let cfg = TrainConfig {
        lr: 0.1,
        weight_decay: 0.5,
        ..TrainConfig::default()
    };
    let mut w = vec![2.0];
    let mut state = AdamState::new(1);
    adam_step(&mut w, &[0.0], &mut state, &cfg).unwrap();
    assert!((w[0] - 2.0 * (1.0 - 0.05)).abs() <= 1e-15);
}

#[test]
fn training_is_seeded_and_frozen_at_zero_rate() {
    let shape = Shape::new(8, 8, 2);
    let set: Vec<Problem> = (0..3).map(|k| denoise_problem(shape, k)).collect();
    let mut net = UNetConfig::for_problem(shape, DType::Real, SharingMode::XyT, 0.5);
    net.stages = 1;
    net.filters = 4;
    let cfg = TrainConfig {
        t_train: 4,
        epochs: 3,
        batch_size: 2,
        seed: 5,
        ..TrainConfig::default()
    };
    let a = train(&set[..2], &set[2..], &net, &cfg, &mut |_| {}).unwrap();
    let b = train(&set[..2], &set[2..], &net, &cfg, &mut |_| {}).unwrap();
    assert_eq!(a.weights, b.weights);
    assert_eq!(
        a.history
            .iter()
            .map(|h| (h.train_loss.to_bits(), h.val_loss))
            .collect::<Vec<_>>(),
        b.history
            .iter()
            .map(|h| (h.train_loss.to_bits(), h.val_loss))
            .collect::<Vec<_>>()
    );

    let frozen = TrainConfig { lr: 0.0, ..cfg };
    let f = train(&set[..2], &set[2..], &net, &frozen, &mut |_| {}).unwrap();
    assert_eq!(f.weights, NetWeights::init(net, 5).unwrap());
    assert!(f.history.iter().all(|h| h.val_loss.is_none_or(|v| v == f.initial_val)));
    let direct = mean_mse(&set[2..], &f.weights, SharingMode::XyT, 4).unwrap();
    assert_eq!(direct, f.initial_val);
}

/// The golden-section refinement stops at a bracket of about 1e-5 relative.
#[test]
fn noiseless_inversion_recovery_is_inverted() {
    let (nx, ny) = (4, 3);
    let t1s: Vec<f64> = (0..nx * ny).map(|k| 0.08 + 0.45 * k as f64).collect();
    let m0s: Vec<Complex64> = (0..nx * ny)
        .map(|k| Complex64::from_polar(0.3 + 0.05 * k as f64, 0.2 * k as f64 - 1.0))
        .collect();
    let shape = Shape::new(nx, ny, INVERSION_TIMES.len());
    let mut values = vec![Complex64::new(0.0, 0.0); shape.voxels()];
    for (t, &time) in INVERSION_TIMES.iter().enumerate() {
        for v in 0..nx * ny {
            values[t * nx * ny + v] = signal_model(m0s[v], t1s[v], time);
        }
    }
    let series = InversionSeries::new(INVERSION_TIMES.to_vec(), Tensor::complex(shape, &values).unwrap()).unwrap();
    let fit = fit_t1(&series, T1_BOUNDS, T1_GRID).unwrap();
    for v in 0..nx * ny {
        assert!(
            (fit.t1.data()[v] - t1s[v]).abs() <= 1e-5 * t1s[v],
            "pixel {v}: {} vs {}",
            fit.t1.data()[v],
            t1s[v]
        );
        assert!((fit.m0.value(v) - m0s[v]).norm() <= 1e-5);
    }
}

#[test]
fn metrics_on_known_errors() {
    let shape = Shape::image(4, 4);
    let reference = Tensor::real(shape, (0..16).map(|k| k as f64 / 15.0).collect()).unwrap();
    let shifted = Tensor::real(shape, reference.data().iter().map(|v| v + 0.1).collect()).unwrap();
    // peak 1, rmse 0.1
    assert!((psnr(&shifted, &reference).unwrap() - 20.0).abs() <= 1e-12);
    let energy: f64 = reference.data().iter().map(|v| v * v).sum();
    assert!((nrmse(&shifted, &reference).unwrap() - (16.0 * 0.01 / energy).sqrt()).abs() <= 1e-12);
    assert!((ssim(&reference, &reference).unwrap() - 1.0).abs() <= 1e-12);
    assert!(ssim(&shifted, &reference).unwrap() < 1.0);
}
