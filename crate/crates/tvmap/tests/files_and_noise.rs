use proptest::prelude::*;
use tvmap::checkpoint::Checkpoint;
use tvmap::config::{ExperimentConfig, KeyValues, Task};
use tvmap::io::Table;
use tvmap::noise::{add_gaussian, ct_poisson_log};
use tvmap::tnsr::{read_raw, write_raw, RawTensor};
use tvmap::Error;
use tvmap_core::linops::MatrixOp;
use tvmap_core::paramnet::{NetWeights, UNetConfig};
use tvmap_core::prox::KlParams;
use tvmap_core::{DType, Shape, SharingMode};

fn raw_tensor() -> impl Strategy<Value = RawTensor> {
    (
        prop::collection::vec(1usize..5, 1..4),
        prop_oneof![Just(DType::Real), Just(DType::Complex)],
    )
        .prop_flat_map(|(dims, dtype)| {
            let n = dims.iter().product::<usize>() * dtype.comps();
            prop::collection::vec(any::<f64>(), n)
                .prop_map(move |data| RawTensor::new(dtype, dims.clone(), data).unwrap())
        })
}

proptest! {
    #[test]
    fn tnsr_bytes_round_trip(t in raw_tensor()) {
        let bytes = t.encode().unwrap();
        let back = RawTensor::decode(&bytes).unwrap();
        prop_assert_eq!(&back.dims, &t.dims);
        prop_assert_eq!(back.dtype, t.dtype);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.data), bits(&t.data));
    }

    #[test]
    fn truncated_tnsr_is_rejected(t in raw_tensor(), cut in 1usize..16) {
        let bytes = t.encode().unwrap();
        let cut = cut.min(bytes.len());
        prop_assert!(RawTensor::decode(&bytes[..bytes.len() - cut]).is_err());
    }
}

#[test]
fn tnsr_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = RawTensor::new(DType::Complex, vec![2, 3, 1], (0..12).map(|k| k as f64 - 5.5).collect()).unwrap();
    let path = dir.path().join("x.tnsr");
    write_raw(&path, &t).unwrap();
    assert_eq!(read_raw(&path).unwrap(), t);
    let shape = read_raw(&path).unwrap().shape().unwrap();
    assert_eq!(shape, Shape::new(3, 1, 2));
}

#[test]
fn configs_survive_their_own_manifest() {
    for task in [Task::Denoise, Task::Mri, Task::Ct, Task::Qmri] {
        let cfg = ExperimentConfig::defaults(task, 42);
        let text = cfg.to_kv().render();
        let back = ExperimentConfig::from_kv(&KeyValues::parse(&text).unwrap()).unwrap();
        assert_eq!(back, cfg, "{}", task.name());
    }
}

#[test]
fn unknown_config_keys_are_rejected_but_foreign_sections_ignored() {
    let base = "[experiment]\ntask = denoise\nseed = 1\nout_dir = o\n";
    let typo = format!("{base}[solver]\niter = 3\n");
    assert!(matches!(
        ExperimentConfig::from_kv(&KeyValues::parse(&typo).unwrap()),
        Err(Error::Config(_))
    ));
    let foreign = format!("{base}[run]\ncommand = gen\n");
    assert!(ExperimentConfig::from_kv(&KeyValues::parse(&foreign).unwrap()).is_ok());
}

#[test]
fn tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Table::new(&["a", "b"]);
    t.push(vec!["1".into(), "x,y".into()]);
    t.push(vec!["0.1".into(), String::new()]);
    let path = dir.path().join("t.csv");
    t.write(&path).unwrap();
    assert_eq!(Table::read(&path).unwrap(), t);
    assert_eq!(Table::read(&path).unwrap().column("a").unwrap(), vec!["1", "0.1"]);
}

#[test]
fn checkpoints_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = UNetConfig::for_problem(Shape::new(8, 8, 2), DType::Real, SharingMode::XyT, 0.5);
    let mut info = KeyValues::default();
    info.set("result.best_epoch", 3);
    let ck = Checkpoint {
        weights: NetWeights::init(cfg, 2).unwrap(),
        mode: SharingMode::XyT,
        info,
    };
    ck.save(dir.path()).unwrap();
    assert_eq!(Checkpoint::load(dir.path()).unwrap(), ck);
}

#[test]
fn gaussian_noise_has_the_requested_level() {
    let x = vec![0.5; 200_000];
    for complex in [false, true] {
        let y = add_gaussian(&x, 0.2, 9, complex).unwrap();
        let n = y.len() as f64;
        let mean = y.iter().map(|v| v - 0.5).sum::<f64>() / n;
        let var = y.iter().map(|v| (v - 0.5 - mean).powi(2)).sum::<f64>() / n;
        let per_entry = if complex { 2.0 * var } else { var };
        assert!(mean.abs() < 3.0 * 0.2 / n.sqrt());
        assert!((per_entry - 0.04).abs() < 0.04 * 0.02, "complex {complex}: {per_entry}");
    }
    assert_eq!(
        add_gaussian(&x[..10], 0.2, 3, false).unwrap(),
        add_gaussian(&x[..10], 0.2, 3, false).unwrap()
    );
    assert_eq!(add_gaussian(&x[..10], 0.0, 3, false).unwrap(), x[..10].to_vec());
}

#[test]
fn log_poisson_data_concentrates_around_the_line_integrals() {
    let bins = 4000;
    let a = MatrixOp::new(bins, 1, vec![1.0; bins]).unwrap();
    let kl = KlParams::new(10.0, 4096.0).unwrap();
    let x = 0.05;
    let (z, zeros) = ct_poisson_log(&a, &[x], kl, 4).unwrap();
    assert_eq!(zeros, 0);
    let mean = z.iter().sum::<f64>() / bins as f64;
    // Counts have mean N0 e^{-mu x}; the delta method gives the spread.
    let rate = kl.n0 * (-kl.mu * x).exp();
    let sd = 1.0 / (kl.mu * rate.sqrt());
    assert!((mean - x).abs() < 4.0 * sd / (bins as f64).sqrt() + 1e-4);
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / bins as f64;
    assert!((var.sqrt() / sd - 1.0).abs() < 0.1);
}
