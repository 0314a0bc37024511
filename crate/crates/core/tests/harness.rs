mod common;

use std::fs;
use std::path::Path;

use phaseret::data::DatasetName;
use phaseret::harness::{
    cmd_report, cmd_solve, cmd_sweep_measurements, cmd_sweep_noise, cmd_train, read_rows,
    ExperimentConfig, Method,
};
use phaseret::latentopt::LatentOptConfig;
use phaseret::measurement::OperatorDescriptor;

const FOURIER: OperatorDescriptor = OperatorDescriptor::Fourier2d { h: 28, w: 28 };

fn config(method: Method, op: OperatorDescriptor, dir: &Path, out: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(DatasetName::Mnist, method, op, &dir.join(out));
    c.data_root = Some(common::data_root());
    c.weights = dir.join("weights");
    c.limit = Some(6);
    c.seed = 3;
    // Tiny training runs: the full architectures, two minibatches.
    c.train.train_samples = Some(128);
    c.train.epochs = Some(1);
    c
}

#[test]
fn degenerate_refinement_equals_plain_sampling() {
    if !common::have_mnist("degenerate refinement") {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let trained = cmd_train(&config(Method::Prcgan, FOURIER, dir.path(), "train.csv")).unwrap();
    assert_eq!(trained.len(), 1);
    let plain = cmd_solve(&config(Method::Prcgan, FOURIER, dir.path(), "plain.csv")).unwrap();
    let mut star = config(Method::PrcganStar, FOURIER, dir.path(), "star.csv");
    star.latent = Some(LatentOptConfig {
        steps: 0,
        restarts: 1,
        ..LatentOptConfig::prcgan()
    });
    let star = cmd_solve(&star).unwrap();
    let mse = |rows: &[phaseret::harness::ReportRow]| rows.iter().map(|r| r.mse).collect::<Vec<_>>();
    assert_eq!(mse(&plain.rows), mse(&star.rows));

    // A few real steps never end above the starting residual.
    let mut refine = config(Method::PrcganStar, FOURIER, dir.path(), "refine.csv");
    refine.latent = Some(LatentOptConfig {
        steps: 5,
        ..LatentOptConfig::prcgan()
    });
    let refined = cmd_solve(&refine).unwrap();
    assert_eq!(refined.outcomes.len(), 6);
    assert!(refined.aggregate().residual.unwrap() <= plain.aggregate().residual.unwrap());
}

#[test]
fn operator_mismatch_is_a_provenance_error() {
    if !common::have_mnist("provenance") {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let gauss = OperatorDescriptor::Gaussian { m: 784, n: 784, seed: 0 };
    let t = cmd_train(&config(Method::Prcgan, gauss, dir.path(), "train.csv")).unwrap();
    let mut c = config(Method::Prcgan, FOURIER, dir.path(), "x.csv");
    c.weights = Path::new(&t[0].record.archive).to_path_buf();
    let e = cmd_solve(&c).unwrap_err();
    assert_eq!(e.kind(), "provenance_mismatch");
    assert!(e.to_string().contains("gaussian") && e.to_string().contains("fourier2d"));
}

#[test]
fn training_is_reproducible_and_sweeps_survive_missing_cells() {
    if !common::have_mnist("train determinism") {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let gauss = OperatorDescriptor::Gaussian { m: 10, n: 784, seed: 0 };
    let mut t = config(Method::E2e, gauss.clone(), dir.path(), "train.csv");
    t.measurements = vec![10];
    let a = cmd_train(&t).unwrap();
    let bytes = fs::read(&a[0].record.archive).unwrap();
    let b = cmd_train(&t).unwrap();
    assert_eq!(a[0].record.archive_sha256, b[0].record.archive_sha256);
    assert_eq!(fs::read(&b[0].record.archive).unwrap(), bytes);
    assert!(Path::new(&a[0].record.archive).with_extension("loss.csv").exists());

    let mut s = config(Method::E2e, gauss, dir.path(), "sweep.csv");
    s.measurements = vec![10, 25];
    let rows = cmd_sweep_measurements(&s).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].error.is_none() && rows[0].mse.is_some());
    assert_eq!(rows[0].m, 10);
    assert!(rows[1].error.as_deref().unwrap().starts_with("missing_weights"));
    assert_eq!(read_rows(&dir.path().join("sweep.csv")).unwrap(), rows);

    // Classical solvers do not apply to Gaussian operators: an error row, not an abort.
    let mut h = config(Method::Hio, OperatorDescriptor::Gaussian { m: 10, n: 784, seed: 0 }, dir.path(), "h.csv");
    h.measurements = vec![10];
    let rows = cmd_sweep_measurements(&h).unwrap();
    assert!(rows[0].error.as_deref().unwrap().starts_with("invalid_config"));
}

#[test]
fn noiseless_sweep_cell_matches_solve_and_report_agrees() {
    if !common::have_mnist("noise sweep") {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Method::Hio, FOURIER, dir.path(), "solve.csv");
    c.iters = 30;
    c.limit = Some(4);
    let solved = cmd_solve(&c).unwrap();
    let agg = solved.aggregate().clone();
    let rows: Vec<f64> = solved.rows[..4].iter().map(|r| r.mse.unwrap()).collect();
    assert!((agg.mse.unwrap() - rows.iter().sum::<f64>() / 4.0).abs() <= 1e-12);

    let mut n = c.clone();
    n.noise = vec![0.0, 3.0];
    n.output = dir.path().join("noise.csv");
    let sweep = cmd_sweep_noise(&n).unwrap();
    assert_eq!(sweep[0].mse, agg.mse);
    assert_eq!(sweep[0].residual, agg.residual);
    assert_eq!(sweep[0].snr, None);
    let snr = sweep[1].snr.unwrap();
    assert!(snr > 1.0 && snr < 6.0, "{snr}");

    let out = dir.path().join("summary.csv");
    let (summary, hist) = cmd_report(&[c.output.clone()], &out, 16).unwrap();
    assert_eq!(summary.len(), 1);
    assert_eq!(summary[0].samples, 4);
    assert!((summary[0].mse.unwrap() - agg.mse.unwrap()).abs() <= 1e-12);
    for m in ["hio", "original:mnist"] {
        let total: f64 = hist.iter().filter(|h| h.method == m).map(|h| h.density).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
