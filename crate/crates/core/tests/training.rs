mod common;

use phaseret::data::{Dataset, DatasetName, Split};
use phaseret::measurement::MeasurementOperator;
use phaseret::models::{train_e2e, train_vae, E2eModel, ModelKind, TrainConfig, VaeModel};

#[test]
fn e2e_memorizes_64_images() {
    if !common::have_mnist("e2e overfit") {
        return;
    }
    let ds = Dataset::load(&common::data_root(), DatasetName::Mnist, Split::Train).unwrap();
    let op = MeasurementOperator::fourier2d(28, 28).unwrap();
    let mut cfg = TrainConfig::defaults(ModelKind::E2e, op.descriptor().unwrap().clone());
    cfg.train_samples = Some(64);
    cfg.epochs = 200;
    let mut model = E2eModel::new(784, &mut cfg.init_stream()).unwrap();
    let h = train_e2e(&mut model, &ds, &op, &cfg).unwrap();
    let mae = h.column("mae").unwrap();
    println!("e2e overfit: first {:.4}, last {:.4}", mae[0], mae[mae.len() - 1]);
    assert!(*mae.last().unwrap() <= 0.02, "final training MAE {}", mae.last().unwrap());
    let lead: f64 = mae[..5].iter().sum();
    let trail: f64 = mae[mae.len() - 5..].iter().sum();
    assert!(trail <= lead);
}

#[test]
fn vae_elbo_improves_on_mnist_10k() {
    if !common::have_mnist("vae elbo") {
        return;
    }
    let ds = Dataset::load(&common::data_root(), DatasetName::Mnist, Split::Train).unwrap();
    let op = MeasurementOperator::fourier2d(28, 28).unwrap();
    let mut cfg = TrainConfig::defaults(ModelKind::Vae, op.descriptor().unwrap().clone());
    cfg.train_samples = Some(10_000);
    cfg.epochs = 3;
    let mut model = VaeModel::new(cfg.latent_dim(), &mut cfg.init_stream()).unwrap();
    let h = train_vae(&mut model, &ds, &cfg).unwrap();
    let e = h.column("neg_elbo").unwrap();
    println!("vae -elbo per epoch: {e:?}");
    assert!(e.last().unwrap() < &e[0]);
    assert!(h.epochs.iter().flatten().all(|v| v.is_finite()));
}
