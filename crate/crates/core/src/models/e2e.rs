use ndarray::Array2;

use super::{
    check_operator, epoch_batches, gather, measure_rows, training_images, EpochMeans, LossHistory,
    TrainConfig, PIXELS, SHUFFLE_STREAM, WIDE,
};
use crate::autonet::{mlp_bn_relu_sigmoid, AdamState, LayerSpec, Loss, MeanAbsoluteError, NetworkModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::measurement::MeasurementOperator;
use crate::numerics::RandomStream;

/// `m − 2048 − 2048 − 2048 − 2048 − 784`, batchnorm + ReLU between layers,
/// sigmoid head.
pub fn e2e_specs(m: usize, hidden: &[usize]) -> Vec<LayerSpec> {
    let mut dims = vec![m];
    dims.extend_from_slice(hidden);
    dims.push(PIXELS);
    mlp_bn_relu_sigmoid(&dims)
}

/// Direct regressor `x̂ = G(y)`.
#[derive(Clone, Debug)]
pub struct E2eModel {
    pub net: NetworkModel<f32>,
}

impl E2eModel {
    pub fn new(m: usize, stream: &mut RandomStream) -> Result<Self> {
        Self::with_hidden(m, &[WIDE; 4], stream)
    }

    pub fn with_hidden(m: usize, hidden: &[usize], stream: &mut RandomStream) -> Result<Self> {
        Ok(E2eModel {
            net: NetworkModel::init(&e2e_specs(m, hidden), stream)?,
        })
    }

    pub fn from_network(net: NetworkModel<f32>) -> Result<Self> {
        if net.output_dim() != PIXELS {
            return Err(Error::Format(format!(
                "E2E network outputs {} values, expected {PIXELS}",
                net.output_dim()
            )));
        }
        Ok(E2eModel { net })
    }

    pub fn measurement_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Eval-mode reconstructions, one row per measurement row.
    pub fn reconstruct(&self, y: &Array2<f32>) -> Result<Array2<f32>> {
        self.net.predict(y)
    }
}

/// Minimizes `mean |x − G(|Ax|)|` with Adam over shuffled minibatches.
pub fn train_e2e(
    model: &mut E2eModel,
    ds: &Dataset,
    op: &MeasurementOperator,
    cfg: &TrainConfig,
) -> Result<LossHistory> {
    cfg.validate()?;
    check_operator(op, cfg)?;
    if model.measurement_dim() != op.output_dim() {
        return Err(Error::ShapeMismatch {
            expected: vec![op.output_dim()],
            actual: vec![model.measurement_dim()],
        });
    }
    let x = training_images(ds, cfg.train_samples);
    let y = measure_rows(op, &x)?;
    let mut adam = AdamState::for_model(cfg.adam(), &model.net);
    let mut shuffle = RandomStream::new(cfg.seed, SHUFFLE_STREAM);
    let mut history = LossHistory::new(&["mae"]);
    for epoch in 0..cfg.epochs {
        let mut means = EpochMeans::new(1);
        for idx in epoch_batches(x.nrows(), cfg.batch_size, &mut shuffle) {
            let (xb, yb) = (gather(&x, &idx), gather(&y, &idx));
            let act = model.net.forward_train(&yb)?;
            let loss = MeanAbsoluteError { target: &xb };
            let value = loss.value(act.output()) as f64;
            let (grads, _) = model.net.backward(&act, &loss.gradient(act.output()))?;
            adam.step_model(&mut model.net, &grads)?;
            means.add(&[value])?;
        }
        let row = means.finish();
        log::info!("e2e epoch {}/{}: mae {:.5}", epoch + 1, cfg.epochs, row[0]);
        history.epochs.push(row);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetName, Split};
    use crate::measurement::OperatorDescriptor;
    use crate::models::ModelKind;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut s = RandomStream::new(seed, 0);
        let mut px = Vec::with_capacity(n * PIXELS);
        for _ in 0..n {
            let (ci, cj) = (8.0 + 12.0 * s.uniform(), 8.0 + 12.0 * s.uniform());
            for i in 0..28 {
                for j in 0..28 {
                    let d = (i as f64 - ci).powi(2) + (j as f64 - cj).powi(2);
                    px.push((255.0 * (-d / 18.0).exp()) as u8);
                }
            }
        }
        Dataset::from_bytes(DatasetName::Mnist, Split::Train, px).unwrap()
    }

    #[test]
    fn architecture() {
        let m = E2eModel::new(784, &mut RandomStream::new(0, 0)).unwrap();
        let dense: Vec<(usize, usize)> = m
            .net
            .specs()
            .iter()
            .filter_map(|s| match s {
                LayerSpec::Dense { in_dim, out_dim } => Some((*in_dim, *out_dim)),
                _ => None,
            })
            .collect();
        assert_eq!(
            dense,
            vec![(784, 2048), (2048, 2048), (2048, 2048), (2048, 2048), (2048, 784)]
        );
        assert_eq!(m.net.specs().last(), Some(&LayerSpec::Sigmoid));
    }

    #[test]
    fn small_run_descends_and_is_reproducible() {
        let ds = blobs(256, 1);
        let op = MeasurementOperator::gaussian(64, 784, 0).unwrap();
        let mut cfg = TrainConfig::defaults(ModelKind::E2e, op.descriptor().unwrap().clone());
        cfg.epochs = 12;
        cfg.batch_size = 32;
        let run = || {
            let mut m = E2eModel::with_hidden(64, &[128, 128], &mut cfg.init_stream()).unwrap();
            let h = train_e2e(&mut m, &ds, &op, &cfg).unwrap();
            (m, h)
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(ha, hb);
        assert_eq!(a.net.params(), b.net.params());
        let mae = ha.column("mae").unwrap();
        let lead: f64 = mae[..5].iter().sum::<f64>() / 5.0;
        let trail: f64 = mae[mae.len() - 5..].iter().sum::<f64>() / 5.0;
        assert!(trail < lead, "{mae:?}");
        let out = a.reconstruct(&measure_rows(&op, &training_images(&ds, Some(4))).unwrap()).unwrap();
        assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn operator_mismatch_is_rejected() {
        let ds = blobs(8, 2);
        let op = MeasurementOperator::gaussian(16, 784, 0).unwrap();
        let cfg = TrainConfig::defaults(ModelKind::E2e, OperatorDescriptor::Fourier2d { h: 28, w: 28 });
        let mut m = E2eModel::with_hidden(16, &[8], &mut RandomStream::new(0, 0)).unwrap();
        assert!(matches!(
            train_e2e(&mut m, &ds, &op, &cfg),
            Err(Error::Provenance(_))
        ));
    }
}
