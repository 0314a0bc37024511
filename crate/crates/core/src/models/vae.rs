use ndarray::{s, Array2, Zip};

use super::{
    concat, epoch_batches, gather, normal_rows, training_images, EpochMeans, LossHistory,
    TrainConfig, LOG_FLOOR, PIXELS, SAMPLE_STREAM, SHUFFLE_STREAM,
};
use crate::autonet::{AdamState, LayerSpec, NetworkModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::RandomStream;

const HIDDEN: usize = 500;

/// `784 − 500 − 500 → 2k`: the first `k` outputs are μ, the rest log σ².
pub fn encoder_specs(k: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::dense(PIXELS, HIDDEN),
        LayerSpec::Relu,
        LayerSpec::dense(HIDDEN, HIDDEN),
        LayerSpec::Relu,
        LayerSpec::dense(HIDDEN, 2 * k),
    ]
}

/// `k − 500 − 500 − 784` with a sigmoid head.
pub fn decoder_specs(k: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::dense(k, HIDDEN),
        LayerSpec::Relu,
        LayerSpec::dense(HIDDEN, HIDDEN),
        LayerSpec::Relu,
        LayerSpec::dense(HIDDEN, PIXELS),
        LayerSpec::Sigmoid,
    ]
}

#[derive(Clone, Debug)]
pub struct VaeModel {
    pub encoder: NetworkModel<f32>,
    pub decoder: NetworkModel<f32>,
}

/// `KL(𝒩(μ, σ²) ‖ 𝒩(0, 1))` summed over all entries.
pub fn kl_divergence(mu: &Array2<f32>, logvar: &Array2<f32>) -> f64 {
    Zip::from(mu).and(logvar).fold(0.0, |acc, &m, &lv| {
        let (m, lv) = (m as f64, lv as f64);
        acc + 0.5 * (m * m + lv.exp() - 1.0 - lv)
    })
}

impl VaeModel {
    pub fn new(latent_dim: usize, stream: &mut RandomStream) -> Result<Self> {
        Ok(VaeModel {
            encoder: NetworkModel::init(&encoder_specs(latent_dim), stream)?,
            decoder: NetworkModel::init(&decoder_specs(latent_dim), stream)?,
        })
    }

    pub fn from_networks(encoder: NetworkModel<f32>, decoder: NetworkModel<f32>) -> Result<Self> {
        let k = decoder.input_dim();
        if encoder.output_dim() != 2 * k
            || encoder.input_dim() != PIXELS
            || decoder.output_dim() != PIXELS
        {
            return Err(Error::Format("encoder and decoder widths disagree".into()));
        }
        Ok(VaeModel { encoder, decoder })
    }

    pub fn latent_dim(&self) -> usize {
        self.decoder.input_dim()
    }

    /// `(μ, log σ²)` for each image row.
    pub fn encode(&self, x: &Array2<f32>) -> Result<(Array2<f32>, Array2<f32>)> {
        let out = self.encoder.predict(x)?;
        let k = self.latent_dim();
        Ok((out.slice(s![.., ..k]).to_owned(), out.slice(s![.., k..]).to_owned()))
    }

    pub fn decode(&self, z: &Array2<f32>) -> Result<Array2<f32>> {
        self.decoder.predict(z)
    }
}

/// Pixelwise Bernoulli negative log-likelihood (summed) and its gradient with
/// respect to the sigmoid output.
fn bce(p: &Array2<f32>, x: &Array2<f32>) -> (f64, Array2<f32>) {
    let mut total = 0.0;
    let grad = Zip::from(p).and(x).map_collect(|&p, &x| {
        let (pc, xd) = ((p as f64).clamp(LOG_FLOOR, 1.0 - LOG_FLOOR), x as f64);
        total -= xd * pc.ln() + (1.0 - xd) * (1.0 - pc).ln();
        let denom = p * (1.0 - p);
        if denom > 0.0 {
            (p - x) / denom
        } else {
            0.0
        }
    });
    (total, grad)
}

/// Maximizes the ELBO with reparameterized `z = μ + σ ⊙ ε`. The history records
/// the per-image negative ELBO and its two terms.
pub fn train_vae(model: &mut VaeModel, ds: &Dataset, cfg: &TrainConfig) -> Result<LossHistory> {
    cfg.validate()?;
    let k = model.latent_dim();
    let x = training_images(ds, cfg.train_samples);
    let mut adam_e = AdamState::for_model(cfg.adam(), &model.encoder);
    let mut adam_d = AdamState::for_model(cfg.adam(), &model.decoder);
    let mut shuffle = RandomStream::new(cfg.seed, SHUFFLE_STREAM);
    let mut noise = RandomStream::new(cfg.seed, SAMPLE_STREAM);
    let mut history = LossHistory::new(&["neg_elbo", "bce", "kl"]);
    for epoch in 0..cfg.epochs {
        let mut means = EpochMeans::new(3);
        for idx in epoch_batches(x.nrows(), cfg.batch_size, &mut shuffle) {
            let xb = gather(&x, &idx);
            let b = xb.nrows() as f32;
            let enc = model.encoder.forward_train(&xb)?;
            let mu = enc.output().slice(s![.., ..k]).to_owned();
            let logvar = enc.output().slice(s![.., k..]).to_owned();
            let eps = normal_rows(&mut noise, idx.len(), k);
            let sigma = logvar.mapv(|v| (0.5 * v).exp());
            let z = &mu + &(&sigma * &eps);
            let dec = model.decoder.forward_train(&z)?;
            let (rec, mut gp) = bce(dec.output(), &xb);
            let kl = kl_divergence(&mu, &logvar);
            gp /= b;
            let (dgrads, dz) = model.decoder.backward(&dec, &gp)?;
            // ∂/∂μ and ∂/∂logσ² of the batch-mean loss.
            let dmu = &dz + &(&mu / b);
            let dlv = &dz * &eps * &sigma * 0.5 + &logvar.mapv(|v| 0.5 * (v.exp() - 1.0) / b);
            let (egrads, _) = model.encoder.backward(&enc, &concat(&dmu, &dlv))?;
            adam_d.step_model(&mut model.decoder, &dgrads)?;
            adam_e.step_model(&mut model.encoder, &egrads)?;
            let n = idx.len() as f64;
            means.add(&[(rec + kl) / n, rec / n, kl / n])?;
        }
        let row = means.finish();
        log::info!("vae epoch {}/{}: -elbo {:.3}", epoch + 1, cfg.epochs, row[0]);
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

    #[test]
    fn kl_of_standard_code_is_zero() {
        let z = Array2::zeros((3, 5));
        assert_eq!(kl_divergence(&z, &z), 0.0);
        let mu = Array2::from_elem((1, 1), 1.0f32);
        assert!((kl_divergence(&mu, &Array2::zeros((1, 1))) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bce_gradient_through_sigmoid_is_residual() {
        // (p − x)/(p(1 − p)) · p(1 − p) = p − x
        let p = Array2::from_shape_vec((1, 3), vec![0.2f32, 0.7, 0.5]).unwrap();
        let x = Array2::from_shape_vec((1, 3), vec![0.0f32, 1.0, 0.5]).unwrap();
        let (v, g) = bce(&p, &x);
        let expect = -((1.0 - 0.2f32 as f64).ln() + (0.7f32 as f64).ln() + 0.5f64.ln());
        assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
        for k in 0..3 {
            let back = g[[0, k]] * p[[0, k]] * (1.0 - p[[0, k]]);
            assert!((back - (p[[0, k]] - x[[0, k]])).abs() < 1e-6);
        }
    }

    #[test]
    fn decoder_range_and_descent() {
        let mut s = RandomStream::new(3, 0);
        let px = (0..128 * PIXELS)
            .map(|i| if (i % PIXELS) % 29 < 8 && s.uniform() < 0.9 { 255 } else { 0 })
            .collect();
        let ds = Dataset::from_bytes(DatasetName::Mnist, Split::Train, px).unwrap();
        let mut cfg = TrainConfig::defaults(ModelKind::Vae, OperatorDescriptor::Fourier2d { h: 28, w: 28 });
        cfg.epochs = 8;
        cfg.batch_size = 32;
        cfg.latent_dim = Some(8);
        let mut m = VaeModel::new(cfg.latent_dim(), &mut cfg.init_stream()).unwrap();
        let h = train_vae(&mut m, &ds, &cfg).unwrap();
        let e = h.column("neg_elbo").unwrap();
        assert!(e.last().unwrap() < &e[0], "{e:?}");
        let z = normal_rows(&mut RandomStream::new(1, 1), 16, 8);
        assert!(m.decode(&z).unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
