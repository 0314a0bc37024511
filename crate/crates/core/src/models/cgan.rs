use ndarray::{s, Array2, Zip};

use super::{
    check_operator, concat, epoch_batches, gather, measure_rows, normal_rows, training_images,
    EpochMeans, LossHistory, TrainConfig, LOG_FLOOR, PIXELS, SAMPLE_STREAM, SHUFFLE_STREAM, WIDE,
};
use crate::autonet::{mlp_bn_relu_sigmoid, AdamState, LayerSpec, NetworkModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::measurement::MeasurementOperator;
use crate::numerics::RandomStream;

/// Generator on `concat(z, y)` with `dim(z) = dim(y) = m`.
pub fn generator_specs(m: usize, hidden: &[usize]) -> Vec<LayerSpec> {
    let mut dims = vec![2 * m];
    dims.extend_from_slice(hidden);
    dims.push(PIXELS);
    mlp_bn_relu_sigmoid(&dims)
}

/// Discriminator on `concat(x, y)`: dense layers with leaky ReLU(0.2) between
/// them and a sigmoid head, no batchnorm.
pub fn discriminator_specs(m: usize, hidden: &[usize]) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut width = PIXELS + m;
    for &h in hidden {
        specs.push(LayerSpec::dense(width, h));
        specs.push(LayerSpec::leaky_relu(0.2));
        width = h;
    }
    specs.push(LayerSpec::dense(width, 1));
    specs.push(LayerSpec::Sigmoid);
    specs
}

#[derive(Clone, Debug)]
pub struct CganModel {
    pub generator: NetworkModel<f32>,
    pub discriminator: NetworkModel<f32>,
}

impl CganModel {
    pub fn new(m: usize, stream: &mut RandomStream) -> Result<Self> {
        Self::with_hidden(m, &[WIDE; 4], &[1024, 512, 256], stream)
    }

    pub fn with_hidden(
        m: usize,
        gen_hidden: &[usize],
        disc_hidden: &[usize],
        stream: &mut RandomStream,
    ) -> Result<Self> {
        Ok(CganModel {
            generator: NetworkModel::init(&generator_specs(m, gen_hidden), stream)?,
            discriminator: NetworkModel::init(&discriminator_specs(m, disc_hidden), stream)?,
        })
    }

    pub fn from_networks(
        generator: NetworkModel<f32>,
        discriminator: NetworkModel<f32>,
    ) -> Result<Self> {
        let m = generator.input_dim() / 2;
        if generator.input_dim() % 2 != 0
            || generator.output_dim() != PIXELS
            || discriminator.input_dim() != PIXELS + m
            || discriminator.output_dim() != 1
        {
            return Err(Error::Format("generator and discriminator widths disagree".into()));
        }
        Ok(CganModel {
            generator,
            discriminator,
        })
    }

    pub fn measurement_dim(&self) -> usize {
        self.generator.input_dim() / 2
    }

    fn check_pair(&self, a: &Array2<f32>, y: &Array2<f32>) -> Result<()> {
        let m = self.measurement_dim();
        if y.ncols() != m || a.nrows() != y.nrows() {
            return Err(Error::ShapeMismatch {
                expected: vec![a.nrows(), m],
                actual: y.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// `x̂ = G(z, y)` in eval mode.
    pub fn generate(&self, z: &Array2<f32>, y: &Array2<f32>) -> Result<Array2<f32>> {
        self.check_pair(z, y)?;
        if z.ncols() != self.measurement_dim() {
            return Err(Error::ShapeMismatch {
                expected: vec![z.nrows(), self.measurement_dim()],
                actual: z.shape().to_vec(),
            });
        }
        self.generator.predict(&concat(z, y))
    }

    /// `D(x, y)` per row.
    pub fn discriminate(&self, x: &Array2<f32>, y: &Array2<f32>) -> Result<Vec<f32>> {
        self.check_pair(x, y)?;
        Ok(self.discriminator.predict(&concat(x, y))?.into_raw_vec_and_offset().0)
    }
}

/// Mean of `−log max(d, floor)` over a batch, with its gradient on `d`.
fn neg_log(d: &Array2<f32>) -> (f64, Array2<f32>) {
    let b = d.len() as f64;
    let mut total = 0.0;
    let grad = d.mapv(|v| {
        let vd = v as f64;
        if vd >= LOG_FLOOR {
            total -= vd.ln();
            (-1.0 / (b * vd)) as f32
        } else {
            total -= LOG_FLOOR.ln();
            0.0
        }
    });
    (total / b, grad)
}

/// Mean of `−log max(1 − d, floor)` over a batch, with its gradient on `d`.
fn neg_log_complement(d: &Array2<f32>) -> (f64, Array2<f32>) {
    let b = d.len() as f64;
    let mut total = 0.0;
    let grad = d.mapv(|v| {
        let c = 1.0 - v as f64;
        if c >= LOG_FLOOR {
            total -= c.ln();
            (1.0 / (b * c)) as f32
        } else {
            total -= LOG_FLOOR.ln();
            0.0
        }
    });
    (total / b, grad)
}

/// Alternating minibatch updates: the discriminator ascends
/// `log D(x,y) + log(1 − D(G(z,y),y))`, then the generator descends
/// `−log D(G(z,y),y) + λ·mean|x − G(z,y)|`. History columns: discriminator loss,
/// generator adversarial term, L1 term, and mean D on real and fake pairs.
pub fn train_cgan(
    model: &mut CganModel,
    ds: &Dataset,
    op: &MeasurementOperator,
    cfg: &TrainConfig,
) -> Result<LossHistory> {
    cfg.validate()?;
    check_operator(op, cfg)?;
    let m = model.measurement_dim();
    if m != op.output_dim() {
        return Err(Error::ShapeMismatch {
            expected: vec![op.output_dim()],
            actual: vec![m],
        });
    }
    let x = training_images(ds, cfg.train_samples);
    let y = measure_rows(op, &x)?;
    let mut adam_g = AdamState::for_model(cfg.adam(), &model.generator);
    let mut adam_d = AdamState::for_model(cfg.adam(), &model.discriminator);
    let mut shuffle = RandomStream::new(cfg.seed, SHUFFLE_STREAM);
    let mut noise = RandomStream::new(cfg.seed, SAMPLE_STREAM);
    let lambda = cfg.lambda as f32;
    let mut history = LossHistory::new(&["d_loss", "g_adv", "g_l1", "d_real", "d_fake"]);
    for epoch in 0..cfg.epochs {
        let mut means = EpochMeans::new(5);
        for idx in epoch_batches(x.nrows(), cfg.batch_size, &mut shuffle) {
            let (xb, yb) = (gather(&x, &idx), gather(&y, &idx));
            let z = normal_rows(&mut noise, idx.len(), m);
            let gen = model.generator.forward_train(&concat(&z, &yb))?;
            let fake = gen.output().clone();

            // Discriminator step on real and detached fake pairs.
            let real_act = model.discriminator.forward_train(&concat(&xb, &yb))?;
            let (l_real, g_real) = neg_log(real_act.output());
            let (dg_real, _) = model.discriminator.backward(&real_act, &g_real)?;
            let fake_act = model.discriminator.forward_train(&concat(&fake, &yb))?;
            let (l_fake, g_fake) = neg_log_complement(fake_act.output());
            let (dg_fake, _) = model.discriminator.backward(&fake_act, &g_fake)?;
            let d_real = real_act.output().mean().unwrap_or(0.0) as f64;
            let d_fake = fake_act.output().mean().unwrap_or(0.0) as f64;
            let dgrads: Vec<_> = dg_real
                .into_iter()
                .zip(dg_fake)
                .map(|(a, b)| sum_grads(a, b))
                .collect();
            adam_d.step_model(&mut model.discriminator, &dgrads)?;

            // Generator step through the updated discriminator.
            let adv_act = model.discriminator.forward_train(&concat(&fake, &yb))?;
            let (l_adv, g_adv) = neg_log(adv_act.output());
            let d_in = model.discriminator.backward_input(&adv_act, &g_adv)?;
            let n = fake.len() as f32;
            let mut g_out = d_in.slice(s![.., ..PIXELS]).to_owned();
            let mut l1 = 0.0f64;
            Zip::from(&mut g_out).and(&fake).and(&xb).for_each(|g, &f, &t| {
                l1 += (f - t).abs() as f64;
                let sign = if f > t {
                    1.0
                } else if f < t {
                    -1.0
                } else {
                    0.0
                };
                *g += lambda * sign / n;
            });
            l1 /= n as f64;
            let (ggrads, _) = model.generator.backward(&gen, &g_out)?;
            adam_g.step_model(&mut model.generator, &ggrads)?;
            means.add(&[l_real + l_fake, l_adv, l1, d_real, d_fake])?;
        }
        let row = means.finish();
        log::info!(
            "cgan epoch {}/{}: d {:.4} g_adv {:.4} l1 {:.5}",
            epoch + 1,
            cfg.epochs,
            row[0],
            row[1],
            row[2]
        );
        history.epochs.push(row);
    }
    Ok(history)
}

fn sum_grads(
    a: crate::autonet::LayerGrads<f32>,
    b: crate::autonet::LayerGrads<f32>,
) -> crate::autonet::LayerGrads<f32> {
    use crate::autonet::LayerGrads;
    match (a, b) {
        (
            LayerGrads::Dense { weight, bias },
            LayerGrads::Dense {
                weight: w2,
                bias: b2,
            },
        ) => LayerGrads::Dense {
            weight: weight + w2,
            bias: bias + b2,
        },
        (LayerGrads::BatchNorm { gamma, beta }, LayerGrads::BatchNorm { gamma: g2, beta: b2 }) => {
            LayerGrads::BatchNorm {
                gamma: gamma + g2,
                beta: beta + b2,
            }
        }
        (a, _) => a,
    }
}
