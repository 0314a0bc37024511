//! Learned reconstructors: the end-to-end regressor, the VAE prior used by
//! deep phase retrieval, and the measurement-conditioned GAN.

mod cgan;
mod e2e;
mod vae;

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::measurement::{MeasurementOperator, OperatorDescriptor};
use crate::numerics::RandomStream;

pub use cgan::{discriminator_specs, generator_specs, train_cgan, CganModel};
pub use e2e::{e2e_specs, train_e2e, E2eModel};
pub use vae::{decoder_specs, encoder_specs, kl_divergence, train_vae, VaeModel};

/// Side width of the hidden layers of the E2E network and the generator.
pub const WIDE: usize = 2048;
pub const PIXELS: usize = 784;
/// Clamp for arguments of `log` in the adversarial and likelihood terms.
pub const LOG_FLOOR: f64 = 1e-7;

const INIT_STREAM: u64 = 0x696e_6974;
const SHUFFLE_STREAM: u64 = 0x7368_7566;
const SAMPLE_STREAM: u64 = 0x7361_6d70;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    E2e,
    Vae,
    Prcgan,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::E2e => "e2e",
            ModelKind::Vae => "vae",
            ModelKind::Prcgan => "prcgan",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Weight of the L1 reconstruction term (GAN only).
    pub lambda: f64,
    pub seed: u64,
    pub operator: OperatorDescriptor,
    /// Use only the first N training images.
    #[serde(default)]
    pub train_samples: Option<usize>,
    /// VAE latent size; defaults to 128 for Fourier and 20 for Gaussian operators.
    #[serde(default)]
    pub latent_dim: Option<usize>,
}

impl TrainConfig {
    pub fn defaults(kind: ModelKind, operator: OperatorDescriptor) -> Self {
        let (epochs, learning_rate, beta1) = match kind {
            ModelKind::E2e | ModelKind::Vae => (50, 1e-3, 0.9),
            ModelKind::Prcgan => (100, 2e-4, 0.5),
        };
        TrainConfig {
            epochs,
            batch_size: 64,
            learning_rate,
            beta1,
            beta2: 0.999,
            lambda: 1000.0,
            seed: 0,
            operator,
            train_samples: None,
            latent_dim: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.epochs > 0
            && self.batch_size >= 2
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.lambda >= 0.0
            && self.train_samples != Some(0)
            && self.latent_dim != Some(0);
        if positive {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim.unwrap_or(match self.operator {
            OperatorDescriptor::Fourier2d { .. } => 128,
            OperatorDescriptor::Gaussian { .. } => 20,
        })
    }

    /// Stream for weight initialization.
    pub fn init_stream(&self) -> RandomStream {
        RandomStream::new(self.seed, INIT_STREAM)
    }

    fn adam(&self) -> crate::autonet::AdamConfig {
        crate::autonet::AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            ..Default::default()
        }
    }
}

/// Per-epoch means of the named loss terms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub columns: Vec<String>,
    pub epochs: Vec<Vec<f64>>,
}

impl LossHistory {
    fn new(columns: &[&str]) -> Self {
        LossHistory {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            epochs: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.epochs.iter().map(|row| row[k]).collect())
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["epoch".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (e, row) in self.epochs.iter().enumerate() {
            let mut rec = vec![(e + 1).to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Running per-epoch accumulator.
struct EpochMeans {
    sums: Vec<f64>,
    batches: usize,
}

impl EpochMeans {
    fn new(n: usize) -> Self {
        EpochMeans {
            sums: vec![0.0; n],
            batches: 0,
        }
    }

    fn add(&mut self, values: &[f64]) -> Result<()> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training loss"));
        }
        for (s, v) in self.sums.iter_mut().zip(values) {
            *s += v;
        }
        self.batches += 1;
        Ok(())
    }

    fn finish(self) -> Vec<f64> {
        let n = self.batches.max(1) as f64;
        self.sums.into_iter().map(|s| s / n).collect()
    }
}

/// Training images as rows, optionally cut to the first `limit`.
fn training_images(ds: &Dataset, limit: Option<usize>) -> Array2<f32> {
    let n = limit.map_or(ds.len(), |l| l.min(ds.len()));
    let idx: Vec<usize> = (0..n).collect();
    ds.batch(&idx)
}

/// `|A x|` for every row of `images`.
pub fn measure_rows(op: &MeasurementOperator, images: &Array2<f32>) -> Result<Array2<f32>> {
    let y = op.apply_batch(&images.mapv(|v| v as f64))?;
    Ok(y.mapv(|v| v as f32))
}

fn check_operator(op: &MeasurementOperator, cfg: &TrainConfig) -> Result<()> {
    match op.descriptor() {
        Some(d) if *d == cfg.operator => Ok(()),
        Some(d) => Err(Error::Provenance(format!(
            "operator {d} does not match the configured {}",
            cfg.operator
        ))),
        None => Err(Error::Provenance("operator has no descriptor".into())),
    }
}

/// Full minibatches of a fresh permutation; a trailing partial batch is dropped.
fn epoch_batches(n: usize, batch: usize, stream: &mut RandomStream) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (stream.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    order.chunks_exact(batch).map(|c| c.to_vec()).collect()
}

fn gather(rows: &Array2<f32>, idx: &[usize]) -> Array2<f32> {
    rows.select(ndarray::Axis(0), idx)
}

fn normal_rows(stream: &mut RandomStream, rows: usize, cols: usize) -> Array2<f32> {
    Array2::from_shape_simple_fn((rows, cols), || stream.standard_normal() as f32)
}

/// Horizontal concatenation `[a | b]`.
fn concat(a: &Array2<f32>, b: &Array2<f32>) -> Array2<f32> {
    let c = ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("equal row counts");
    c.as_standard_layout().into_owned()
}
