use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::sha256_hex;
use crate::classical::Algorithm;
use crate::data::DatasetName;
use crate::error::{Error, Result};
use crate::latentopt::LatentOptConfig;
use crate::measurement::OperatorDescriptor;
use crate::models::{ModelKind, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hio,
    Raar,
    Gs,
    E2e,
    /// Only meaningful for `train`; DPR solves use the trained VAE decoder.
    Vae,
    Dpr,
    Prcgan,
    PrcganStar,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Hio => "hio",
            Method::Raar => "raar",
            Method::Gs => "gs",
            Method::E2e => "e2e",
            Method::Vae => "vae",
            Method::Dpr => "dpr",
            Method::Prcgan => "prcgan",
            Method::PrcganStar => "prcgan_star",
        }
    }

    /// The trained model a method depends on.
    pub fn model_kind(&self) -> Option<ModelKind> {
        match self {
            Method::E2e => Some(ModelKind::E2e),
            Method::Vae | Method::Dpr => Some(ModelKind::Vae),
            Method::Prcgan | Method::PrcganStar => Some(ModelKind::Prcgan),
            _ => None,
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, Method::Hio | Method::Raar | Method::Gs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optional replacements for the per-model training defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub beta1: Option<f64>,
    #[serde(default)]
    pub beta2: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub train_samples: Option<usize>,
    #[serde(default)]
    pub latent_dim: Option<usize>,
}

fn default_iters() -> usize {
    1000
}

fn default_restarts() -> usize {
    3
}

fn default_limit() -> Option<usize> {
    Some(256)
}

fn default_weights() -> PathBuf {
    PathBuf::from("weights")
}

fn yes() -> bool {
    true
}

/// One experiment. Serializes canonically (fixed field order, every field
/// present); its sha256 is embedded in every output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetName,
    pub method: Method,
    pub operator: OperatorDescriptor,
    /// HIO/RAAR feedback parameter; 0.8 for HIO and 0.87 for RAAR when absent.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Restarts of the classical solvers.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Latent search for `dpr` / `prcgan_star`.
    #[serde(default)]
    pub latent: Option<LatentOptConfig>,
    #[serde(default)]
    pub train: TrainOverrides,
    /// Directory of archives resolved by name, or a single `.phw` file.
    #[serde(default = "default_weights")]
    pub weights: PathBuf,
    /// Noise levels α for `sweep-noise`.
    #[serde(default)]
    pub noise: Vec<f64>,
    /// Measurement counts m for Gaussian sweeps and per-m training.
    #[serde(default)]
    pub measurements: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Number of test images; `null` uses the whole 1024-image subset.
    #[serde(default = "default_limit")]
    pub limit: Option<usize>,
    pub output: PathBuf,
    /// Dataset root; falls back to `$PHASERET_DATA`, then `./data`.
    #[serde(default)]
    pub data_root: Option<PathBuf>,
    /// Register reconstructions before scoring (Fourier operators only).
    #[serde(default = "yes")]
    pub register: bool,
    /// Fill the wall-time column (makes outputs run-dependent).
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(dataset: DatasetName, method: Method, operator: OperatorDescriptor, output: &Path) -> Self {
        ExperimentConfig {
            dataset,
            method,
            operator,
            beta: None,
            iters: default_iters(),
            restarts: default_restarts(),
            latent: None,
            train: TrainOverrides::default(),
            weights: default_weights(),
            noise: Vec::new(),
            measurements: Vec::new(),
            seed: 0,
            limit: default_limit(),
            output: output.to_path_buf(),
            data_root: None,
            register: true,
            record_wall_time: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn checksum(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.iters == 0 || self.restarts == 0 {
            return bad("iters and restarts must be positive".into());
        }
        if self.limit == Some(0) {
            return bad("limit must be positive".into());
        }
        if let Some(l) = &self.latent {
            l.validate()?;
        }
        if self.noise.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad(format!("noise levels must be finite and >= 0: {:?}", self.noise));
        }
        if self.measurements.contains(&0) {
            return bad("measurement counts must be positive".into());
        }
        if self.method.is_classical() {
            self.algorithm()?;
        }
        Ok(())
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        let a = match self.method {
            Method::Hio => Algorithm::Hio {
                beta: self.beta.unwrap_or(0.8),
            },
            Method::Raar => Algorithm::Raar {
                beta: self.beta.unwrap_or(0.87),
            },
            Method::Gs => Algorithm::GerchbergSaxton,
            m => return Err(Error::Config(format!("{m} is not a classical solver"))),
        };
        a.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(a)
    }

    /// Latent search settings; plain PRCGAN is a single unrefined draw.
    pub fn latent_config(&self) -> LatentOptConfig {
        match self.method {
            Method::Prcgan => LatentOptConfig {
                steps: 0,
                restarts: 1,
                ..LatentOptConfig::prcgan()
            },
            Method::PrcganStar => self.latent.unwrap_or_else(LatentOptConfig::prcgan),
            _ => self.latent.unwrap_or_else(LatentOptConfig::dpr),
        }
    }

    pub fn train_config(&self, kind: ModelKind, operator: &OperatorDescriptor) -> TrainConfig {
        let mut c = TrainConfig::defaults(kind, operator.clone());
        let o = &self.train;
        c.epochs = o.epochs.unwrap_or(c.epochs);
        c.batch_size = o.batch_size.unwrap_or(c.batch_size);
        c.learning_rate = o.learning_rate.unwrap_or(c.learning_rate);
        c.beta1 = o.beta1.unwrap_or(c.beta1);
        c.beta2 = o.beta2.unwrap_or(c.beta2);
        c.lambda = o.lambda.unwrap_or(c.lambda);
        c.train_samples = o.train_samples;
        c.latent_dim = o.latent_dim;
        c.seed = self.seed;
        c
    }

    /// The operator with `m` replaced (Gaussian only).
    pub fn operator_with_m(&self, m: usize) -> Result<OperatorDescriptor> {
        match self.operator {
            OperatorDescriptor::Gaussian { n, seed, .. } => Ok(OperatorDescriptor::Gaussian { m, n, seed }),
            _ => Err(Error::Config("measurement counts need a gaussian operator".into())),
        }
    }

    /// Operators covered by `train` and `sweep-measurements`: one per listed m,
    /// or just the configured one.
    pub fn operators(&self) -> Result<Vec<OperatorDescriptor>> {
        if self.measurements.is_empty() {
            Ok(vec![self.operator.clone()])
        } else {
            self.measurements.iter().map(|&m| self.operator_with_m(m)).collect()
        }
    }

    pub fn data_root(&self) -> PathBuf {
        self.data_root
            .clone()
            .or_else(|| std::env::var_os("PHASERET_DATA").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data"))
    }
}
