use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::container::{self, f32_bytes, read_f32};
use crate::autonet::{LayerParams, LayerSpec, NetworkModel};
use crate::error::{Error, Result};
use crate::measurement::OperatorDescriptor;
use crate::models::{CganModel, E2eModel, ModelKind, TrainConfig, VaeModel};

const ARCHIVE_MAGIC: &[u8; 8] = b"PHRWGTS\0";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    kind: ModelKind,
    train: TrainConfig,
    networks: Vec<NetworkEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkEntry {
    name: String,
    specs: Vec<LayerSpec>,
    blobs: Vec<Blob>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Blob {
    name: String,
    len: usize,
}

/// Trained networks of one model together with the configuration that produced them.
#[derive(Clone, Debug)]
pub struct WeightArchive {
    pub kind: ModelKind,
    pub train: TrainConfig,
    pub networks: Vec<(String, NetworkModel<f32>)>,
}

fn blobs_of(net: &NetworkModel<f32>) -> Vec<(String, Vec<&f32>)> {
    let mut out = Vec::new();
    for (k, p) in net.params().iter().enumerate() {
        match p {
            LayerParams::Dense { weight, bias } => {
                out.push((format!("layer{k}.weight"), weight.iter().collect()));
                out.push((format!("layer{k}.bias"), bias.iter().collect()));
            }
            LayerParams::BatchNorm {
                gamma,
                beta,
                running_mean,
                running_var,
            } => {
                out.push((format!("layer{k}.gamma"), gamma.iter().collect()));
                out.push((format!("layer{k}.beta"), beta.iter().collect()));
                out.push((format!("layer{k}.running_mean"), running_mean.iter().collect()));
                out.push((format!("layer{k}.running_var"), running_var.iter().collect()));
            }
            LayerParams::None => {}
        }
    }
    out
}

impl WeightArchive {
    pub fn from_e2e(model: &E2eModel, train: &TrainConfig) -> Self {
        WeightArchive {
            kind: ModelKind::E2e,
            train: train.clone(),
            networks: vec![("net".into(), model.net.clone())],
        }
    }

    pub fn from_vae(model: &VaeModel, train: &TrainConfig) -> Self {
        WeightArchive {
            kind: ModelKind::Vae,
            train: train.clone(),
            networks: vec![
                ("encoder".into(), model.encoder.clone()),
                ("decoder".into(), model.decoder.clone()),
            ],
        }
    }

    pub fn from_cgan(model: &CganModel, train: &TrainConfig) -> Self {
        WeightArchive {
            kind: ModelKind::Prcgan,
            train: train.clone(),
            networks: vec![
                ("generator".into(), model.generator.clone()),
                ("discriminator".into(), model.discriminator.clone()),
            ],
        }
    }

    pub fn network(&self, name: &str) -> Result<&NetworkModel<f32>> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::MissingWeights(format!("archive has no network `{name}`")))
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Provenance(format!(
                "archive holds a {} model, expected {kind}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn e2e(&self) -> Result<E2eModel> {
        self.expect_kind(ModelKind::E2e)?;
        E2eModel::from_network(self.network("net")?.clone())
    }

    pub fn vae(&self) -> Result<VaeModel> {
        self.expect_kind(ModelKind::Vae)?;
        VaeModel::from_networks(self.network("encoder")?.clone(), self.network("decoder")?.clone())
    }

    pub fn cgan(&self) -> Result<CganModel> {
        self.expect_kind(ModelKind::Prcgan)?;
        CganModel::from_networks(
            self.network("generator")?.clone(),
            self.network("discriminator")?.clone(),
        )
    }

    /// Refuses weights trained under a different operator.
    pub fn check_operator(&self, op: &OperatorDescriptor) -> Result<()> {
        if self.train.operator != *op {
            return Err(Error::Provenance(format!(
                "weights were trained for operator {} but the experiment uses {}",
                self.train.operator.canonical(),
                op.canonical()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        let mut networks = Vec::new();
        for (name, net) in &self.networks {
            let mut blobs = Vec::new();
            for (bname, vals) in blobs_of(net) {
                blobs.push(Blob {
                    name: bname,
                    len: vals.len(),
                });
                f32_bytes(vals, &mut payload);
            }
            networks.push(NetworkEntry {
                name: name.clone(),
                specs: net.specs().to_vec(),
                blobs,
            });
        }
        let header = Header {
            version: ARCHIVE_VERSION,
            kind: self.kind,
            train: self.train.clone(),
            networks,
        };
        let hjson = serde_json::to_vec(&header).expect("header serializes");
        container::encode(ARCHIVE_MAGIC, ARCHIVE_VERSION, &hjson, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (hbytes, payload) = container::decode(ARCHIVE_MAGIC, ARCHIVE_VERSION, bytes, "weight archive")?;
        let header: Header = serde_json::from_slice(hbytes)?;
        let mut offset = 0;
        let mut networks = Vec::new();
        for entry in header.networks {
            let mut blobs = entry.blobs.iter();
            let mut next = |expect: String, n: usize| -> Result<Vec<f32>> {
                match blobs.next() {
                    Some(b) if b.name == expect && b.len == n => {
                        read_f32(payload, &mut offset, n, "weight archive")
                    }
                    _ => Err(Error::Format(format!(
                        "network `{}`: blob `{expect}` of length {n} missing",
                        entry.name
                    ))),
                }
            };
            let mut params = Vec::with_capacity(entry.specs.len());
            for (k, spec) in entry.specs.iter().enumerate() {
                params.push(match *spec {
                    LayerSpec::Dense { in_dim, out_dim } => {
                        let w = next(format!("layer{k}.weight"), in_dim * out_dim)?;
                        let b = next(format!("layer{k}.bias"), out_dim)?;
                        LayerParams::Dense {
                            weight: Array2::from_shape_vec((in_dim, out_dim), w)
                                .expect("length checked"),
                            bias: Array1::from(b),
                        }
                    }
                    LayerSpec::BatchNorm { dim, .. } => LayerParams::BatchNorm {
                        gamma: Array1::from(next(format!("layer{k}.gamma"), dim)?),
                        beta: Array1::from(next(format!("layer{k}.beta"), dim)?),
                        running_mean: Array1::from(next(format!("layer{k}.running_mean"), dim)?),
                        running_var: Array1::from(next(format!("layer{k}.running_var"), dim)?),
                    },
                    _ => LayerParams::None,
                });
            }
            if blobs.next().is_some() {
                return Err(Error::Format(format!("network `{}` has extra blobs", entry.name)));
            }
            networks.push((entry.name, NetworkModel::from_parts(entry.specs, params)?));
        }
        if offset != payload.len() {
            return Err(Error::Format("weight archive has trailing payload".into()));
        }
        Ok(WeightArchive {
            kind: header.kind,
            train: header.train,
            networks,
        })
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        container::write_file(path, &bytes)?;
        Ok(container::sha256_hex(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingWeights(path.display().to_string()),
            _ => Error::io(path, e),
        })?;
        Self::from_bytes(&bytes)
    }
}

/// `<kind>-<operator tag>-seed<seed>.phw`
pub fn archive_name(kind: ModelKind, op: &OperatorDescriptor, seed: u64) -> String {
    format!("{kind}-{}-seed{seed}.phw", op.tag())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autonet::Mode;
    use crate::numerics::RandomStream;

    #[test]
    fn reload_is_bit_exact_in_eval_mode() {
        let op = OperatorDescriptor::Gaussian { m: 6, n: 784, seed: 1 };
        let mut cfg = TrainConfig::defaults(ModelKind::Prcgan, op.clone());
        cfg.lambda = 1000.0;
        let mut model = CganModel::with_hidden(6, &[16, 16], &[8], &mut RandomStream::new(2, 0)).unwrap();
        // Move the batchnorm running statistics away from their initial values.
        let mut s = RandomStream::new(3, 0);
        let warm = Array2::from_shape_simple_fn((8, 12), || s.standard_normal() as f32);
        model.generator.forward(&warm, Mode::Train).unwrap();
        let a = WeightArchive::from_cgan(&model, &cfg);
        let bytes = a.to_bytes();
        let b = WeightArchive::from_bytes(&bytes).unwrap();
        assert_eq!(b.to_bytes(), bytes);
        assert_eq!(b.train, cfg);
        assert!(b.check_operator(&op).is_ok());
        assert!(matches!(
            b.check_operator(&OperatorDescriptor::Fourier2d { h: 28, w: 28 }),
            Err(Error::Provenance(_))
        ));
        let back = b.cgan().unwrap();
        let z = Array2::from_shape_simple_fn((4, 6), || s.standard_normal() as f32);
        let y = Array2::from_shape_simple_fn((4, 6), || s.uniform() as f32);
        assert_eq!(model.generate(&z, &y).unwrap(), back.generate(&z, &y).unwrap());
        assert!(matches!(b.e2e(), Err(Error::Provenance(_))));

        let mut bad = bytes.clone();
        let k = bad.len() - 3;
        bad[k] ^= 0x40;
        assert!(matches!(WeightArchive::from_bytes(&bad), Err(Error::ChecksumMismatch(_))));
    }

    #[test]
    fn missing_file_is_missing_weights() {
        let e = WeightArchive::load(Path::new("/nonexistent/x.phw")).unwrap_err();
        assert_eq!(e.kind(), "missing_weights");
        assert_eq!(
            archive_name(ModelKind::Vae, &OperatorDescriptor::Fourier2d { h: 28, w: 28 }, 4),
            "vae-fourier28x28-seed4.phw"
        );
    }
}
