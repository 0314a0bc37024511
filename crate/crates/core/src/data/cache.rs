use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, DatasetName, Split};
use crate::error::{Error, Result};
use crate::measurement::{shot_noise, zero_pad, MeasurementOperator, NoiseConfig, OperatorDescriptor};
use crate::numerics::{RandomStream, Tensor};

const CACHE_MAGIC: &[u8; 8] = b"PHRMEAS\0";
pub const CACHE_VERSION: u32 = 1;
/// Stream id for measurement noise; sample `i` draws from child `i`.
pub const NOISE_STREAM: u64 = 0x6e6f_6973;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    descriptor: String,
    dataset: DatasetName,
    split: Split,
    samples: usize,
    out_shape: Vec<usize>,
    noise: Option<NoiseSpec>,
    count_scale: f64,
}

/// Measurements of a dataset prefix under one operator, stored as f32.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementCache {
    descriptor: OperatorDescriptor,
    dataset: DatasetName,
    split: Split,
    samples: usize,
    out_shape: Vec<usize>,
    count_scale: f64,
    clean: Vec<f32>,
    noisy: Option<(NoiseSpec, Vec<f32>)>,
}

/// The operator's input for a 28×28 image: zero-padded to the frame of a larger
/// Fourier operator, flattened for dense ones.
pub fn operator_input(op: &MeasurementOperator, x: &Tensor) -> Result<Tensor> {
    let (h, w) = x.dims2()?;
    match op.descriptor() {
        Some(OperatorDescriptor::Fourier2d { h: fh, w: fw }) if (*fh, *fw) != (h, w) => {
            if fh % h != 0 || fw % w != 0 || fh / h != fw / w {
                return Err(Error::ShapeMismatch {
                    expected: vec![*fh, *fw],
                    actual: vec![h, w],
                });
            }
            zero_pad(x, fh / h)
        }
        _ if op.is_fourier() => Ok(x.clone()),
        _ => x.clone().reshape(&[h * w]),
    }
}

pub fn build_measurements(
    ds: &Dataset,
    op: &MeasurementOperator,
    noise: Option<NoiseSpec>,
) -> Result<MeasurementCache> {
    let descriptor = op
        .descriptor()
        .cloned()
        .ok_or_else(|| Error::Provenance("operator has no descriptor to record".into()))?;
    let out_shape = match descriptor {
        OperatorDescriptor::Fourier2d { h, w } => vec![h, w],
        OperatorDescriptor::Gaussian { m, .. } => vec![m],
    };
    let m = op.output_dim();
    let root = noise.map(|n| RandomStream::new(n.seed, NOISE_STREAM));
    let rows: Vec<(Vec<f32>, Option<Vec<f32>>)> = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let x = operator_input(op, &ds.image(i))?;
            let y = op.apply(&x)?;
            let clean = y.data().iter().map(|&v| v as f32).collect();
            let noisy = match (&noise, &root) {
                (Some(n), Some(r)) => {
                    let mut cfg = NoiseConfig::new(n.alpha, op.count_scale(), r.child(i as u64))?;
                    let yn = shot_noise(&y, &mut cfg)?;
                    Some(yn.data().iter().map(|&v| v as f32).collect())
                }
                _ => None,
            };
            Ok((clean, noisy))
        })
        .collect::<Result<_>>()?;
    let mut clean = Vec::with_capacity(ds.len() * m);
    let mut noisy_vals = noise.map(|_| Vec::with_capacity(ds.len() * m));
    for (c, n) in rows {
        clean.extend(c);
        if let (Some(v), Some(n)) = (noisy_vals.as_mut(), n) {
            v.extend(n);
        }
    }
    Ok(MeasurementCache {
        descriptor,
        dataset: ds.name(),
        split: ds.split(),
        samples: ds.len(),
        out_shape,
        count_scale: op.count_scale(),
        clean,
        noisy: noise.zip(noisy_vals),
    })
}

impl MeasurementCache {
    pub fn descriptor(&self) -> &OperatorDescriptor {
        &self.descriptor
    }

    pub fn dataset(&self) -> DatasetName {
        self.dataset
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    pub fn noise(&self) -> Option<NoiseSpec> {
        self.noisy.as_ref().map(|(n, _)| *n)
    }

    pub fn count_scale(&self) -> f64 {
        self.count_scale
    }

    fn row(&self, values: &[f32], i: usize) -> Tensor {
        let m: usize = self.out_shape.iter().product();
        let data = values[i * m..(i + 1) * m].iter().map(|&v| v as f64).collect();
        Tensor::new(&self.out_shape, data).expect("cached shape")
    }

    /// Noiseless `y` for sample `i`.
    pub fn clean(&self, i: usize) -> Tensor {
        self.row(&self.clean, i)
    }

    pub fn noisy(&self, i: usize) -> Option<Tensor> {
        self.noisy.as_ref().map(|(_, v)| self.row(v, i))
    }

    /// What a solver sees: the noisy measurement if noise was configured.
    pub fn observed(&self, i: usize) -> Tensor {
        self.noisy(i).unwrap_or_else(|| self.clean(i))
    }

    fn header(&self) -> Header {
        Header {
            descriptor: self.descriptor.canonical(),
            dataset: self.dataset,
            split: self.split,
            samples: self.samples,
            out_shape: self.out_shape.clone(),
            noise: self.noise(),
            count_scale: self.count_scale,
        }
    }

    fn payload(&self) -> Vec<u8> {
        let noisy = self.noisy.as_ref().map(|(_, v)| v.as_slice()).unwrap_or(&[]);
        self.clean
            .iter()
            .chain(noisy)
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }

    /// SHA-256 over the canonical header and the payload, hex encoded.
    pub fn checksum(&self) -> String {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        hex::encode(digest(&header, &self.payload()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&self.header())?;
        let payload = self.payload();
        let mut out = Vec::with_capacity(52 + header.len() + payload.len());
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&digest(&header, &payload));
        out.extend_from_slice(&payload);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        if bytes.len() < 16 || &bytes[..8] != CACHE_MAGIC {
            return Err(Error::Format(format!("{name} is not a measurement cache")));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CACHE_VERSION {
            return Err(Error::Format(format!(
                "{name}: cache version {version}, expected {CACHE_VERSION}"
            )));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        if bytes.len() < 16 + hlen + 32 {
            return Err(Error::TruncatedPayload {
                path: path.into(),
                expected: 16 + hlen + 32,
                found: bytes.len(),
            });
        }
        let header_bytes = &bytes[16..16 + hlen];
        let stored = &bytes[16 + hlen..16 + hlen + 32];
        let payload = &bytes[16 + hlen + 32..];
        if digest(header_bytes, payload).as_slice() != stored {
            return Err(Error::ChecksumMismatch(name));
        }
        let header: Header = serde_json::from_slice(header_bytes)?;
        let descriptor: OperatorDescriptor = serde_json::from_str(&header.descriptor)?;
        let m: usize = header.out_shape.iter().product();
        if m != descriptor.output_dim() {
            return Err(Error::Format(format!("{name}: shape disagrees with descriptor")));
        }
        let blocks = 1 + header.noise.is_some() as usize;
        let expected = blocks * header.samples * m * 4;
        if payload.len() != expected {
            return Err(Error::TruncatedPayload {
                path: path.into(),
                expected,
                found: payload.len(),
            });
        }
        let floats: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let split_at = header.samples * m;
        let clean = floats[..split_at].to_vec();
        let noisy = header.noise.map(|n| (n, floats[split_at..].to_vec()));
        Ok(MeasurementCache {
            descriptor,
            dataset: header.dataset,
            split: header.split,
            samples: header.samples,
            out_shape: header.out_shape,
            count_scale: header.count_scale,
            clean,
            noisy,
        })
    }
}

fn digest(header: &[u8], payload: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(header);
    h.update(payload);
    h.finalize().into()
}
