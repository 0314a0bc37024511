use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const TEST_SUBSET: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetName {
    Mnist,
    FashionMnist,
}

impl DatasetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion-mnist",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion-mnist" => Ok(DatasetName::FashionMnist),
            _ => Err(Error::Config(format!("unknown dataset {s:?}"))),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    /// The first 1024 images of the test file, in file order.
    TestSubset,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::TestSubset => "test-subset",
        }
    }
}

/// 28×28 grayscale images, stored as raw bytes; pixel values are `byte / 255`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: DatasetName,
    split: Split,
    len: usize,
    pixels: Vec<u8>,
    labels: Option<Vec<u8>>,
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_header(path: &Path, bytes: &[u8], magic: u32, header: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: header,
            found: bytes.len(),
        });
    }
    let found = read_u32(bytes, 0);
    if found != magic {
        return Err(Error::BadMagic {
            path: path.into(),
            expected: magic,
            found,
        });
    }
    if bytes.len() < header {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: header,
            found: bytes.len(),
        });
    }
    Ok(())
}

fn check_payload(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::DimensionMismatch {
            path: path.into(),
            detail: format!("{} trailing bytes after payload", bytes.len() - expected),
        });
    }
    Ok(())
}

/// Parses an IDX image file (and optionally its label file).
pub fn load_idx(
    name: DatasetName,
    split: Split,
    images: &Path,
    labels: Option<&Path>,
) -> Result<Dataset> {
    let bytes = read_file(images)?;
    check_header(images, &bytes, IMAGE_MAGIC, 16)?;
    let (n, h, w) = (
        read_u32(&bytes, 4) as usize,
        read_u32(&bytes, 8) as usize,
        read_u32(&bytes, 12) as usize,
    );
    if (h, w) != (IMAGE_SIDE, IMAGE_SIDE) {
        return Err(Error::DimensionMismatch {
            path: images.into(),
            detail: format!("images are {h}x{w}, expected 28x28"),
        });
    }
    check_payload(images, &bytes, 16 + n * h * w)?;
    let pixels = bytes[16..].to_vec();

    let labels = match labels {
        None => None,
        Some(path) => {
            let lb = read_file(path)?;
            check_header(path, &lb, LABEL_MAGIC, 8)?;
            let count = read_u32(&lb, 4) as usize;
            if count != n {
                return Err(Error::DimensionMismatch {
                    path: path.into(),
                    detail: format!("{count} labels for {n} images"),
                });
            }
            check_payload(path, &lb, 8 + n)?;
            Some(lb[8..].to_vec())
        }
    };
    Ok(Dataset {
        name,
        split,
        len: n,
        pixels,
        labels,
    })
}

/// Directory name under the data root.
pub fn dataset_dir(root: &Path, name: DatasetName) -> PathBuf {
    root.join(name.as_str())
}

impl Dataset {
    /// Loads `root/<name>/{train,t10k}-{images-idx3,labels-idx1}-ubyte`; the test
    /// split is cut to its first 1024 images.
    pub fn load(root: &Path, name: DatasetName, split: Split) -> Result<Dataset> {
        let dir = dataset_dir(root, name);
        let prefix = match split {
            Split::Train => "train",
            Split::TestSubset => "t10k",
        };
        let images = dir.join(format!("{prefix}-images-idx3-ubyte"));
        let labels = dir.join(format!("{prefix}-labels-idx1-ubyte"));
        if !images.exists() {
            return Err(Error::DatasetMissing(images.display().to_string()));
        }
        let labels = labels.exists().then_some(labels);
        let ds = load_idx(name, split, &images, labels.as_deref())?;
        Ok(match split {
            Split::Train => ds,
            Split::TestSubset => ds.take(TEST_SUBSET),
        })
    }

    /// The first `n` images (all of them if fewer).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len);
        let px = IMAGE_SIDE * IMAGE_SIDE;
        Dataset {
            name: self.name,
            split: self.split,
            len: n,
            pixels: self.pixels[..n * px].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
        }
    }

    /// Builds a dataset from raw 28×28 byte images.
    pub fn from_bytes(name: DatasetName, split: Split, pixels: Vec<u8>) -> Result<Dataset> {
        let px = IMAGE_SIDE * IMAGE_SIDE;
        if pixels.len() % px != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} bytes is not a whole number of 28x28 images",
                pixels.len()
            )));
        }
        Ok(Dataset {
            name,
            split,
            len: pixels.len() / px,
            pixels,
            labels: None,
        })
    }

    pub fn name(&self) -> DatasetName {
        self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn raw(&self, i: usize) -> &[u8] {
        let px = IMAGE_SIDE * IMAGE_SIDE;
        &self.pixels[i * px..(i + 1) * px]
    }

    /// Image `i` as a 28×28 tensor in `[0, 1]`.
    pub fn image(&self, i: usize) -> Tensor {
        let data = self.raw(i).iter().map(|&b| b as f64 / 255.0).collect();
        Tensor::new(&[IMAGE_SIDE, IMAGE_SIDE], data).expect("28x28")
    }

    /// Rows are flattened images.
    pub fn batch<S: crate::autonet::Real>(&self, indices: &[usize]) -> Array2<S> {
        let px = IMAGE_SIDE * IMAGE_SIDE;
        let mut out = Array2::zeros((indices.len(), px));
        for (r, &i) in indices.iter().enumerate() {
            for (o, &b) in out.row_mut(r).iter_mut().zip(self.raw(i)) {
                *o = S::from_f64(b as f64 / 255.0);
            }
        }
        out
    }
}
