#![allow(dead_code)]

use std::path::PathBuf;

use phaseret::data::{dataset_dir, DatasetName};

/// `$PHASERET_DATA`, else `<workspace>/data`.
pub fn data_root() -> PathBuf {
    std::env::var_os("PHASERET_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data")))
}

/// True when the MNIST files are present; otherwise prints why a test is skipped.
pub fn have_mnist(test: &str) -> bool {
    let ok = dataset_dir(&data_root(), DatasetName::Mnist)
        .join("train-images-idx3-ubyte")
        .exists();
    if !ok {
        eprintln!("{test}: MNIST not found under {}; skipped", data_root().display());
    }
    ok
}
