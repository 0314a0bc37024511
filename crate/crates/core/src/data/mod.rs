//! IDX datasets and persisted measurement caches.

mod cache;
mod idx;

pub use cache::{
    build_measurements, operator_input, MeasurementCache, NoiseSpec, CACHE_VERSION,
    NOISE_STREAM,
};
pub use idx::{
    dataset_dir, load_idx, Dataset, DatasetName, Split, IMAGE_MAGIC, IMAGE_SIDE, LABEL_MAGIC,
    TEST_SUBSET,
};
