use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::{self, f32_bytes, read_f32};
use crate::error::{Error, Result};
use crate::evalreg::gradient_magnitude_histogram;
use crate::numerics::Tensor;

/// One CSV line: a sample, an aggregate (empty `sample_index`) or a failed
/// grid cell (non-empty `error`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub operator: String,
    pub alpha: f64,
    pub m: usize,
    pub sample_index: Option<usize>,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub ssim: Option<f64>,
    pub residual: Option<f64>,
    /// Residual at the latent starting point (latent-search methods).
    pub initial_residual: Option<f64>,
    pub snr: Option<f64>,
    pub delta_s: Option<usize>,
    pub delta_t: Option<usize>,
    pub rotated: Option<bool>,
    pub restart_index: Option<usize>,
    pub wall_time_ms: Option<f64>,
    pub error: Option<String>,
    pub config_sha256: String,
}

impl ReportRow {
    pub fn is_sample(&self) -> bool {
        self.sample_index.is_some() && self.error.is_none()
    }
}

fn mean_of(rows: &[&ReportRow], f: impl Fn(&ReportRow) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Column means of the sample rows, labelled like `template`.
pub fn aggregate(template: &ReportRow, samples: &[ReportRow]) -> ReportRow {
    let rows: Vec<&ReportRow> = samples.iter().filter(|r| r.is_sample()).collect();
    ReportRow {
        sample_index: None,
        mse: mean_of(&rows, |r| r.mse),
        mae: mean_of(&rows, |r| r.mae),
        ssim: mean_of(&rows, |r| r.ssim),
        residual: mean_of(&rows, |r| r.residual),
        initial_residual: mean_of(&rows, |r| r.initial_residual),
        snr: mean_of(&rows, |r| r.snr),
        delta_s: None,
        delta_t: None,
        rotated: None,
        restart_index: None,
        wall_time_ms: mean_of(&rows, |r| r.wall_time_ms),
        error: None,
        ..template.clone()
    }
}

pub fn write_rows(path: &Path, rows: &[ReportRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

const IMAGES_MAGIC: &[u8; 8] = b"PHRIMGS\0";
const IMAGES_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImagesHeader {
    method: String,
    dataset: String,
    h: usize,
    w: usize,
    count: usize,
}

/// Originals and their registered reconstructions, kept next to a solve report
/// for the gradient histograms.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageDump {
    pub method: String,
    pub dataset: String,
    pub originals: Vec<Tensor>,
    pub reconstructions: Vec<Tensor>,
}

/// `report.csv` → `report.images`
pub fn images_path(rows_path: &Path) -> PathBuf {
    rows_path.with_extension("images")
}

impl ImageDump {
    pub fn save(&self, path: &Path) -> Result<()> {
        let (h, w) = match self.originals.first() {
            Some(t) => t.dims2()?,
            None => (0, 0),
        };
        let mut payload = Vec::new();
        for t in self.originals.iter().chain(&self.reconstructions) {
            if t.dims2()? != (h, w) {
                return Err(Error::ShapeMismatch {
                    expected: vec![h, w],
                    actual: t.shape().to_vec(),
                });
            }
            let v: Vec<f32> = t.data().iter().map(|&x| x as f32).collect();
            f32_bytes(&v, &mut payload);
        }
        let header = ImagesHeader {
            method: self.method.clone(),
            dataset: self.dataset.clone(),
            h,
            w,
            count: self.originals.len(),
        };
        let hjson = serde_json::to_vec(&header)?;
        container::write_file(path, &container::encode(IMAGES_MAGIC, IMAGES_VERSION, &hjson, &payload))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (hb, payload) = container::decode(IMAGES_MAGIC, IMAGES_VERSION, &bytes, "image dump")?;
        let h: ImagesHeader = serde_json::from_slice(hb)?;
        let mut off = 0;
        let mut read = |n: usize| -> Result<Vec<Tensor>> {
            (0..n)
                .map(|_| {
                    let v = read_f32(payload, &mut off, h.h * h.w, "image dump")?;
                    Tensor::new(&[h.h, h.w], v.into_iter().map(f64::from).collect())
                })
                .collect()
        };
        let originals = read(h.count)?;
        let reconstructions = read(h.count)?;
        Ok(ImageDump {
            method: h.method,
            dataset: h.dataset,
            originals,
            reconstructions,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub operator: String,
    pub alpha: f64,
    pub m: usize,
    pub samples: usize,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub ssim: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub method: String,
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub density: f64,
}

/// Per-configuration means. Groups without sample rows fall back to their
/// aggregate rows (sweep outputs).
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    type Key = (String, String, String, u64, usize);
    let mut groups: BTreeMap<Key, (Vec<&ReportRow>, Vec<&ReportRow>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        let key = (r.dataset.clone(), r.method.clone(), r.operator.clone(), r.alpha.to_bits(), r.m);
        let g = groups.entry(key).or_default();
        if r.sample_index.is_some() {
            g.0.push(r);
        } else {
            g.1.push(r);
        }
    }
    groups
        .into_iter()
        .map(|((dataset, method, operator, alpha, m), (samples, aggs))| {
            let used = if samples.is_empty() { aggs } else { samples };
            SummaryRow {
                dataset,
                method,
                operator,
                alpha: f64::from_bits(alpha),
                m,
                samples: used.len(),
                mse: mean_of(&used, |r| r.mse),
                mae: mean_of(&used, |r| r.mae),
                ssim: mean_of(&used, |r| r.ssim),
            }
        })
        .collect()
}

/// Mean of per-image normalized histograms; `original` rows describe the
/// ground-truth images of each dataset.
pub fn histograms(dumps: &[ImageDump], bins: usize) -> Result<Vec<HistogramRow>> {
    let mut sets: BTreeMap<String, Vec<&Tensor>> = BTreeMap::new();
    for d in dumps {
        sets.entry(d.method.clone()).or_default().extend(&d.reconstructions);
        sets.entry(format!("original:{}", d.dataset))
            .or_default()
            .extend(&d.originals);
    }
    let width = std::f64::consts::SQRT_2 / bins as f64;
    let mut out = Vec::new();
    for (method, images) in sets {
        if images.is_empty() {
            continue;
        }
        let mut acc = vec![0.0; bins];
        for t in &images {
            for (a, v) in acc.iter_mut().zip(gradient_magnitude_histogram(t, bins)?) {
                *a += v;
            }
        }
        for (b, a) in acc.into_iter().enumerate() {
            out.push(HistogramRow {
                method: method.clone(),
                bin: b,
                lower: b as f64 * width,
                upper: (b + 1) as f64 * width,
                density: a / images.len() as f64,
            });
        }
    }
    Ok(out)
}

/// Reads report CSVs (and their image dumps, when present) and writes the
/// summary to `out` and the histograms to `<out stem>-histogram.csv`.
pub fn cmd_report(rows_paths: &[PathBuf], out: &Path, bins: usize) -> Result<(Vec<SummaryRow>, Vec<HistogramRow>)> {
    let mut rows = Vec::new();
    let mut dumps = Vec::new();
    for p in rows_paths {
        rows.extend(read_rows(p)?);
        let ip = images_path(p);
        if ip.exists() {
            dumps.push(ImageDump::load(&ip)?);
        }
    }
    let summary = summarize(&rows);
    let hist = histograms(&dumps, bins)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(out)?;
    for s in &summary {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    let hp = histogram_path(out);
    let mut w = csv::Writer::from_path(&hp)?;
    for h in &hist {
        w.serialize(h)?;
    }
    w.flush().map_err(|e| Error::io(&hp, e))?;
    Ok((summary, hist))
}

pub fn histogram_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}-histogram.csv"))
}
