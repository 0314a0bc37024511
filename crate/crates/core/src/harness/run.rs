use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::archive::{archive_name, WeightArchive};
use super::config::{ExperimentConfig, Method};
use super::report::{aggregate, images_path, write_rows, ImageDump, ReportRow};
use crate::classical::{best_of_restarts, ObjectConstraint, SolverConfig};
use crate::data::{build_measurements, operator_input, Dataset, MeasurementCache, NoiseSpec, Split, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::evalreg::{evaluate, evaluate_cropped, metrics, EvalRecord, Registration};
use crate::latentopt::{refine_batch, Generator, LatentProblem};
use crate::measurement::{snr, zero_pad, MeasurementOperator, OperatorDescriptor};
use crate::models::{
    train_cgan, train_e2e, train_vae, CganModel, E2eModel, LossHistory, ModelKind, VaeModel,
};
use crate::numerics::{RandomStream, Tensor};

const SOLVE_STREAM: u64 = 0x736f_6c76;
const LATENT_STREAM: u64 = 0x6c61_7465;
/// Problems per latent-search batch; fixed so results do not depend on the worker count.
const LATENT_CHUNK: usize = 16;
const DIRECT_CHUNK: usize = 64;

/// Worker pool sized by `PHASERET_WORKERS` (default: all cores).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("PHASERET_WORKERS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("PHASERET_WORKERS={v} is not a count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Per-sample result of one method.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub record: EvalRecord,
    pub residual: f64,
    pub initial_residual: Option<f64>,
    pub restart_index: usize,
    pub wall_ms: f64,
    /// Registered reconstruction cut to the image size.
    pub image: Tensor,
}

fn weights_path(cfg: &ExperimentConfig, kind: ModelKind, op: &OperatorDescriptor) -> PathBuf {
    if cfg.weights.extension().is_some_and(|e| e == "phw") {
        cfg.weights.clone()
    } else {
        cfg.weights.join(archive_name(kind, op, cfg.seed))
    }
}

fn load_weights(cfg: &ExperimentConfig, kind: ModelKind, op: &OperatorDescriptor) -> Result<WeightArchive> {
    let a = WeightArchive::load(&weights_path(cfg, kind, op))?;
    if a.kind != kind {
        return Err(Error::Provenance(format!("archive holds {} weights, {kind} needed", a.kind)));
    }
    a.check_operator(op)?;
    Ok(a)
}

fn frame(op: &OperatorDescriptor) -> Option<(usize, usize)> {
    match *op {
        OperatorDescriptor::Fourier2d { h, w } => Some((h, w)),
        _ => None,
    }
}

/// Scores `x_hat` against the 28×28 original, registering on Fourier frames.
pub fn score(x: &Tensor, x_hat: &Tensor, op: &OperatorDescriptor, register: bool) -> Result<(EvalRecord, Tensor)> {
    let side = IMAGE_SIDE;
    match frame(op) {
        Some((h, w)) if register => {
            let rec = if (h, w) == (side, side) {
                evaluate(x, x_hat)?
            } else {
                evaluate_cropped(&operator_frame(x, h)?, x_hat, side, side)?
            };
            let img = crate::evalreg::crop(&rec.registration.aligned, side, side)?;
            Ok((rec, img))
        }
        _ => {
            let img = if x_hat.len() == side * side {
                x_hat.clone().reshape(&[side, side])?
            } else {
                crate::evalreg::crop(x_hat, side, side)?
            };
            let m = metrics(x, &img)?;
            let rec = EvalRecord {
                mse: m.mse,
                mae: m.mae,
                ssim: m.ssim,
                registration: Registration {
                    delta_s: 0,
                    delta_t: 0,
                    rotated: false,
                    aligned: img.clone(),
                },
            };
            Ok((rec, img))
        }
    }
}

fn operator_frame(x: &Tensor, h: usize) -> Result<Tensor> {
    let (xh, _) = x.dims2()?;
    zero_pad(x, h / xh)
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Solves every sample of `test` from the observed measurements in `meas`.
pub fn run_method(
    cfg: &ExperimentConfig,
    op: &MeasurementOperator,
    test: &Dataset,
    meas: &MeasurementCache,
    pool: &rayon::ThreadPool,
) -> Result<Vec<Outcome>> {
    let desc = op
        .descriptor()
        .cloned()
        .ok_or_else(|| Error::Provenance("operator has no descriptor".into()))?;
    let n = test.len();
    let ys: Vec<Tensor> = (0..n).map(|i| meas.observed(i)).collect();
    let register = cfg.register;
    match cfg.method {
        Method::Hio | Method::Raar | Method::Gs => {
            let (h, w) = frame(&desc)
                .ok_or_else(|| Error::Config(format!("{} needs a fourier operator", cfg.method)))?;
            let constraint = if (h, w) == (IMAGE_SIDE, IMAGE_SIDE) {
                ObjectConstraint::full(h, w)
            } else {
                ObjectConstraint::corner(h, w, IMAGE_SIDE, IMAGE_SIDE)?
            };
            let solver = SolverConfig {
                algorithm: cfg.algorithm()?,
                iters: cfg.iters,
            };
            let root = RandomStream::new(cfg.seed, SOLVE_STREAM);
            pool.install(|| {
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let t = Instant::now();
                        let r = best_of_restarts(&ys[i], &constraint, &solver, cfg.restarts, &root.child(i as u64))?;
                        let wall_ms = elapsed_ms(t);
                        let (record, image) = score(&test.image(i), &r.x_hat, &desc, register)?;
                        Ok(Outcome {
                            record,
                            residual: r.residual,
                            initial_residual: None,
                            restart_index: r.restart_index,
                            wall_ms,
                            image,
                        })
                    })
                    .collect()
            })
        }
        Method::E2e => {
            let model = load_weights(cfg, ModelKind::E2e, &desc)?.e2e()?;
            if model.measurement_dim() != op.output_dim() {
                return Err(Error::Provenance("E2E input width does not match the operator".into()));
            }
            let chunks: Vec<Vec<usize>> = (0..n).collect::<Vec<_>>().chunks(DIRECT_CHUNK).map(|c| c.to_vec()).collect();
            let parts: Vec<Vec<Outcome>> = pool.install(|| {
                chunks
                    .par_iter()
                    .map(|idx| {
                        let t = Instant::now();
                        let mut y = Array2::<f32>::zeros((idx.len(), op.output_dim()));
                        for (r, &i) in idx.iter().enumerate() {
                            for (d, &v) in y.row_mut(r).iter_mut().zip(ys[i].data()) {
                                *d = v as f32;
                            }
                        }
                        let out = model.reconstruct(&y)?;
                        let wall_ms = elapsed_ms(t) / idx.len() as f64;
                        idx.iter()
                            .enumerate()
                            .map(|(r, &i)| {
                                let x_hat = Tensor::new(
                                    &[IMAGE_SIDE, IMAGE_SIDE],
                                    out.row(r).iter().map(|&v| v as f64).collect(),
                                )?;
                                let residual = op.apply(&operator_input(op, &x_hat)?)?.distance(&ys[i])?;
                                let (record, image) = score(&test.image(i), &x_hat, &desc, register)?;
                                Ok(Outcome {
                                    record,
                                    residual,
                                    initial_residual: None,
                                    restart_index: 0,
                                    wall_ms,
                                    image,
                                })
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()
            })?;
            Ok(parts.into_iter().flatten().collect())
        }
        Method::Dpr | Method::Prcgan | Method::PrcganStar => {
            let kind = cfg.method.model_kind().expect("learned method");
            let archive = load_weights(cfg, kind, &desc)?;
            let (vae, cgan): (Option<VaeModel>, Option<CganModel>) = match kind {
                ModelKind::Vae => (Some(archive.vae()?), None),
                _ => (None, Some(archive.cgan()?)),
            };
            let gen = match (&vae, &cgan) {
                (Some(v), _) => Generator::Decoder(&v.decoder),
                (_, Some(c)) => Generator::Conditional(&c.generator),
                _ => unreachable!(),
            };
            let lcfg = cfg.latent_config();
            let root = RandomStream::new(cfg.seed, LATENT_STREAM);
            let problems: Vec<LatentProblem> = ys
                .iter()
                .enumerate()
                .map(|(i, y)| LatentProblem {
                    y: y.clone(),
                    stream: root.child(i as u64),
                })
                .collect();
            let parts: Vec<Vec<Outcome>> = pool.install(|| {
                problems
                    .par_chunks(LATENT_CHUNK)
                    .enumerate()
                    .map(|(c, chunk)| {
                        let t = Instant::now();
                        let res = refine_batch(gen, op, chunk, &lcfg)?;
                        let wall_ms = elapsed_ms(t) / chunk.len() as f64;
                        res.into_iter()
                            .enumerate()
                            .map(|(k, r)| {
                                let i = c * LATENT_CHUNK + k;
                                let (record, image) = score(&test.image(i), &r.x_hat, &desc, register)?;
                                Ok(Outcome {
                                    record,
                                    residual: r.final_residual,
                                    initial_residual: Some(r.initial_residual),
                                    restart_index: r.restart_index,
                                    wall_ms,
                                    image,
                                })
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()
            })?;
            Ok(parts.into_iter().flatten().collect())
        }
        Method::Vae => Err(Error::Config("vae is trained, not solved; use dpr".into())),
    }
}

fn base_row(cfg: &ExperimentConfig, op: &OperatorDescriptor, alpha: f64) -> ReportRow {
    ReportRow {
        dataset: cfg.dataset.to_string(),
        method: cfg.method.to_string(),
        operator: op.tag(),
        alpha,
        m: op.output_dim(),
        config_sha256: cfg.checksum(),
        ..Default::default()
    }
}

fn sample_row(cfg: &ExperimentConfig, base: &ReportRow, i: usize, o: &Outcome) -> ReportRow {
    let reg = &o.record.registration;
    ReportRow {
        sample_index: Some(i),
        mse: Some(o.record.mse),
        mae: Some(o.record.mae),
        ssim: Some(o.record.ssim),
        residual: Some(o.residual),
        initial_residual: o.initial_residual,
        delta_s: Some(reg.delta_s),
        delta_t: Some(reg.delta_t),
        rotated: Some(reg.rotated),
        restart_index: Some(o.restart_index),
        wall_time_ms: cfg.record_wall_time.then_some(o.wall_ms),
        ..base.clone()
    }
}

fn error_row(base: &ReportRow, e: &Error) -> ReportRow {
    ReportRow {
        error: Some(format!("{}: {e}", e.kind())),
        ..base.clone()
    }
}

fn test_set(cfg: &ExperimentConfig) -> Result<Dataset> {
    let ds = Dataset::load(&cfg.data_root(), cfg.dataset, Split::TestSubset)?;
    Ok(match cfg.limit {
        Some(l) => ds.take(l),
        None => ds,
    })
}

/// Rows written by `solve`: one per sample, then the aggregate.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub rows: Vec<ReportRow>,
    pub outcomes: Vec<Outcome>,
}

impl SolveReport {
    pub fn aggregate(&self) -> &ReportRow {
        self.rows.last().expect("aggregate row")
    }
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let pool = worker_pool()?;
    let test = test_set(cfg)?;
    let op = MeasurementOperator::from_descriptor(&cfg.operator)?;
    let meas = pool.install(|| build_measurements(&test, &op, None))?;
    let outcomes = run_method(cfg, &op, &test, &meas, &pool)?;
    let base = base_row(cfg, &cfg.operator, 0.0);
    let mut rows: Vec<ReportRow> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| sample_row(cfg, &base, i, o))
        .collect();
    rows.push(aggregate(&base, &rows));
    write_rows(&cfg.output, &rows)?;
    ImageDump {
        method: cfg.method.to_string(),
        dataset: cfg.dataset.to_string(),
        originals: (0..test.len()).map(|i| test.image(i)).collect(),
        reconstructions: outcomes.iter().map(|o| o.image.clone()).collect(),
    }
    .save(&images_path(&cfg.output))?;
    Ok(SolveReport { rows, outcomes })
}

fn noise_cell(
    cfg: &ExperimentConfig,
    op: &MeasurementOperator,
    test: &Dataset,
    alpha: f64,
    pool: &rayon::ThreadPool,
) -> Result<ReportRow> {
    let noise = (alpha > 0.0).then_some(NoiseSpec { alpha, seed: cfg.seed });
    let meas = pool.install(|| build_measurements(test, op, noise))?;
    let outcomes = run_method(cfg, op, test, &meas, pool)?;
    let base = base_row(cfg, &cfg.operator, alpha);
    let mut rows: Vec<ReportRow> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| sample_row(cfg, &base, i, o))
        .collect();
    if noise.is_some() {
        for (i, r) in rows.iter_mut().enumerate() {
            let noisy = meas.noisy(i).expect("noisy block");
            r.snr = match snr(&meas.clean(i), &noisy) {
                Ok(s) => Some(s.snr),
                Err(Error::Noiseless) => None,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(aggregate(&base, &rows))
}

/// One aggregate row per α; a failing α records an error row.
pub fn cmd_sweep_noise(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    if cfg.noise.is_empty() {
        return Err(Error::Config("noise sweep needs a nonempty noise list".into()));
    }
    let pool = worker_pool()?;
    let test = test_set(cfg)?;
    let op = MeasurementOperator::from_descriptor(&cfg.operator)?;
    let rows: Vec<ReportRow> = cfg
        .noise
        .iter()
        .map(|&alpha| {
            noise_cell(cfg, &op, &test, alpha, &pool).unwrap_or_else(|e| {
                log::warn!("noise cell alpha={alpha} failed: {e}");
                error_row(&base_row(cfg, &cfg.operator, alpha), &e)
            })
        })
        .collect();
    write_rows(&cfg.output, &rows)?;
    Ok(rows)
}

/// One aggregate row per m; a failing m (for example missing weights) records
/// an error row.
pub fn cmd_sweep_measurements(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    if cfg.measurements.is_empty() {
        return Err(Error::Config("measurement sweep needs a nonempty m list".into()));
    }
    let pool = worker_pool()?;
    let test = test_set(cfg)?;
    let mut rows = Vec::new();
    for op_desc in cfg.operators()? {
        let base = base_row(cfg, &op_desc, 0.0);
        let cell = || -> Result<ReportRow> {
            let op = MeasurementOperator::from_descriptor(&op_desc)?;
            let meas = pool.install(|| build_measurements(&test, &op, None))?;
            let outcomes = run_method(cfg, &op, &test, &meas, &pool)?;
            let samples: Vec<ReportRow> = outcomes
                .iter()
                .enumerate()
                .map(|(i, o)| sample_row(cfg, &base, i, o))
                .collect();
            Ok(aggregate(&base, &samples))
        };
        rows.push(cell().unwrap_or_else(|e| {
            log::warn!("measurement cell {op_desc} failed: {e}");
            error_row(&base, &e)
        }));
    }
    write_rows(&cfg.output, &rows)?;
    Ok(rows)
}

/// One line of the training manifest written to the config's output path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub kind: String,
    pub operator: String,
    pub seed: u64,
    pub archive: String,
    pub archive_sha256: String,
    pub epochs: usize,
    pub final_loss: f64,
    pub config_sha256: String,
}

pub struct Trained {
    pub record: TrainRecord,
    pub archive: WeightArchive,
    pub history: LossHistory,
}

/// Trains the configured model once per operator (one per listed m), writing
/// `<weights>/<archive>.phw`, its loss history `<archive>.loss.csv` and a manifest.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<Trained>> {
    cfg.validate()?;
    let kind = cfg
        .method
        .model_kind()
        .ok_or_else(|| Error::Config(format!("{} has no trainable model", cfg.method)))?;
    let train = Dataset::load(&cfg.data_root(), cfg.dataset, Split::Train)?;
    let pool = worker_pool()?;
    let mut out = Vec::new();
    for desc in cfg.operators()? {
        let tc = cfg.train_config(kind, &desc);
        tc.validate()?;
        let op = MeasurementOperator::from_descriptor(&desc)?;
        let mut init = tc.init_stream();
        let (archive, history) = pool.install(|| -> Result<_> {
            Ok(match kind {
                ModelKind::E2e => {
                    let mut m = E2eModel::new(op.output_dim(), &mut init)?;
                    let h = train_e2e(&mut m, &train, &op, &tc)?;
                    (WeightArchive::from_e2e(&m, &tc), h)
                }
                ModelKind::Vae => {
                    let mut m = VaeModel::new(tc.latent_dim(), &mut init)?;
                    let h = train_vae(&mut m, &train, &tc)?;
                    (WeightArchive::from_vae(&m, &tc), h)
                }
                ModelKind::Prcgan => {
                    let mut m = CganModel::new(op.output_dim(), &mut init)?;
                    let h = train_cgan(&mut m, &train, &op, &tc)?;
                    (WeightArchive::from_cgan(&m, &tc), h)
                }
            })
        })?;
        let path = weights_path(cfg, kind, &desc);
        let sha = archive.save(&path)?;
        history.write_csv(&path.with_extension("loss.csv"))?;
        let record = TrainRecord {
            kind: kind.to_string(),
            operator: desc.tag(),
            seed: cfg.seed,
            archive: path.display().to_string(),
            archive_sha256: sha,
            epochs: history.epochs.len(),
            final_loss: history.epochs.last().map_or(f64::NAN, |r| r[0]),
            config_sha256: cfg.checksum(),
        };
        out.push(Trained {
            record,
            archive,
            history,
        });
    }
    let dir = cfg.output.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut w = csv::Writer::from_path(&cfg.output)?;
    for t in &out {
        w.serialize(&t.record)?;
    }
    w.flush().map_err(|e| Error::io(&cfg.output, e))?;
    Ok(out)
}
