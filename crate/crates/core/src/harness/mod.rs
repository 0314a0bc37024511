//! Experiment engine behind the CLI: configs, weight archives, solve and
//! sweep commands, and report emission.

mod archive;
mod config;
mod container;
mod report;
mod run;

pub use archive::{archive_name, WeightArchive, ARCHIVE_VERSION};
pub use config::{ExperimentConfig, Method, TrainOverrides};
pub use report::{
    aggregate, cmd_report, histogram_path, histograms, images_path, read_rows, summarize,
    write_rows, HistogramRow, ImageDump, ReportRow, SummaryRow,
};
pub use run::{
    cmd_solve, cmd_sweep_measurements, cmd_sweep_noise, cmd_train, run_method, score,
    worker_pool, Outcome, SolveReport, TrainRecord, Trained,
};
