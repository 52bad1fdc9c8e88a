//! Datasets, the synthetic study, predictive checks and tolerance tuning.

mod dataset;
mod fit;
mod metrics;
mod predictive;
mod reference;
mod setup;
mod study;

pub use dataset::{
    ingest_detections, parse_detections, Detection, DetectionDataset, DetectionMode, Ingested,
};
pub use fit::{fit_abc, AbcConfig, AbcFit, SummaryKind};
pub use metrics::{rmci, rmse};
pub use predictive::{
    central_interval, coverage_curve, coverage_of, forward_statistics, posterior_predictive,
    ppd_contains, prediction_error, predictive_paths, relative_prediction_error, resample,
    tune_tolerance, CoverageCurve, PathStatistics, PredictionError, Statistic, TuneConfig,
    TuneReport, TuneRow, YearlySnapshot,
};
pub use reference::{
    build_reference_table, simulate_record, ArchiveHeader, RecordStatus, ReferenceRecord,
    ReferenceSpec, ReferenceTable, ARCHIVE_FORMAT, ARCHIVE_VERSION,
};
pub use setup::ModelSetup;
pub use study::{
    run_synthetic_study, simulate_replicate, Estimate, Failure, Method, Replicate, StudyConfig,
    StudyReport, TableRow, PATH_RATES, VECTOR_RATES,
};
