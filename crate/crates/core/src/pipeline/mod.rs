//! Training, evaluation and the benchmark sweep.

mod metrics;
mod reproduce;
mod train;

pub use metrics::{mae, mape, Mape, MetricsReport, MAPE_EPSILON};
pub use reproduce::{
    paper_specs, reference, reproduce, ComparisonRow, ComparisonTable, DatasetId, DatasetSource, ExperimentSpec,
    Reference, RowStatus, Variant,
};
pub use train::{
    evaluate, evaluate_split, evaluate_train, naive_last_value_mae, predict, prepare, read_train_log, train,
    vocab_for, EpochRecord, PathCounters, Prepared, PreparedSplit, TrainOutcome, TrainSettings, TrainState,
    CHECKPOINT_FILE, TRAIN_LOG_FILE,
};
