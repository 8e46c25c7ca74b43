//! Experiment harness: streams logs through learners with simulated owner
//! feedback, scores them by progressive validation loss, and drives the
//! comparison, policy-shift, warm-start and planning experiments.

mod compare;
mod config;
mod output;
mod stream;

pub use compare::{
    best_per_algorithm, compare_algorithms, compare_algorithms_sequential, write_table, CellResult,
    Grid, Matrix,
};
pub use config::{
    Algorithm, DatasetSpec, ExperimentConfig, FeedbackConfig, Reference, RunSettings,
};
pub use output::{
    emit_outputs, read_summary, read_trajectory, Summary, FEEDBACK_FILE, SUMMARY_FILE,
    TRAJECTORY_FILE,
};
pub use stream::{
    progressive_validation_loss, run_on_bundle, run_shift, run_stream, run_stream_with,
    windowed_loss, RoundRecord, RunResult, StreamInput,
};
