//! End-to-end class-incremental experiments: task splits, the three-stage
//! pipeline, per-task evaluation, metrics and the joint-training oracle.

mod ablation;
mod artifacts;
mod equivalence;
mod experiment;
mod metrics;
mod oracle;
mod split;
mod timing;

pub use ablation::{expansion_sweep, NonlinearBenchmark, SweepPoint};
pub use artifacts::{read_grid_csv, write_grid_csv, ResultsDocument, TIMING_FIELDS};
pub use equivalence::{check_equivalence, EquivalenceCase, EquivalenceResult};
pub use experiment::{
    prepare, run_experiment, run_prepared, DataPool, ExperimentOutcome, Hyper, PreparedRun, PreparedTask,
    StageSeconds,
};
pub use metrics::{acc_metric, bwt_metric, AccuracyMatrix, Bwt, MetricsReport};
pub use oracle::{joint_accuracy, oracle_check, OracleReport, PrefixCheck};
pub use split::{split_tasks, TaskSplit};
pub use timing::{mean_seconds, retime_updates, slope_test, SlopeTest};
