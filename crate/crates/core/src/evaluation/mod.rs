//! Monte-Carlo estimation of detection delay and false-alarm time,
//! threshold calibration, trade-off frontiers and score-based ROC metrics.
//!
//! Every run draws its stream from a seed derived from the master seed, the
//! stream family, the conditioning cell and the run index, so results do
//! not depend on thread scheduling and all detectors evaluated with the
//! same master seed see identical streams.

mod delay;
mod passage;
mod perf;
mod roc;
mod scenario;
pub mod seeds;

pub use delay::{
    calibrate_threshold, estimate_mtfa, estimate_wadd, frontier, wadd_at_mtfa, Calibration, CellDelay, Evaluation,
    FrontierPoint, McSettings, MtfaEstimate, MtfaProfiles, RunMetrics, WaddEstimate, WaddProfiles,
    MAX_PRE_CHANGE_RATE, MIN_MTFA_RUNS,
};
pub use passage::PassageProfile;
pub use perf::{measure_latency, LatencySample, PerfReport};
pub use roc::{auroc, fpr_at_tpr, ScoreSet, SCORE_WINDOW_BLOCKS};
pub use scenario::{
    estimate_discrepancy, id_block_discrepancies, BuiltDcMmd, DcMmdSetup, OffsetRule, ScenarioSpec,
    GUARD_MIN_DISCREPANCY, GUARD_SAMPLES,
};
