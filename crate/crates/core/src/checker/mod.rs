//! Offline trace analysis: atomicity, liveness, storage bound, recovery and
//! communication checks.

mod atomicity;
mod checks;
mod history;
mod linearize;

pub use atomicity::{check_atomicity, Witness};
pub use checks::{
    atomicity, comm, liveness, linearization, measure_recovery, overflow, overflow_report, read_stats, resets,
    run_check, storage_bound, storage_report, OverflowReport, ReadStats, Recovery, StorageReport, Verdict, CHECK_NAMES,
};
pub use history::{OpHistory, OpKind, OpRecord, OpStatus, ResetWave, Version};
pub use linearize::{check_linearizable, lin_ops, linearizable, LinOp, LinResult, MAX_LIN_OPS};
