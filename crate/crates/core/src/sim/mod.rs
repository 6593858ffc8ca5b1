//! Seeded, deterministic discrete-event simulator with fault injection and
//! asynchronous-cycle accounting.

mod cycles;
mod engine;
mod faults;
mod scenario;
mod sched;
mod trace;

pub use cycles::{count_cycles, CycleCounter};
pub use engine::{run, NodeState, RunningOp, Simulator, SystemState};
pub use faults::{inject_transient, malicious_reply_filter};
pub use scenario::{
    CorruptScope, FaultScript, ParseError, Scenario, ScenarioError, SchedulerKind, ScriptOp, TimedFault,
    TransientSpec, DEFAULT_BUDGET,
};
pub use sched::Scheduler;
pub use trace::{Event, EventKind, FailReason, InitInfo, Trace, TraceParseError};
