//! Self-stabilizing, privacy-preserving coded atomic storage.
//!
//! Servers keep Reed-Solomon coded elements (secret shares) of a single
//! multi-writer multi-reader register. The crate contains the protocol state
//! machines, a deterministic discrete-event simulator with fault injection,
//! and offline checkers for atomicity, liveness, storage bounds and recovery.

pub mod checker;
pub mod client;
pub mod coding;
pub mod comm;
pub mod protocol;
pub mod reset;
pub mod server;
pub mod sim;

pub use coding::{Field, FieldElement, Polynomial, ShareVector};
pub use protocol::{Msg, MsgPhase, NodeId, Phase, Ping, QuorumConfig, Record, Role, Tag, TagTriple};
