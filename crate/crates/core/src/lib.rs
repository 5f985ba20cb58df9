//! Byzantine agreement on long values using Reed-Solomon coded exchanges
//! and trust-graph diagnosis, plus a deterministic simulator.
//!
//! * [`rs_codec`]: systematic Reed-Solomon code over GF(2^8) on macro-symbols.
//! * [`diag_graph`]: the trust graph that diagnosis prunes.
//! * [`bcast`]: consistent-broadcast oracle with configurable cost.
//! * [`consensus`]: the plain consensus protocol.
//! * [`qvalidity`]: the q-validity variant.
//! * [`simnet`]: adversary scripts, execution, property checking and sweeps.

pub mod bcast;
pub mod consensus;
pub mod diag_graph;
pub mod error;
pub mod events;
pub mod gf256;
pub mod ledger;
pub mod protocol;
pub mod qvalidity;
pub mod rs_codec;
pub mod simnet;

/// Processor index, `0..n`.
pub type ProcessorId = usize;

pub use bcast::{
    BroadcastCostModel, BroadcastOracle, BroadcastPayload, BroadcastRecord, BroadcastTag,
    DiagnosisReport,
};
pub use consensus::ConsensusEngine;
pub use diag_graph::{DiagGraph, GraphSnapshot};
pub use error::{Error, Result};
pub use events::{Event, Rule};
pub use ledger::{CostLedger, Stage, StageCost};
pub use protocol::{
    GenerationReport, MatchingPlan, Medium, OutcomeKind, SendObligation, SlotSource, Step,
};
pub use qvalidity::QValidityEngine;
pub use rs_codec::{CodeParams, DataBlock, MacroSymbol, SymbolVector};
pub use simnet::{
    run_execution, AdversaryScript, Algorithm, ExecutionConfig, Replay, Transcript, Verdict,
};
