//! Transcript events. Serialized one JSON object per line, tagged by `event`.

use serde::{Deserialize, Serialize};

use crate::bcast::BroadcastRecord;
use crate::diag_graph::GraphSnapshot;
use crate::ledger::LedgerRow;
use crate::protocol::{OutcomeKind, Step};
use crate::rs_codec::{DataBlock, MacroSymbol};
use crate::simnet::{ExecutionConfig, Verdict};
use crate::ProcessorId;

/// Why the diagnosis graph changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// A receiver's reported symbol differs from what the sender reports sending.
    DisputedSymbol,
    /// A processor's received vector contradicts its own locally held symbols.
    SelfInconsistent,
    /// A processor reports a symbol on a slot nobody was due to send it.
    FabricatedSymbol,
    /// A match-set member's coded vector is not a codeword.
    NotACodeword,
    /// A non-member's recomputed symbol does not follow from its sources.
    BadRelay,
    /// `t + 1` incident edges removed.
    Threshold,
    /// The broadcast error flag contradicts the broadcast vectors.
    FalseDetected,
    /// A match-set member reported a mutual match its vectors do not support.
    FalseMatch,
    /// A mandatory broadcast was missing or malformed.
    SilentBroadcast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub config: ExecutionConfig,
    pub padded_l_bits: u64,
    pub generations: u64,
    pub sym_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Event {
    Header(Box<Header>),
    GenerationStart {
        generation: u64,
        match_members: Option<Vec<ProcessorId>>,
    },
    SymbolSent {
        generation: u64,
        step: Step,
        sender: ProcessorId,
        receiver: ProcessorId,
        slot: usize,
        symbol: Option<MacroSymbol>,
    },
    Broadcast(BroadcastRecord),
    MatchSet {
        generation: u64,
        members: Option<Vec<ProcessorId>>,
    },
    DiagnosisStarted {
        generation: u64,
    },
    EdgeRemoved {
        generation: u64,
        a: ProcessorId,
        b: ProcessorId,
        rule: Rule,
    },
    Convicted {
        generation: u64,
        processor: ProcessorId,
        rule: Rule,
    },
    DecideSet {
        generation: u64,
        members: Vec<ProcessorId>,
    },
    Decided {
        generation: u64,
        processor: ProcessorId,
        kind: OutcomeKind,
        value: DataBlock,
    },
    GenerationDefault {
        generation: u64,
    },
    TerminatedDefault {
        generation: u64,
    },
    FinalGraph(GraphSnapshot),
    Outputs {
        outputs: Vec<Option<DataBlock>>,
    },
    Ledger {
        rows: Vec<LedgerRow>,
    },
    Verdict(Verdict),
}
