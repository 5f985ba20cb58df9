//! Consistent broadcast oracle.
//!
//! Every processor observes the same `(sender, tag, payload)` for each
//! broadcast, and the sender identity cannot be forged. A faulty sender picks
//! the payload (the simulator applies its script before calling the oracle)
//! but cannot show different payloads to different receivers. A sender that
//! stays silent is observed by everyone as [`BroadcastPayload::Nil`].
//!
//! The oracle does not run a broadcast protocol. Its cost is a configurable
//! number of bits charged per payload bit.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::ledger::{CostLedger, Stage};
use crate::rs_codec::{MacroSymbol, SymbolVector};
use crate::ProcessorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BroadcastTag {
    /// Checking-stage error flag.
    Detected,
    /// Mutual-match vector of the q-validity protocol.
    MatchVector,
    /// Diagnosis-stage report of a processor's coded and received symbols.
    Report,
}

impl BroadcastTag {
    pub fn stage(self) -> Stage {
        match self {
            BroadcastTag::Detected => Stage::Checking,
            BroadcastTag::MatchVector => Stage::Matching,
            BroadcastTag::Report => Stage::Diagnosis,
        }
    }
}

/// What a processor discloses in the diagnosis stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiagnosisReport {
    /// The coded vector computed from the processor's own input (all erased
    /// for a non-matching processor in the plain consensus protocol).
    pub own: SymbolVector,
    /// Everything received during the matching stage.
    pub received: SymbolVector,
    /// The recomputed own-position symbol of a processor outside the match set.
    pub relayed: Option<MacroSymbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum BroadcastPayload {
    Nil,
    Detected(bool),
    MatchVector(Vec<bool>),
    Report(DiagnosisReport),
}

fn symbol_bits(s: &Option<MacroSymbol>) -> u64 {
    // One presence bit per slot plus the symbol itself.
    1 + s.as_ref().map_or(0, |s| 8 * s.len() as u64)
}

impl BroadcastPayload {
    pub fn bits(&self) -> u64 {
        match self {
            BroadcastPayload::Nil => 0,
            BroadcastPayload::Detected(_) => 1,
            BroadcastPayload::MatchVector(v) => v.len() as u64,
            BroadcastPayload::Report(r) => {
                r.own.slots().iter().map(symbol_bits).sum::<u64>()
                    + r.received.slots().iter().map(symbol_bits).sum::<u64>()
                    + symbol_bits(&r.relayed)
            }
        }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, BroadcastPayload::Nil)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastRecord {
    pub generation: u64,
    pub sender: ProcessorId,
    pub tag: BroadcastTag,
    pub payload: BroadcastPayload,
}

/// Bits charged per payload bit: `coefficient · n^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastCostModel {
    pub coefficient: u64,
    pub exponent: u32,
}

impl Default for BroadcastCostModel {
    fn default() -> Self {
        Self {
            coefficient: 1,
            exponent: 2,
        }
    }
}

impl BroadcastCostModel {
    pub fn per_payload_bit(&self, n: usize) -> u64 {
        self.coefficient * (n as u64).pow(self.exponent)
    }

    /// A broadcast has to reach at least the other `n - 1` processors.
    pub fn validate(&self, n: usize) -> Result<()> {
        let per = self.per_payload_bit(n);
        if per < n.saturating_sub(1) as u64 {
            return Err(config_err(format!(
                "broadcast cost {per} bits per payload bit is below n-1 = {}",
                n - 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BroadcastOracle {
    n: usize,
    model: BroadcastCostModel,
}

impl BroadcastOracle {
    pub fn new(n: usize, model: BroadcastCostModel) -> Result<Self> {
        model.validate(n)?;
        Ok(Self { n, model })
    }

    pub fn model(&self) -> BroadcastCostModel {
        self.model
    }

    /// Delivers `payload` to every processor and charges the ledger.
    pub fn broadcast(
        &self,
        ledger: &mut CostLedger,
        generation: u64,
        sender: ProcessorId,
        tag: BroadcastTag,
        payload: BroadcastPayload,
    ) -> BroadcastRecord {
        let bits = payload.bits();
        ledger.charge_broadcast(
            generation,
            tag.stage(),
            bits,
            bits * self.model.per_payload_bit(self.n),
        );
        BroadcastRecord {
            generation,
            sender,
            tag,
            payload,
        }
    }
}
