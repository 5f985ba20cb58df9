//! Machinery shared by both consensus protocols: who sends which symbol to
//! whom during matching, per-processor state, the message medium, and the
//! diagnosis audit.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bcast::{BroadcastPayload, BroadcastTag, DiagnosisReport};
use crate::diag_graph::DiagGraph;
use crate::events::Event;
use crate::rs_codec::{self, CodeParams, DataBlock, MacroSymbol, SymbolVector};
use crate::ProcessorId;

pub(crate) mod audit;

/// A point-to-point step of the matching stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    /// Own-position symbol to every trusted processor.
    OwnSymbol,
    /// Helper fills slots of match members the receiver does not trust (consensus).
    Helper,
    /// Non-member sends its recomputed own-position symbol (consensus).
    Relay,
    /// Helper step of the q-validity protocol.
    QHelper,
    /// Non-member relay of the q-validity protocol; replaces the own-symbol value.
    QRelay,
}

impl Step {
    /// Whether the sender transmits its recomputed symbol rather than a coded one.
    pub fn carries_relay(self) -> bool {
        matches!(self, Step::Relay | Step::QRelay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SendObligation {
    pub step: Step,
    pub sender: ProcessorId,
    pub receiver: ProcessorId,
    pub slot: usize,
}

/// Where a receiver's final value for one slot comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotSource {
    /// Set from the receiver's own state at no network cost.
    Local,
    Remote {
        sender: ProcessorId,
        step: Step,
    },
    /// Nothing is due; the slot stays erased.
    Absent,
}

/// The matching-stage routing that every processor derives from the
/// diagnosis graph and the match set alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingPlan {
    /// `sources[receiver][slot]`.
    pub sources: Vec<Vec<SlotSource>>,
    /// Every point-to-point transmission, ordered by step, sender, receiver, slot.
    pub obligations: Vec<SendObligation>,
}

impl MatchingPlan {
    pub(crate) fn build(
        dg: &DiagGraph,
        match_members: &BTreeSet<ProcessorId>,
        helper_step: Step,
        relay_step: Step,
    ) -> Self {
        let n = dg.n();
        let live = |i: ProcessorId| !dg.is_convicted(i);
        let mut sources = vec![vec![SlotSource::Absent; n]; n];
        let mut obligations = Vec::new();
        for r in (0..n).filter(|&r| live(r)) {
            let helper = dg.match_helper(r, match_members);
            for (k, slot) in sources[r].iter_mut().enumerate() {
                let src = if k == r {
                    SlotSource::Local
                } else if match_members.contains(&k) {
                    if dg.trusts(r, k) {
                        SlotSource::Remote {
                            sender: k,
                            step: Step::OwnSymbol,
                        }
                    } else {
                        match helper {
                            Some(h) if h == r => SlotSource::Local,
                            Some(h) => SlotSource::Remote {
                                sender: h,
                                step: helper_step,
                            },
                            None => SlotSource::Absent,
                        }
                    }
                } else if live(k) && dg.trusts(r, k) {
                    SlotSource::Remote {
                        sender: k,
                        step: relay_step,
                    }
                } else {
                    SlotSource::Absent
                };
                if let SlotSource::Remote { sender, step } = src {
                    obligations.push(SendObligation {
                        step,
                        sender,
                        receiver: r,
                        slot: k,
                    });
                }
                *slot = src;
            }
        }
        obligations.sort();
        Self {
            sources,
            obligations,
        }
    }

    /// Adds transmissions that do not determine a final slot value (superseded sends).
    pub(crate) fn with_extra(mut self, extra: impl IntoIterator<Item = SendObligation>) -> Self {
        self.obligations.extend(extra);
        self.obligations.sort();
        self.obligations.dedup();
        self
    }

    pub fn source(&self, receiver: ProcessorId, slot: usize) -> SlotSource {
        self.sources[receiver][slot]
    }

    pub fn obligations_for(&self, step: Step) -> impl Iterator<Item = &SendObligation> {
        self.obligations.iter().filter(move |o| o.step == step)
    }
}

/// Outcome of one generation, as seen by the fault-free processors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeKind {
    /// Every error flag was false; decided from the received vector.
    Decided,
    /// Decided from the agreeing set found in diagnosis.
    DiagnosedDecided,
    /// No agreeing set of the required size; the whole execution ends with the default value.
    TerminatedDefault,
    /// This generation alone takes the default value (q-validity protocol).
    GenerationDefault,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationReport {
    pub generation: u64,
    pub kind: OutcomeKind,
    pub diagnosed: bool,
    /// The match set in force (consensus) or found (q-validity) this generation.
    pub match_set: Option<BTreeSet<ProcessorId>>,
    /// Per-processor decided part; `None` for convicted processors or failed decodes.
    pub decisions: Vec<Option<DataBlock>>,
}

/// How the simulator carries messages. Protocol code sees only what the
/// medium returns; it never learns which processors are faulty.
pub trait Medium {
    /// Transmits one symbol; returns what the receiver gets (`None` = nothing arrived).
    fn send(
        &mut self,
        generation: u64,
        obligation: &SendObligation,
        value: Option<MacroSymbol>,
    ) -> Option<MacroSymbol>;

    /// Broadcasts through the consistent-broadcast oracle; returns the payload
    /// every processor observes.
    fn broadcast(
        &mut self,
        generation: u64,
        sender: ProcessorId,
        tag: BroadcastTag,
        payload: BroadcastPayload,
    ) -> BroadcastPayload;

    fn emit(&mut self, event: Event);
}

/// One processor's state within the current generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessorState {
    pub id: ProcessorId,
    pub generation: u64,
    pub input: DataBlock,
    /// Coded vector of the processor's own input.
    pub own: SymbolVector,
    /// Symbols received during matching (erased where nothing arrived).
    pub received: SymbolVector,
    /// Recomputed own-position symbol when outside the match set.
    pub relayed: Option<MacroSymbol>,
    pub detected: bool,
    pub in_match: bool,
    pub decided: Vec<Option<DataBlock>>,
}

impl ProcessorState {
    pub fn new(id: ProcessorId, n: usize) -> Self {
        Self {
            id,
            generation: 0,
            input: DataBlock::zeroed(0),
            own: SymbolVector::erased(n),
            received: SymbolVector::erased(n),
            relayed: None,
            detected: false,
            in_match: false,
            decided: Vec::new(),
        }
    }

    pub(crate) fn reset(&mut self, generation: u64, input: DataBlock, in_match: bool) {
        let n = self.own.len();
        self.generation = generation;
        self.input = input;
        self.own = SymbolVector::erased(n);
        self.received = SymbolVector::erased(n);
        self.relayed = None;
        self.detected = false;
        self.in_match = in_match;
    }

    /// Records a delivery into the received vector.
    pub fn accept(&mut self, slot: usize, value: Option<MacroSymbol>) {
        self.received.set(slot, value);
    }

    /// Value this processor transmits under `obligation`.
    pub fn outgoing(&self, obligation: &SendObligation) -> Option<MacroSymbol> {
        if obligation.step.carries_relay() {
            self.relayed.clone()
        } else {
            self.own.get(obligation.slot).cloned()
        }
    }

    /// Fills locally sourced slots according to `plan`.
    pub(crate) fn fill_local(&mut self, plan: &MatchingPlan) {
        for k in 0..self.own.len() {
            if plan.source(self.id, k) == SlotSource::Local {
                let v = local_value(self.id, k, self.in_match, &self.own, &self.relayed);
                self.received.set(k, v);
            }
        }
    }

    /// Recomputes the own-position symbol from the lowest-index received
    /// symbols of match-set members. `None` when too few arrived.
    pub fn compute_relay(
        &mut self,
        params: &CodeParams,
        match_members: &BTreeSet<ProcessorId>,
    ) -> Option<MacroSymbol> {
        self.relayed = relay_value(params, &self.received, match_members, self.id);
        self.relayed.clone()
    }

    /// Checking stage: sets and returns the error flag.
    pub fn run_checking(&mut self, params: &CodeParams) -> bool {
        self.detected = detected_flag(
            params,
            &self.own,
            &self.received,
            &self.relayed,
            self.in_match,
        );
        self.detected
    }

    pub fn report(&self) -> DiagnosisReport {
        DiagnosisReport {
            own: self.own.clone(),
            received: self.received.clone(),
            relayed: self.relayed.clone(),
        }
    }
}

pub(crate) fn local_value(
    id: ProcessorId,
    slot: usize,
    in_match: bool,
    own: &SymbolVector,
    relayed: &Option<MacroSymbol>,
) -> Option<MacroSymbol> {
    if slot == id && !in_match {
        relayed.clone()
    } else {
        own.get(slot).cloned()
    }
}

/// Source positions for a non-member's recomputation: the `k` lowest-index
/// non-erased slots belonging to match-set members.
pub fn relay_sources(
    params: &CodeParams,
    received: &SymbolVector,
    match_members: &BTreeSet<ProcessorId>,
    id: ProcessorId,
) -> Option<Vec<usize>> {
    let sources: Vec<usize> = match_members
        .iter()
        .copied()
        .filter(|&k| k != id && k < received.len() && !received.is_erased(k))
        .take(params.k())
        .collect();
    (sources.len() == params.k()).then_some(sources)
}

pub fn relay_value(
    params: &CodeParams,
    received: &SymbolVector,
    match_members: &BTreeSet<ProcessorId>,
    id: ProcessorId,
) -> Option<MacroSymbol> {
    let sources = relay_sources(params, received, match_members, id)?;
    rs_codec::reconstruct_position(params, received, id, &sources).ok()
}

/// Error flag a correct processor raises given its vectors.
///
/// Set when the received vector is not a codeword (or too sparse to tell),
/// when a match-set member received something other than its own codeword,
/// or when a non-member could not recompute its own symbol.
pub fn detected_flag(
    params: &CodeParams,
    own: &SymbolVector,
    received: &SymbolVector,
    relayed: &Option<MacroSymbol>,
    in_match: bool,
) -> bool {
    let codeword = matches!(rs_codec::is_codeword(params, received), Ok(true));
    if !codeword {
        return true;
    }
    if in_match {
        !received.agrees_on_common(own)
    } else {
        relayed.is_none()
    }
}

/// Largest set of candidates with pairwise-equal vectors. Ties go to the
/// lexicographically smallest sorted id list.
pub fn largest_agreeing_set<'a>(
    candidates: impl IntoIterator<Item = (ProcessorId, &'a SymbolVector)>,
) -> Vec<ProcessorId> {
    let mut groups: Vec<(&SymbolVector, Vec<ProcessorId>)> = Vec::new();
    for (id, v) in candidates {
        match groups.iter_mut().find(|(g, _)| *g == v) {
            Some((_, members)) => members.push(id),
            None => groups.push((v, vec![id])),
        }
    }
    let mut best: Vec<ProcessorId> = Vec::new();
    for (_, mut members) in groups {
        members.sort_unstable();
        if members.len() > best.len() || (members.len() == best.len() && members < best) {
            best = members;
        }
    }
    best
}
