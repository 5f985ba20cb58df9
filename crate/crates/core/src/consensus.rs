//! Consensus on `L`-bit values, one `D`-bit generation at a time.
//!
//! Each generation runs three stages:
//!
//! * **Matching**: members of the match set encode their part with the
//!   `(n, n-t)` code and send their own-position symbol to every trusted
//!   processor. A helper (the lowest-index trusted member) fills in slots of
//!   members the receiver does not trust. Processors outside the match set
//!   recompute their own-position symbol from the first `n - t` member
//!   symbols they hold and send it on.
//! * **Checking**: every processor raises an error flag if its received
//!   vector is not a codeword, or (as a member) differs from its own codeword.
//!   Flags go out through the consistent broadcast. With no flag raised, every
//!   processor decodes its received vector.
//! * **Diagnosis**: every processor broadcasts its coded and received vectors.
//!   The audit removes disputed edges and convicts provably faulty processors;
//!   the largest set of members with identical coded vectors becomes the new
//!   match set. If it has fewer than `n - t` members, fault-free inputs differ
//!   and the execution ends with the default value.
//!
//! The diagnosis graph and match set are common knowledge: every processor
//! derives them from identical broadcast data, so the engine keeps one copy.

use std::collections::BTreeSet;

use crate::bcast::{BroadcastPayload, BroadcastTag, DiagnosisReport};
use crate::diag_graph::DiagGraph;
use crate::error::{config_err, Result};
use crate::events::Event;
use crate::protocol::audit::{self, AuditInput};
use crate::protocol::{
    largest_agreeing_set, GenerationReport, MatchingPlan, Medium, OutcomeKind, ProcessorState,
    SendObligation, Step,
};
use crate::rs_codec::{self, CodeParams, DataBlock, SymbolVector};
use crate::ProcessorId;

/// All matching-stage transmissions for the current graph and match set.
pub fn matching_obligations(
    dg: &DiagGraph,
    match_members: &BTreeSet<ProcessorId>,
    n: usize,
    t: usize,
) -> Vec<SendObligation> {
    debug_assert_eq!(dg.n(), n);
    debug_assert!(match_members.len() + t >= n, "match set smaller than n - t");
    matching_plan(dg, match_members).obligations
}

pub fn matching_plan(dg: &DiagGraph, match_members: &BTreeSet<ProcessorId>) -> MatchingPlan {
    MatchingPlan::build(dg, match_members, Step::Helper, Step::Relay)
}

/// Result of the checking stage at one processor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckOutcome {
    /// No flag raised anywhere; the processor's decoded value (an error only
    /// for a processor whose own flag should have been raised).
    Decide(Result<DataBlock>),
    Escalate,
}

/// Decides from the received vector if every observed flag is false.
/// A silent flag counts as raised.
pub fn decide_or_escalate(
    params: &CodeParams,
    received: &SymbolVector,
    flags: &[Option<bool>],
) -> CheckOutcome {
    if flags.iter().all(|f| *f == Some(false)) {
        CheckOutcome::Decide(rs_codec::decode(params, received))
    } else {
        CheckOutcome::Escalate
    }
}

/// Broadcast data available to the diagnosis stage.
pub struct DiagnosisInput<'a> {
    pub generation: u64,
    pub params: &'a CodeParams,
    pub n: usize,
    pub t: usize,
    pub match_members: &'a BTreeSet<ProcessorId>,
    pub plan: &'a MatchingPlan,
    pub reports: &'a [Option<DiagnosisReport>],
    pub flags: &'a [Option<bool>],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosisResult {
    pub kind: OutcomeKind,
    pub value: Option<DataBlock>,
    pub agreeing: BTreeSet<ProcessorId>,
}

/// Diagnosis stage: audit, graph update, and the new match set.
pub fn run_diagnosis(
    input: &DiagnosisInput<'_>,
    dg: &mut DiagGraph,
    medium: &mut dyn Medium,
) -> DiagnosisResult {
    let silent = vec![false; input.n];
    audit::run_audit(
        &AuditInput {
            generation: input.generation,
            params: input.params,
            match_members: input.match_members,
            plan: input.plan,
            reports: input.reports,
            flags: input.flags,
            silent: &silent,
            check_clique: false,
        },
        dg,
        medium,
    );
    let candidates = input
        .match_members
        .iter()
        .copied()
        .filter(|&i| !dg.is_convicted(i))
        .filter_map(|i| input.reports[i].as_ref().map(|r| (i, &r.own)));
    let agreeing: BTreeSet<ProcessorId> = largest_agreeing_set(candidates).into_iter().collect();
    if agreeing.len() + input.t < input.n {
        return DiagnosisResult {
            kind: OutcomeKind::TerminatedDefault,
            value: None,
            agreeing,
        };
    }
    let first = *agreeing.first().expect("non-empty");
    let own = &input.reports[first]
        .as_ref()
        .expect("candidate has a report")
        .own;
    let value = rs_codec::decode(input.params, own).expect("surviving members hold codewords");
    DiagnosisResult {
        kind: OutcomeKind::DiagnosedDecided,
        value: Some(value),
        agreeing,
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusEngine {
    n: usize,
    t: usize,
    params: CodeParams,
    dg: DiagGraph,
    match_members: BTreeSet<ProcessorId>,
    states: Vec<ProcessorState>,
    terminated: Option<u64>,
    diagnosis_count: u64,
}

impl ConsensusEngine {
    pub fn new(n: usize, t: usize, sym_bytes: usize) -> Result<Self> {
        let dg = DiagGraph::new_complete(n, t)?;
        if n == t {
            return Err(config_err("no fault-free processors"));
        }
        let params = CodeParams::new(n, n - t, sym_bytes)?;
        Ok(Self {
            n,
            t,
            params,
            dg,
            match_members: (0..n).collect(),
            states: (0..n).map(|i| ProcessorState::new(i, n)).collect(),
            terminated: None,
            diagnosis_count: 0,
        })
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn graph(&self) -> &DiagGraph {
        &self.dg
    }

    pub fn match_members(&self) -> &BTreeSet<ProcessorId> {
        &self.match_members
    }

    pub fn states(&self) -> &[ProcessorState] {
        &self.states
    }

    pub fn terminated(&self) -> Option<u64> {
        self.terminated
    }

    pub fn diagnosis_count(&self) -> u64 {
        self.diagnosis_count
    }

    fn live(&self) -> Vec<ProcessorId> {
        (0..self.n).filter(|&i| !self.dg.is_convicted(i)).collect()
    }

    fn default_part(&self) -> DataBlock {
        DataBlock::zeroed(self.params.data_bytes())
    }

    fn terminate(
        &mut self,
        generation: u64,
        diagnosed: bool,
        medium: &mut dyn Medium,
    ) -> GenerationReport {
        self.terminated = Some(generation);
        medium.emit(Event::TerminatedDefault { generation });
        let decisions = (0..self.n)
            .map(|i| (!self.dg.is_convicted(i)).then(|| self.default_part()))
            .collect();
        self.record(
            decisions,
            generation,
            OutcomeKind::TerminatedDefault,
            diagnosed,
        )
    }

    fn record(
        &mut self,
        decisions: Vec<Option<DataBlock>>,
        generation: u64,
        kind: OutcomeKind,
        diagnosed: bool,
    ) -> GenerationReport {
        for (s, d) in self.states.iter_mut().zip(&decisions) {
            s.decided.push(d.clone());
        }
        GenerationReport {
            generation,
            kind,
            diagnosed,
            match_set: Some(self.match_members.clone()),
            decisions,
        }
    }

    /// Runs matching and the relay computation; fills every processor's received vector.
    pub fn run_matching(&mut self, generation: u64, plan: &MatchingPlan, medium: &mut dyn Medium) {
        for ob in plan
            .obligations
            .iter()
            .filter(|o| matches!(o.step, Step::OwnSymbol | Step::Helper))
        {
            let value = self.states[ob.sender].outgoing(ob);
            let got = medium.send(generation, ob, value);
            self.states[ob.receiver].accept(ob.slot, got);
        }
        for i in self.live() {
            if !self.states[i].in_match {
                self.states[i].compute_relay(&self.params, &self.match_members);
            }
            self.states[i].fill_local(plan);
        }
        for ob in plan.obligations_for(Step::Relay) {
            let value = self.states[ob.sender].outgoing(ob);
            let got = medium.send(generation, ob, value);
            self.states[ob.receiver].accept(ob.slot, got);
        }
    }

    /// Runs one generation on the per-processor input parts.
    pub fn run_generation(
        &mut self,
        generation: u64,
        parts: &[DataBlock],
        medium: &mut dyn Medium,
    ) -> GenerationReport {
        assert!(self.terminated.is_none(), "execution already terminated");
        assert_eq!(parts.len(), self.n);
        let dg = &self.dg;
        self.match_members.retain(|&i| !dg.is_convicted(i));
        medium.emit(Event::GenerationStart {
            generation,
            match_members: Some(self.match_members.iter().copied().collect()),
        });
        if self.match_members.len() + self.t < self.n {
            return self.terminate(generation, false, medium);
        }

        let live = self.live();
        for &i in &live {
            let in_match = self.match_members.contains(&i);
            let st = &mut self.states[i];
            st.reset(generation, parts[i].clone(), in_match);
            if in_match {
                st.own = rs_codec::encode(&self.params, &parts[i])
                    .expect("part length fixed by configuration");
            }
        }

        let plan = matching_plan(&self.dg, &self.match_members);
        self.run_matching(generation, &plan, medium);

        let mut flags = vec![None; self.n];
        for &i in &live {
            let d = self.states[i].run_checking(&self.params);
            let seen = medium.broadcast(
                generation,
                i,
                BroadcastTag::Detected,
                BroadcastPayload::Detected(d),
            );
            flags[i] = match seen {
                BroadcastPayload::Detected(b) => Some(b),
                _ => None,
            };
        }
        let live_flags: Vec<Option<bool>> = live.iter().map(|&i| flags[i]).collect();

        if live_flags.iter().all(|f| *f == Some(false)) {
            let mut decisions = vec![None; self.n];
            for &i in &live {
                if let CheckOutcome::Decide(Ok(v)) =
                    decide_or_escalate(&self.params, &self.states[i].received, &live_flags)
                {
                    medium.emit(Event::Decided {
                        generation,
                        processor: i,
                        kind: OutcomeKind::Decided,
                        value: v.clone(),
                    });
                    decisions[i] = Some(v);
                }
            }
            return self.record(decisions, generation, OutcomeKind::Decided, false);
        }

        self.diagnosis_count += 1;
        medium.emit(Event::DiagnosisStarted { generation });
        let mut reports = vec![None; self.n];
        for &i in &live {
            let seen = medium.broadcast(
                generation,
                i,
                BroadcastTag::Report,
                BroadcastPayload::Report(self.states[i].report()),
            );
            if let BroadcastPayload::Report(r) = seen {
                reports[i] = Some(r);
            }
        }
        let match_members = self.match_members.clone();
        let result = run_diagnosis(
            &DiagnosisInput {
                generation,
                params: &self.params,
                n: self.n,
                t: self.t,
                match_members: &match_members,
                plan: &plan,
                reports: &reports,
                flags: &flags,
            },
            &mut self.dg,
            medium,
        );
        medium.emit(Event::DecideSet {
            generation,
            members: result.agreeing.iter().copied().collect(),
        });
        match result.kind {
            OutcomeKind::TerminatedDefault => self.terminate(generation, true, medium),
            _ => {
                let value = result.value.expect("decided");
                let mut decisions = vec![None; self.n];
                for i in self.live() {
                    medium.emit(Event::Decided {
                        generation,
                        processor: i,
                        kind: OutcomeKind::DiagnosedDecided,
                        value: value.clone(),
                    });
                    decisions[i] = Some(value.clone());
                }
                let report =
                    self.record(decisions, generation, OutcomeKind::DiagnosedDecided, true);
                self.match_members = result.agreeing;
                report
            }
        }
    }
}
