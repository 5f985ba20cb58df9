//! Consensus with q-validity, one generation at a time.
//!
//! A generation outputs a value `v` whenever at least `q` fault-free
//! processors hold `v`, and otherwise may fall back to the default value.
//! Every live processor encodes its part with the `(n, q)` code and sends its
//! own-position symbol to every trusted processor. Mutual-match vectors go out
//! through the consistent broadcast; the lexicographically smallest `q`-clique
//! of mutual matches becomes the match set. The rest of the generation mirrors
//! the plain consensus protocol with `q` in place of `n - t`, except that a
//! failed diagnosis only defaults this generation.

use std::collections::BTreeSet;

use crate::bcast::{BroadcastPayload, BroadcastTag};
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

/// Slot `j` is true when the symbol received from `j` equals the processor's
/// own coded symbol at `j`. The processor's own slot is always true.
pub fn compute_match_vector(
    id: ProcessorId,
    own: &SymbolVector,
    received: &SymbolVector,
) -> Vec<bool> {
    (0..own.len())
        .map(|j| j == id || (received.get(j).is_some() && received.get(j) == own.get(j)))
        .collect()
}

/// Lexicographically smallest set of `q` processors that pairwise claim a
/// match. `vectors[i] = None` (silent or convicted) counts as all-false.
pub fn find_match_set(vectors: &[Option<Vec<bool>>], q: usize) -> Option<BTreeSet<ProcessorId>> {
    let n = vectors.len();
    let claims = |a: usize, b: usize| {
        vectors[a]
            .as_ref()
            .is_some_and(|v| v.get(b).copied().unwrap_or(false))
    };
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| a != b && claims(a, b) && claims(b, a))
                .collect()
        })
        .collect();
    let present: Vec<bool> = (0..n).map(|a| vectors[a].is_some()).collect();

    fn extend(
        adj: &[Vec<bool>],
        present: &[bool],
        q: usize,
        chosen: &mut Vec<usize>,
        start: usize,
    ) -> bool {
        if chosen.len() == q {
            return true;
        }
        let n = adj.len();
        for v in start..n {
            if n - v < q - chosen.len() {
                break;
            }
            if present[v] && chosen.iter().all(|&c| adj[c][v]) {
                chosen.push(v);
                if extend(adj, present, q, chosen, v + 1) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }

    if q == 0 {
        return Some(BTreeSet::new());
    }
    let mut chosen = Vec::with_capacity(q);
    extend(&adj, &present, q, &mut chosen, 0).then(|| chosen.into_iter().collect())
}

#[derive(Debug, Clone)]
pub struct QValidityEngine {
    n: usize,
    t: usize,
    q: usize,
    params: CodeParams,
    dg: DiagGraph,
    states: Vec<ProcessorState>,
    early_terminate: bool,
    terminated: Option<u64>,
    diagnosis_count: u64,
}

impl QValidityEngine {
    /// `early_terminate` ends the execution (remaining generations default)
    /// the first time no match set exists, instead of defaulting one generation.
    pub fn new(
        n: usize,
        t: usize,
        q: usize,
        sym_bytes: usize,
        early_terminate: bool,
    ) -> Result<Self> {
        let dg = DiagGraph::new_complete(n, t)?;
        if q < t + 1 || q + t > n {
            return Err(config_err(format!(
                "q = {q} outside [t+1, n-t] = [{}, {}]",
                t + 1,
                n - t
            )));
        }
        let params = CodeParams::new(n, q, sym_bytes)?;
        Ok(Self {
            n,
            t,
            q,
            params,
            dg,
            states: (0..n).map(|i| ProcessorState::new(i, n)).collect(),
            early_terminate,
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

    pub fn states(&self) -> &[ProcessorState] {
        &self.states
    }

    pub fn terminated(&self) -> Option<u64> {
        self.terminated
    }

    pub fn diagnosis_count(&self) -> u64 {
        self.diagnosis_count
    }

    pub fn t(&self) -> usize {
        self.t
    }

    fn live(&self) -> Vec<ProcessorId> {
        (0..self.n).filter(|&i| !self.dg.is_convicted(i)).collect()
    }

    fn default_part(&self) -> DataBlock {
        DataBlock::zeroed(self.params.data_bytes())
    }

    fn record(
        &mut self,
        generation: u64,
        kind: OutcomeKind,
        diagnosed: bool,
        match_set: Option<BTreeSet<ProcessorId>>,
        decisions: Vec<Option<DataBlock>>,
    ) -> GenerationReport {
        for (s, d) in self.states.iter_mut().zip(&decisions) {
            s.decided.push(d.clone());
        }
        GenerationReport {
            generation,
            kind,
            diagnosed,
            match_set,
            decisions,
        }
    }

    fn decide_all(
        &mut self,
        generation: u64,
        kind: OutcomeKind,
        value: &DataBlock,
        medium: &mut dyn Medium,
    ) -> Vec<Option<DataBlock>> {
        let mut decisions = vec![None; self.n];
        for i in self.live() {
            medium.emit(Event::Decided {
                generation,
                processor: i,
                kind,
                value: value.clone(),
            });
            decisions[i] = Some(value.clone());
        }
        decisions
    }

    fn default_generation(
        &mut self,
        generation: u64,
        diagnosed: bool,
        match_set: Option<BTreeSet<ProcessorId>>,
        medium: &mut dyn Medium,
    ) -> GenerationReport {
        medium.emit(Event::GenerationDefault { generation });
        let value = self.default_part();
        let decisions = self.decide_all(generation, OutcomeKind::GenerationDefault, &value, medium);
        self.record(
            generation,
            OutcomeKind::GenerationDefault,
            diagnosed,
            match_set,
            decisions,
        )
    }

    fn deliver(&mut self, generation: u64, obs: &[SendObligation], medium: &mut dyn Medium) {
        for ob in obs {
            let value = self.states[ob.sender].outgoing(ob);
            let got = medium.send(generation, ob, value);
            self.states[ob.receiver].accept(ob.slot, got);
        }
    }

    pub fn run_generation(
        &mut self,
        generation: u64,
        parts: &[DataBlock],
        medium: &mut dyn Medium,
    ) -> GenerationReport {
        assert!(self.terminated.is_none(), "execution already terminated");
        assert_eq!(parts.len(), self.n);
        medium.emit(Event::GenerationStart {
            generation,
            match_members: None,
        });
        let live = self.live();
        for &i in &live {
            let st = &mut self.states[i];
            st.reset(generation, parts[i].clone(), false);
            st.own = rs_codec::encode(&self.params, &parts[i])
                .expect("part length fixed by configuration");
        }

        // Own-position symbols from every live processor to every trusted one.
        let dg = &self.dg;
        let initial: Vec<SendObligation> = live
            .iter()
            .flat_map(|&s| {
                live.iter()
                    .filter(move |&&r| r != s && dg.trusts(r, s))
                    .map(move |&r| SendObligation {
                        step: Step::OwnSymbol,
                        sender: s,
                        receiver: r,
                        slot: s,
                    })
            })
            .collect();
        self.deliver(generation, &initial, medium);

        let mut vectors: Vec<Option<Vec<bool>>> = vec![None; self.n];
        let mut silent = vec![false; self.n];
        for &i in &live {
            let st = &self.states[i];
            let m = compute_match_vector(i, &st.own, &st.received);
            let seen = medium.broadcast(
                generation,
                i,
                BroadcastTag::MatchVector,
                BroadcastPayload::MatchVector(m),
            );
            match seen {
                BroadcastPayload::MatchVector(v) if v.len() == self.n => vectors[i] = Some(v),
                _ => silent[i] = true,
            }
        }
        let found = find_match_set(&vectors, self.q);
        medium.emit(Event::MatchSet {
            generation,
            members: found.as_ref().map(|s| s.iter().copied().collect()),
        });
        let Some(match_members) = found else {
            let report = self.default_generation(generation, false, None, medium);
            if self.early_terminate {
                self.terminated = Some(generation);
                medium.emit(Event::TerminatedDefault { generation });
            }
            return report;
        };

        let plan = MatchingPlan::build(&self.dg, &match_members, Step::QHelper, Step::QRelay)
            .with_extra(initial);
        for &i in &live {
            let st = &mut self.states[i];
            st.in_match = match_members.contains(&i);
            // Non-member slots are replaced by the recomputed symbols.
            for k in (0..self.n).filter(|k| *k != i && !match_members.contains(k)) {
                st.received.set(k, None);
            }
        }
        let helper: Vec<SendObligation> = plan.obligations_for(Step::QHelper).copied().collect();
        self.deliver(generation, &helper, medium);
        for &i in &live {
            if !self.states[i].in_match {
                self.states[i].compute_relay(&self.params, &match_members);
            }
            self.states[i].fill_local(&plan);
        }
        let relay: Vec<SendObligation> = plan.obligations_for(Step::QRelay).copied().collect();
        self.deliver(generation, &relay, medium);

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

        if live.iter().all(|&i| flags[i] == Some(false)) {
            let mut decisions = vec![None; self.n];
            for &i in &live {
                if let Ok(v) = rs_codec::decode(&self.params, &self.states[i].received) {
                    medium.emit(Event::Decided {
                        generation,
                        processor: i,
                        kind: OutcomeKind::Decided,
                        value: v.clone(),
                    });
                    decisions[i] = Some(v);
                }
            }
            return self.record(
                generation,
                OutcomeKind::Decided,
                false,
                Some(match_members),
                decisions,
            );
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
        audit::run_audit(
            &AuditInput {
                generation,
                params: &self.params,
                match_members: &match_members,
                plan: &plan,
                reports: &reports,
                flags: &flags,
                silent: &silent,
                check_clique: true,
            },
            &mut self.dg,
            medium,
        );

        let params = self.params;
        let dg = &self.dg;
        let candidates = (0..self.n)
            .filter(|&i| !dg.is_convicted(i))
            .filter_map(|i| reports[i].as_ref().map(|r| (i, &r.own)))
            .filter(|(_, own)| {
                own.is_full() && matches!(rs_codec::is_codeword(&params, own), Ok(true))
            });
        let deciders: BTreeSet<ProcessorId> =
            largest_agreeing_set(candidates).into_iter().collect();
        medium.emit(Event::DecideSet {
            generation,
            members: deciders.iter().copied().collect(),
        });
        if deciders.len() < self.q {
            return self.default_generation(generation, true, Some(match_members), medium);
        }
        let first = *deciders.first().expect("non-empty");
        let own = &reports[first].as_ref().expect("candidate has a report").own;
        let value = rs_codec::decode(&self.params, own).expect("candidates hold codewords");
        let decisions = self.decide_all(generation, OutcomeKind::DiagnosedDecided, &value, medium);
        self.record(
            generation,
            OutcomeKind::DiagnosedDecided,
            true,
            Some(match_members),
            decisions,
        )
    }
}
