//! Diagnosis-stage checks run identically by every processor on broadcast data.
//!
//! Each rule only fires when at least one involved processor must be faulty:
//! a removed edge has a faulty endpoint, a convicted processor is faulty.

use std::collections::BTreeSet;

use crate::bcast::DiagnosisReport;
use crate::diag_graph::{DiagGraph, GraphDelta};
use crate::events::{Event, Rule};
use crate::protocol::{detected_flag, local_value, relay_value, MatchingPlan, Medium, SlotSource};
use crate::rs_codec::{self, CodeParams, SymbolVector};
use crate::ProcessorId;

pub(crate) struct AuditInput<'a> {
    pub generation: u64,
    pub params: &'a CodeParams,
    pub match_members: &'a BTreeSet<ProcessorId>,
    pub plan: &'a MatchingPlan,
    /// Diagnosis reports as observed through broadcast; `None` = silent.
    pub reports: &'a [Option<DiagnosisReport>],
    /// Error flags as observed through broadcast; `None` = silent.
    pub flags: &'a [Option<bool>],
    /// Other mandatory broadcasts this generation that were missing or malformed.
    pub silent: &'a [bool],
    /// Check that match-set members' vectors back their mutual-match claims.
    pub check_clique: bool,
}

#[derive(Debug, Default, PartialEq, Eq)]
pub(crate) struct Findings {
    pub disputes: Vec<(ProcessorId, ProcessorId)>,
    pub convictions: Vec<(ProcessorId, Rule)>,
}

fn well_formed(params: &CodeParams, v: &SymbolVector) -> bool {
    v.len() == params.n()
        && v.slots()
            .iter()
            .flatten()
            .all(|s| s.len() == params.sym_bytes())
}

fn report_ok(params: &CodeParams, r: &DiagnosisReport) -> bool {
    well_formed(params, &r.own)
        && well_formed(params, &r.received)
        && r.relayed
            .as_ref()
            .is_none_or(|s| s.len() == params.sym_bytes())
}

/// Pure part of the audit: what the broadcast data proves.
pub(crate) fn findings(input: &AuditInput<'_>, dg: &DiagGraph) -> Findings {
    let n = dg.n();
    let params = input.params;
    let in_match = |i: ProcessorId| input.match_members.contains(&i);
    let mut out = Findings::default();
    let mut valid = vec![false; n];

    for i in (0..n).filter(|&i| !dg.is_convicted(i)) {
        let ok = !input.silent[i]
            && input.flags[i].is_some()
            && input.reports[i]
                .as_ref()
                .is_some_and(|r| report_ok(params, r));
        if ok {
            valid[i] = true;
        } else {
            out.convictions.push((i, Rule::SilentBroadcast));
        }
    }
    let report = |i: ProcessorId| {
        input.reports[i]
            .as_ref()
            .expect("valid processors have reports")
    };

    // Every received slot must match its provenance.
    for r in (0..n).filter(|&r| valid[r]) {
        let rep = report(r);
        let mut self_inconsistent = false;
        let mut fabricated = false;
        for k in 0..n {
            let actual = rep.received.get(k);
            match input.plan.source(r, k) {
                SlotSource::Local => {
                    let expected = local_value(r, k, in_match(r), &rep.own, &rep.relayed);
                    self_inconsistent |= actual != expected.as_ref();
                }
                SlotSource::Remote { sender, step } => {
                    if !valid[sender] {
                        continue;
                    }
                    let srep = report(sender);
                    let expected = if step.carries_relay() {
                        srep.relayed.as_ref()
                    } else {
                        srep.own.get(k)
                    };
                    if actual != expected && !out.disputes.contains(&(sender, r)) {
                        out.disputes.push((sender, r));
                    }
                }
                SlotSource::Absent => fabricated |= actual.is_some(),
            }
        }
        if self_inconsistent {
            out.convictions.push((r, Rule::SelfInconsistent));
        } else if fabricated {
            out.convictions.push((r, Rule::FabricatedSymbol));
        }
    }

    for i in (0..n).filter(|&i| valid[i]) {
        let rep = report(i);
        if in_match(i) {
            let codeword =
                rep.own.is_full() && matches!(rs_codec::is_codeword(params, &rep.own), Ok(true));
            if !codeword {
                out.convictions.push((i, Rule::NotACodeword));
                continue;
            }
        } else if relay_value(params, &rep.received, input.match_members, i) != rep.relayed {
            out.convictions.push((i, Rule::BadRelay));
            continue;
        }
        let expected = detected_flag(params, &rep.own, &rep.received, &rep.relayed, in_match(i));
        if input.flags[i] != Some(expected) {
            out.convictions.push((i, Rule::FalseDetected));
            continue;
        }
        if input.check_clique && in_match(i) {
            let backed = input
                .match_members
                .iter()
                .filter(|&&j| j != i)
                .all(|&j| rep.own.get(j).is_some() && rep.own.get(j) == rep.received.get(j));
            if !backed {
                out.convictions.push((i, Rule::FalseMatch));
            }
        }
    }
    out
}

pub(crate) fn emit_delta(
    medium: &mut dyn Medium,
    generation: u64,
    delta: &GraphDelta,
    rule: Rule,
    primary: Option<ProcessorId>,
    dispute: Option<(ProcessorId, ProcessorId)>,
) {
    let dispute = dispute.map(|(a, b)| (a.min(b), a.max(b)));
    for &(a, b) in &delta.removed_edges {
        let direct = Some((a, b)) == dispute || primary.is_some_and(|p| p == a || p == b);
        medium.emit(Event::EdgeRemoved {
            generation,
            a,
            b,
            rule: if direct { rule } else { Rule::Threshold },
        });
    }
    for &p in &delta.convicted {
        medium.emit(Event::Convicted {
            generation,
            processor: p,
            rule: if Some(p) == primary {
                rule
            } else {
                Rule::Threshold
            },
        });
    }
}

/// Runs the audit and applies its findings to the graph.
pub(crate) fn run_audit(
    input: &AuditInput<'_>,
    dg: &mut DiagGraph,
    medium: &mut dyn Medium,
) -> Findings {
    let found = findings(input, dg);
    // Direct convictions first so events name the rule that proved the fault.
    for &(p, rule) in &found.convictions {
        let delta = dg.convict(p);
        emit_delta(medium, input.generation, &delta, rule, Some(p), None);
    }
    for &(s, r) in &found.disputes {
        let delta = dg.remove_edge(s, r);
        emit_delta(
            medium,
            input.generation,
            &delta,
            Rule::DisputedSymbol,
            None,
            Some((s, r)),
        );
    }
    found
}
