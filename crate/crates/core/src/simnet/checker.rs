//! End-of-execution property checks, evaluated with knowledge of the faulty set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diag_graph::DiagGraph;
use crate::protocol::GenerationReport;
use crate::rs_codec::DataBlock;
use crate::simnet::{Algorithm, ExecutionConfig};
use crate::ProcessorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Termination,
    Consistency,
    Validity,
    QValidity,
    CliqueExistence,
    Soundness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub property: Property,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<u64>,
    pub processors: Vec<ProcessorId>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub violations: Vec<Violation>,
    pub diagnosis_count: u64,
    /// Worst-case number of diagnosis stages for this protocol and `t`.
    pub diagnosis_bound: u64,
}

impl Verdict {
    pub fn within_bound(&self) -> bool {
        self.diagnosis_count <= self.diagnosis_bound
    }

    pub fn label(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// `t + t(t+1)` for plain consensus, `t(t+1)` for q-validity.
pub fn diagnosis_bound(algorithm: Algorithm, t: usize) -> u64 {
    let t = t as u64;
    match algorithm {
        Algorithm::Consensus => t + t * (t + 1),
        Algorithm::QValidity => t * (t + 1),
    }
}

/// Smallest value held by at least `q` of the given processors, if any.
fn popular<'a>(values: impl Iterator<Item = &'a DataBlock>, q: usize) -> Option<&'a DataBlock> {
    let mut counts: BTreeMap<&DataBlock, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts.into_iter().find(|&(_, c)| c >= q).map(|(v, _)| v)
}

fn mismatched(
    decided: &[(ProcessorId, &DataBlock)],
    ok: impl Fn(&DataBlock) -> bool,
) -> Vec<ProcessorId> {
    decided
        .iter()
        .filter(|(_, o)| !ok(o))
        .map(|(i, _)| *i)
        .collect()
}

pub struct CheckInput<'a> {
    pub config: &'a ExecutionConfig,
    /// Per-processor output truncated to `l_bits`; `None` when undecided.
    pub outputs: &'a [Option<DataBlock>],
    pub reports: &'a [GenerationReport],
    pub graph: &'a DiagGraph,
    pub diagnosis_count: u64,
    pub terminated: Option<u64>,
}

pub fn check(input: &CheckInput<'_>) -> Verdict {
    let cfg = input.config;
    let good: Vec<ProcessorId> = cfg.fault_free().collect();
    let mut violations = Vec::new();
    let mut violate = |property, generation, processors: Vec<ProcessorId>, detail: String| {
        violations.push(Violation {
            property,
            generation,
            processors,
            detail,
        })
    };

    let undecided: Vec<ProcessorId> = good
        .iter()
        .copied()
        .filter(|&i| input.outputs[i].is_none())
        .collect();
    if !undecided.is_empty() {
        violate(
            Property::Termination,
            None,
            undecided,
            "fault-free processor without output".into(),
        );
    }

    let decided: Vec<(ProcessorId, &DataBlock)> = good
        .iter()
        .filter_map(|&i| input.outputs[i].as_ref().map(|o| (i, o)))
        .collect();
    if let Some(&(a, va)) = decided.first() {
        for &(b, vb) in &decided[1..] {
            if vb != va {
                violate(
                    Property::Consistency,
                    None,
                    vec![a, b],
                    "fault-free outputs differ".into(),
                );
                break;
            }
        }
    }

    match cfg.algorithm {
        Algorithm::Consensus => {
            if let Some(v) = popular(good.iter().map(|&i| &cfg.inputs[i]), good.len()) {
                let wrong = mismatched(&decided, |o| o == v);
                if !wrong.is_empty() {
                    violate(
                        Property::Validity,
                        None,
                        wrong,
                        "output differs from the common input".into(),
                    );
                }
            }
        }
        Algorithm::QValidity => {
            let q = cfg.q.unwrap_or(0);
            let strict = 2 * q > cfg.n;
            let inputs: Vec<&DataBlock> = good.iter().map(|&i| &cfg.inputs[i]).collect();
            // Below a majority the guarantee is per generation only.
            if let Some(v) = popular(inputs.iter().copied(), q).filter(|_| strict) {
                let wrong = mismatched(&decided, |o| o == v);
                if !wrong.is_empty() {
                    violate(
                        Property::QValidity,
                        None,
                        wrong,
                        "output differs from the majority input".into(),
                    );
                }
            }
            if input.terminated.is_none() {
                for rep in input.reports {
                    let parts: Vec<DataBlock> =
                        good.iter().map(|&i| cfg.part(i, rep.generation)).collect();
                    let Some(v) = popular(parts.iter(), q) else {
                        continue;
                    };
                    if rep.match_set.is_none() {
                        violate(
                            Property::CliqueExistence,
                            Some(rep.generation),
                            vec![],
                            format!("{q} fault-free processors agree but no match set was found"),
                        );
                    }
                    let wrong: Vec<ProcessorId> = good
                        .iter()
                        .copied()
                        .filter(|&i| match rep.decisions[i].as_ref() {
                            None => true,
                            Some(o) if strict => o != v,
                            Some(o) => !parts.contains(o),
                        })
                        .collect();
                    if !wrong.is_empty() {
                        violate(
                            Property::QValidity,
                            Some(rep.generation),
                            wrong,
                            "generation output is not an admissible fault-free part".into(),
                        );
                    }
                }
            }
        }
    }

    let convicted: Vec<ProcessorId> = good
        .iter()
        .copied()
        .filter(|&i| input.graph.is_convicted(i))
        .collect();
    if !convicted.is_empty() {
        violate(
            Property::Soundness,
            None,
            convicted,
            "fault-free processor convicted".into(),
        );
    }
    for (x, &a) in good.iter().enumerate() {
        for &b in &good[x + 1..] {
            if !input.graph.has_edge(a, b) {
                violate(
                    Property::Soundness,
                    None,
                    vec![a, b],
                    "edge between fault-free processors removed".into(),
                );
            }
        }
    }

    Verdict {
        pass: violations.is_empty(),
        violations,
        diagnosis_count: input.diagnosis_count,
        diagnosis_bound: diagnosis_bound(cfg.algorithm, cfg.t),
    }
}
