//! Deterministic synchronous simulator: runs a protocol under a scripted
//! adversary, records a transcript and checks the outcome.

mod adversary;
mod checker;
mod complexity;
mod config;
mod medium;
pub mod scripts;
mod sweep;

use serde::{Deserialize, Serialize};

pub use adversary::{
    AdversaryScript, Behavior, BroadcastAction, BroadcastRule, P2pAction, P2pRule, ReportPart,
};
pub use checker::{check, diagnosis_bound, CheckInput, Property, Verdict, Violation};
pub use complexity::{check_complexity, ComplexityReport};
pub use config::{choose_d, mask_to_bits, Algorithm, ExecutionConfig};
pub use medium::SimMedium;
pub use sweep::{sweep, trial, QRange, SweepReport, SweepRow, SweepSpec};

use crate::bcast::BroadcastOracle;
use crate::consensus::ConsensusEngine;
use crate::diag_graph::{DiagGraph, GraphSnapshot};
use crate::error::Result;
use crate::events::{Event, Header};
use crate::ledger::CostLedger;
use crate::protocol::GenerationReport;
use crate::qvalidity::QValidityEngine;
use crate::rs_codec::DataBlock;

/// A configuration plus script: everything needed to reproduce an execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Replay {
    pub config: ExecutionConfig,
    #[serde(default)]
    pub script: AdversaryScript,
}

/// Result of one execution.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub config: ExecutionConfig,
    pub events: Vec<Event>,
    /// Per-processor output truncated to `l_bits`; `None` for convicted or undecided processors.
    pub outputs: Vec<Option<DataBlock>>,
    pub reports: Vec<GenerationReport>,
    pub graph: DiagGraph,
    pub ledger: CostLedger,
    pub terminated: Option<u64>,
    pub verdict: Verdict,
}

impl Transcript {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn final_graph(&self) -> GraphSnapshot {
        self.graph.snapshot()
    }

    pub fn diagnosis_count(&self) -> u64 {
        self.verdict.diagnosis_count
    }
}

enum Engine {
    Consensus(ConsensusEngine),
    QValidity(QValidityEngine),
}

impl Engine {
    fn run(&mut self, g: u64, parts: &[DataBlock], medium: &mut SimMedium<'_>) -> GenerationReport {
        match self {
            Engine::Consensus(e) => e.run_generation(g, parts, medium),
            Engine::QValidity(e) => e.run_generation(g, parts, medium),
        }
    }

    fn terminated(&self) -> Option<u64> {
        match self {
            Engine::Consensus(e) => e.terminated(),
            Engine::QValidity(e) => e.terminated(),
        }
    }

    fn graph(&self) -> &DiagGraph {
        match self {
            Engine::Consensus(e) => e.graph(),
            Engine::QValidity(e) => e.graph(),
        }
    }

    fn diagnosis_count(&self) -> u64 {
        match self {
            Engine::Consensus(e) => e.diagnosis_count(),
            Engine::QValidity(e) => e.diagnosis_count(),
        }
    }
}

/// Runs every generation, assembles outputs and checks the execution.
pub fn run_execution(config: &ExecutionConfig, script: &AdversaryScript) -> Result<Transcript> {
    config.validate()?;
    script.validate(config)?;
    let (n, t) = (config.n, config.t);
    let sym_bytes = config.sym_bytes();
    let oracle = BroadcastOracle::new(n, config.cost_model)?;
    let mut medium = SimMedium::new(&config.faulty, script, oracle, sym_bytes);
    medium.events.push(Event::Header(Box::new(Header {
        config: config.clone(),
        padded_l_bits: config.padded_l_bits(),
        generations: config.generations(),
        sym_bytes,
    })));

    let mut engine = match config.algorithm {
        Algorithm::Consensus => Engine::Consensus(ConsensusEngine::new(n, t, sym_bytes)?),
        Algorithm::QValidity => Engine::QValidity(QValidityEngine::new(
            n,
            t,
            config.q.expect("validated"),
            sym_bytes,
            config.early_terminate,
        )?),
    };
    let mut reports = Vec::new();
    for g in 1..=config.generations() {
        if engine.terminated().is_some() {
            break;
        }
        reports.push(engine.run(g, &config.parts(g), &mut medium));
    }

    let terminated = engine.terminated();
    let graph = engine.graph().clone();
    let outputs = assemble_outputs(config, &reports, &graph, terminated);
    medium.events.push(Event::FinalGraph(graph.snapshot()));
    medium.events.push(Event::Outputs {
        outputs: outputs.clone(),
    });
    medium.events.push(Event::Ledger {
        rows: medium.ledger.rows(),
    });
    let verdict = check(&CheckInput {
        config,
        outputs: &outputs,
        reports: &reports,
        graph: &graph,
        diagnosis_count: engine.diagnosis_count(),
        terminated,
    });
    medium.events.push(Event::Verdict(verdict.clone()));

    Ok(Transcript {
        config: config.clone(),
        events: medium.events,
        outputs,
        reports,
        graph,
        ledger: medium.ledger,
        terminated,
        verdict,
    })
}

pub fn replay(r: &Replay) -> Result<Transcript> {
    run_execution(&r.config, &r.script)
}

/// Concatenates decided parts; a terminated execution outputs the default
/// value everywhere.
fn assemble_outputs(
    config: &ExecutionConfig,
    reports: &[GenerationReport],
    graph: &DiagGraph,
    terminated: Option<u64>,
) -> Vec<Option<DataBlock>> {
    (0..config.n)
        .map(|i| {
            if graph.is_convicted(i) {
                return None;
            }
            if terminated.is_some() {
                return Some(DataBlock::zeroed(config.input_bytes()));
            }
            let mut bytes = Vec::with_capacity(config.padded_l_bits() as usize / 8);
            for rep in reports {
                bytes.extend_from_slice(rep.decisions[i].as_ref()?.as_bytes());
            }
            if reports.len() as u64 != config.generations() {
                return None;
            }
            bytes.truncate(config.input_bytes());
            mask_to_bits(&mut bytes, config.l_bits);
            Some(DataBlock::new(bytes))
        })
        .collect()
}
