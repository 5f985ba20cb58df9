use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bcast::BroadcastCostModel;
use crate::error::{config_err, Error, Result};
use crate::simnet::scripts::{make_inputs, random_script, InputPlan};
use crate::simnet::{choose_d, run_execution, Algorithm, ExecutionConfig, Replay, Transcript};
use crate::ProcessorId;

/// Inclusive range of `q` values; each trial draws one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QRange {
    pub lo: usize,
    pub hi: usize,
}

impl std::str::FromStr for QRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| config_err(format!("bad q '{x}': {e}")))
        };
        match s.split_once("..") {
            Some((a, b)) => Ok(QRange {
                lo: parse(a)?,
                hi: parse(b.trim_start_matches('='))?,
            }),
            None => {
                let q = parse(s)?;
                Ok(QRange { lo: q, hi: q })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub algorithm: Algorithm,
    pub n: usize,
    pub t: usize,
    pub q: Option<QRange>,
    pub l_bits: u64,
    /// `None` picks the generation size from `l_bits` and the code dimension.
    pub d_bits: Option<u64>,
    pub trials: u64,
    pub seed: u64,
    pub cost_model: BroadcastCostModel,
    /// Fixed faulty set; `None` draws one per trial.
    pub faulty: Option<BTreeSet<ProcessorId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub n: usize,
    pub t: usize,
    pub q: Option<usize>,
    #[serde(rename = "L")]
    pub l_bits: u64,
    #[serde(rename = "D")]
    pub d_bits: u64,
    pub verdict: String,
    pub diagnosis_count: u64,
    pub p2p_bits: u64,
    pub bcast_bits: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Lowest-seed failing execution, ready for replay.
    pub first_failure: Option<Replay>,
    pub failures: usize,
    pub max_diagnosis_count: u64,
    /// Executions whose diagnosis count exceeded the worst-case bound.
    pub over_bound: usize,
    /// Largest per-generation matching-stage symbol count.
    pub max_matching_symbols: u64,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| config_err(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| config_err(format!("csv: {e}")))?;
        Ok(())
    }
}

/// The `index`-th execution of a sweep. Each trial has its own seed and RNG,
/// so trials are independent of scheduling.
pub fn trial(spec: &SweepSpec, index: u64) -> Result<Replay> {
    let seed = spec.seed.wrapping_add(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, t) = (spec.n, spec.t);
    let q = match (spec.algorithm, spec.q) {
        (Algorithm::QValidity, Some(r)) => Some(rng.gen_range(r.lo..=r.hi)),
        (Algorithm::QValidity, None) => return Err(config_err("q-validity sweep needs q")),
        (Algorithm::Consensus, _) => None,
    };
    let k = q.unwrap_or(n - t) as u64;
    let d_bits = spec.d_bits.unwrap_or_else(|| choose_d(spec.l_bits, 8 * k));
    let faulty: BTreeSet<ProcessorId> = match &spec.faulty {
        Some(f) => f.clone(),
        None => {
            let count = if t == 0 || rng.gen_bool(0.8) {
                t
            } else {
                rng.gen_range(0..t)
            };
            sample(&mut rng, n, count).into_iter().collect()
        }
    };
    let good = n - faulty.len();
    let plan = match spec.algorithm {
        Algorithm::Consensus => match rng.gen_range(0..10) {
            0..=6 => InputPlan::Identical,
            7..=8 => InputPlan::Diverge {
                holders: rng.gen_range(1..good),
            },
            _ => InputPlan::Random,
        },
        Algorithm::QValidity => {
            let q = q.expect("set above");
            match rng.gen_range(0..10) {
                0..=2 => InputPlan::Identical,
                3..=5 => InputPlan::Shared {
                    holders: rng.gen_range(q.min(good)..=good),
                },
                6..=8 => InputPlan::Diverge {
                    holders: rng.gen_range(q.min(good)..=good),
                },
                _ => InputPlan::Random,
            }
        }
    };
    let mut config = ExecutionConfig {
        algorithm: spec.algorithm,
        n,
        t,
        q,
        l_bits: spec.l_bits,
        d_bits,
        seed,
        faulty,
        inputs: Vec::new(),
        cost_model: spec.cost_model,
        early_terminate: false,
    };
    config.inputs = make_inputs(&mut rng, n, spec.l_bits, d_bits, &config.faulty, plan);
    let script = random_script(&mut rng, &config);
    Ok(Replay { config, script })
}

impl SweepRow {
    pub fn from_transcript(t: &Transcript) -> Self {
        let c = &t.config;
        let total = t.ledger.total();
        SweepRow {
            seed: c.seed,
            algorithm: c.algorithm,
            n: c.n,
            t: c.t,
            q: c.q,
            l_bits: c.l_bits,
            d_bits: c.d_bits,
            verdict: t.verdict.label().to_string(),
            diagnosis_count: t.verdict.diagnosis_count,
            p2p_bits: total.p2p_bits,
            bcast_bits: total.broadcast_charged_bits,
        }
    }
}

/// Runs `spec.trials` independent executions in parallel and merges the
/// results in seed order.
pub fn sweep(spec: &SweepSpec) -> Result<SweepReport> {
    if spec.trials == 0 {
        return Err(config_err("trials must be at least 1"));
    }
    let results: Vec<Result<(Replay, Transcript)>> = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let r = trial(spec, i)?;
            let t = run_execution(&r.config, &r.script)?;
            Ok((r, t))
        })
        .collect();
    let mut report = SweepReport::default();
    for res in results {
        let (replay, transcript) = res?;
        let v = &transcript.verdict;
        report.max_diagnosis_count = report.max_diagnosis_count.max(v.diagnosis_count);
        report.over_bound += usize::from(!v.within_bound());
        let symbols = transcript
            .ledger
            .generations()
            .map(|g| {
                transcript
                    .ledger
                    .get(g, crate::ledger::Stage::Matching)
                    .p2p_symbols
            })
            .max()
            .unwrap_or(0);
        report.max_matching_symbols = report.max_matching_symbols.max(symbols);
        if !v.pass {
            report.failures += 1;
            if report.first_failure.is_none() {
                report.first_failure = Some(replay);
            }
        }
        report.rows.push(SweepRow::from_transcript(&transcript));
    }
    Ok(report)
}
