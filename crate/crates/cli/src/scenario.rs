//! Scenario files: an execution configuration with generated inputs, an
//! optional adversary script and expected-outcome annotations.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ecbc_core::bcast::BroadcastCostModel;
use ecbc_core::simnet::scripts::{make_inputs, random_value, InputPlan};
use ecbc_core::simnet::{
    check_complexity, choose_d, AdversaryScript, Algorithm, ComplexityReport, ExecutionConfig,
};
use ecbc_core::{DataBlock, ProcessorId, Transcript};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// How to produce per-processor inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    /// One random value (from the seed) for everybody.
    Identical,
    /// The lowest `holders` fault-free processors share a value.
    Shared { holders: usize },
    /// Each group gets its own random value; unlisted processors join the first group.
    Split { groups: Vec<Vec<ProcessorId>> },
    /// Hex-encoded values, one per processor.
    Explicit { values: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedOutcome {
    /// Every generation decided normally or after diagnosis.
    Decided,
    TerminatedDefault,
}

/// Annotations checked after the run; absent fields are not checked.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default)]
    pub verdict: Option<String>,
    #[serde(default)]
    pub outcome: Option<ExpectedOutcome>,
    #[serde(default)]
    pub data_bits: Option<u64>,
    #[serde(default)]
    pub max_diagnoses: Option<u64>,
}

fn identical() -> InputSpec {
    InputSpec::Identical
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub algorithm: Algorithm,
    pub n: usize,
    pub t: usize,
    #[serde(default)]
    pub q: Option<usize>,
    pub l_bits: u64,
    /// Chosen from `l_bits` when absent.
    #[serde(default)]
    pub d_bits: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub faulty: BTreeSet<ProcessorId>,
    #[serde(default = "identical")]
    pub inputs: InputSpec,
    #[serde(default)]
    pub cost_model: BroadcastCostModel,
    #[serde(default)]
    pub early_terminate: bool,
    #[serde(default)]
    pub script: AdversaryScript,
    #[serde(default)]
    pub expect: Expectation,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies `key=value`; the value is read as JSON, falling back to a string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let Some((key, raw)) = assignment.split_once('=') else {
            bail!("override '{assignment}' is not key=value");
        };
        let value: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut doc = serde_json::to_value(&*self)?;
        let Value::Object(map) = &mut doc else {
            unreachable!("scenario serializes to an object")
        };
        if !map.contains_key(key) {
            bail!("unknown scenario field '{key}'");
        }
        map.insert(key.to_string(), value);
        *self = serde_json::from_value(doc).with_context(|| format!("override '{assignment}'"))?;
        Ok(())
    }

    pub fn code_k(&self) -> usize {
        match self.algorithm {
            Algorithm::Consensus => self.n.saturating_sub(self.t),
            Algorithm::QValidity => self.q.unwrap_or(0),
        }
        .max(1)
    }

    /// Resolves into a validated configuration and script.
    pub fn build(&self) -> Result<(ExecutionConfig, AdversaryScript)> {
        let d_bits = self
            .d_bits
            .unwrap_or_else(|| choose_d(self.l_bits, 8 * self.code_k() as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let inputs = match &self.inputs {
            InputSpec::Identical => make_inputs(
                &mut rng,
                self.n,
                self.l_bits,
                d_bits,
                &self.faulty,
                InputPlan::Identical,
            ),
            InputSpec::Shared { holders } => make_inputs(
                &mut rng,
                self.n,
                self.l_bits,
                d_bits,
                &self.faulty,
                InputPlan::Shared { holders: *holders },
            ),
            InputSpec::Split { groups } => {
                let values: Vec<DataBlock> = groups
                    .iter()
                    .map(|_| random_value(&mut rng, self.l_bits))
                    .collect();
                let Some(first) = values.first() else {
                    bail!("split needs at least one group")
                };
                let mut inputs = vec![first.clone(); self.n];
                for (group, value) in groups.iter().zip(&values) {
                    for &i in group {
                        if i >= self.n {
                            bail!("split group names processor {i} but n = {}", self.n);
                        }
                        inputs[i] = value.clone();
                    }
                }
                inputs
            }
            InputSpec::Explicit { values } => values
                .iter()
                .map(|h| {
                    hex::decode(h)
                        .map(DataBlock::new)
                        .context("explicit input is not hex")
                })
                .collect::<Result<_>>()?,
        };
        let config = ExecutionConfig {
            algorithm: self.algorithm,
            n: self.n,
            t: self.t,
            q: self.q,
            l_bits: self.l_bits,
            d_bits,
            seed: self.seed,
            faulty: self.faulty.clone(),
            inputs,
            cost_model: self.cost_model,
            early_terminate: self.early_terminate,
        };
        config.validate()?;
        self.script.validate(&config)?;
        Ok((config, self.script.clone()))
    }
}

/// Mismatches between a finished run and its annotations.
pub fn unmet_expectations(
    expect: &Expectation,
    transcript: &Transcript,
    complexity: &ComplexityReport,
) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(v) = &expect.verdict {
        if !v.eq_ignore_ascii_case(transcript.verdict.label()) {
            out.push(format!(
                "verdict {} (expected {v})",
                transcript.verdict.label()
            ));
        }
    }
    if let Some(o) = expect.outcome {
        let got = if transcript.terminated.is_some() {
            ExpectedOutcome::TerminatedDefault
        } else {
            ExpectedOutcome::Decided
        };
        if got != o {
            out.push(format!("outcome {got:?} (expected {o:?})"));
        }
    }
    if let Some(bits) = expect.data_bits {
        if complexity.data_bits != bits {
            out.push(format!(
                "data bits {} (expected {bits})",
                complexity.data_bits
            ));
        }
    }
    if let Some(max) = expect.max_diagnoses {
        if transcript.verdict.diagnosis_count > max {
            out.push(format!(
                "{} diagnoses (expected at most {max})",
                transcript.verdict.diagnosis_count
            ));
        }
    }
    out
}

pub fn complexity(transcript: &Transcript) -> ComplexityReport {
    check_complexity(transcript, &transcript.config)
}
