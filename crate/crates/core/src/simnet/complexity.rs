use serde::{Deserialize, Serialize};

use crate::ledger::Stage;
use crate::simnet::{Algorithm, ExecutionConfig, Transcript};

/// Measured traffic against the closed-form matching-stage formulas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub generations: u64,
    /// Matching-stage point-to-point bits.
    pub data_bits: u64,
    /// `n(n-1)·L'/k` for the padded length `L'` and code dimension `k`:
    /// the matching traffic when every processor is in the match set and trusted.
    pub data_formula_bits: u64,
    /// Broadcast bits (as charged) plus point-to-point bits outside matching.
    pub overhead_bits: u64,
    /// Charged cost of the error-flag broadcasts alone: `generations · n · cost(1 bit)`
    /// when every processor broadcasts every generation.
    pub detected_formula_bits: u64,
    pub broadcast_charged_bits: u64,
    /// Per-generation matching-stage symbol counts.
    pub matching_symbols: Vec<u64>,
    /// `(2n-q)(n-1)` for q-validity, `n(n-1)` otherwise.
    pub symbol_bound: u64,
    pub within_symbol_bound: bool,
}

pub fn check_complexity(transcript: &Transcript, config: &ExecutionConfig) -> ComplexityReport {
    let n = config.n as u64;
    let k = config.code_k() as u64;
    let ledger = &transcript.ledger;
    let generations: Vec<u64> = ledger.generations().collect();
    let matching_symbols: Vec<u64> = (1..=config.generations())
        .filter(|g| generations.contains(g))
        .map(|g| ledger.get(g, Stage::Matching).p2p_symbols)
        .collect();
    let symbol_bound = match config.algorithm {
        Algorithm::Consensus => n * (n - 1),
        Algorithm::QValidity => (2 * n - k) * (n - 1),
    };
    let per_bit = config.cost_model.per_payload_bit(config.n);
    ComplexityReport {
        generations: config.generations(),
        data_bits: ledger.data_bits(),
        data_formula_bits: n * (n - 1) * config.padded_l_bits() / k,
        overhead_bits: ledger.overhead_bits(),
        detected_formula_bits: config.generations() * n * per_bit,
        broadcast_charged_bits: ledger.total().broadcast_charged_bits,
        within_symbol_bound: matching_symbols.iter().all(|&s| s <= symbol_bound),
        matching_symbols,
        symbol_bound,
    }
}
