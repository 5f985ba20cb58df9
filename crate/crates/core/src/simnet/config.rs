use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bcast::BroadcastCostModel;
use crate::error::{config_err, Result};
use crate::rs_codec::{DataBlock, MAX_N};
use crate::ProcessorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Plain consensus: match set of at least `n - t`, `(n, n-t)` code.
    #[serde(rename = "alg1")]
    Consensus,
    /// Consensus with q-validity: `q`-clique match set, `(n, q)` code.
    #[serde(rename = "alg2")]
    QValidity,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Consensus => "alg1",
            Algorithm::QValidity => "alg2",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alg1" | "1" => Ok(Algorithm::Consensus),
            "alg2" | "2" => Ok(Algorithm::QValidity),
            other => Err(config_err(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Everything that determines an execution, apart from the adversary script.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    /// Input length in bits.
    pub l_bits: u64,
    /// Generation size in bits.
    pub d_bits: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub faulty: BTreeSet<ProcessorId>,
    /// One input per processor, `ceil(l_bits / 8)` bytes, most significant
    /// bit first; unused low-order bits of the last byte zero.
    pub inputs: Vec<DataBlock>,
    #[serde(default)]
    pub cost_model: BroadcastCostModel,
    /// q-validity only: stop at the first generation without a match set.
    #[serde(default)]
    pub early_terminate: bool,
}

impl ExecutionConfig {
    /// Code dimension: `n - t` for consensus, `q` for q-validity.
    pub fn code_k(&self) -> usize {
        match self.algorithm {
            Algorithm::Consensus => self.n - self.t,
            Algorithm::QValidity => self.q.unwrap_or(0),
        }
    }

    pub fn input_bytes(&self) -> usize {
        self.l_bits.div_ceil(8) as usize
    }

    /// Input length after zero-padding to a whole number of generations.
    pub fn padded_l_bits(&self) -> u64 {
        self.l_bits.div_ceil(self.d_bits) * self.d_bits
    }

    pub fn generations(&self) -> u64 {
        self.padded_l_bits() / self.d_bits
    }

    pub fn sym_bytes(&self) -> usize {
        (self.d_bits / (8 * self.code_k() as u64)) as usize
    }

    pub fn part_bytes(&self) -> usize {
        (self.d_bits / 8) as usize
    }

    pub fn is_faulty(&self, i: ProcessorId) -> bool {
        self.faulty.contains(&i)
    }

    pub fn fault_free(&self) -> impl Iterator<Item = ProcessorId> + '_ {
        (0..self.n).filter(|i| !self.faulty.contains(i))
    }

    pub fn validate(&self) -> Result<()> {
        let (n, t) = (self.n, self.t);
        if n == 0 || n > MAX_N {
            return Err(config_err(format!("n = {n} outside [1, {MAX_N}]")));
        }
        if n < 3 * t + 1 {
            return Err(config_err(format!("n = {n} < 3t + 1 = {}", 3 * t + 1)));
        }
        if self.faulty.len() > t {
            return Err(config_err(format!(
                "{} faulty processors exceed t = {t}",
                self.faulty.len()
            )));
        }
        if let Some(&bad) = self.faulty.iter().find(|&&i| i >= n) {
            return Err(config_err(format!("faulty id {bad} out of range")));
        }
        match (self.algorithm, self.q) {
            (Algorithm::QValidity, None) => return Err(config_err("q-validity needs q")),
            (Algorithm::QValidity, Some(q)) if q < t + 1 || q + t > n => {
                return Err(config_err(format!(
                    "q = {q} outside [t+1, n-t] = [{}, {}]",
                    t + 1,
                    n - t
                )))
            }
            (Algorithm::Consensus, Some(_)) => {
                return Err(config_err("q applies to the q-validity protocol only"))
            }
            _ => {}
        }
        if self.early_terminate && self.algorithm == Algorithm::Consensus {
            return Err(config_err(
                "early_terminate applies to the q-validity protocol only",
            ));
        }
        if self.l_bits == 0 {
            return Err(config_err("l_bits must be positive"));
        }
        let unit = 8 * self.code_k() as u64;
        if self.d_bits == 0 || !self.d_bits.is_multiple_of(unit) {
            return Err(config_err(format!(
                "d_bits = {} must be a positive multiple of {unit}",
                self.d_bits
            )));
        }
        if self.inputs.len() != n {
            return Err(config_err(format!(
                "{} inputs for n = {n}",
                self.inputs.len()
            )));
        }
        let bytes = self.input_bytes();
        let spare = (8 * bytes as u64 - self.l_bits) as u32;
        for (i, v) in self.inputs.iter().enumerate() {
            if v.len() != bytes {
                return Err(config_err(format!(
                    "input {i} has {} bytes, expected {bytes}",
                    v.len()
                )));
            }
            if spare > 0 && v.as_bytes()[bytes - 1] & ((1u8 << spare) - 1) != 0 {
                return Err(config_err(format!("input {i} sets bits beyond l_bits")));
            }
        }
        self.cost_model.validate(n)
    }

    /// Part `generation` (1-based) of processor `i`'s zero-padded input.
    pub fn part(&self, i: ProcessorId, generation: u64) -> DataBlock {
        let pb = self.part_bytes();
        let start = (generation as usize - 1) * pb;
        let src = self.inputs[i].as_bytes();
        let mut out = vec![0u8; pb];
        if start < src.len() {
            let end = (start + pb).min(src.len());
            out[..end - start].copy_from_slice(&src[start..end]);
        }
        DataBlock::new(out)
    }

    pub fn parts(&self, generation: u64) -> Vec<DataBlock> {
        (0..self.n).map(|i| self.part(i, generation)).collect()
    }
}

/// Bits are packed most-significant first: bit `b` of a value lives in byte
/// `b / 8` at position `7 - b % 8`. Clears bits at index `l_bits` and beyond.
pub fn mask_to_bits(bytes: &mut [u8], l_bits: u64) {
    let full = (l_bits / 8) as usize;
    let rem = (l_bits % 8) as u32;
    if full < bytes.len() {
        if rem > 0 {
            bytes[full] &= 0xffu8 << (8 - rem);
            bytes[full + 1..].fill(0);
        } else {
            bytes[full..].fill(0);
        }
    }
}

/// Generation size: the smallest multiple of `base` that is at least
/// `ceil(sqrt(l_bits))`, capped at `l_bits` rounded up to a multiple of `base`.
pub fn choose_d(l_bits: u64, base: u64) -> u64 {
    assert!(base > 0 && l_bits > 0);
    let mut root = (l_bits as f64).sqrt() as u64;
    while root * root < l_bits {
        root += 1;
    }
    while root > 0 && (root - 1) * (root - 1) >= l_bits {
        root -= 1;
    }
    let d = root.div_ceil(base) * base;
    d.min(l_bits.div_ceil(base) * base)
}
