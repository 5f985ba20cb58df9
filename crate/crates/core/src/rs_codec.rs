//! Systematic Reed-Solomon erasure code over GF(2^8), interleaved across macro-symbols.
//!
//! An `(n, k)` code evaluates a polynomial of degree `< k` at the points
//! `x_j = j` for `j = 0..n`. Encoding is systematic: the polynomial is the one
//! that takes the data values at positions `0..k`, so the first `k` slots of a
//! codeword are the data verbatim. A macro-symbol of `sym_bytes` bytes is
//! `sym_bytes` independent byte lanes, each lane its own codeword.
//!
//! Only erasure decoding and membership testing are provided. The consensus
//! protocols never correct errors; they localize them through diagnosis.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{config_err, Error, Result};
use crate::gf256;

/// Largest code length supported by GF(2^8) with distinct evaluation points.
pub const MAX_N: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    n: usize,
    k: usize,
    sym_bytes: usize,
}

impl CodeParams {
    pub fn new(n: usize, k: usize, sym_bytes: usize) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(config_err(format!("code length n={n} outside 1..={MAX_N}")));
        }
        if k == 0 || k > n {
            return Err(config_err(format!("dimension k={k} outside 1..={n}")));
        }
        if sym_bytes == 0 {
            return Err(config_err("macro-symbols must be at least one byte"));
        }
        Ok(Self { n, k, sym_bytes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sym_bytes(&self) -> usize {
        self.sym_bytes
    }

    /// Minimum distance of the code, `n - k + 1`.
    pub fn distance(&self) -> usize {
        self.n - self.k + 1
    }

    /// Bytes in one data block (`k` macro-symbols).
    pub fn data_bytes(&self) -> usize {
        self.k * self.sym_bytes
    }
}

/// One coded symbol: a fixed-length byte string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacroSymbol(Vec<u8>);

impl MacroSymbol {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn zeroed(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// XORs `mask` into every byte.
    pub fn xor_mask(&self, mask: u8) -> Self {
        Self(self.0.iter().map(|b| b ^ mask).collect())
    }
}

impl fmt::Debug for MacroSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", hex::encode(&self.0))
    }
}

impl Serialize for MacroSymbol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for MacroSymbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map(Self).map_err(serde::de::Error::custom)
    }
}

/// `n` slots, each a macro-symbol or an erasure (`None`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolVector {
    slots: Vec<Option<MacroSymbol>>,
}

impl SymbolVector {
    pub fn erased(n: usize) -> Self {
        Self {
            slots: vec![None; n],
        }
    }

    pub fn from_slots(slots: Vec<Option<MacroSymbol>>) -> Self {
        Self { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, j: usize) -> Option<&MacroSymbol> {
        self.slots.get(j).and_then(Option::as_ref)
    }

    pub fn set(&mut self, j: usize, value: Option<MacroSymbol>) {
        self.slots[j] = value;
    }

    pub fn slots(&self) -> &[Option<MacroSymbol>] {
        &self.slots
    }

    pub fn is_erased(&self, j: usize) -> bool {
        self.slots[j].is_none()
    }

    /// Positions holding a symbol, ascending.
    pub fn present(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(j, s)| s.as_ref().map(|_| j))
    }

    pub fn present_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_full(&self) -> bool {
        self.slots.iter().all(Option::is_some)
    }

    /// True when the two vectors agree on every slot where both hold a symbol.
    pub fn agrees_on_common(&self, other: &SymbolVector) -> bool {
        self.slots
            .iter()
            .zip(&other.slots)
            .all(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            })
    }
}

/// The `k · sym_bytes` bytes carried by one codeword.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataBlock(Vec<u8>);

impl DataBlock {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn zeroed(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for DataBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DataBlock({})", hex::encode(&self.0))
    }
}

impl Serialize for DataBlock {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for DataBlock {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map(Self).map_err(serde::de::Error::custom)
    }
}

fn eval_point(j: usize) -> u8 {
    debug_assert!(j < MAX_N);
    j as u8
}

/// Lagrange basis coefficients: value at `target` = Σ coeff[m] · value at `sources[m]`.
fn lagrange_coeffs(sources: &[usize], target: usize) -> Vec<u8> {
    let xt = eval_point(target);
    sources
        .iter()
        .enumerate()
        .map(|(m, &sm)| {
            let xm = eval_point(sm);
            let mut num = 1u8;
            let mut den = 1u8;
            for (l, &sl) in sources.iter().enumerate() {
                if l == m {
                    continue;
                }
                let xl = eval_point(sl);
                num = gf256::mul(num, gf256::add(xt, xl));
                den = gf256::mul(den, gf256::add(xm, xl));
            }
            gf256::div(num, den)
        })
        .collect()
}

fn combine(coeffs: &[u8], symbols: &[&[u8]], sym_bytes: usize) -> MacroSymbol {
    let mut out = vec![0u8; sym_bytes];
    for (&c, sym) in coeffs.iter().zip(symbols) {
        if c == 0 {
            continue;
        }
        for (o, &b) in out.iter_mut().zip(sym.iter()) {
            *o ^= gf256::mul(c, b);
        }
    }
    MacroSymbol(out)
}

fn check_symbol_len(params: &CodeParams, sym: &MacroSymbol) -> Result<()> {
    if sym.len() != params.sym_bytes {
        return Err(Error::Length {
            expected: params.sym_bytes,
            actual: sym.len(),
        });
    }
    Ok(())
}

fn check_vector(params: &CodeParams, v: &SymbolVector) -> Result<()> {
    if v.len() != params.n {
        return Err(Error::Length {
            expected: params.n,
            actual: v.len(),
        });
    }
    for s in v.slots.iter().flatten() {
        check_symbol_len(params, s)?;
    }
    Ok(())
}

/// Encodes one data block into a full codeword. Slots `0..k` carry the data.
pub fn encode(params: &CodeParams, data: &DataBlock) -> Result<SymbolVector> {
    if data.len() != params.data_bytes() {
        return Err(Error::Length {
            expected: params.data_bytes(),
            actual: data.len(),
        });
    }
    let sb = params.sym_bytes;
    let chunks: Vec<&[u8]> = data.0.chunks(sb).collect();
    let sources: Vec<usize> = (0..params.k).collect();
    let mut slots = Vec::with_capacity(params.n);
    for chunk in &chunks {
        slots.push(Some(MacroSymbol(chunk.to_vec())));
    }
    for j in params.k..params.n {
        let coeffs = lagrange_coeffs(&sources, j);
        slots.push(Some(combine(&coeffs, &chunks, sb)));
    }
    Ok(SymbolVector { slots })
}

/// Value at position `j` of the unique codeword through the `k` source positions.
pub fn reconstruct_position(
    params: &CodeParams,
    v: &SymbolVector,
    j: usize,
    source_positions: &[usize],
) -> Result<MacroSymbol> {
    check_vector(params, v)?;
    if j >= params.n {
        return Err(config_err(format!(
            "position {j} outside code length {}",
            params.n
        )));
    }
    if source_positions.len() != params.k {
        return Err(Error::InsufficientSymbols {
            needed: params.k,
            available: source_positions.len(),
        });
    }
    let mut symbols = Vec::with_capacity(params.k);
    for (idx, &p) in source_positions.iter().enumerate() {
        if p >= params.n {
            return Err(config_err(format!(
                "source position {p} outside code length"
            )));
        }
        if source_positions[..idx].contains(&p) {
            return Err(config_err(format!("source position {p} repeated")));
        }
        match v.get(p) {
            Some(s) => symbols.push(s.as_bytes()),
            None => {
                return Err(Error::InsufficientSymbols {
                    needed: params.k,
                    available: idx,
                })
            }
        }
    }
    let coeffs = lagrange_coeffs(source_positions, j);
    Ok(combine(&coeffs, &symbols, params.sym_bytes))
}

/// The `k` lowest-index non-erased positions, or `None` if there are fewer.
pub fn first_present(params: &CodeParams, v: &SymbolVector) -> Option<Vec<usize>> {
    let sources: Vec<usize> = v.present().take(params.k).collect();
    (sources.len() == params.k).then_some(sources)
}

/// Whether the non-erased slots are consistent with a single codeword.
///
/// The candidate codeword is interpolated from the `k` lowest-index non-erased
/// slots; every other non-erased slot must agree with it.
pub fn is_codeword(params: &CodeParams, v: &SymbolVector) -> Result<bool> {
    check_vector(params, v)?;
    let available = v.present_count();
    let Some(sources) = first_present(params, v) else {
        return Err(Error::InsufficientSymbols {
            needed: params.k,
            available,
        });
    };
    let symbols: Vec<&[u8]> = sources
        .iter()
        .map(|&p| v.get(p).unwrap().as_bytes())
        .collect();
    for j in v.present() {
        if sources.contains(&j) {
            continue;
        }
        let coeffs = lagrange_coeffs(&sources, j);
        let expect = combine(&coeffs, &symbols, params.sym_bytes);
        if v.get(j) != Some(&expect) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Erasure decoding: recovers the data block of a (possibly partially erased) codeword.
pub fn decode(params: &CodeParams, v: &SymbolVector) -> Result<DataBlock> {
    if !is_codeword(params, v)? {
        return Err(Error::NotACodeword);
    }
    let sources = first_present(params, v).expect("checked by is_codeword");
    let mut out = Vec::with_capacity(params.data_bytes());
    for j in 0..params.k {
        match v.get(j) {
            Some(s) => out.extend_from_slice(s.as_bytes()),
            None => out.extend(reconstruct_position(params, v, j, &sources)?.0),
        }
    }
    Ok(DataBlock(out))
}

/// Exact minimum distance by enumerating every codeword (single-byte symbols,
/// at most 2^16 messages).
///
/// The code is linear, so the minimum distance over distinct pairs equals the
/// minimum weight over non-zero codewords.
pub fn min_distance_bruteforce(params: &CodeParams) -> Result<usize> {
    if params.sym_bytes != 1 {
        return Err(Error::Guard("requires sym_bytes = 1".into()));
    }
    if params.k * 8 > 16 {
        return Err(Error::Guard(format!(
            "k={} gives 2^{} messages, limit is 2^16",
            params.k,
            params.k * 8
        )));
    }
    let total: u32 = 1 << (8 * params.k);
    let mut best = usize::MAX;
    for m in 1..total {
        let bytes: Vec<u8> = (0..params.k).map(|i| (m >> (8 * i)) as u8).collect();
        let cw = encode(params, &DataBlock(bytes))?;
        let weight = cw
            .slots
            .iter()
            .filter(|s| s.as_ref().is_some_and(|s| s.0[0] != 0))
            .count();
        best = best.min(weight);
    }
    Ok(best)
}

/// One line of a codec test-vector file: `n k sym_bytes data_hex codeword_hex`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestVector {
    pub params: CodeParams,
    pub data: DataBlock,
    /// All `n` symbols concatenated.
    pub codeword: Vec<u8>,
}

impl TestVector {
    pub fn codeword_vector(&self) -> SymbolVector {
        SymbolVector {
            slots: self
                .codeword
                .chunks(self.params.sym_bytes)
                .map(|c| Some(MacroSymbol(c.to_vec())))
                .collect(),
        }
    }
}

impl FromStr for TestVector {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [n, k, sb, data, cw] = fields[..] else {
            return Err(Error::Parse(format!(
                "expected 5 fields, got {}",
                fields.len()
            )));
        };
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(e.to_string()));
        let params = CodeParams::new(num(n)?, num(k)?, num(sb)?)?;
        let data = hex::decode(data).map_err(|e| Error::Parse(e.to_string()))?;
        let codeword = hex::decode(cw).map_err(|e| Error::Parse(e.to_string()))?;
        if data.len() != params.data_bytes() {
            return Err(Error::Length {
                expected: params.data_bytes(),
                actual: data.len(),
            });
        }
        if codeword.len() != params.n * params.sym_bytes {
            return Err(Error::Length {
                expected: params.n * params.sym_bytes,
                actual: codeword.len(),
            });
        }
        Ok(Self {
            params,
            data: DataBlock(data),
            codeword,
        })
    }
}

impl fmt::Display for TestVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {}",
            self.params.n,
            self.params.k,
            self.params.sym_bytes,
            hex::encode(&self.data.0),
            hex::encode(&self.codeword)
        )
    }
}
