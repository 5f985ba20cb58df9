//! Exact bit accounting, split by generation and protocol stage.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Matching,
    Checking,
    Diagnosis,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCost {
    pub p2p_bits: u64,
    pub p2p_symbols: u64,
    pub broadcast_payload_bits: u64,
    pub broadcast_charged_bits: u64,
}

impl StageCost {
    fn add(&mut self, other: &StageCost) {
        self.p2p_bits += other.p2p_bits;
        self.p2p_symbols += other.p2p_symbols;
        self.broadcast_payload_bits += other.broadcast_payload_bits;
        self.broadcast_charged_bits += other.broadcast_charged_bits;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    entries: BTreeMap<(u64, Stage), StageCost>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub generation: u64,
    pub stage: Stage,
    #[serde(flatten)]
    pub cost: StageCost,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_p2p(&mut self, generation: u64, stage: Stage, bits: u64) {
        let e = self.entries.entry((generation, stage)).or_default();
        e.p2p_bits += bits;
        e.p2p_symbols += 1;
    }

    pub fn charge_broadcast(
        &mut self,
        generation: u64,
        stage: Stage,
        payload_bits: u64,
        charged_bits: u64,
    ) {
        let e = self.entries.entry((generation, stage)).or_default();
        e.broadcast_payload_bits += payload_bits;
        e.broadcast_charged_bits += charged_bits;
    }

    pub fn get(&self, generation: u64, stage: Stage) -> StageCost {
        self.entries
            .get(&(generation, stage))
            .copied()
            .unwrap_or_default()
    }

    pub fn total(&self) -> StageCost {
        let mut acc = StageCost::default();
        for c in self.entries.values() {
            acc.add(c);
        }
        acc
    }

    pub fn stage_total(&self, stage: Stage) -> StageCost {
        let mut acc = StageCost::default();
        for c in self
            .entries
            .iter()
            .filter(|((_, s), _)| *s == stage)
            .map(|(_, c)| c)
        {
            acc.add(c);
        }
        acc
    }

    pub fn generation_total(&self, generation: u64) -> StageCost {
        let mut acc = StageCost::default();
        for c in self
            .entries
            .range((generation, Stage::Matching)..=(generation, Stage::Diagnosis))
            .map(|(_, c)| c)
        {
            acc.add(c);
        }
        acc
    }

    /// Point-to-point bits carried in matching stages: the data term.
    pub fn data_bits(&self) -> u64 {
        self.stage_total(Stage::Matching).p2p_bits
    }

    /// Everything that is not matching-stage point-to-point traffic.
    pub fn overhead_bits(&self) -> u64 {
        let t = self.total();
        t.broadcast_charged_bits + (t.p2p_bits - self.data_bits())
    }

    pub fn generations(&self) -> impl Iterator<Item = u64> + '_ {
        let mut last = None;
        self.entries.keys().filter_map(move |(g, _)| {
            if last == Some(*g) {
                None
            } else {
                last = Some(*g);
                Some(*g)
            }
        })
    }

    pub fn rows(&self) -> Vec<LedgerRow> {
        self.entries
            .iter()
            .map(|(&(generation, stage), &cost)| LedgerRow {
                generation,
                stage,
                cost,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_split_data_and_overhead() {
        let mut l = CostLedger::new();
        l.charge_p2p(1, Stage::Matching, 80);
        l.charge_p2p(1, Stage::Matching, 80);
        l.charge_broadcast(1, Stage::Checking, 1, 16);
        l.charge_broadcast(2, Stage::Diagnosis, 10, 160);
        assert_eq!(l.data_bits(), 160);
        assert_eq!(l.overhead_bits(), 176);
        assert_eq!(l.get(1, Stage::Matching).p2p_symbols, 2);
        assert_eq!(l.generation_total(2).broadcast_payload_bits, 10);
        assert_eq!(l.generations().collect::<Vec<_>>(), vec![1, 2]);
    }
}
