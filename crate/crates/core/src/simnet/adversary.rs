//! Scripted Byzantine behavior.
//!
//! A script maps each faulty processor to ordered rule lists. Every message
//! the processor would send (point-to-point or broadcast) passes through all
//! rules whose filters match, in order. Unmatched messages go out honestly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bcast::{BroadcastPayload, BroadcastTag};
use crate::error::{config_err, Result};
use crate::protocol::{SendObligation, Step};
use crate::rs_codec::MacroSymbol;
use crate::simnet::ExecutionConfig;
use crate::ProcessorId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum P2pAction {
    Honest,
    /// XOR every byte of the symbol with `mask`.
    Corrupt {
        mask: u8,
    },
    Silent,
    /// Send `value` instead (resized to the symbol length, zero-filled).
    Replace {
        value: MacroSymbol,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P2pRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<ProcessorId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    pub action: P2pAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportPart {
    Own,
    Received,
    /// The recomputed symbol; `slot` is ignored.
    Relayed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BroadcastAction {
    Honest,
    Silent,
    /// Replace an error flag.
    SetDetected {
        value: bool,
    },
    /// Overwrite one entry of a mutual-match vector.
    SetMatch {
        index: usize,
        value: bool,
    },
    /// XOR one reported symbol with `mask`; an erased slot becomes a symbol
    /// filled with `mask`.
    CorruptReport {
        part: ReportPart,
        slot: usize,
        mask: u8,
    },
    /// Report one slot as erased.
    EraseReport {
        part: ReportPart,
        slot: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadcastRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<BroadcastTag>,
    pub action: BroadcastAction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Behavior {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p2p: Vec<P2pRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub broadcast: Vec<BroadcastRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryScript {
    #[serde(default)]
    pub behaviors: BTreeMap<ProcessorId, Behavior>,
}

fn resize(value: &MacroSymbol, len: usize) -> MacroSymbol {
    let mut b = value.as_bytes().to_vec();
    b.resize(len, 0);
    MacroSymbol::new(b)
}

impl P2pRule {
    fn matches(&self, generation: u64, ob: &SendObligation) -> bool {
        self.generation.is_none_or(|g| g == generation)
            && self.step.is_none_or(|s| s == ob.step)
            && self.receiver.is_none_or(|r| r == ob.receiver)
            && self.slot.is_none_or(|k| k == ob.slot)
    }
}

impl BroadcastRule {
    fn matches(&self, generation: u64, tag: BroadcastTag) -> bool {
        self.generation.is_none_or(|g| g == generation) && self.tag.is_none_or(|t| t == tag)
    }
}

fn edit_report_slot(
    payload: &mut BroadcastPayload,
    part: ReportPart,
    slot: usize,
    f: impl FnOnce(Option<MacroSymbol>) -> Option<MacroSymbol>,
) {
    let BroadcastPayload::Report(r) = payload else {
        return;
    };
    match part {
        ReportPart::Relayed => r.relayed = f(r.relayed.take()),
        ReportPart::Own | ReportPart::Received => {
            let v = if part == ReportPart::Own {
                &mut r.own
            } else {
                &mut r.received
            };
            if slot < v.len() {
                let cur = v.get(slot).cloned();
                v.set(slot, f(cur));
            }
        }
    }
}

impl Behavior {
    pub fn apply_p2p(
        &self,
        generation: u64,
        ob: &SendObligation,
        mut value: Option<MacroSymbol>,
        sym_bytes: usize,
    ) -> Option<MacroSymbol> {
        for rule in self.p2p.iter().filter(|r| r.matches(generation, ob)) {
            value = match &rule.action {
                P2pAction::Honest => value,
                P2pAction::Corrupt { mask } => value.map(|v| v.xor_mask(*mask)),
                P2pAction::Silent => None,
                P2pAction::Replace { value } => Some(resize(value, sym_bytes)),
            };
        }
        value
    }

    pub fn apply_broadcast(
        &self,
        generation: u64,
        tag: BroadcastTag,
        mut payload: BroadcastPayload,
        sym_bytes: usize,
    ) -> BroadcastPayload {
        for rule in self.broadcast.iter().filter(|r| r.matches(generation, tag)) {
            match &rule.action {
                BroadcastAction::Honest => {}
                BroadcastAction::Silent => payload = BroadcastPayload::Nil,
                BroadcastAction::SetDetected { value } => {
                    if let BroadcastPayload::Detected(b) = &mut payload {
                        *b = *value;
                    }
                }
                BroadcastAction::SetMatch { index, value } => {
                    if let BroadcastPayload::MatchVector(v) = &mut payload {
                        if let Some(e) = v.get_mut(*index) {
                            *e = *value;
                        }
                    }
                }
                BroadcastAction::CorruptReport { part, slot, mask } => {
                    let mask = *mask;
                    edit_report_slot(&mut payload, *part, *slot, |cur| {
                        Some(match cur {
                            Some(s) => s.xor_mask(mask),
                            None => MacroSymbol::new(vec![mask; sym_bytes]),
                        })
                    });
                }
                BroadcastAction::EraseReport { part, slot } => {
                    edit_report_slot(&mut payload, *part, *slot, |_| None);
                }
            }
        }
        payload
    }
}

impl AdversaryScript {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn behavior(&self, i: ProcessorId) -> Option<&Behavior> {
        self.behaviors.get(&i)
    }

    /// Only faulty processors may have behaviors; ids must be in range.
    pub fn validate(&self, config: &ExecutionConfig) -> Result<()> {
        let n = config.n;
        for (&i, b) in &self.behaviors {
            if !config.is_faulty(i) {
                return Err(config_err(format!(
                    "script gives behavior to processor {i}, which is not faulty"
                )));
            }
            for r in &b.p2p {
                if r.receiver.is_some_and(|x| x >= n) || r.slot.is_some_and(|x| x >= n) {
                    return Err(config_err(format!(
                        "processor {i}: p2p rule targets an id outside 0..{n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcast::DiagnosisReport;
    use crate::rs_codec::SymbolVector;

    fn ob(step: Step, receiver: ProcessorId, slot: usize) -> SendObligation {
        SendObligation {
            step,
            sender: 0,
            receiver,
            slot,
        }
    }

    #[test]
    fn rules_compose_in_order() {
        let b = Behavior {
            p2p: vec![
                P2pRule {
                    generation: None,
                    step: Some(Step::OwnSymbol),
                    receiver: None,
                    slot: None,
                    action: P2pAction::Corrupt { mask: 0x0f },
                },
                P2pRule {
                    generation: Some(2),
                    step: None,
                    receiver: Some(3),
                    slot: None,
                    action: P2pAction::Silent,
                },
            ],
            broadcast: vec![],
        };
        let v = Some(MacroSymbol::new(vec![0xf0, 0x00]));
        assert_eq!(
            b.apply_p2p(1, &ob(Step::OwnSymbol, 3, 0), v.clone(), 2),
            Some(MacroSymbol::new(vec![0xff, 0x0f]))
        );
        assert_eq!(
            b.apply_p2p(2, &ob(Step::OwnSymbol, 3, 0), v.clone(), 2),
            None
        );
        assert_eq!(b.apply_p2p(1, &ob(Step::Helper, 2, 1), v.clone(), 2), v);
    }

    #[test]
    fn broadcast_edits() {
        let b = Behavior {
            p2p: vec![],
            broadcast: vec![
                BroadcastRule {
                    generation: None,
                    tag: Some(BroadcastTag::Report),
                    action: BroadcastAction::CorruptReport {
                        part: ReportPart::Received,
                        slot: 1,
                        mask: 0xaa,
                    },
                },
                BroadcastRule {
                    generation: None,
                    tag: Some(BroadcastTag::Detected),
                    action: BroadcastAction::SetDetected { value: true },
                },
            ],
        };
        let rep = BroadcastPayload::Report(DiagnosisReport {
            own: SymbolVector::erased(3),
            received: SymbolVector::erased(3),
            relayed: None,
        });
        let BroadcastPayload::Report(r) = b.apply_broadcast(1, BroadcastTag::Report, rep, 1) else {
            panic!()
        };
        assert_eq!(r.received.get(1), Some(&MacroSymbol::new(vec![0xaa])));
        assert_eq!(
            b.apply_broadcast(
                1,
                BroadcastTag::Detected,
                BroadcastPayload::Detected(false),
                1
            ),
            BroadcastPayload::Detected(true)
        );
    }

    #[test]
    fn script_json_round_trip() {
        let json = r#"{"behaviors":{"2":{"p2p":[{"step":"own_symbol","receiver":3,"action":{"kind":"corrupt","mask":1}}],
            "broadcast":[{"tag":"detected","action":{"kind":"silent"}}]}}}"#;
        let s: AdversaryScript = serde_json::from_str(json).unwrap();
        let back: AdversaryScript =
            serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.behaviors[&2].p2p[0].step, Some(Step::OwnSymbol));
    }
}
