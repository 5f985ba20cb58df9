//! Input generation, the random script grammar and hand-written attack scenarios.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bcast::{BroadcastCostModel, BroadcastTag};
use crate::protocol::Step;
use crate::rs_codec::{DataBlock, MacroSymbol};
use crate::simnet::{
    mask_to_bits, AdversaryScript, Algorithm, Behavior, BroadcastAction, BroadcastRule,
    ExecutionConfig, P2pAction, P2pRule, Replay, ReportPart,
};
use crate::ProcessorId;

/// How fault-free inputs relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputPlan {
    /// Every processor holds the same value.
    Identical,
    /// The lowest `holders` fault-free processors share a value; the others
    /// hold independent random values.
    Shared { holders: usize },
    /// Like `Shared`, but the others differ from the shared value in a single
    /// random generation only.
    Diverge { holders: usize },
    /// Every processor holds an independent random value.
    Random,
}

pub fn random_value<R: Rng>(rng: &mut R, l_bits: u64) -> DataBlock {
    let mut bytes = vec![0u8; l_bits.div_ceil(8) as usize];
    rng.fill(bytes.as_mut_slice());
    mask_to_bits(&mut bytes, l_bits);
    DataBlock::new(bytes)
}

/// Builds per-processor inputs. Faulty processors always get the shared
/// value, so that their inputs look honest.
pub fn make_inputs<R: Rng>(
    rng: &mut R,
    n: usize,
    l_bits: u64,
    d_bits: u64,
    faulty: &BTreeSet<ProcessorId>,
    plan: InputPlan,
) -> Vec<DataBlock> {
    let shared = random_value(rng, l_bits);
    let good: Vec<ProcessorId> = (0..n).filter(|i| !faulty.contains(i)).collect();
    let holders = match plan {
        InputPlan::Identical => n,
        InputPlan::Shared { holders } | InputPlan::Diverge { holders } => holders,
        InputPlan::Random => 0,
    };
    let mut inputs = vec![shared.clone(); n];
    for &i in good.iter().skip(holders) {
        inputs[i] = match plan {
            InputPlan::Diverge { .. } => {
                let gens = l_bits.div_ceil(d_bits);
                let g = rng.gen_range(0..gens);
                let mut bytes = shared.as_bytes().to_vec();
                let start = (g * d_bits / 8) as usize;
                let end = (((g + 1) * d_bits / 8) as usize).min(bytes.len());
                let pos = rng.gen_range(start..end);
                bytes[pos] ^= rng.gen_range(1..=255u8);
                mask_to_bits(&mut bytes, l_bits);
                if bytes == shared.as_bytes() {
                    bytes[start] ^= 0x80;
                }
                DataBlock::new(bytes)
            }
            _ => random_value(rng, l_bits),
        };
    }
    inputs
}

fn steps(algorithm: Algorithm) -> &'static [Step] {
    match algorithm {
        Algorithm::Consensus => &[Step::OwnSymbol, Step::Helper, Step::Relay],
        Algorithm::QValidity => &[Step::OwnSymbol, Step::QHelper, Step::QRelay],
    }
}

fn tags(algorithm: Algorithm) -> &'static [BroadcastTag] {
    match algorithm {
        Algorithm::Consensus => &[BroadcastTag::Detected, BroadcastTag::Report],
        Algorithm::QValidity => &[
            BroadcastTag::Detected,
            BroadcastTag::MatchVector,
            BroadcastTag::Report,
        ],
    }
}

fn maybe<R: Rng, T>(rng: &mut R, p: f64, f: impl FnOnce(&mut R) -> T) -> Option<T> {
    if rng.gen_bool(p) {
        Some(f(rng))
    } else {
        None
    }
}

fn random_p2p_rule<R: Rng>(rng: &mut R, cfg: &ExecutionConfig) -> P2pRule {
    let n = cfg.n;
    let gens = cfg.generations();
    let action = match rng.gen_range(0..20) {
        0..=9 => P2pAction::Corrupt {
            mask: rng.gen_range(1..=255),
        },
        10..=14 => P2pAction::Silent,
        15..=17 => {
            let mut b = vec![0u8; cfg.sym_bytes()];
            rng.fill(b.as_mut_slice());
            P2pAction::Replace {
                value: MacroSymbol::new(b),
            }
        }
        _ => P2pAction::Honest,
    };
    P2pRule {
        generation: maybe(rng, 0.7, |r| r.gen_range(1..=gens)),
        step: maybe(rng, 0.6, |r| {
            *steps(cfg.algorithm).choose(r).expect("non-empty")
        }),
        receiver: maybe(rng, 0.6, |r| r.gen_range(0..n)),
        slot: maybe(rng, 0.15, |r| r.gen_range(0..n)),
        action,
    }
}

fn random_broadcast_rule<R: Rng>(rng: &mut R, cfg: &ExecutionConfig) -> BroadcastRule {
    let n = cfg.n;
    let gens = cfg.generations();
    let part = |r: &mut R| {
        *[ReportPart::Own, ReportPart::Received, ReportPart::Relayed]
            .choose(r)
            .expect("non-empty")
    };
    let action = match rng.gen_range(0..12) {
        0..=1 => BroadcastAction::Silent,
        2..=4 => BroadcastAction::SetDetected { value: rng.gen() },
        5..=6 => BroadcastAction::SetMatch {
            index: rng.gen_range(0..n),
            value: rng.gen(),
        },
        7..=9 => BroadcastAction::CorruptReport {
            part: part(rng),
            slot: rng.gen_range(0..n),
            mask: rng.gen_range(1..=255),
        },
        10 => BroadcastAction::EraseReport {
            part: part(rng),
            slot: rng.gen_range(0..n),
        },
        _ => BroadcastAction::Honest,
    };
    BroadcastRule {
        generation: maybe(rng, 0.7, |r| r.gen_range(1..=gens)),
        tag: maybe(rng, 0.7, |r| {
            *tags(cfg.algorithm).choose(r).expect("non-empty")
        }),
        action,
    }
}

/// Draws a script from the closed action grammar for the faulty set of `cfg`.
pub fn random_script<R: Rng>(rng: &mut R, cfg: &ExecutionConfig) -> AdversaryScript {
    let mut behaviors = BTreeMap::new();
    for &f in &cfg.faulty {
        let p2p = (0..rng.gen_range(0..=4))
            .map(|_| random_p2p_rule(rng, cfg))
            .collect();
        let broadcast = (0..rng.gen_range(0..=3))
            .map(|_| random_broadcast_rule(rng, cfg))
            .collect();
        behaviors.insert(f, Behavior { p2p, broadcast });
    }
    AdversaryScript { behaviors }
}

/// A named attack with its full configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub replay: Replay,
}

fn p2p(
    generation: Option<u64>,
    step: Option<Step>,
    receiver: Option<ProcessorId>,
    action: P2pAction,
) -> P2pRule {
    P2pRule {
        generation,
        step,
        receiver,
        slot: None,
        action,
    }
}

fn bcast(generation: Option<u64>, tag: BroadcastTag, action: BroadcastAction) -> BroadcastRule {
    BroadcastRule {
        generation,
        tag: Some(tag),
        action,
    }
}

fn script(entries: Vec<(ProcessorId, Vec<P2pRule>, Vec<BroadcastRule>)>) -> AdversaryScript {
    AdversaryScript {
        behaviors: entries
            .into_iter()
            .map(|(i, p2p, broadcast)| (i, Behavior { p2p, broadcast }))
            .collect(),
    }
}

/// Base configuration for hand-written scenarios: four generations with
/// one- or two-byte symbols.
pub fn scenario_config(
    algorithm: Algorithm,
    n: usize,
    t: usize,
    q: Option<usize>,
    seed: u64,
) -> ExecutionConfig {
    use rand::SeedableRng;
    let k = match algorithm {
        Algorithm::Consensus => n - t,
        Algorithm::QValidity => q.expect("q-validity needs q"),
    };
    let d_bits = 16 * k as u64;
    let l_bits = 4 * d_bits;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let value = random_value(&mut rng, l_bits);
    ExecutionConfig {
        algorithm,
        n,
        t,
        q,
        l_bits,
        d_bits,
        seed,
        faulty: BTreeSet::new(),
        inputs: vec![value; n],
        cost_model: BroadcastCostModel::default(),
        early_terminate: false,
    }
}

/// Worst-case scripts for plain consensus at `(n, t)`: one per diagnosis
/// rule plus equivocation, false flags, broadcast lies and silence.
pub fn handcrafted(n: usize, t: usize, seed: u64) -> Vec<Scenario> {
    assert!(t >= 1 && n > 3 * t);
    let base = scenario_config(Algorithm::Consensus, n, t, None, seed);
    let low: BTreeSet<ProcessorId> = (0..t).collect();
    let high: BTreeSet<ProcessorId> = (n - t..n).collect();
    let f0 = 0;
    let fl = n - 1;
    let mut out = Vec::new();
    let mut push = |name: &str,
                    faulty: &BTreeSet<ProcessorId>,
                    script: AdversaryScript,
                    edit: &dyn Fn(&mut ExecutionConfig)| {
        let mut config = base.clone();
        config.faulty = faulty.clone();
        edit(&mut config);
        out.push(Scenario {
            name: name.to_string(),
            replay: Replay { config, script },
        });
    };
    let corrupt = |mask| P2pAction::Corrupt { mask };
    let no_edit: &dyn Fn(&mut ExecutionConfig) = &|_| {};

    // Disputed symbol: a member corrupts its coded symbol towards one receiver.
    push(
        "dispute_single_symbol",
        &low,
        script(vec![(
            f0,
            vec![p2p(Some(1), Some(Step::OwnSymbol), Some(t), corrupt(0x5a))],
            vec![],
        )]),
        no_edit,
    );

    // Not a codeword: a member reports a coded vector that is not a codeword.
    push(
        "report_non_codeword",
        &low,
        script(vec![(
            f0,
            vec![],
            vec![
                bcast(
                    Some(1),
                    BroadcastTag::Detected,
                    BroadcastAction::SetDetected { value: true },
                ),
                bcast(
                    Some(1),
                    BroadcastTag::Report,
                    BroadcastAction::CorruptReport {
                        part: ReportPart::Own,
                        slot: n - 1,
                        mask: 0x11,
                    },
                ),
            ],
        )]),
        no_edit,
    );

    // Bad relay: the faulty processors hold a different input, drop out of
    // the match set, then relay garbage and report it consistently.
    push(
        "bad_relay",
        &high,
        script(
            high.iter()
                .map(|&f| {
                    (
                        f,
                        vec![p2p(Some(2), Some(Step::Relay), None, corrupt(0x33))],
                        vec![bcast(
                            Some(2),
                            BroadcastTag::Report,
                            BroadcastAction::CorruptReport {
                                part: ReportPart::Relayed,
                                slot: 0,
                                mask: 0x33,
                            },
                        )],
                    )
                })
                .collect(),
        ),
        &|c| {
            for &f in &high {
                let mut b = c.inputs[f].as_bytes().to_vec();
                b[0] ^= 0x01;
                c.inputs[f] = DataBlock::new(b);
            }
        },
    );

    // Largest agreeing set: faulty members hold a consistent but different value.
    push(
        "honest_looking_different_input",
        &low,
        AdversaryScript::honest(),
        &|c| {
            for f in 0..c.t {
                let mut b = c.inputs[f].as_bytes().to_vec();
                let last = b.len() - 1;
                b[last] ^= 0x80;
                c.inputs[f] = DataBlock::new(b);
            }
        },
    );

    // Equivocation: different corruptions to different receivers, every generation.
    push(
        "equivocation",
        &low,
        script(
            low.iter()
                .map(|&f| {
                    let rules = (t..n)
                        .map(|r| p2p(None, Some(Step::OwnSymbol), Some(r), corrupt(r as u8 + 1)))
                        .collect();
                    (f, rules, vec![])
                })
                .collect(),
        ),
        no_edit,
    );

    // False flag with otherwise honest behavior.
    push(
        "false_detected",
        &high,
        script(
            high.iter()
                .map(|&f| {
                    (
                        f,
                        vec![],
                        vec![bcast(
                            None,
                            BroadcastTag::Detected,
                            BroadcastAction::SetDetected { value: true },
                        )],
                    )
                })
                .collect(),
        ),
        no_edit,
    );

    // Broadcast lies: claim a different symbol from a fault-free sender each
    // generation, accusing a new processor every time.
    push(
        "broadcast_lies",
        &[fl].into(),
        script(vec![(
            fl,
            vec![],
            (1..=4u64)
                .flat_map(|g| {
                    [
                        bcast(
                            Some(g),
                            BroadcastTag::Detected,
                            BroadcastAction::SetDetected { value: true },
                        ),
                        bcast(
                            Some(g),
                            BroadcastTag::Report,
                            BroadcastAction::CorruptReport {
                                part: ReportPart::Received,
                                slot: (g as usize - 1) % (n - 1),
                                mask: 0x42,
                            },
                        ),
                    ]
                })
                .collect(),
        )]),
        no_edit,
    );

    // Silence on every channel.
    push(
        "silence",
        &low,
        script(
            low.iter()
                .map(|&f| {
                    (
                        f,
                        vec![p2p(None, None, None, P2pAction::Silent)],
                        vec![BroadcastRule {
                            generation: None,
                            tag: None,
                            action: BroadcastAction::Silent,
                        }],
                    )
                })
                .collect(),
        ),
        no_edit,
    );

    // Silence towards a single receiver in every generation.
    push(
        "selective_silence",
        &high,
        script(
            high.iter()
                .map(|&f| (f, vec![p2p(None, None, Some(0), P2pAction::Silent)], vec![]))
                .collect(),
        ),
        no_edit,
    );

    // A faulty helper: an edge to a fault-free receiver goes first, then the
    // lowest-index faulty member corrupts the symbols it fills in.
    if t >= 2 {
        push(
            "corrupt_helper",
            &low,
            script(vec![
                (
                    1,
                    vec![p2p(Some(1), Some(Step::OwnSymbol), Some(t), corrupt(0x0f))],
                    vec![],
                ),
                (
                    0,
                    vec![p2p(None, Some(Step::Helper), None, corrupt(0xf0))],
                    vec![],
                ),
            ]),
            no_edit,
        );
    }

    // Split fault-free inputs with a faulty processor siding with one half.
    push(
        "split_inputs",
        &high,
        script(vec![(
            fl,
            vec![p2p(Some(1), Some(Step::OwnSymbol), Some(0), corrupt(0x01))],
            vec![],
        )]),
        &|c| {
            let good: Vec<ProcessorId> = c.fault_free().collect();
            for &i in &good[..good.len() / 2] {
                let mut b = c.inputs[i].as_bytes().to_vec();
                b[0] ^= 0x40;
                c.inputs[i] = DataBlock::new(b);
            }
        },
    );
    out
}

/// Scripted attacks on the q-validity protocol at `(n, t, q)`.
pub fn handcrafted_qvalidity(n: usize, t: usize, q: usize, seed: u64) -> Vec<Scenario> {
    let base = scenario_config(Algorithm::QValidity, n, t, Some(q), seed);
    let low: BTreeSet<ProcessorId> = (0..t).collect();
    let mut out = Vec::new();
    let mut push = |name: &str, script: AdversaryScript, holders: usize| {
        let mut config = base.clone();
        config.faulty = low.clone();
        // Fault-free processors beyond the first `holders` hold a different value.
        let good: Vec<ProcessorId> = config.fault_free().collect();
        for (x, &i) in good.iter().enumerate().skip(holders) {
            let mut b = config.inputs[i].as_bytes().to_vec();
            let len = b.len();
            b[x % len] ^= 0x01 << (x % 8);
            config.inputs[i] = DataBlock::new(b);
        }
        out.push(Scenario {
            name: format!("{name}_holders{holders}"),
            replay: Replay { config, script },
        });
    };
    let good_count = n - t;
    for holders in [q, good_count] {
        push(
            "deny_matches",
            script(
                low.iter()
                    .map(|&f| {
                        let rules = (0..n)
                            .map(|j| {
                                bcast(
                                    None,
                                    BroadcastTag::MatchVector,
                                    BroadcastAction::SetMatch {
                                        index: j,
                                        value: false,
                                    },
                                )
                            })
                            .collect();
                        (f, vec![], rules)
                    })
                    .collect(),
            ),
            holders,
        );
        push(
            "claim_false_matches",
            script(
                low.iter()
                    .map(|&f| {
                        let rules = (0..n)
                            .map(|j| {
                                bcast(
                                    None,
                                    BroadcastTag::MatchVector,
                                    BroadcastAction::SetMatch {
                                        index: j,
                                        value: true,
                                    },
                                )
                            })
                            .collect();
                        (
                            f,
                            vec![P2pRule {
                                generation: None,
                                step: Some(Step::OwnSymbol),
                                receiver: None,
                                slot: None,
                                action: P2pAction::Corrupt { mask: 0x21 },
                            }],
                            rules,
                        )
                    })
                    .collect(),
            ),
            holders,
        );
        push(
            "corrupt_helper_and_relay",
            script(
                low.iter()
                    .map(|&f| {
                        (
                            f,
                            vec![
                                p2p(
                                    None,
                                    Some(Step::QHelper),
                                    None,
                                    P2pAction::Corrupt { mask: 0x77 },
                                ),
                                p2p(
                                    None,
                                    Some(Step::QRelay),
                                    None,
                                    P2pAction::Corrupt { mask: 0x66 },
                                ),
                                p2p(
                                    Some(1),
                                    Some(Step::OwnSymbol),
                                    Some(n - 1),
                                    P2pAction::Silent,
                                ),
                            ],
                            vec![],
                        )
                    })
                    .collect(),
            ),
            holders,
        );
        push(
            "false_detected",
            script(
                low.iter()
                    .map(|&f| {
                        (
                            f,
                            vec![],
                            vec![bcast(
                                None,
                                BroadcastTag::Detected,
                                BroadcastAction::SetDetected { value: true },
                            )],
                        )
                    })
                    .collect(),
            ),
            holders,
        );
        push(
            "silence",
            script(
                low.iter()
                    .map(|&f| {
                        (
                            f,
                            vec![p2p(None, None, None, P2pAction::Silent)],
                            vec![BroadcastRule {
                                generation: None,
                                tag: None,
                                action: BroadcastAction::Silent,
                            }],
                        )
                    })
                    .collect(),
            ),
            holders,
        );
    }
    out
}
