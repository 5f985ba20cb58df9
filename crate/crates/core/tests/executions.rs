use std::collections::BTreeSet;

use ecbc_core::bcast::{BroadcastOracle, BroadcastPayload, BroadcastTag};
use ecbc_core::simnet::scripts::{handcrafted, random_script, scenario_config};
use ecbc_core::simnet::{
    check_complexity, replay, AdversaryScript, Algorithm, Behavior, BroadcastAction, BroadcastRule,
    ExecutionConfig, P2pAction, P2pRule, Replay, ReportPart, SimMedium,
};
use ecbc_core::{run_execution, ConsensusEngine, DataBlock, Event, OutcomeKind, Rule, Stage, Step};
use proptest::prelude::*;
use rand::SeedableRng;

fn alg1(n: usize, t: usize, l_bits: u64, d_bits: u64) -> ExecutionConfig {
    let bytes = (l_bits / 8) as usize;
    let value: Vec<u8> = (0..bytes).map(|i| (i * 37 + 11) as u8).collect();
    ExecutionConfig {
        algorithm: Algorithm::Consensus,
        n,
        t,
        q: None,
        l_bits,
        d_bits,
        seed: 0,
        faulty: BTreeSet::new(),
        inputs: vec![DataBlock::new(value); n],
        cost_model: Default::default(),
        early_terminate: false,
    }
}

fn one(i: usize, b: Behavior) -> AdversaryScript {
    AdversaryScript {
        behaviors: [(i, b)].into(),
    }
}

fn p2p(
    generation: Option<u64>,
    step: Option<Step>,
    receiver: Option<usize>,
    action: P2pAction,
) -> Behavior {
    Behavior {
        p2p: vec![P2pRule {
            generation,
            step,
            receiver,
            slot: None,
            action,
        }],
        broadcast: vec![],
    }
}

fn bcast(rules: Vec<BroadcastRule>) -> Behavior {
    Behavior {
        p2p: vec![],
        broadcast: rules,
    }
}

fn rule(generation: Option<u64>, tag: BroadcastTag, action: BroadcastAction) -> BroadcastRule {
    BroadcastRule {
        generation,
        tag: Some(tag),
        action,
    }
}

fn rules_fired(events: &[Event]) -> Vec<Rule> {
    events
        .iter()
        .filter_map(|e| match e {
            Event::Convicted { rule, .. } | Event::EdgeRemoved { rule, .. } => Some(*rule),
            _ => None,
        })
        .collect()
}

#[test]
fn fault_free_data_traffic_is_exact() {
    let cfg = alg1(4, 1, 2400, 240);
    let tr = run_execution(&cfg, &AdversaryScript::honest()).unwrap();
    assert!(tr.verdict.pass);
    assert_eq!(tr.reports.len(), 10);
    assert!(tr
        .reports
        .iter()
        .all(|r| r.kind == OutcomeKind::Decided && !r.diagnosed));
    assert!(tr
        .outputs
        .iter()
        .all(|o| o.as_ref() == Some(&cfg.inputs[0])));
    assert_eq!(tr.ledger.data_bits(), 9600);
    let c = check_complexity(&tr, &cfg);
    assert_eq!(c.data_bits, c.data_formula_bits);
    assert_eq!(c.overhead_bits, 10 * 4 * 16);
}

#[test]
fn single_corruption_triggers_one_diagnosis() {
    let mut cfg = alg1(4, 1, 2400, 240);
    cfg.faulty = [1].into();
    let script = one(
        1,
        p2p(
            Some(1),
            Some(Step::OwnSymbol),
            Some(2),
            P2pAction::Corrupt { mask: 0x80 },
        ),
    );
    let tr = run_execution(&cfg, &script).unwrap();
    assert!(tr.verdict.pass, "{:?}", tr.verdict);
    assert_eq!(tr.verdict.diagnosis_count, 1);
    assert!(!tr.graph.has_edge(1, 2));
    assert!(rules_fired(&tr.events).contains(&Rule::DisputedSymbol));
    for i in cfg.fault_free() {
        assert_eq!(tr.outputs[i].as_ref(), Some(&cfg.inputs[0]));
    }
}

#[test]
fn corruption_in_generation_four_only() {
    let mut cfg = alg1(4, 1, 2400, 240);
    cfg.faulty = [3].into();
    let script = one(
        3,
        p2p(Some(4), None, Some(0), P2pAction::Corrupt { mask: 1 }),
    );
    let tr = run_execution(&cfg, &script).unwrap();
    assert!(tr.verdict.pass);
    assert_eq!(tr.verdict.diagnosis_count, 1);
    assert!(tr.reports[3].diagnosed);
    assert!(tr
        .reports
        .iter()
        .filter(|r| r.generation != 4)
        .all(|r| !r.diagnosed));
}

#[test]
fn corruption_every_generation_stays_bounded() {
    for (n, t) in [(4, 1), (7, 2)] {
        let mut cfg = alg1(n, t, 2400 * (n - t) as u64, 240 * (n - t) as u64);
        cfg.faulty = (0..t).collect();
        let behaviors = (0..t)
            .map(|f| {
                let rules = (t..n)
                    .map(|r| P2pRule {
                        generation: None,
                        step: None,
                        receiver: Some(r),
                        slot: None,
                        action: P2pAction::Corrupt { mask: r as u8 + 1 },
                    })
                    .collect();
                (
                    f,
                    Behavior {
                        p2p: rules,
                        broadcast: vec![],
                    },
                )
            })
            .collect();
        let tr = run_execution(&cfg, &AdversaryScript { behaviors }).unwrap();
        assert!(tr.verdict.pass);
        assert!(tr.verdict.within_bound());
        assert_eq!(tr.graph.convicted(), cfg.faulty);
    }
}

/// Runs one generation directly on the engine to inspect received vectors.
fn one_generation(cfg: &ExecutionConfig, script: &AdversaryScript) -> ConsensusEngine {
    let mut engine = ConsensusEngine::new(cfg.n, cfg.t, cfg.sym_bytes()).unwrap();
    let oracle = BroadcastOracle::new(cfg.n, cfg.cost_model).unwrap();
    let mut medium = SimMedium::new(&cfg.faulty, script, oracle, cfg.sym_bytes());
    engine.run_generation(1, &cfg.parts(1), &mut medium);
    engine
}

#[test]
fn targeted_corruption_reaches_only_its_receiver() {
    let mut cfg = alg1(4, 1, 240, 240);
    cfg.faulty = [1].into();
    let script = one(
        1,
        p2p(
            None,
            Some(Step::OwnSymbol),
            Some(2),
            P2pAction::Corrupt { mask: 0xff },
        ),
    );
    let engine = one_generation(&cfg, &script);
    let s = engine.states();
    assert_ne!(s[2].received.get(1), s[1].own.get(1));
    assert_eq!(s[0].received.get(1), s[1].own.get(1));
    assert!(s[2].detected);
}

#[test]
fn silence_leaves_an_erasure() {
    let mut cfg = alg1(4, 1, 240, 240);
    cfg.faulty = [0].into();
    let script = one(0, p2p(None, None, Some(2), P2pAction::Silent));
    let engine = one_generation(&cfg, &script);
    assert!(engine.states()[2].received.is_erased(0));
    assert!(!engine.states()[1].received.is_erased(0));
}

#[test]
fn false_flag_escalates_and_convicts() {
    let mut cfg = alg1(4, 1, 480, 240);
    cfg.faulty = [2].into();
    let script = one(
        2,
        bcast(vec![rule(
            Some(1),
            BroadcastTag::Detected,
            BroadcastAction::SetDetected { value: true },
        )]),
    );
    let tr = run_execution(&cfg, &script).unwrap();
    assert!(tr.verdict.pass);
    assert_eq!(tr.verdict.diagnosis_count, 1);
    assert!(tr.graph.is_convicted(2));
    assert!(rules_fired(&tr.events).contains(&Rule::FalseDetected));
    // The broadcast lie is seen identically by everyone.
    let seen: Vec<&BroadcastPayload> = tr
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Broadcast(r)
                if r.sender == 2 && r.tag == BroadcastTag::Detected && r.generation == 1 =>
            {
                Some(&r.payload)
            }
            _ => None,
        })
        .collect();
    assert_eq!(seen, vec![&BroadcastPayload::Detected(true)]);
}

#[test]
fn silent_flag_counts_as_raised() {
    let mut cfg = alg1(4, 1, 240, 240);
    cfg.faulty = [3].into();
    let script = one(
        3,
        bcast(vec![rule(
            None,
            BroadcastTag::Detected,
            BroadcastAction::Silent,
        )]),
    );
    let tr = run_execution(&cfg, &script).unwrap();
    assert!(tr.verdict.pass);
    assert_eq!(tr.verdict.diagnosis_count, 1);
    assert!(rules_fired(&tr.events).contains(&Rule::SilentBroadcast));
}

#[test]
fn non_codeword_report_convicts() {
    let mut cfg = alg1(4, 1, 240, 240);
    cfg.faulty = [0].into();
    let script = one(
        0,
        bcast(vec![
            rule(
                None,
                BroadcastTag::Detected,
                BroadcastAction::SetDetected { value: true },
            ),
            rule(
                None,
                BroadcastTag::Report,
                BroadcastAction::CorruptReport {
                    part: ReportPart::Own,
                    slot: 3,
                    mask: 9,
                },
            ),
        ]),
    );
    let tr = run_execution(&cfg, &script).unwrap();
    assert!(tr.verdict.pass);
    assert!(rules_fired(&tr.events).contains(&Rule::NotACodeword));
    assert!(tr.graph.is_convicted(0));
}

#[test]
fn misreported_relay_convicts() {
    // Processor 3 holds a different value, leaves the match set in generation 1,
    // then lies about its recomputed symbol in generation 2.
    let mut cfg = alg1(4, 1, 3 * 240, 240);
    cfg.faulty = [3].into();
    let mut b = cfg.inputs[3].as_bytes().to_vec();
    b[0] ^= 1;
    cfg.inputs[3] = DataBlock::new(b);
    let script = one(
        3,
        bcast(vec![
            rule(
                Some(2),
                BroadcastTag::Detected,
                BroadcastAction::SetDetected { value: true },
            ),
            rule(
                Some(2),
                BroadcastTag::Report,
                BroadcastAction::CorruptReport {
                    part: ReportPart::Relayed,
                    slot: 3,
                    mask: 2,
                },
            ),
            // Keep its own slot consistent so only the recomputation is wrong.
            rule(
                Some(2),
                BroadcastTag::Report,
                BroadcastAction::CorruptReport {
                    part: ReportPart::Received,
                    slot: 3,
                    mask: 2,
                },
            ),
        ]),
    );
    let tr = run_execution(&cfg, &script).unwrap();
    assert!(tr.verdict.pass, "{:?}", tr.verdict.violations);
    assert!(!tr.reports[1].match_set.as_ref().unwrap().contains(&3));
    assert!(rules_fired(&tr.events).contains(&Rule::BadRelay));
    assert!(tr.graph.is_convicted(3));
}

#[test]
fn split_inputs_terminate_with_default() {
    let mut cfg = alg1(4, 1, 480, 240);
    let other = DataBlock::new(cfg.inputs[0].as_bytes().iter().map(|b| b ^ 0x55).collect());
    cfg.inputs[2] = other.clone();
    cfg.inputs[3] = other;
    let tr = run_execution(&cfg, &AdversaryScript::honest()).unwrap();
    assert!(tr.verdict.pass);
    assert_eq!(tr.terminated, Some(1));
    assert_eq!(tr.reports[0].kind, OutcomeKind::TerminatedDefault);
    let zero = DataBlock::zeroed(cfg.input_bytes());
    assert!(tr.outputs.iter().all(|o| o.as_ref() == Some(&zero)));
    assert!(tr
        .events
        .iter()
        .any(|e| matches!(e, Event::TerminatedDefault { generation: 1 })));
}

#[test]
fn handcrafted_scenarios_pass() {
    for (n, t) in [(4, 1), (7, 2)] {
        let all = handcrafted(n, t, 11);
        assert!(all.len() >= 8);
        for s in all {
            let tr = replay(&s.replay).unwrap();
            assert!(
                tr.verdict.pass,
                "{} at ({n},{t}): {:?}",
                s.name, tr.verdict.violations
            );
        }
    }
}

#[test]
fn each_diagnosis_rule_is_exercised() {
    let mut fired = BTreeSet::new();
    for s in handcrafted(4, 1, 5).into_iter().chain(handcrafted(7, 2, 5)) {
        let tr = replay(&s.replay).unwrap();
        fired.extend(
            rules_fired(&tr.events)
                .into_iter()
                .map(|r| format!("{r:?}")),
        );
        if s.name == "honest_looking_different_input" {
            // Only the last part differs, so the split surfaces in the final generation.
            assert_eq!(tr.verdict.diagnosis_count, 1);
            assert!(tr.reports.last().unwrap().diagnosed);
        }
    }
    for r in [
        "DisputedSymbol",
        "NotACodeword",
        "Threshold",
        "FalseDetected",
        "SilentBroadcast",
    ] {
        assert!(fired.contains(r), "{r} never fired");
    }
}

#[test]
fn transcripts_are_deterministic() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut cfg = scenario_config(Algorithm::Consensus, 7, 2, None, 4);
    cfg.faulty = [2, 5].into();
    let script = random_script(&mut rng, &cfg);
    let a = run_execution(&cfg, &script).unwrap().to_jsonl();
    let r = Replay {
        config: cfg,
        script,
    };
    let json = serde_json::to_string(&r).unwrap();
    let back: Replay = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    assert_eq!(replay(&back).unwrap().to_jsonl(), a);
}

#[test]
fn scripts_must_target_faulty_processors() {
    let cfg = alg1(4, 1, 240, 240);
    let script = one(1, p2p(None, None, None, P2pAction::Silent));
    assert!(run_execution(&cfg, &script).is_err());
}

#[test]
fn ledger_counts_symbols_and_stages() {
    let mut cfg = alg1(4, 1, 240, 240);
    cfg.faulty = [1].into();
    let script = one(
        1,
        p2p(None, Some(Step::OwnSymbol), Some(0), P2pAction::Silent),
    );
    let tr = run_execution(&cfg, &script).unwrap();
    let m = tr.ledger.get(1, Stage::Matching);
    assert_eq!(m.p2p_symbols, 11);
    assert_eq!(m.p2p_bits, 11 * 80);
    assert_eq!(tr.ledger.get(1, Stage::Checking).broadcast_payload_bits, 4);
}

/// Diagnosis count can exceed `t + t(t+1)` by one: the faulty member is first
/// dropped from the match set for holding a different value, then spends its
/// `t + 1` disputes, and a later fault-free split costs one more diagnosis.
#[test]
fn worst_case_diagnosis_count_exceeds_stated_bound_by_one() {
    let mut cfg = alg1(4, 1, 4 * 24, 24);
    cfg.faulty = [3].into();
    let mut faulty_input = cfg.inputs[3].as_bytes().to_vec();
    faulty_input[0] ^= 1;
    cfg.inputs[3] = DataBlock::new(faulty_input);
    let mut split = cfg.inputs[0].as_bytes().to_vec();
    split[9] ^= 1;
    cfg.inputs[0] = DataBlock::new(split);
    let script = AdversaryScript {
        behaviors: [(
            3,
            Behavior {
                p2p: vec![
                    P2pRule {
                        generation: Some(2),
                        step: Some(Step::Relay),
                        receiver: Some(0),
                        slot: None,
                        action: P2pAction::Corrupt { mask: 4 },
                    },
                    P2pRule {
                        generation: Some(3),
                        step: Some(Step::Relay),
                        receiver: Some(1),
                        slot: None,
                        action: P2pAction::Corrupt { mask: 4 },
                    },
                ],
                broadcast: vec![],
            },
        )]
        .into(),
    };
    let tr = run_execution(&cfg, &script).unwrap();
    assert!(tr.verdict.pass, "{:?}", tr.verdict.violations);
    assert_eq!(tr.verdict.diagnosis_bound, 3);
    assert_eq!(tr.verdict.diagnosis_count, 4);
    assert_eq!(tr.terminated, Some(4));
    assert!(tr.graph.is_convicted(3));
}

fn good_slots_agree(engine: &ConsensusEngine, faulty: &BTreeSet<usize>) -> bool {
    let n = engine.states().len();
    let good: Vec<usize> = (0..n).filter(|i| !faulty.contains(i)).collect();
    good.iter().all(|&i| {
        good.iter().all(|&j| {
            good.iter()
                .all(|&k| engine.states()[i].received.get(k) == engine.states()[j].received.get(k))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Fault-free processors see identical symbols in fault-free slots.
    #[test]
    fn fault_free_views_agree(seed in any::<u64>(), faulty in proptest::sample::subsequence((0..7usize).collect::<Vec<_>>(), 0..=2)) {
        let mut cfg = scenario_config(Algorithm::Consensus, 7, 2, None, seed);
        cfg.l_bits = cfg.d_bits;
        cfg.inputs = vec![DataBlock::new(cfg.inputs[0].as_bytes()[..cfg.part_bytes()].to_vec()); 7];
        cfg.faulty = faulty.into_iter().collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let script = random_script(&mut rng, &cfg);
        let engine = one_generation(&cfg, &script);
        prop_assert!(good_slots_agree(&engine, &cfg.faulty));
    }
}
