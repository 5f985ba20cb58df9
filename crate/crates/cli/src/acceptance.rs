//! The acceptance suite: nine pass/fail criteria, each with its own runtime budget.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ecbc_core::bcast::BroadcastCostModel;
use ecbc_core::rs_codec::{
    decode, encode, min_distance_bruteforce, reconstruct_position, CodeParams, DataBlock,
};
use ecbc_core::simnet::scripts::{
    handcrafted, handcrafted_qvalidity, make_inputs, random_script, random_value, InputPlan,
    Scenario,
};
use ecbc_core::simnet::{
    check_complexity, diagnosis_bound, replay, sweep, trial, AdversaryScript, Algorithm,
    ExecutionConfig, Property, QRange, Replay, SweepSpec,
};
use ecbc_core::{run_execution, Transcript};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed_ms: u128,
    pub limit_ms: Option<u128>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let limit = self
            .limit_ms
            .map(|l| format!(", limit {} ms", l))
            .unwrap_or_default();
        format!(
            "criterion {} {:<30} {} ({} ms{limit}) {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed_ms,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    /// Fewer random trials; same criteria.
    pub quick: bool,
}

impl Options {
    fn trials(&self) -> u64 {
        if self.quick {
            100
        } else {
            500
        }
    }

    fn q_trials(&self) -> u64 {
        if self.quick {
            40
        } else {
            500
        }
    }
}

/// Results that later criteria reuse.
#[derive(Default)]
struct Shared {
    alg1_specs: Vec<SweepSpec>,
    max_diag_alg1: Vec<(usize, u64)>,
    max_diag_alg2: Vec<(usize, u64)>,
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
    f: impl FnOnce() -> Outcome,
) -> CriterionResult {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let detail = if in_time {
        out.detail
    } else {
        format!("{} [over time budget]", out.detail)
    };
    CriterionResult {
        id,
        name,
        pass: out.pass && in_time,
        detail,
        elapsed_ms: elapsed.as_millis(),
        limit_ms: limit.map(|l| l.as_millis()),
    }
}

/// Runs every criterion in order.
pub fn run_all(opts: Options) -> Vec<CriterionResult> {
    let mut shared = Shared::default();
    let mut out = vec![
        timed(
            1,
            "exact data rate",
            Some(Duration::from_secs(1)),
            data_rate,
        ),
        timed(2, "overhead separation", None, overhead_separation),
    ];
    out.push(timed(
        3,
        "byzantine correctness",
        Some(Duration::from_secs(120)),
        || byzantine_suite(opts, &mut shared),
    ));
    out.push(timed(5, "split-input termination", None, split_termination));
    out.push(timed(6, "q-validity", None, || {
        q_validity(opts, &mut shared)
    }));
    out.push(timed(4, "diagnosis-count bounds", None, || {
        diagnosis_bounds(&shared)
    }));
    out.push(timed(7, "q-validity traffic bound", None, q_traffic));
    out.push(timed(
        8,
        "codec properties",
        Some(Duration::from_secs(30)),
        codec_properties,
    ));
    out.push(timed(9, "determinism", None, || determinism(&shared)));
    out.sort_by_key(|r| r.id);
    out
}

fn fault_free_alg1(
    n: usize,
    t: usize,
    l_bits: u64,
    d_bits: u64,
    cost_model: BroadcastCostModel,
) -> ExecutionConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    ExecutionConfig {
        algorithm: Algorithm::Consensus,
        n,
        t,
        q: None,
        l_bits,
        d_bits,
        seed: n as u64,
        faulty: BTreeSet::new(),
        inputs: vec![random_value(&mut rng, l_bits); n],
        cost_model,
        early_terminate: false,
    }
}

fn honest_run(cfg: &ExecutionConfig) -> Result<Transcript, String> {
    run_execution(cfg, &AdversaryScript::honest()).map_err(|e| e.to_string())
}

fn data_rate() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (n, t, l, d) in [(4, 1, 2400, 240), (7, 2, 8400, 840)] {
        let expected = (n * (n - 1)) as u64 * l / (n - t) as u64;
        match honest_run(&fault_free_alg1(n, t, l, d, BroadcastCostModel::default())) {
            Ok(tr) => {
                let got = tr.ledger.data_bits();
                pass &= got == expected && tr.verdict.pass;
                detail.push(format!("n={n}: {got}/{expected} bits"));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("n={n}: {e}"));
            }
        }
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn overhead_separation() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let cubic = BroadcastCostModel {
        coefficient: 2,
        exponent: 3,
    };
    for (n, t, l, d) in [(4, 1, 2400, 240), (7, 2, 8400, 840)] {
        for model in [BroadcastCostModel::default(), cubic] {
            let mut points = Vec::new();
            for d_bits in [d, 2 * d] {
                let cfg = fault_free_alg1(n, t, l, d_bits, model);
                let Ok(tr) = honest_run(&cfg) else {
                    return Outcome {
                        pass: false,
                        detail: format!("n={n} D={d_bits}: run failed"),
                    };
                };
                let expected = (l / d_bits) * n as u64 * model.per_payload_bit(n);
                let c = check_complexity(&tr, &cfg);
                pass &= c.overhead_bits == expected && c.overhead_bits == c.detected_formula_bits;
                points.push((d_bits, c.data_bits, c.overhead_bits));
            }
            let (d1, data1, over1) = points[0];
            let (d2, data2, over2) = points[1];
            // Overhead scales with L/D exactly; data does not move.
            pass &= data1 == data2 && over1 * d1 == over2 * d2;
            detail.push(format!(
                "n={n} cost/bit={}: D={d1} -> {over1}, D={d2} -> {over2}, data {data1}",
                model.per_payload_bit(n)
            ));
        }
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn alg1_spec(n: usize, t: usize, trials: u64) -> SweepSpec {
    let k = (n - t) as u64;
    SweepSpec {
        algorithm: Algorithm::Consensus,
        n,
        t,
        q: None,
        l_bits: 6 * 16 * k,
        d_bits: Some(16 * k),
        trials,
        seed: 1_000 * n as u64,
        cost_model: BroadcastCostModel::default(),
        faulty: None,
    }
}

/// Counts violations of the three core agreement properties.
fn core_violations(tr: &Transcript) -> usize {
    tr.verdict
        .violations
        .iter()
        .filter(|v| {
            matches!(
                v.property,
                Property::Termination | Property::Consistency | Property::Validity
            )
        })
        .count()
}

fn run_scenarios(list: &[Scenario]) -> (usize, usize, u64, Vec<String>) {
    let mut core = 0;
    let mut other = 0;
    let mut max_diag = 0;
    let mut failed = Vec::new();
    for s in list {
        match replay(&s.replay) {
            Ok(tr) => {
                let c = core_violations(&tr);
                core += c;
                other += tr.verdict.violations.len() - c;
                max_diag = max_diag.max(tr.verdict.diagnosis_count);
                if !tr.verdict.pass {
                    failed.push(s.name.clone());
                }
            }
            Err(e) => {
                core += 1;
                failed.push(format!("{} ({e})", s.name));
            }
        }
    }
    (core, other, max_diag, failed)
}

fn byzantine_suite(opts: Options, shared: &mut Shared) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (n, t) in [(4, 1), (7, 2)] {
        let spec = alg1_spec(n, t, opts.trials());
        let report = match sweep(&spec) {
            Ok(r) => r,
            Err(e) => {
                return Outcome {
                    pass: false,
                    detail: e.to_string(),
                }
            }
        };
        let crafted = handcrafted(n, t, 17);
        let (core, other, crafted_max, failed) = run_scenarios(&crafted);
        pass &= report.passed() && core == 0 && other == 0 && crafted.len() >= 8;
        let max = report.max_diagnosis_count.max(crafted_max);
        shared.max_diag_alg1.push((t, max));
        detail.push(format!(
            "({n},{t}): {} random with {} failing, {} scripted with {} core and {} other violations{}",
            spec.trials,
            report.failures,
            crafted.len(),
            core,
            other,
            if failed.is_empty() { String::new() } else { format!(" {failed:?}") }
        ));
        shared.alg1_specs.push(spec);
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn diagnosis_bounds(shared: &Shared) -> Outcome {
    let mut pass = !shared.max_diag_alg1.is_empty() && !shared.max_diag_alg2.is_empty();
    let mut detail = Vec::new();
    for (alg, list) in [
        (Algorithm::Consensus, &shared.max_diag_alg1),
        (Algorithm::QValidity, &shared.max_diag_alg2),
    ] {
        for &(t, max) in list {
            let bound = diagnosis_bound(alg, t);
            pass &= max <= bound;
            detail.push(format!("{alg} t={t}: max {max} <= {bound}"));
        }
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn split_termination() -> Outcome {
    let mut cfg = fault_free_alg1(4, 1, 2400, 240, BroadcastCostModel::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let other = random_value(&mut rng, cfg.l_bits);
    cfg.inputs[2] = other.clone();
    cfg.inputs[3] = other;
    let tr = match honest_run(&cfg) {
        Ok(tr) => tr,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: e,
            }
        }
    };
    let default = DataBlock::zeroed(cfg.input_bytes());
    let identical_default = tr.outputs.iter().all(|o| o.as_ref() == Some(&default));
    let pass = tr.terminated.is_some() && identical_default && tr.verdict.pass;
    Outcome {
        pass,
        detail: format!(
            "terminated in generation {}, outputs all default: {identical_default}",
            tr.terminated.map_or("none".to_string(), |g| g.to_string())
        ),
    }
}

fn q_trial(q: usize, seed: u64) -> Replay {
    let (n, t) = (7, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d_bits = 16 * q as u64;
    let l_bits = 4 * d_bits;
    let count = rng.gen_range(0..=t);
    let faulty: BTreeSet<usize> = sample(&mut rng, n, count).into_iter().collect();
    let good = n - faulty.len();
    let holders = rng.gen_range(q..=good);
    let plan = if rng.gen_bool(0.5) {
        InputPlan::Shared { holders }
    } else {
        InputPlan::Diverge { holders }
    };
    let mut config = ExecutionConfig {
        algorithm: Algorithm::QValidity,
        n,
        t,
        q: Some(q),
        l_bits,
        d_bits,
        seed,
        faulty,
        inputs: Vec::new(),
        cost_model: BroadcastCostModel::default(),
        early_terminate: false,
    };
    config.inputs = make_inputs(&mut rng, n, l_bits, d_bits, &config.faulty, plan);
    let script = random_script(&mut rng, &config);
    Replay { config, script }
}

fn q_validity(opts: Options, shared: &mut Shared) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let mut max_diag = 0;
    for q in 3..=5 {
        let crafted = handcrafted_qvalidity(7, 2, q, 23);
        let (core, other, crafted_max, failed) = run_scenarios(&crafted);
        max_diag = max_diag.max(crafted_max);
        let mut random_failures = 0;
        for i in 0..opts.q_trials() {
            match replay(&q_trial(q, 50_000 + 1_000 * q as u64 + i)) {
                Ok(tr) => {
                    max_diag = max_diag.max(tr.verdict.diagnosis_count);
                    random_failures += usize::from(!tr.verdict.pass);
                }
                Err(_) => random_failures += 1,
            }
        }
        pass &= core == 0 && other == 0 && random_failures == 0;
        detail.push(format!(
            "q={q}: {} scripted ({} violations{}), {} random ({random_failures} failing)",
            crafted.len(),
            core + other,
            if failed.is_empty() {
                String::new()
            } else {
                format!(" {failed:?}")
            },
            opts.q_trials()
        ));
    }
    // A smaller system exercises the bound at t = 1.
    let spec = SweepSpec {
        algorithm: Algorithm::QValidity,
        n: 4,
        t: 1,
        q: Some(QRange { lo: 2, hi: 3 }),
        l_bits: 192,
        d_bits: None,
        trials: opts.q_trials(),
        seed: 90_000,
        cost_model: BroadcastCostModel::default(),
        faulty: None,
    };
    match sweep(&spec) {
        Ok(r) => {
            pass &= r.passed();
            shared.max_diag_alg2.push((1, r.max_diagnosis_count));
            detail.push(format!(
                "(4,1) q=2..3: {} random ({} failing)",
                spec.trials, r.failures
            ));
        }
        Err(e) => {
            pass = false;
            detail.push(e.to_string());
        }
    }
    shared.max_diag_alg2.push((2, max_diag));
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn q_traffic() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let none = BTreeSet::new();
    for q in 3..=5 {
        let mut max = 0;
        let mut bound = 0;
        for (i, plan) in [
            InputPlan::Identical,
            InputPlan::Shared { holders: q },
            InputPlan::Diverge { holders: q },
            InputPlan::Shared { holders: 5 },
        ]
        .into_iter()
        .enumerate()
        {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            let d_bits = 16 * q as u64;
            let cfg = ExecutionConfig {
                algorithm: Algorithm::QValidity,
                n: 7,
                t: 2,
                q: Some(q),
                l_bits: 4 * d_bits,
                d_bits,
                seed: i as u64,
                faulty: none.clone(),
                inputs: make_inputs(&mut rng, 7, 4 * d_bits, d_bits, &none, plan),
                cost_model: BroadcastCostModel::default(),
                early_terminate: false,
            };
            let Ok(tr) = honest_run(&cfg) else {
                return Outcome {
                    pass: false,
                    detail: format!("q={q}: run failed"),
                };
            };
            let c = check_complexity(&tr, &cfg);
            pass &= c.within_symbol_bound && tr.verdict.pass;
            max = max.max(c.matching_symbols.iter().copied().max().unwrap_or(0));
            bound = c.symbol_bound;
        }
        detail.push(format!("q={q}: max {max} <= {bound} symbols"));
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn codec_properties() -> Outcome {
    let p = CodeParams::new(4, 2, 1).expect("valid parameters");
    let round_trip = (0..=u16::MAX).all(|x| {
        let data = DataBlock::new(x.to_be_bytes().to_vec());
        encode(&p, &data)
            .and_then(|cw| decode(&p, &cw))
            .is_ok_and(|d| d == data)
    });
    let mut distance_ok = true;
    for n in 1..=7 {
        for k in 1..=n.min(2) {
            let p = CodeParams::new(n, k, 1).expect("valid parameters");
            distance_ok &= min_distance_bruteforce(&p).is_ok_and(|d| d == n - k + 1);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut reconstruct_ok = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=12);
        let k = rng.gen_range(1..=n);
        let p = CodeParams::new(n, k, rng.gen_range(1..=4)).expect("valid parameters");
        let mut bytes = vec![0u8; p.data_bytes()];
        rng.fill(bytes.as_mut_slice());
        let cw = encode(&p, &DataBlock::new(bytes)).expect("encodes");
        let sources = sample(&mut rng, n, k).into_vec();
        let j = rng.gen_range(0..n);
        if reconstruct_position(&p, &cw, j, &sources).is_ok_and(|s| Some(&s) == cw.get(j)) {
            reconstruct_ok += 1;
        }
    }
    Outcome {
        pass: round_trip && distance_ok && reconstruct_ok == 1000,
        detail: format!(
            "exhaustive (4,2) round trip: {round_trip}; MDS distance: {distance_ok}; reconstruct {reconstruct_ok}/1000"
        ),
    }
}

fn determinism(shared: &Shared) -> Outcome {
    if shared.alg1_specs.is_empty() {
        return Outcome {
            pass: false,
            detail: "no correctness suite to sample".into(),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut identical = 0;
    for _ in 0..20 {
        let spec = &shared.alg1_specs[rng.gen_range(0..shared.alg1_specs.len())];
        let index = rng.gen_range(0..spec.trials);
        let ok = (|| -> Option<bool> {
            let r = trial(spec, index).ok()?;
            let first = run_execution(&r.config, &r.script).ok()?.to_jsonl();
            let json = serde_json::to_string(&r).ok()?;
            let back: Replay = serde_json::from_str(&json).ok()?;
            Some(replay(&back).ok()?.to_jsonl() == first)
        })();
        identical += usize::from(ok == Some(true));
    }
    Outcome {
        pass: identical == 20,
        detail: format!("{identical}/20 replays byte-identical"),
    }
}
