use ecbc_core::rs_codec::{
    self, decode, encode, is_codeword, min_distance_bruteforce, reconstruct_position, CodeParams,
    DataBlock, MacroSymbol, SymbolVector, TestVector,
};
use proptest::prelude::*;

fn vectors() -> Vec<TestVector> {
    include_str!("data/rs_vectors.txt")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.parse().expect("valid vector line"))
        .collect()
}

#[test]
fn encode_matches_interpolation_vectors() {
    let vs = vectors();
    assert!(vs.len() >= 10);
    for v in vs {
        let cw = encode(&v.params, &v.data).unwrap();
        assert_eq!(cw, v.codeword_vector(), "{v}");
        assert_eq!(decode(&v.params, &cw).unwrap(), v.data);
    }
}

#[test]
fn three_symbol_example() {
    let v: TestVector = "3 2 1 0102 010207".parse().unwrap();
    let cw = encode(&v.params, &v.data).unwrap();
    assert_eq!(cw.get(2), Some(&MacroSymbol::new(vec![0x07])));
}

#[test]
fn exhaustive_round_trip_4_2() {
    let p = CodeParams::new(4, 2, 1).unwrap();
    for x in 0..=u16::MAX {
        let data = DataBlock::new(x.to_be_bytes().to_vec());
        let cw = encode(&p, &data).unwrap();
        assert_eq!(decode(&p, &cw).unwrap(), data);
    }
}

#[test]
fn minimum_distance_is_mds() {
    for n in 1..=7 {
        for k in 1..=n.min(2) {
            let p = CodeParams::new(n, k, 1).unwrap();
            assert_eq!(
                min_distance_bruteforce(&p).unwrap(),
                n - k + 1,
                "n={n} k={k}"
            );
        }
    }
    let p = CodeParams::new(4, 3, 1).unwrap();
    assert!(min_distance_bruteforce(&p).is_err(), "k*8 > 16 is refused");
    assert_eq!(
        min_distance_bruteforce(&CodeParams::new(2, 2, 1).unwrap()).unwrap(),
        1
    );
}

/// Brute-force oracle: a vector is on the code iff some k-subset of its
/// present slots interpolates to a codeword agreeing everywhere.
fn on_some_codeword(p: &CodeParams, v: &SymbolVector) -> bool {
    let present: Vec<usize> = v.present().collect();
    let k = p.k();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let sources: Vec<usize> = idx.iter().map(|&i| present[i]).collect();
        let agrees = (0..p.n()).all(|j| match v.get(j) {
            None => true,
            Some(s) => reconstruct_position(p, v, j, &sources).unwrap() == *s,
        });
        if agrees {
            return true;
        }
        let mut i = k;
        while i > 0 && idx[i - 1] == present.len() - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn params() -> impl Strategy<Value = CodeParams> {
    (2usize..=12, 1usize..=4)
        .prop_flat_map(|(n, s)| (1..=n).prop_map(move |k| CodeParams::new(n, k, s).unwrap()))
}

fn params_and_data() -> impl Strategy<Value = (CodeParams, DataBlock)> {
    params().prop_flat_map(|p| {
        proptest::collection::vec(any::<u8>(), p.data_bytes())
            .prop_map(move |d| (p, DataBlock::new(d)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn reconstruct_agrees_with_encode((p, data) in params_and_data(), seed in any::<u64>()) {
        let cw = encode(&p, &data).unwrap();
        // A pseudo-random k-subset of sources and a target position.
        let mut order: Vec<usize> = (0..p.n()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let sources = &order[..p.k()];
        let j = (seed as usize) % p.n();
        prop_assert_eq!(&reconstruct_position(&p, &cw, j, sources).unwrap(), cw.get(j).unwrap());
    }

    #[test]
    fn systematic_and_closed((p, data) in params_and_data()) {
        let cw = encode(&p, &data).unwrap();
        let sb = p.sym_bytes();
        for i in 0..p.k() {
            prop_assert_eq!(cw.get(i).unwrap().as_bytes(), &data.as_bytes()[i * sb..(i + 1) * sb]);
        }
        prop_assert!(is_codeword(&p, &cw).unwrap());
    }

    #[test]
    fn decode_survives_max_erasures((p, data) in params_and_data(), mask in any::<u64>()) {
        let mut cw = encode(&p, &data).unwrap();
        let mut erased = 0;
        for j in 0..p.n() {
            if erased < p.n() - p.k() && mask >> j & 1 == 1 {
                cw.set(j, None);
                erased += 1;
            }
        }
        prop_assert!(is_codeword(&p, &cw).unwrap());
        prop_assert_eq!(decode(&p, &cw).unwrap(), data);
    }

    #[test]
    fn single_corruption_detected_when_redundant(
        (p, data) in params_and_data().prop_filter("needs redundancy", |(p, _)| p.k() < p.n()),
        pos in any::<usize>(),
        lane in any::<usize>(),
        mask in 1u8..,
    ) {
        let mut cw = encode(&p, &data).unwrap();
        let j = pos % p.n();
        let mut bytes = cw.get(j).unwrap().as_bytes().to_vec();
        let lane = lane % bytes.len();
        bytes[lane] ^= mask;
        cw.set(j, Some(MacroSymbol::new(bytes)));
        prop_assert!(!is_codeword(&p, &cw).unwrap());
        prop_assert!(decode(&p, &cw).is_err());
    }

    #[test]
    fn membership_matches_bruteforce_oracle(
        p in (3usize..=6).prop_flat_map(|n| (1..n).prop_map(move |k| CodeParams::new(n, k, 1).unwrap())),
        bytes in proptest::collection::vec(any::<u8>(), 6),
        erase in any::<u8>(),
    ) {
        let slots = (0..p.n())
            .map(|j| (erase >> j & 1 == 0).then(|| MacroSymbol::new(vec![bytes[j]])))
            .collect();
        let v = SymbolVector::from_slots(slots);
        if v.present_count() < p.k() {
            prop_assert!(is_codeword(&p, &v).is_err());
        } else {
            prop_assert_eq!(is_codeword(&p, &v).unwrap(), on_some_codeword(&p, &v));
        }
    }

    #[test]
    fn lanes_are_independent((p, data) in params_and_data().prop_filter("multi-lane", |(p, _)| p.sym_bytes() > 1 && p.k() < p.n()), lane in any::<usize>()) {
        let cw = encode(&p, &data).unwrap();
        let sb = p.sym_bytes();
        let lane = lane % sb;
        let mut other = data.as_bytes().to_vec();
        for i in 0..p.k() {
            other[i * sb + lane] ^= 0x5a;
        }
        let cw2 = encode(&p, &DataBlock::new(other)).unwrap();
        for j in 0..p.n() {
            for b in (0..sb).filter(|&b| b != lane) {
                prop_assert_eq!(cw.get(j).unwrap().as_bytes()[b], cw2.get(j).unwrap().as_bytes()[b]);
            }
        }
    }
}

#[test]
fn membership_uses_lowest_present_slots() {
    let p = CodeParams::new(5, 2, 1).unwrap();
    let cw = encode(&p, &DataBlock::new(vec![3, 4])).unwrap();
    let mut v = cw.clone();
    v.set(0, None);
    assert_eq!(rs_codec::first_present(&p, &v), Some(vec![1, 2]));
    assert!(is_codeword(&p, &v).unwrap());
}
