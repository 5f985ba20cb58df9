use std::collections::BTreeSet;

use ecbc_core::consensus::matching_obligations;
use ecbc_core::{DiagGraph, SendObligation, Step};
use proptest::prelude::*;

/// Reference model: replays all removals, then repeatedly convicts any vertex
/// with more than `t` missing edges until nothing changes.
fn fixpoint_oracle(
    n: usize,
    t: usize,
    removals: &[(usize, usize)],
) -> (BTreeSet<(usize, usize)>, BTreeSet<usize>) {
    let mut missing: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut convicted = BTreeSet::new();
    for &(a, b) in removals {
        missing.insert((a.min(b), a.max(b)));
        loop {
            let degree = |v: usize| missing.iter().filter(|&&(x, y)| x == v || y == v).count();
            let Some(v) = (0..n).find(|v| !convicted.contains(v) && degree(*v) > t) else {
                break;
            };
            convicted.insert(v);
            for u in (0..n).filter(|&u| u != v) {
                missing.insert((u.min(v), u.max(v)));
            }
        }
    }
    (missing, convicted)
}

fn present(g: &DiagGraph) -> BTreeSet<(usize, usize)> {
    g.edges().collect()
}

fn all_pairs(n: usize) -> BTreeSet<(usize, usize)> {
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect()
}

#[test]
fn threshold_conviction_removes_remaining_edges() {
    let mut g = DiagGraph::new_complete(4, 1).unwrap();
    g.remove_edge(0, 1);
    assert!(!g.is_convicted(0));
    let delta = g.remove_edge(0, 2);
    assert_eq!(delta.convicted, vec![0]);
    assert!(!g.has_edge(0, 3));
    assert_eq!(g.removed_count(0), 3);
}

#[test]
fn cascade_on_seven_vertices() {
    // t = 2: vertex 1 already lost two edges, so convicting vertex 0 pushes it over.
    let mut g = DiagGraph::new_complete(7, 2).unwrap();
    g.remove_edge(1, 4);
    g.remove_edge(1, 5);
    g.remove_edge(0, 6);
    g.remove_edge(0, 5);
    assert!(g.convicted().is_empty());
    let delta = g.remove_edge(0, 4);
    assert_eq!(delta.convicted, vec![0, 1]);
    let (missing, convicted) = fixpoint_oracle(7, 2, &[(1, 4), (1, 5), (0, 6), (0, 5), (0, 4)]);
    assert_eq!(g.convicted(), convicted);
    assert_eq!(present(&g), &all_pairs(7) - &missing);
}

#[test]
fn helper_examples() {
    let mut g = DiagGraph::new_complete(5, 1).unwrap();
    let pm: BTreeSet<usize> = [0, 1, 3].into();
    assert_eq!(g.match_helper(2, &pm), Some(0));
    g.remove_edge(2, 0);
    assert_eq!(g.match_helper(2, &pm), Some(1));
    g.remove_edge(2, 4);
    assert_eq!(g.match_helper(2, &[4].into()), None);
    assert_eq!(g.match_helper(4, &[4].into()), Some(4));
}

proptest! {
    #[test]
    fn matches_fixpoint_oracle(
        (n, t) in prop_oneof![Just((4usize, 1usize)), Just((7, 2)), Just((10, 3))],
        raw in proptest::collection::vec((0usize..10, 0usize..10), 0..30),
    ) {
        let removals: Vec<(usize, usize)> = raw
            .into_iter()
            .map(|(a, b)| (a % n, b % n))
            .filter(|(a, b)| a != b)
            .collect();
        let mut g = DiagGraph::new_complete(n, t).unwrap();
        let mut previous = present(&g);
        for &(a, b) in &removals {
            g.remove_edge(a, b);
            let now = present(&g);
            prop_assert!(now.is_subset(&previous), "edges only shrink");
            previous = now;
        }
        let (missing, convicted) = fixpoint_oracle(n, t, &removals);
        prop_assert_eq!(g.convicted(), convicted.clone());
        prop_assert_eq!(present(&g), &all_pairs(n) - &missing);
        for v in 0..n {
            prop_assert_eq!(g.removed_count(v) > t, g.is_convicted(v));
            prop_assert!(g.trusts(v, v));
            if g.is_convicted(v) {
                prop_assert!((0..n).all(|u| !g.has_edge(u, v)));
            }
        }
    }

    #[test]
    fn removal_is_idempotent(a in 0usize..7, b in 0usize..7) {
        prop_assume!(a != b);
        let mut once = DiagGraph::new_complete(7, 2).unwrap();
        once.remove_edge(a, b);
        let mut twice = once.clone();
        prop_assert!(twice.remove_edge(b, a).is_empty());
        prop_assert_eq!(once.snapshot(), twice.snapshot());
    }
}

fn count(obs: &[SendObligation], step: Step) -> usize {
    obs.iter().filter(|o| o.step == step).count()
}

#[test]
fn full_trust_full_match_is_all_own_symbols() {
    let g = DiagGraph::new_complete(4, 1).unwrap();
    let obs = matching_obligations(&g, &(0..4).collect(), 4, 1);
    assert_eq!(obs.len(), 12);
    assert_eq!(count(&obs, Step::OwnSymbol), 12);
    assert!(obs
        .iter()
        .all(|o| o.slot == o.sender && o.sender != o.receiver));
    assert!(obs.windows(2).all(|w| w[0] < w[1]), "canonical order");
}

#[test]
fn non_member_relays_instead_of_sending_own_symbol() {
    // Only match-set members send coded symbols; the outsider's slot arrives
    // through its recomputed symbol.
    let g = DiagGraph::new_complete(4, 1).unwrap();
    let obs = matching_obligations(&g, &[0, 1, 2].into(), 4, 1);
    assert_eq!(count(&obs, Step::OwnSymbol), 9);
    assert_eq!(count(&obs, Step::Helper), 0);
    assert_eq!(count(&obs, Step::Relay), 3);
    assert!(obs
        .iter()
        .filter(|o| o.step == Step::Relay)
        .all(|o| o.sender == 3 && o.slot == 3));
}

#[test]
fn helper_covers_distrusted_member() {
    let mut g = DiagGraph::new_complete(4, 1).unwrap();
    g.remove_edge(1, 2);
    let obs = matching_obligations(&g, &(0..4).collect(), 4, 1);
    let helpers: Vec<_> = obs.iter().filter(|o| o.step == Step::Helper).collect();
    assert_eq!(helpers.len(), 2);
    assert!(helpers.contains(&&SendObligation {
        step: Step::Helper,
        sender: 0,
        receiver: 2,
        slot: 1
    }));
    assert!(helpers.contains(&&SendObligation {
        step: Step::Helper,
        sender: 0,
        receiver: 1,
        slot: 2
    }));
    assert_eq!(count(&obs, Step::OwnSymbol), 10);
}
