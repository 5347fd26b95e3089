use std::path::PathBuf;

use polyc_core::boolnet::{parse_network, BooleanNetwork, Node};
use polyc_core::memory_screen::{
    all_triplets, find_attractor, random_control, random_controls, run_protocol, screen_network,
    screen_triplets, Classification, Protocol, Response, Triplet,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::memory as oracle;

fn latch() -> BooleanNetwork {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/latch.json");
    parse_network(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const U: usize = 0;
const C: usize = 1;
const M: usize = 2;
const R: usize = 3;

fn random_net(rng: &mut impl Rng, n: usize) -> BooleanNetwork {
    let nodes = (0..n)
        .map(|i| {
            let k = rng.gen_range(0..=3.min(n));
            let inputs = rand::seq::index::sample(rng, n, k).into_vec();
            let table = (0..1 << k).map(|_| rng.gen_range(0..2)).collect();
            Node {
                name: format!("n{i}"),
                inputs,
                table,
            }
        })
        .collect();
    BooleanNetwork::new(nodes).unwrap()
}

#[test]
fn latch_rests_at_zero() {
    let a = find_attractor(&latch(), 0, 4096).unwrap();
    assert_eq!(a.states, vec![0]);
}

#[test]
fn latch_learns_through_the_conditioned_channel() {
    let p = Protocol::default();
    let o = run_protocol(&latch(), Triplet::new(U, C, R), &p).unwrap();
    assert_eq!(
        (o.r_pre, o.r_ucs, o.r_post),
        (Response::Silent, Response::Responds, Response::Responds)
    );
    assert_eq!(o.classification, Classification::Associative);

    let o = run_protocol(&latch(), Triplet::new(C, U, R), &p).unwrap();
    assert_eq!(o.r_pre, Response::Responds);
    assert_eq!(o.classification, Classification::None);
}

#[test]
fn latch_hit_list() {
    let r = screen_network(&latch(), &Protocol::default()).unwrap();
    assert_eq!(r.triplets.len(), 24);
    assert!(r.hits.contains(&Triplet::new(U, C, R)));
    // U holds itself on once clamped, so any silent CS paired with it
    // reads as conditioned.
    assert_eq!(r.hits, vec![Triplet::new(U, C, R), Triplet::new(U, M, R)]);
    assert_eq!(r.counts.associative + r.counts.none + r.counts.skipped, 24);
}

#[test]
fn oracle_agrees_on_latch() {
    let p = Protocol::default();
    let net = latch();
    let r = screen_network(&net, &p).unwrap();
    for rec in &r.triplets {
        let (pre, ucs, post) = oracle::run(&net, rec.triplet, &p);
        assert_eq!(
            (rec.outcome.r_pre, rec.outcome.r_ucs, rec.outcome.r_post),
            (pre, ucs, post)
        );
    }
}

#[test]
fn oracle_agrees_on_random_small_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let protocols = [
        Protocol::default(),
        Protocol {
            stim_steps: 3,
            obs_window: 7,
            on_fraction: 0.6,
            off_fraction: 0.3,
            relax_steps: 64,
        },
    ];
    for case in 0..150 {
        let n = rng.gen_range(3..=5);
        let net = random_net(&mut rng, n);
        let p = &protocols[case % 2];
        let r = screen_network(&net, p).unwrap();
        for rec in &r.triplets {
            let (pre, ucs, post) = oracle::run(&net, rec.triplet, p);
            assert_eq!(
                (rec.outcome.r_pre, rec.outcome.r_ucs, rec.outcome.r_post),
                (pre, ucs, post),
                "case {case} {:?}",
                rec.triplet
            );
        }
    }
}

#[test]
fn screen_is_reproducible() {
    let p = Protocol::default();
    let a = serde_json::to_string(&screen_network(&latch(), &p).unwrap()).unwrap();
    let b = serde_json::to_string(&screen_network(&latch(), &p).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn edgeless_controls_have_no_hits() {
    let net = BooleanNetwork::new(
        (0..4)
            .map(|i| Node {
                name: format!("z{i}"),
                inputs: vec![],
                table: vec![0],
            })
            .collect(),
    )
    .unwrap();
    let s = random_controls(&net, &Protocol::default(), 10, 4).unwrap();
    assert_eq!(s.original_hits, 0);
    assert!(s.control_hits.iter().all(|&h| h == 0));
    assert_eq!((s.min, s.max, s.mean), (0, 0, 0.0));
}

#[test]
fn controls_keep_indegree_and_are_seeded() {
    let net = latch();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let c = random_control(&net, &mut rng);
        for (a, b) in net.nodes.iter().zip(&c.nodes) {
            assert_eq!(a.inputs.len(), b.inputs.len());
            let mut ins = b.inputs.clone();
            ins.sort_unstable();
            ins.dedup();
            assert_eq!(ins.len(), b.inputs.len());
        }
        c.validate().unwrap();
    }
    let p = Protocol::default();
    let a = random_controls(&net, &p, 20, 9).unwrap();
    let b = random_controls(&net, &p, 20, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.original_hits >= 1);
    assert_eq!(a.control_hits.len(), 20);
    println!("latch controls: {:?}", a.control_hits);
}

#[test]
fn screen_needs_three_nodes() {
    let net = parse_network(
        r#"[{"name": "a", "inputs": [], "table": [0]}, {"name": "b", "inputs": [], "table": [1]}]"#,
    )
    .unwrap();
    assert!(screen_network(&net, &Protocol::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn triplet_order_does_not_matter(seed in any::<u64>(), shuffle in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=6);
        let net = random_net(&mut rng, n);
        let p = Protocol::default();
        let forward = all_triplets(n);
        let mut shuffled = forward.clone();
        let mut srng = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, srng.gen_range(0..=i));
        }
        let a = screen_triplets(&net, &p, &forward).unwrap();
        let b = screen_triplets(&net, &p, &shuffled).unwrap();
        for t in &forward {
            prop_assert_eq!(a.outcome(*t), b.outcome(*t));
        }
    }

    #[test]
    fn classification_matches_phases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=6);
        let net = random_net(&mut rng, n);
        let r = screen_network(&net, &Protocol::default()).unwrap();
        for rec in &r.triplets {
            let o = rec.outcome;
            let ambiguous = [o.r_pre, o.r_ucs, o.r_post].contains(&Response::Ambiguous);
            let assoc = o.r_pre == Response::Silent
                && o.r_ucs == Response::Responds
                && o.r_post == Response::Responds;
            prop_assert_eq!(o.classification == Classification::Skipped, ambiguous);
            prop_assert_eq!(o.classification == Classification::Associative, assoc && !ambiguous);
        }
        prop_assert_eq!(r.hits.len(), r.counts.associative);
    }
}
