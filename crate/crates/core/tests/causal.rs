use std::path::PathBuf;

use polyc_core::boolnet::{
    build_tpm, causal_emergence, coarse_grain, effective_information, parse_network,
    search_partitions, Partition, SearchMode, Tpm,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{best_ce_oracle, macro_rows, mi_oracle};

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    std::fs::read_to_string(p).unwrap()
}

fn random_rows(rng: &mut impl Rng, n: usize, sparse: bool) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut r: Vec<f64> = (0..n)
                .map(|_| {
                    if sparse && rng.gen_bool(0.6) {
                        0.0
                    } else {
                        rng.gen::<f64>()
                    }
                })
                .collect();
            if r.iter().all(|&p| p == 0.0) {
                r[rng.gen_range(0..n)] = 1.0;
            }
            let s: f64 = r.iter().sum();
            r.iter().map(|p| p / s).collect()
        })
        .collect()
}

fn deterministic_rows(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut r = vec![0.0; n];
            r[rng.gen_range(0..n)] = 1.0;
            r
        })
        .collect()
}

#[test]
fn identity_ei_is_bit_count() {
    for bits in 1..=8 {
        let r = effective_information(&Tpm::identity(1 << bits));
        assert!((r.ei - bits as f64).abs() < 1e-12, "{bits}: {}", r.ei);
        assert!((r.determinism - 1.0).abs() < 1e-12);
        assert!(r.degeneracy.abs() < 1e-12);
    }
}

#[test]
fn constant_map_has_no_ei() {
    for n in [2, 5, 16] {
        let r = effective_information(&Tpm::from_map(&vec![0; n]).unwrap());
        assert_eq!(r.ei, 0.0);
    }
}

#[test]
fn decomposition_over_random_tpms() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..500 {
        let n = rng.gen_range(2..=32);
        let rows = random_rows(&mut rng, n, case % 2 == 0);
        let tpm = Tpm::from_rows(rows.clone()).unwrap();
        let r = effective_information(&tpm);
        let lhs = (r.determinism - r.degeneracy) * (n as f64).log2();
        assert!((r.ei - lhs).abs() < 1e-9, "case {case}");
        assert!((r.ei - mi_oracle(&rows)).abs() < 1e-9, "case {case}");
    }
}

#[test]
fn and_pair_exhaustive_matches_oracle() {
    let net = parse_network(
        r#"[{"name": "A", "inputs": [0, 1], "table": [0, 0, 0, 1]},
            {"name": "B", "inputs": [0, 1], "table": [0, 0, 0, 1]}]"#,
    )
    .unwrap();
    let tpm = build_tpm(&net).unwrap();
    let r = search_partitions(&tpm, Some(SearchMode::Exhaustive), None).unwrap();
    assert!((r.ce - 0.188722).abs() < 1e-6, "{}", r.ce);
    assert_eq!(r.partition.canonical().mapping(), &[0, 0, 0, 1]);
    assert_eq!(r.evaluations, 15);
    let rows: Vec<Vec<f64>> = tpm.rows().map(|r| r.to_vec()).collect();
    assert!((r.ce - best_ce_oracle(&rows)).abs() < 1e-12);
}

#[test]
fn exhaustive_matches_oracle_on_random_tpms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..40 {
        let n = rng.gen_range(2..=6);
        let rows = if case % 2 == 0 {
            deterministic_rows(&mut rng, n)
        } else {
            random_rows(&mut rng, n, true)
        };
        let tpm = Tpm::from_rows(rows.clone()).unwrap();
        let r = search_partitions(&tpm, Some(SearchMode::Exhaustive), None).unwrap();
        let oracle = best_ce_oracle(&rows);
        assert!(
            (r.ce - oracle).abs() < 1e-9,
            "case {case}: {} vs {oracle}",
            r.ce
        );
        let direct = causal_emergence(&tpm, &r.partition).unwrap();
        assert!((direct - r.ce).abs() < 1e-12);
    }
}

#[test]
fn greedy_never_beats_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..60 {
        let n = rng.gen_range(2..=8);
        let rows = if case % 3 == 0 {
            random_rows(&mut rng, n, true)
        } else {
            deterministic_rows(&mut rng, n)
        };
        let tpm = Tpm::from_rows(rows).unwrap();
        let ex = search_partitions(&tpm, Some(SearchMode::Exhaustive), None).unwrap();
        let gr = search_partitions(&tpm, Some(SearchMode::Greedy), None).unwrap();
        assert!(gr.ce <= ex.ce + 1e-12, "case {case}");
        assert!(gr.ce >= 0.0);
        let direct = causal_emergence(&tpm, &gr.partition).unwrap();
        assert!((direct - gr.ce).abs() < 1e-9);
    }
}

#[test]
fn and_ring_fixture() {
    let net = parse_network(&fixture("and_ring.json")).unwrap();
    assert_eq!(net.len(), 6);
    let tpm = build_tpm(&net).unwrap();
    assert_eq!(tpm.n_states(), 64);
    let mapping: Vec<usize> = serde_json::from_str(&fixture("and_ring_pairs.json")).unwrap();
    let part = Partition::new(mapping).unwrap();
    assert_eq!(part.n_macro(), 8);
    let micro = effective_information(&tpm).ei;
    let macro_ei = effective_information(&coarse_grain(&tpm, &part).unwrap()).ei;
    assert!((macro_ei - 3.0).abs() < 1e-12);
    assert!((micro - 2.433834).abs() < 1e-6, "{micro}");
    let ce = causal_emergence(&tpm, &part).unwrap();
    assert!((ce - 0.57).abs() <= 0.01, "{ce}");
}

#[test]
fn and_ring_search_finds_the_macro_scale() {
    let net = parse_network(&fixture("and_ring.json")).unwrap();
    let tpm = build_tpm(&net).unwrap();
    let r = search_partitions(&tpm, None, None).unwrap();
    assert_eq!(r.mode, SearchMode::Greedy);
    assert!(r.ce >= 0.566 - 1e-6, "{}", r.ce);
}

fn tpm_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=12).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n).prop_map(|rows| {
            rows.into_iter()
                .map(|mut r| {
                    if r.iter().sum::<f64>() == 0.0 {
                        r[0] = 1.0;
                    }
                    let s: f64 = r.iter().sum();
                    r.iter().map(|p| p / s).collect()
                })
                .collect()
        })
    })
}

fn mapping_for(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=n);
    let mut m: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.gen_range(0..k) })
        .collect();
    // Shuffle so group ids are not sorted by state.
    for i in (1..n).rev() {
        m.swap(i, rng.gen_range(0..=i));
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ei_bounds_and_oracle(rows in tpm_strategy()) {
        let n = rows.len();
        let r = effective_information(&Tpm::from_rows(rows.clone()).unwrap());
        prop_assert!(r.ei >= -1e-12 && r.ei <= (n as f64).log2() + 1e-12);
        prop_assert!((r.ei - mi_oracle(&rows)).abs() < 1e-9);
        prop_assert!((r.ei - (r.determinism - r.degeneracy) * (n as f64).log2()).abs() < 1e-9);
    }

    #[test]
    fn ei_invariant_under_relabeling(rows in tpm_strategy(), seed in any::<u64>()) {
        let n = rows.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mut permuted = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                permuted[perm[i]][perm[j]] = rows[i][j];
            }
        }
        let a = effective_information(&Tpm::from_rows(rows).unwrap()).ei;
        let b = effective_information(&Tpm::from_rows(permuted).unwrap()).ei;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn coarse_grain_is_stochastic_and_capped(rows in tpm_strategy(), seed in any::<u64>()) {
        let n = rows.len();
        let mapping = mapping_for(n, seed);
        let tpm = Tpm::from_rows(rows.clone()).unwrap();
        let part = Partition::new(mapping.clone()).unwrap();
        let coarse = coarse_grain(&tpm, &part).unwrap();
        prop_assert_eq!(coarse.n_states(), part.n_macro());
        prop_assert!(coarse.max_row_error() < 1e-9);
        let ei = effective_information(&coarse).ei;
        prop_assert!(ei <= (part.n_macro() as f64).log2() + 1e-12);
        let oracle = macro_rows(&rows, &mapping);
        for (a, row) in oracle.iter().enumerate() {
            for (b, &p) in row.iter().enumerate() {
                prop_assert!((coarse.get(a, b) - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trivial_partition_has_zero_emergence(rows in tpm_strategy()) {
        let n = rows.len();
        let tpm = Tpm::from_rows(rows).unwrap();
        let ce = causal_emergence(&tpm, &Partition::trivial(n)).unwrap();
        prop_assert!(ce.abs() < 1e-12);
    }
}
