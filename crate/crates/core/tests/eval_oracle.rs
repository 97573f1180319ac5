mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sidda::data::{generate_synthetic, SyntheticSpec};
use sidda::eval::{evaluate, hits_at_n, rank_of_target, EvalReport};
use sidda::model::{prefix_scores, ModelParams};

use common::brute_force_metrics;

#[test]
fn evaluate_matches_brute_force_on_random_model() {
    let spec = SyntheticSpec {
        communities: 3,
        nodes_per_community: 10,
        cascades: 20,
        length_range: (3, 10),
        seed: 21,
        ..Default::default()
    };
    let cascades = generate_synthetic(&spec).unwrap().cascades;
    let params = ModelParams::init(30, 8, 2, 21).unwrap();
    let cutoffs = [1, 5, 10, 50, 100];
    let report = evaluate(&params, &cascades, &cutoffs).unwrap();
    let brute = brute_force_metrics(|p| prefix_scores(&params, p).unwrap(), &cascades, &cutoffs);
    assert_eq!(report.prediction_points, brute.points);
    for (i, n) in cutoffs.iter().enumerate() {
        assert_eq!(report.hits[n], brute.hits[i], "hits@{n}");
        assert_eq!(report.map[n], brute.map[i], "map@{n}");
    }
    // 30 nodes: every target is inside the top 50.
    assert_eq!(report.hits[&50], 1.0);
    assert!(report.is_consistent());
}

#[test]
fn uniform_random_scores_hit_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let nodes = 40;
    let points = 20_000;
    let ranks: Vec<usize> = (0..points)
        .map(|_| {
            let scores: Vec<f64> = (0..nodes).map(|_| rng.gen()).collect();
            rank_of_target(&scores, rng.gen_range(0..nodes))
        })
        .collect();
    for n in [1, 5, 10, 20] {
        let p = n as f64 / nodes as f64;
        let se = (p * (1.0 - p) / points as f64).sqrt();
        let h = hits_at_n(&ranks, n).unwrap();
        assert!((h - p).abs() < 3.0 * se, "hits@{n} = {h}, expected {p}");
    }
}

#[test]
fn report_invariants_hold_for_random_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let ranks: Vec<usize> = (0..rng.gen_range(1..50)).map(|_| rng.gen_range(1..150)).collect();
        let report = EvalReport::from_ranks(&ranks, &[10, 50, 100]).unwrap();
        assert!(report.is_consistent());
        assert!(report.hits.values().chain(report.map.values()).all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn empty_evaluation_set_is_an_error() {
    let params = ModelParams::init(5, 4, 1, 0).unwrap();
    assert!(evaluate(&params, &[], &[10]).is_err());
}
