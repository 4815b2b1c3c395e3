//! Cut experiments on tree balls and random regular graphs.

use fiid_core::gaussian::{sign_field, GraphEmulator};
use fiid_core::graph::{random_regular, tree_like_report};
use fiid_core::math::{block_factor_correlation, sign_flip_probability};
use fiid_core::partition::{
    balance_defect, bisection_heuristic, cut_size, cut_size_by_boundary, edge_cut_experiment, local_improve, rebalance,
    DEFAULT_MAX_PASSES,
};
use fiid_core::rng::{derive_substream, substream_rng};
use fiid_core::stats::ks_statistic;
use fiid_core::{BlockFactorSpec, BlockSign, CutMode, TreeBall};
use rand::Rng;

#[test]
fn tree_edges_are_cut_at_the_finite_radius_rate() {
    let ball = TreeBall::new(3, 4).unwrap();
    let g = ball.to_graph();
    let reps = 20_000;
    let sample = edge_cut_experiment(&g, 3, 2, reps, 6).unwrap();
    assert!(sample.girth_sufficient);
    let p = sign_flip_probability(block_factor_correlation(3, 2).unwrap()).unwrap();
    assert!((p - 0.6914).abs() < 1e-4);
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    let mut defined = 0;
    for (f, &def) in sample.per_edge_frequency.iter().zip(&sample.defined_edges) {
        if def {
            defined += 1;
            assert!((f - p).abs() < 4.0 * se, "edge frequency {f} vs {p}");
        }
    }
    // vertices up to depth 3 see their whole radius-1 neighbourhood: B_3 has 21 edges
    assert_eq!(defined, 21);
}

/// Cut and total counts over edges with both endpoints where the factor applied.
fn defined_cut_counts(g: &fiid_core::Graph, emulator: &GraphEmulator, seed: u64) -> (usize, usize) {
    let field = emulator.sample(seed);
    let spins = sign_field(&field, derive_substream(seed, 1));
    let mask = &field.defined_mask;
    let (mut cut, mut total) = (0, 0);
    for (u, v) in g.edges() {
        if mask[u] && mask[v] {
            total += 1;
            cut += usize::from(spins.values[u] != spins.values[v]);
        }
    }
    (cut, total)
}

#[test]
fn min_and_max_raw_cuts_are_exchangeable_on_trees() {
    let ball = TreeBall::new(3, 6).unwrap();
    let g = ball.to_graph();
    let plus = GraphEmulator::new(&g, BlockFactorSpec::new(3, 3, BlockSign::Plus).unwrap());
    let minus = GraphEmulator::new(&g, BlockFactorSpec::new(3, 3, BlockSign::Minus).unwrap());
    let reps = 1000;
    // agreement under the plus field is disagreement under the minus field;
    // integer counts keep the ties of the discrete law exact
    let agree = |i| {
        let (cut, total) = defined_cut_counts(&g, &plus, derive_substream(1, i));
        (total - cut) as f64
    };
    let a: Vec<f64> = (0..reps).map(agree).collect();
    let b: Vec<f64> = (0..reps).map(|i| defined_cut_counts(&g, &minus, derive_substream(2, i)).0 as f64).collect();
    let d = ks_statistic(&a, &b);
    let n = reps as f64;
    // two-sample Kolmogorov-Smirnov critical value at the 1% level
    let critical = 1.628 * ((2.0 * n) / (n * n)).sqrt();
    assert!(d < critical, "KS statistic {d} exceeds {critical}");
}

#[test]
fn raw_fraction_matches_prediction() {
    for seed in 0..3 {
        let g = random_regular(10_000, 3, seed).unwrap();
        for mode in [CutMode::Min, CutMode::Max] {
            let run = bisection_heuristic(&g, 3, 3, mode, seed, 0).unwrap();
            assert!(
                (run.raw.fraction - run.predicted_raw_fraction).abs() < 0.03,
                "{mode:?}: {} vs {}",
                run.raw.fraction,
                run.predicted_raw_fraction
            );
        }
        let min = bisection_heuristic(&g, 3, 3, CutMode::Min, seed, 0).unwrap();
        // tree-like vertices cut at arccos(0.7071) / pi = 1/4 per edge
        let ideal = 1.5 * 0.25;
        assert!((min.predicted_raw_fraction - ideal).abs() < 0.01 * (1.0 - min.tree_like_edge_fraction) + 0.005);
    }
}

#[test]
fn improved_min_bisection_is_strictly_better_than_raw() {
    for seed in 0..10 {
        let g = random_regular(10_000, 3, 100 + seed).unwrap();
        let run = bisection_heuristic(&g, 3, 3, CutMode::Min, seed, DEFAULT_MAX_PASSES).unwrap();
        assert!(run.improved.fraction <= run.rebalanced.fraction);
        assert!(run.improved.fraction < run.raw.fraction);
    }
}

#[test]
fn local_search_is_monotone_and_balanced_on_many_runs() {
    let mut rng = substream_rng(77, 0);
    for run in 0..200u64 {
        let n = 2 * rng.random_range(10..60);
        let d = if run % 2 == 0 { 3 } else { 4 };
        let g = random_regular(n, d, run).unwrap();
        let side: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        for mode in [CutMode::Min, CutMode::Max] {
            let balanced = rebalance(&g, &side, mode);
            assert!(balance_defect(&balanced) <= 1);
            let improved = local_improve(&g, &balanced, mode, 20).unwrap();
            assert!(balance_defect(&improved) <= 1);
            let (before, after) = (cut_size(&g, &balanced) as i64, cut_size(&g, &improved) as i64);
            assert!(!mode.improves(after, before), "run {run} {mode:?}: {before} -> {after}");
            assert_eq!(cut_size(&g, &improved), cut_size_by_boundary(&g, &improved));
        }
    }
}

#[test]
fn random_cubic_graphs_are_mostly_tree_like() {
    let mut total = 0.0;
    for seed in 0..20 {
        let g = random_regular(10_000, 3, seed).unwrap();
        total += tree_like_report(&g, 2, 3).fraction;
    }
    assert!(total / 20.0 > 0.9);
}
