mod common;

use chebdea::dea::{
    chebyshev_score_exact, chebyshev_score_linear, classical_efficiency, score_all, Method, Panel, ReturnsToScale,
};
use chebdea::partition::{separated_scores, CategoryAssignment};
use chebdea::synth::oracle_score_grid;
use common::{positive_panel, random_partition, random_shape, rng};
use proptest::prelude::*;

const BOTH: [ReturnsToScale; 2] = [ReturnsToScale::Vrs, ReturnsToScale::Crs];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn linear_scores_stay_in_range(seed in any::<u64>()) {
        let mut g = rng(seed);
        let panel = random_shape(&mut g, 12, 3, 3, 0.1);
        for rts in BOTH {
            for s in score_all(&panel, rts, Method::Linear).unwrap() {
                prop_assert!((0.0..=2.0).contains(&s.score), "{}", s.score);
                prop_assert_eq!(s.score, 1.0 + 2.0 * s.delta);
            }
        }
    }

    #[test]
    fn rescaling_a_column_changes_nothing(seed in any::<u64>(), col in 0usize..6, big in any::<bool>()) {
        let mut g = rng(seed);
        let panel = random_shape(&mut g, 10, 3, 3, 0.1);
        let factor = if big { 1e3 } else { 1e-3 };
        let scaled = if col < 3 {
            panel.with_scaled_input(col % panel.n_inputs(), factor).unwrap()
        } else {
            panel.with_scaled_output(col % panel.n_outputs(), factor).unwrap()
        };
        let a = score_all(&panel, ReturnsToScale::Vrs, Method::Linear).unwrap();
        let b = score_all(&scaled, ReturnsToScale::Vrs, Method::Linear).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.score - y.score).abs() <= 1e-9, "{} vs {}", x.score, y.score);
        }
    }

    #[test]
    fn fewer_peers_never_lower_a_score(seed in any::<u64>()) {
        let mut g = rng(seed);
        let panel = random_shape(&mut g, 12, 3, 3, 0.1);
        let labels = random_partition(&mut g, panel.len(), 3);
        let full = score_all(&panel, ReturnsToScale::Vrs, Method::Linear).unwrap();
        let sep = separated_scores(&panel, &CategoryAssignment::new(labels), ReturnsToScale::Vrs, Method::Linear)
            .unwrap();
        for (s, f) in sep.iter().zip(&full) {
            prop_assert!(s.score >= f.score - 1e-9, "{} < {}", s.score, f.score);
        }
    }

    #[test]
    fn linear_score_is_a_function_of_the_classical_value(seed in any::<u64>()) {
        let mut g = rng(seed);
        let panel = positive_panel(&mut g, 15, 2, 2);
        for rts in BOTH {
            for i in 0..panel.len() {
                let theta = classical_efficiency(&panel, i, rts).unwrap();
                if theta >= 1.0 - 1e-9 {
                    continue;
                }
                let r = chebyshev_score_linear(&panel, i, rts).unwrap().score;
                let want = 2.0 * theta / (1.0 + theta);
                prop_assert!((r - want).abs() <= 1e-7, "{:?} unit {}: {} vs {}", rts, i, r, want);
            }
        }
    }
}

#[test]
fn exact_crs_score_is_a_function_of_the_classical_value() {
    let mut g = rng(41);
    for _ in 0..20 {
        let panel = positive_panel(&mut g, 10, 2, 2);
        for i in 0..panel.len() {
            let theta = classical_efficiency(&panel, i, ReturnsToScale::Crs).unwrap();
            if theta >= 1.0 - 1e-9 {
                continue;
            }
            let root = theta.sqrt();
            let want = ((3.0 * root - 1.0) / (root + 1.0)).clamp(0.0, 2.0);
            let r = chebyshev_score_exact(&panel, i, ReturnsToScale::Crs).unwrap().score;
            assert!((r - want).abs() <= 5e-7, "unit {}: {} vs {}", i, r, want);
        }
    }
}

#[test]
fn exact_and_linear_agree_on_classification() {
    let mut g = rng(7);
    let mut max_gap: f64 = 0.0;
    for _ in 0..60 {
        let panel = random_shape(&mut g, 8, 3, 3, 0.1);
        for rts in BOTH {
            let lin = score_all(&panel, rts, Method::Linear).unwrap();
            let ex = score_all(&panel, rts, Method::Exact).unwrap();
            for (a, b) in lin.iter().zip(&ex) {
                // Scores within the bisection tolerance of 1 are boundary cases.
                if (a.score - 1.0).abs() > 1e-6 && (b.score - 1.0).abs() > 1e-6 {
                    assert_eq!(a.classification, b.classification, "{} vs {}", a.score, b.score);
                }
                max_gap = max_gap.max((a.score - b.score).abs());
            }
        }
    }
    eprintln!("largest linear/exact gap observed: {:.4}", max_gap);
}

#[test]
fn exact_matches_the_grid_oracle_on_small_panels() {
    let mut g = rng(99);
    for _ in 0..15 {
        let panel = random_shape(&mut g, 6, 2, 2, 0.1);
        for rts in BOTH {
            for i in 0..panel.len() {
                let grid = oracle_score_grid(&panel, i, rts, 1e-3).unwrap();
                let exact = chebyshev_score_exact(&panel, i, rts).unwrap().score;
                assert!((grid - exact).abs() <= 2e-3, "unit {}: {} vs {}", i, grid, exact);
            }
        }
    }
}

#[test]
fn zero_rows_and_columns_do_not_break_scoring() {
    let panel = Panel::from_rows(
        vec![vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 2.0]],
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]],
    )
    .unwrap();
    for rts in BOTH {
        for method in [Method::Linear, Method::Exact] {
            for s in score_all(&panel, rts, method).unwrap() {
                assert!((0.0..=2.0).contains(&s.score));
            }
        }
    }
}
