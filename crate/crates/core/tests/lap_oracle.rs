use lapseg::lap::{assignment_cost, brute_force_lap, solve_lap, solve_rlap, solve_rlap_padded, Assignment, CostMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, kind: usize) -> CostMatrix {
    CostMatrix::from_fn(rows, cols, |_, _| match kind {
        0 => rng.random_range(0..100) as f64,
        1 => rng.random_range(0..3) as f64,
        _ => rng.random_range(-50.0..50.0),
    })
    .unwrap()
}

fn check_injective(a: &Assignment<f64>, cols: usize) {
    assert!(a.is_injective());
    assert!(a.row_to_col.iter().all(|&c| c < cols));
}

#[test]
fn native_and_padded_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..500 {
        let cols = rng.random_range(1..=7);
        let rows = rng.random_range(1..=cols);
        let kind = trial % 3;
        let m = random_matrix(&mut rng, rows, cols, kind);
        let oracle = brute_force_lap(&m).unwrap();
        let native = solve_rlap(&m).unwrap();
        let padded = solve_rlap_padded(&m).unwrap();
        check_injective(&native, cols);
        check_injective(&padded, cols);
        assert_eq!(assignment_cost(&m, &native).unwrap(), native.total_cost);
        if kind < 2 {
            assert_eq!(native.total_cost, oracle.total_cost, "trial {trial}: {m:?}");
            assert_eq!(padded.total_cost, oracle.total_cost, "trial {trial}");
        } else {
            assert!((native.total_cost - oracle.total_cost).abs() < 1e-9, "trial {trial}");
            assert!((padded.total_cost - oracle.total_cost).abs() < 1e-9, "trial {trial}");
        }
        if rows == cols {
            assert_eq!(solve_lap(&m).unwrap().total_cost, native.total_cost);
        }
    }
}

#[test]
fn larger_rectangular_instances_agree_with_padding() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let rows = rng.random_range(5..40);
        let cols = rows + rng.random_range(0..60);
        let m = random_matrix(&mut rng, rows, cols, 0);
        let a = solve_rlap(&m).unwrap();
        let b = solve_rlap_padded(&m).unwrap();
        check_injective(&a, cols);
        assert_eq!(a.total_cost, b.total_cost);
    }
}

#[test]
fn f32_matches_f64_on_integers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let m = random_matrix(&mut rng, 5, 7, 0);
        let m32 = CostMatrix::new(5, 7, m.values().iter().map(|&v| v as f32).collect()).unwrap();
        assert_eq!(solve_rlap(&m32).unwrap().total_cost as f64, solve_rlap(&m).unwrap().total_cost);
    }
}

fn matrix_strategy() -> impl Strategy<Value = CostMatrix> {
    (1usize..=6)
        .prop_flat_map(|cols| (1..=cols, Just(cols)))
        .prop_flat_map(|(rows, cols)| {
            prop::collection::vec(0i32..50, rows * cols)
                .prop_map(move |v| CostMatrix::new(rows, cols, v.into_iter().map(f64::from).collect()).unwrap())
        })
}

proptest! {
    #[test]
    fn row_shift_moves_cost_by_shift(m in matrix_strategy(), row_pick in 0usize..6, shift in -20i32..20) {
        let row = row_pick % m.rows();
        let shifted = CostMatrix::from_fn(m.rows(), m.cols(), |i, j| {
            m.get(i, j) + if i == row { f64::from(shift) } else { 0.0 }
        }).unwrap();
        let base = solve_rlap(&m).unwrap();
        let moved = solve_rlap(&shifted).unwrap();
        prop_assert_eq!(moved.total_cost, base.total_cost + f64::from(shift));
        // the original optimum stays optimal after the shift
        prop_assert_eq!(assignment_cost(&shifted, &base).unwrap(), moved.total_cost);
    }

    #[test]
    fn scaling_scales_optimal_cost(m in matrix_strategy(), alpha in 1u32..8) {
        let a = f64::from(alpha);
        let scaled = m.map(|v| v * a).unwrap();
        let base = solve_rlap(&m).unwrap();
        let s = solve_rlap(&scaled).unwrap();
        prop_assert_eq!(s.total_cost, a * base.total_cost);
        prop_assert!(s.is_injective());
    }
}
