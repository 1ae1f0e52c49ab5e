use lapseg::geometry::{Affine, Bundle, RoiMask, Streamline, Tractogram, VoxelGrid};
use lapseg::metrics::{d_end, d_mc, roi_profile, RoiSet};
use lapseg::segmentation::{
    majority_vote, segment_multi, segment_single, CostWeights, MajorityThreshold, Normalization, SegmentationConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wobbly_line(rng: &mut ChaCha8Rng, offset: [f64; 3]) -> Streamline {
    let n = rng.random_range(4..9);
    let pts: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let x = 40.0 * i as f64 / (n - 1) as f64;
            [
                x + offset[0],
                offset[1] + rng.random_range(-1.5..1.5),
                offset[2] + rng.random_range(-1.5..1.5),
            ]
        })
        .collect();
    Streamline::from_arrays(&pts).unwrap()
}

fn instance(seed: u64, targets: usize, examples: usize) -> (Tractogram, Bundle, RoiSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let off = |rng: &mut ChaCha8Rng| [rng.random_range(-3.0..3.0), rng.random_range(0.0..12.0), rng.random_range(0.0..12.0)];
    let t: Vec<Streamline> = (0..targets).map(|_| { let o = off(&mut rng); wobbly_line(&mut rng, o) }).collect();
    let ex: Vec<Streamline> = (0..examples).map(|_| { let o = off(&mut rng); wobbly_line(&mut rng, o) }).collect();
    let grid = VoxelGrid::new([50, 20, 20], Affine::identity()).unwrap();
    let rois = RoiSet::new(vec![
        RoiMask::new(grid, [[12, 6, 6], [12, 7, 6]]).unwrap(),
        RoiMask::new(grid, [[28, 5, 5]]).unwrap(),
    ])
    .unwrap();
    (Tractogram::new(t).unwrap(), Bundle::from_streamlines("ex", ex).unwrap(), rois)
}

fn exhaustive(seed: u64) -> SegmentationConfig {
    SegmentationConfig { knn: usize::MAX, seed, ..Default::default() }
}

#[test]
fn one_target_per_example_streamline() {
    for seed in 0..30 {
        let (t, ex, rois) = instance(seed, 25, 1 + seed as usize % 8);
        for knn in [1, 3, 20] {
            let cfg = SegmentationConfig { knn, ..Default::default() };
            let r = segment_single(&ex, &t, Some(&rois), &cfg).unwrap();
            assert_eq!(r.ids.len(), ex.len());
            assert!(r.ids.windows(2).all(|w| w[0] < w[1]));
            assert!(r.candidate_count >= ex.len());
        }
    }
}

#[test]
fn small_instances_match_enumeration_of_the_fused_cost() {
    // cost rebuilt here from the metrics, max-scaled per block
    for seed in 0..20 {
        let (t, ex, rois) = instance(100 + seed, 20, 5);
        let exs = ex.streamlines(None).unwrap();
        let block = |f: &dyn Fn(&Streamline, &Streamline) -> f64| {
            let vals: Vec<f64> = exs.iter().flat_map(|a| t.streamlines().iter().map(|b| f(a, b))).collect();
            let max = vals.iter().cloned().fold(0.0, f64::max);
            vals.into_iter().map(|v| if max > 0.0 { v / max } else { v }).collect::<Vec<_>>()
        };
        let d = block(&|a, b| d_mc(a, b));
        let e = block(&|a, b| d_end(a, b));
        let r = block(&|a, b| (roi_profile(a, &rois) - roi_profile(b, &rois)).abs());
        let fused: Vec<f64> = (0..d.len()).map(|i| 1.0 * d[i] + 0.4 * e[i] + 1.6 * r[i]).collect();
        let got = segment_single(&ex, &t, Some(&rois), &exhaustive(seed)).unwrap();
        let best = enumerate(&fused, 5, 20, 0, &mut [false; 20]);
        assert!((best - got.total_cost).abs() < 1e-9, "seed {seed}: {best} vs {}", got.total_cost);
        let chosen: f64 = got.matches.iter().enumerate().map(|(i, &j)| fused[i * 20 + j]).sum();
        assert!((chosen - got.total_cost).abs() < 1e-9);
    }
}

/// Minimum over all injective row-to-column maps, by depth-first enumeration.
fn enumerate(c: &[f64], rows: usize, cols: usize, row: usize, used: &mut [bool]) -> f64 {
    if row == rows {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for j in 0..cols {
        if !used[j] {
            used[j] = true;
            best = best.min(c[row * cols + j] + enumerate(c, rows, cols, row + 1, used));
            used[j] = false;
        }
    }
    best
}

#[test]
fn repeated_runs_are_identical() {
    let (t, ex, rois) = instance(9, 40, 6);
    let exs: Vec<Bundle> = (0..5).map(|_| ex.clone()).collect();
    let first = segment_multi(&exs, &t, Some(&rois), &SegmentationConfig::default()).unwrap();
    for _ in 0..3 {
        assert_eq!(segment_multi(&exs, &t, Some(&rois), &SegmentationConfig::default()).unwrap(), first);
    }
}

#[test]
fn roi_weight_without_rois_is_an_error() {
    let (t, ex, _) = instance(1, 10, 3);
    assert!(segment_single(&ex, &t, None, &SegmentationConfig::default()).is_err());
    assert!(segment_single(&ex, &t, None, &SegmentationConfig::baseline()).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn uniform_weight_scaling_keeps_the_selection(seed in 0u64..1000, alpha in 0.1f64..20.0) {
        let (t, ex, rois) = instance(seed, 18, 5);
        let base = exhaustive(0);
        let scaled = SegmentationConfig { weights: base.weights.scaled(alpha).unwrap(), ..base.clone() };
        let a = segment_single(&ex, &t, Some(&rois), &base).unwrap();
        let b = segment_single(&ex, &t, Some(&rois), &scaled).unwrap();
        prop_assert!((b.total_cost - alpha * a.total_cost).abs() <= 1e-9 * (1.0 + b.total_cost));
    }

    #[test]
    fn raising_the_threshold_shrinks_the_vote(runs in prop::collection::vec(prop::collection::btree_set(0usize..30, 0..12), 1..7)) {
        let runs: Vec<Vec<usize>> = runs.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut prev = majority_vote(&runs, 1);
        for needed in 2..=runs.len() {
            let next = majority_vote(&runs, needed);
            prop_assert!(next.iter().all(|id| prev.contains(id)));
            prev = next;
        }
        let strict = MajorityThreshold::StrictMajority.votes_needed(runs.len());
        prop_assert!(strict * 2 >= runs.len());
    }

    #[test]
    fn normalization_modes_all_give_valid_assignments(seed in 0u64..500, mode in prop::sample::select(vec![Normalization::None, Normalization::MaxScale, Normalization::RangeScale])) {
        let (t, ex, rois) = instance(seed, 15, 4);
        let cfg = SegmentationConfig { normalization: mode, weights: CostWeights::new(1.0, 0.5, 2.0).unwrap(), ..Default::default() };
        let r = segment_single(&ex, &t, Some(&rois), &cfg).unwrap();
        prop_assert_eq!(r.ids.len(), 4);
    }
}
