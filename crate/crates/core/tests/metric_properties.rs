use lapseg::geometry::{Affine, RoiMask, Streamline, VoxelGrid};
use lapseg::metrics::{d_end, d_mc, d_min_roi, d_rois, directed_mean_closest, RoiSet};
use proptest::prelude::*;

fn streamline() -> impl Strategy<Value = Streamline> {
    prop::collection::vec(prop::array::uniform3(-30.0f64..30.0), 2..12)
        .prop_filter_map("needs a distinct point", |pts| Streamline::from_arrays(&pts).ok())
}

fn rois() -> impl Strategy<Value = RoiSet> {
    let grid = VoxelGrid::new([20, 20, 20], Affine::new([
        [2.0, 0.0, 0.0, -20.0],
        [0.0, 2.0, 0.0, -20.0],
        [0.0, 0.0, 2.0, -20.0],
        [0.0, 0.0, 0.0, 1.0],
    ]).unwrap()).unwrap();
    prop::collection::vec(prop::collection::vec(prop::array::uniform3(0usize..20), 1..6), 1..4).prop_map(move |sets| {
        RoiSet::new(sets.into_iter().map(|v| RoiMask::new(grid, v).unwrap()).collect()).unwrap()
    })
}

fn max_pairwise(a: &Streamline, b: &Streamline) -> f64 {
    a.points()
        .iter()
        .flat_map(|p| b.points().iter().map(move |q| p.dist(q)))
        .fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn d_mc_is_the_average_of_directed_means(a in streamline(), b in streamline()) {
        let expected = (directed_mean_closest(&a, &b) + directed_mean_closest(&b, &a)) / 2.0;
        prop_assert_eq!(d_mc(&a, &b), expected);
    }

    #[test]
    fn d_mc_is_bounded_by_the_farthest_pair(a in streamline(), b in streamline()) {
        prop_assert!(d_mc(&a, &b) <= max_pairwise(&a, &b) + 1e-12);
    }

    #[test]
    fn d_end_ignores_orientation(a in streamline(), b in streamline()) {
        let d = d_end(&a, &b);
        prop_assert_eq!(d_end(&a.reversed(), &b), d);
        prop_assert_eq!(d_end(&a, &b.reversed()), d);
    }

    #[test]
    fn d_rois_triangle_inequality(a in streamline(), b in streamline(), c in streamline(), r in rois()) {
        prop_assert!(d_rois(&a, &c, &r) <= d_rois(&a, &b, &r) + d_rois(&b, &c, &r) + 1e-12);
    }

    #[test]
    fn roi_distance_matches_exhaustive_search(s in streamline(), r in rois()) {
        for roi in r.rois() {
            let brute = s.points().iter()
                .flat_map(|p| roi.voxels().iter().map(move |v| p.dist(&roi.voxel_center(*v).unwrap())))
                .fold(f64::INFINITY, f64::min);
            prop_assert!((d_min_roi(&s, roi) - brute).abs() <= 1e-12);
        }
    }
}
