//! Streamline distances: mean of closest points, endpoint distance and the
//! ROI-based pseudo-distance.

use crate::error::{Error, Result};
use crate::geometry::{Point3, RoiMask, Streamline};
use crate::real::Real;

/// Ordered, non-empty collection of ROI masks delineating one bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiSet<T = f64> {
    rois: Vec<RoiMask<T>>,
}

impl<T: Real> RoiSet<T> {
    pub fn new(rois: Vec<RoiMask<T>>) -> Result<Self> {
        if rois.is_empty() {
            return Err(Error::EmptyRoiSet);
        }
        Ok(RoiSet { rois })
    }

    pub fn rois(&self) -> &[RoiMask<T>] {
        &self.rois
    }

    pub fn len(&self) -> usize {
        self.rois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rois.is_empty()
    }
}

fn min_dist<T: Real>(p: &Point3<T>, targets: &[Point3<T>]) -> T {
    targets
        .iter()
        .map(|q| p.dist_sq(q))
        .fold(T::infinity(), T::min)
        .sqrt()
}

/// Mean over the points of `a` of the distance to the closest point of `b`.
/// Not symmetric.
pub fn directed_mean_closest<T: Real>(a: &Streamline<T>, b: &Streamline<T>) -> T {
    let pb = b.points();
    let sum: T = a.points().iter().map(|p| min_dist(p, pb)).sum();
    sum / T::lit(a.len() as f64)
}

/// Mean of closest distances: the average of both directed means.
pub fn d_mc<T: Real>(a: &Streamline<T>, b: &Streamline<T>) -> T {
    // one pass over the pairwise squared distances serves both directions
    let (pa, pb) = (a.points(), b.points());
    let mut col_min = vec![T::infinity(); pb.len()];
    let mut sum_a = T::zero();
    for p in pa {
        let mut row_min = T::infinity();
        for (q, cm) in pb.iter().zip(col_min.iter_mut()) {
            let d = p.dist_sq(q);
            row_min = row_min.min(d);
            *cm = cm.min(d);
        }
        sum_a = sum_a + row_min.sqrt();
    }
    let sum_b: T = col_min.into_iter().map(T::sqrt).sum();
    let ab = sum_a / T::lit(pa.len() as f64);
    let ba = sum_b / T::lit(pb.len() as f64);
    (ab + ba) / T::lit(2.0)
}

/// Endpoint distance taken literally from `a`'s side: each endpoint of `a`
/// is matched to the nearer endpoint of `b`, independently of the other.
pub fn directed_endpoint_distance<T: Real>(a: &Streamline<T>, b: &Streamline<T>) -> T {
    let (a1, an) = (a.first(), a.last());
    let (b1, bn) = (b.first(), b.last());
    let head = a1.dist(&b1).min(a1.dist(&bn));
    let tail = an.dist(&b1).min(an.dist(&bn));
    (head + tail) / T::lit(2.0)
}

/// Endpoint distance. The one-sided independent-minimum rule is evaluated
/// from both streamlines and averaged, which makes the result symmetric and
/// invariant to the orientation of either argument.
pub fn d_end<T: Real>(a: &Streamline<T>, b: &Streamline<T>) -> T {
    (directed_endpoint_distance(a, b) + directed_endpoint_distance(b, a)) / T::lit(2.0)
}

/// Minimum distance between any point of `s` and any voxel center of `roi`.
pub fn d_min_roi<T: Real>(s: &Streamline<T>, roi: &RoiMask<T>) -> T {
    let centers = roi.centers();
    s.points()
        .iter()
        .map(|p| {
            centers
                .iter()
                .map(|c| p.dist_sq(c))
                .fold(T::infinity(), T::min)
        })
        .fold(T::infinity(), T::min)
        .sqrt()
}

/// Mean of [`d_min_roi`] over every ROI of the set.
pub fn roi_profile<T: Real>(s: &Streamline<T>, rois: &RoiSet<T>) -> T {
    let sum: T = rois.rois().iter().map(|r| d_min_roi(s, r)).sum();
    sum / T::lit(rois.len() as f64)
}

/// Absolute difference of the two streamlines' mean ROI distances. A
/// pseudo-metric: distinct streamlines at equal mean distance score 0.
pub fn d_rois<T: Real>(a: &Streamline<T>, b: &Streamline<T>, rois: &RoiSet<T>) -> T {
    (roi_profile(a, rois) - roi_profile(b, rois)).abs()
}
