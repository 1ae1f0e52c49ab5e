//! Bundle voxelization and the Dice similarity coefficient.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::{Bundle, Streamline, Tractogram, VoxelGrid};
use crate::real::Real;

/// Bisection depth cap when chasing a segment through a voxel edge or corner.
const MAX_REFINE_DEPTH: u32 = 40;

/// Voxels crossed by a set of streamlines.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSet<T = f64> {
    grid: VoxelGrid<T>,
    voxels: BTreeSet<[usize; 3]>,
}

impl<T: Real> VoxelSet<T> {
    pub fn new(grid: VoxelGrid<T>, voxels: impl IntoIterator<Item = [usize; 3]>) -> Result<Self> {
        let voxels: BTreeSet<_> = voxels.into_iter().collect();
        if let Some(v) = voxels.iter().find(|v| !grid.contains(**v)) {
            return Err(Error::VoxelOutOfShape {
                voxel: *v,
                shape: grid.shape(),
            });
        }
        Ok(VoxelSet { grid, voxels })
    }

    pub fn grid(&self) -> &VoxelGrid<T> {
        &self.grid
    }

    pub fn voxels(&self) -> &BTreeSet<[usize; 3]> {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// Default sampling step: half the smallest voxel edge.
pub fn default_spacing<T: Real>(grid: &VoxelGrid<T>) -> T {
    grid.min_edge() / T::lit(2.0)
}

/// Voxelizes the members of `bundle` (ids resolved against `tractogram`)
/// at the default sampling step.
pub fn voxelize<T: Real>(bundle: &Bundle<T>, tractogram: &Tractogram<T>, grid: &VoxelGrid<T>) -> Result<VoxelSet<T>> {
    let members = bundle.streamlines(Some(tractogram))?;
    Ok(voxelize_streamlines(members, grid, default_spacing(grid)))
}

/// Collects every voxel hit by a sample along the streamlines.
///
/// Each segment is sampled at its endpoints and at steps of at most
/// `spacing` mm. Where two consecutive samples land in voxels that are not
/// face neighbours, the gap between them is bisected until they are, so
/// voxels clipped at an edge or corner are not skipped. Samples outside the
/// grid are dropped.
pub fn voxelize_streamlines<'a, T: Real>(
    streamlines: impl IntoIterator<Item = &'a Streamline<T>>,
    grid: &VoxelGrid<T>,
    spacing: T,
) -> VoxelSet<T> {
    assert!(spacing > T::zero(), "sampling spacing must be positive");
    let mut out = Rasterizer {
        shape: grid.shape(),
        voxels: BTreeSet::new(),
    };
    for s in streamlines {
        let idx: Vec<[f64; 3]> = s
            .points()
            .iter()
            .map(|p| grid.affine().apply_inverse(p).map(|c| c.as_f64()))
            .collect();
        out.insert(idx[0]);
        for (w, k) in s.points().windows(2).zip(idx.windows(2)) {
            let steps = (w[0].dist(&w[1]) / spacing).ceil().as_f64().max(1.0) as usize;
            let (a, b) = (k[0], k[1]);
            let mut prev = a;
            for step in 1..=steps {
                let t = step as f64 / steps as f64;
                let next = if step == steps { b } else { lerp(a, b, t) };
                out.refine(prev, next, 0);
                prev = next;
            }
        }
    }
    VoxelSet {
        grid: *grid,
        voxels: out.voxels,
    }
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

fn cell(p: [f64; 3]) -> [i64; 3] {
    // saturating float-to-int cast keeps far-away points harmlessly outside
    p.map(|c| c.floor() as i64)
}

struct Rasterizer {
    shape: [usize; 3],
    voxels: BTreeSet<[usize; 3]>,
}

impl Rasterizer {
    fn insert(&mut self, p: [f64; 3]) {
        let c = cell(p);
        if c.iter().zip(self.shape).all(|(&i, n)| i >= 0 && (i as u64) < n as u64) {
            self.voxels.insert(c.map(|i| i as usize));
        }
    }

    /// Inserts the voxel of `q`, first filling in any voxel the straight
    /// piece from `p` may cross on the way.
    fn refine(&mut self, p: [f64; 3], q: [f64; 3], depth: u32) {
        let (cp, cq) = (cell(p), cell(q));
        let jump: i64 = (0..3).map(|a| (cp[a] - cq[a]).abs()).sum();
        if jump > 1 && depth < MAX_REFINE_DEPTH {
            let mid = lerp(p, q, 0.5);
            self.refine(p, mid, depth + 1);
            self.refine(mid, q, depth + 1);
        } else {
            self.insert(q);
        }
    }
}

/// Dice similarity coefficient `2|A ∩ B| / (|A| + |B|)`.
pub fn dsc<T: Real>(a: &VoxelSet<T>, b: &VoxelSet<T>) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let total = a.len() + b.len();
    if total == 0 {
        return Err(Error::BothEmpty);
    }
    let shared = a.voxels.intersection(&b.voxels).count();
    Ok(2.0 * shared as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Affine;

    fn unit_grid(n: usize) -> VoxelGrid {
        VoxelGrid::new([n, n, n], Affine::identity()).unwrap()
    }

    #[test]
    fn axis_aligned_streamline() {
        let grid = unit_grid(5);
        let s = Streamline::from_arrays(&[[0.5, 0.5, 0.5], [2.5, 0.5, 0.5]]).unwrap();
        let t = Tractogram::new(vec![s]).unwrap();
        let b = Bundle::from_ids("b", [0]).unwrap();
        let v = voxelize(&b, &t, &grid).unwrap();
        let expected: BTreeSet<_> = [[0, 0, 0], [1, 0, 0], [2, 0, 0]].into_iter().collect();
        assert_eq!(v.voxels(), &expected);
    }

    #[test]
    fn invalid_bundles_are_errors() {
        assert!(Bundle::<f64>::from_ids("b", []).is_err());
        let grid = unit_grid(5);
        let t = Tractogram::new(vec![Streamline::from_arrays(&[[0.5; 3], [1.5; 3]]).unwrap()]).unwrap();
        let b = Bundle::from_ids("b", [3]).unwrap();
        assert!(matches!(voxelize(&b, &t, &grid), Err(Error::InvalidBundle(_))));
    }

    #[test]
    fn corner_clip_is_not_skipped() {
        // clips voxel (2,0,0) over a chord of about 0.03 near its corner at (2,1)
        let grid = unit_grid(4);
        let s = Streamline::from_arrays(&[[1.5, 0.5, 0.5], [2.5, 1.46, 0.5]]).unwrap();
        let v = voxelize_streamlines([&s], &grid, 10.0);
        let expected: BTreeSet<_> = [[1, 0, 0], [2, 0, 0], [2, 1, 0]].into_iter().collect();
        assert_eq!(v.voxels(), &expected);
    }

    #[test]
    fn points_outside_grid_are_ignored() {
        let grid = unit_grid(2);
        let s = Streamline::from_arrays(&[[-3.5, 0.5, 0.5], [5.5, 0.5, 0.5]]).unwrap();
        let v = voxelize_streamlines([&s], &grid, 0.5);
        let expected: BTreeSet<_> = [[0, 0, 0], [1, 0, 0]].into_iter().collect();
        assert_eq!(v.voxels(), &expected);
    }

    #[test]
    fn dice_cases() {
        let grid = unit_grid(4);
        let a = VoxelSet::new(grid, [[0, 0, 0], [1, 0, 0]]).unwrap();
        let b = VoxelSet::new(grid, [[2, 0, 0], [3, 0, 0]]).unwrap();
        let c = VoxelSet::new(grid, [[1, 0, 0], [2, 0, 0]]).unwrap();
        assert_eq!(dsc(&a, &a).unwrap(), 1.0);
        assert_eq!(dsc(&a, &b).unwrap(), 0.0);
        assert_eq!(dsc(&a, &c).unwrap(), 0.5);
        assert_eq!(dsc(&c, &a).unwrap(), 0.5);

        let empty = VoxelSet::new(grid, []).unwrap();
        assert!(matches!(dsc(&empty, &empty), Err(Error::BothEmpty)));
        assert_eq!(dsc(&empty, &a).unwrap(), 0.0);

        let other = VoxelSet::new(unit_grid(5), [[0, 0, 0]]).unwrap();
        assert!(matches!(dsc(&a, &other), Err(Error::GridMismatch)));
    }
}
