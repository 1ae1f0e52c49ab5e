//! Streamlines, tractograms, bundles and voxel geometry.
//!
//! Every type here is immutable once constructed. Constructors validate their
//! invariants, so downstream code can rely on them without re-checking.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::real::Real;

/// A point in world space, millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dist(&self, other: &Self) -> T {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn lerp(&self, other: &Self, t: T) -> Self {
        *self + (*other - *self) * t
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn cast<U: Real>(self) -> Point3<U> {
        Point3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T: Real> From<[T; 3]> for Point3<T> {
    fn from(a: [T; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl<T: Real> Add for Point3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Point3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Point3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Non-fatal findings of [`validate_streamline`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamlineWarning {
    /// Points `index` and `index + 1` coincide.
    ZeroLengthSegment { index: usize },
}

impl fmt::Display for StreamlineWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamlineWarning::ZeroLengthSegment { index } => {
                write!(f, "zero-length segment between points {} and {}", index, index + 1)
            }
        }
    }
}

/// Checks a raw point sequence. Fewer than two points or a non-finite
/// coordinate is an error; repeated consecutive points are reported as
/// warnings.
pub fn validate_streamline<T: Real>(points: &[Point3<T>]) -> Result<Vec<StreamlineWarning>> {
    if points.len() < 2 {
        return Err(Error::InvalidStreamline(format!(
            "needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(Error::InvalidStreamline(format!(
            "non-finite coordinate at point {i}"
        )));
    }
    Ok(points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] == w[1])
        .map(|(index, _)| StreamlineWarning::ZeroLengthSegment { index })
        .collect())
}

/// An ordered polyline of at least two finite points.
#[derive(Debug, Clone, PartialEq)]
pub struct Streamline<T = f64> {
    points: Vec<Point3<T>>,
}

impl<T: Real> Streamline<T> {
    pub fn new(points: Vec<Point3<T>>) -> Result<Self> {
        validate_streamline(&points)?;
        Ok(Streamline { points })
    }

    pub fn from_arrays(points: &[[T; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|&p| p.into()).collect())
    }

    pub fn points(&self) -> &[Point3<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> Point3<T> {
        self.points[0]
    }

    pub fn last(&self) -> Point3<T> {
        self.points[self.points.len() - 1]
    }

    pub fn warnings(&self) -> Vec<StreamlineWarning> {
        validate_streamline(&self.points).unwrap_or_default()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Streamline { points }
    }

    pub fn arc_length(&self) -> T {
        self.points.windows(2).map(|w| w[0].dist(&w[1])).sum()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Point3<T>, Point3<T>) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (lo, hi)
    }

    /// Resamples to `n` points equally spaced in arc length. Never applied
    /// implicitly by any metric.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidStreamline(format!(
                "cannot resample to {n} points"
            )));
        }
        let mut cumulative = Vec::with_capacity(self.points.len());
        let mut acc = T::zero();
        cumulative.push(acc);
        for w in self.points.windows(2) {
            acc = acc + w[0].dist(&w[1]);
            cumulative.push(acc);
        }
        let total = acc;
        if total <= T::zero() {
            return Self::new(vec![self.points[0]; n]);
        }
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        for i in 0..n {
            let target = total * T::lit(i as f64) / T::lit((n - 1) as f64);
            while seg + 2 < cumulative.len() && cumulative[seg + 1] < target {
                seg += 1;
            }
            let span = cumulative[seg + 1] - cumulative[seg];
            let t = if span > T::zero() {
                ((target - cumulative[seg]) / span).max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
            out.push(self.points[seg].lerp(&self.points[seg + 1], t));
        }
        Self::new(out)
    }

    pub fn cast<U: Real>(&self) -> Streamline<U> {
        Streamline {
            points: self.points.iter().map(|p| p.cast()).collect(),
        }
    }
}

/// A whole-brain streamline collection. Streamline ids are positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tractogram<T = f64> {
    streamlines: Vec<Streamline<T>>,
    source: Option<String>,
}

impl<T: Real> Tractogram<T> {
    pub fn new(streamlines: Vec<Streamline<T>>) -> Result<Self> {
        if streamlines.is_empty() {
            return Err(Error::EmptyTractogram);
        }
        Ok(Tractogram {
            streamlines,
            source: None,
        })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn streamlines(&self) -> &[Streamline<T>] {
        &self.streamlines
    }

    pub fn get(&self, id: usize) -> Option<&Streamline<T>> {
        self.streamlines.get(id)
    }

    pub fn len(&self) -> usize {
        self.streamlines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streamlines.is_empty()
    }

    /// Copies the streamlines with the given ids into a new tractogram.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        let picked = ids
            .iter()
            .map(|&id| {
                self.get(id).cloned().ok_or_else(|| {
                    Error::InvalidBundle(format!("id {id} out of range for {} streamlines", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(picked)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BundleMembers<T = f64> {
    /// Sorted, distinct ids into some tractogram.
    Ids(Vec<usize>),
    /// Geometry carried by the bundle itself (e.g. an example from another subject).
    Owned(Vec<Streamline<T>>),
}

/// A named, non-empty group of streamlines.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle<T = f64> {
    name: String,
    members: BundleMembers<T>,
}

impl<T: Real> Bundle<T> {
    /// Id-based bundle. Ids must be distinct; they are stored sorted.
    pub fn from_ids(name: impl Into<String>, ids: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut ids: Vec<usize> = ids.into_iter().collect();
        ids.sort_unstable();
        if ids.is_empty() {
            return Err(Error::InvalidBundle("bundle has no members".into()));
        }
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateId(w[0]));
        }
        Ok(Bundle {
            name: name.into(),
            members: BundleMembers::Ids(ids),
        })
    }

    pub fn from_streamlines(name: impl Into<String>, streamlines: Vec<Streamline<T>>) -> Result<Self> {
        if streamlines.is_empty() {
            return Err(Error::InvalidBundle("bundle has no members".into()));
        }
        Ok(Bundle {
            name: name.into(),
            members: BundleMembers::Owned(streamlines),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &BundleMembers<T> {
        &self.members
    }

    /// Number of member streamlines (k).
    pub fn len(&self) -> usize {
        match &self.members {
            BundleMembers::Ids(ids) => ids.len(),
            BundleMembers::Owned(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Option<&[usize]> {
        match &self.members {
            BundleMembers::Ids(ids) => Some(ids),
            BundleMembers::Owned(_) => None,
        }
    }

    /// Member geometry. Id-based bundles are resolved against `tractogram`.
    pub fn streamlines<'a>(&'a self, tractogram: Option<&'a Tractogram<T>>) -> Result<Vec<&'a Streamline<T>>> {
        match &self.members {
            BundleMembers::Owned(s) => Ok(s.iter().collect()),
            BundleMembers::Ids(ids) => {
                let t = tractogram.ok_or_else(|| {
                    Error::InvalidBundle(format!(
                        "bundle '{}' holds ids but no tractogram was given",
                        self.name
                    ))
                })?;
                ids.iter()
                    .map(|&id| {
                        t.get(id).ok_or_else(|| {
                            Error::InvalidBundle(format!(
                                "bundle '{}': id {id} out of range for {} streamlines",
                                self.name,
                                t.len()
                            ))
                        })
                    })
                    .collect()
            }
        }
    }

    /// Owned-geometry copy of an id-based bundle.
    pub fn to_owned_geometry(&self, tractogram: &Tractogram<T>) -> Result<Self> {
        let s = self.streamlines(Some(tractogram))?.into_iter().cloned().collect();
        Self::from_streamlines(self.name.clone(), s)
    }
}

/// Voxel-index to world (mm) transform. The bottom row must be `0 0 0 1`
/// and the linear part invertible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine<T = f64> {
    m: [[T; 4]; 4],
    inv: [[T; 4]; 3],
}

impl<T: Real> Affine<T> {
    pub fn new(m: [[T; 4]; 4]) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("affine has non-finite entries".into()));
        }
        let (z, o) = (T::zero(), T::one());
        if m[3] != [z, z, z, o] {
            return Err(Error::InvalidGrid("affine bottom row must be 0 0 0 1".into()));
        }
        let a = |r: usize, c: usize| m[r][c];
        let cof = [
            [
                a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1),
                a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2),
                a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1),
            ],
            [
                a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2),
                a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0),
                a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2),
            ],
            [
                a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0),
                a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1),
                a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
            ],
        ];
        let det = a(0, 0) * cof[0][0] + a(0, 1) * cof[1][0] + a(0, 2) * cof[2][0];
        let scale: T = (0..3)
            .map(|c| (0..3).map(|r| a(r, c) * a(r, c)).sum::<T>().sqrt())
            .fold(T::one(), |acc, n| acc * n);
        if !det.is_finite() || det.abs() <= scale * T::lit(1e-12) {
            return Err(Error::SingularAffine);
        }
        let mut inv = [[T::zero(); 4]; 3];
        for r in 0..3 {
            for c in 0..3 {
                inv[r][c] = cof[r][c] / det;
            }
            inv[r][3] = -(0..3).map(|k| inv[r][k] * m[k][3]).sum::<T>();
        }
        Ok(Affine { m, inv })
    }

    pub fn identity() -> Self {
        Self::scaling(T::one())
    }

    /// Isotropic voxels of edge `s` mm with the grid corner at the origin.
    pub fn scaling(s: T) -> Self {
        let z = T::zero();
        Self::new([
            [s, z, z, z],
            [z, s, z, z],
            [z, z, s, z],
            [z, z, z, T::one()],
        ])
        .expect("non-zero isotropic scaling is invertible")
    }

    pub fn from_row_major(values: &[T]) -> Result<Self> {
        if values.len() != 16 {
            return Err(Error::InvalidGrid(format!(
                "affine needs 16 values, got {}",
                values.len()
            )));
        }
        let mut m = [[T::zero(); 4]; 4];
        for (i, v) in values.iter().enumerate() {
            m[i / 4][i % 4] = *v;
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &[[T; 4]; 4] {
        &self.m
    }

    /// Maps continuous voxel coordinates to world space.
    pub fn apply(&self, p: [T; 3]) -> Point3<T> {
        let r = |i: usize| self.m[i][0] * p[0] + self.m[i][1] * p[1] + self.m[i][2] * p[2] + self.m[i][3];
        Point3::new(r(0), r(1), r(2))
    }

    /// Maps a world point to continuous voxel coordinates.
    pub fn apply_inverse(&self, p: &Point3<T>) -> [T; 3] {
        let r = |i: usize| self.inv[i][0] * p.x + self.inv[i][1] * p.y + self.inv[i][2] * p.z + self.inv[i][3];
        [r(0), r(1), r(2)]
    }

    /// Lengths of the three voxel edges in mm.
    pub fn edge_lengths(&self) -> [T; 3] {
        let col = |c: usize| (0..3).map(|r| self.m[r][c] * self.m[r][c]).sum::<T>().sqrt();
        [col(0), col(1), col(2)]
    }
}

/// A voxel lattice: shape plus index-to-mm affine.
///
/// Voxel `(i, j, k)` covers continuous index coordinates `[i, i+1) x [j, j+1) x [k, k+1)`,
/// so its center sits at `affine * (i + 0.5, j + 0.5, k + 0.5, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGrid<T = f64> {
    shape: [usize; 3],
    affine: Affine<T>,
}

impl<T: Real> VoxelGrid<T> {
    pub fn new(shape: [usize; 3], affine: Affine<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidGrid(format!("shape {shape:?} has a zero dimension")));
        }
        if affine.edge_lengths().iter().any(|e| *e <= T::zero()) {
            return Err(Error::InvalidGrid("voxel edge of zero length".into()));
        }
        Ok(VoxelGrid { shape, affine })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn affine(&self) -> &Affine<T> {
        &self.affine
    }

    pub fn edge_lengths(&self) -> [T; 3] {
        self.affine.edge_lengths()
    }

    pub fn min_edge(&self) -> T {
        let e = self.edge_lengths();
        e[0].min(e[1]).min(e[2])
    }

    pub fn contains(&self, v: [usize; 3]) -> bool {
        v.iter().zip(self.shape).all(|(&i, n)| i < n)
    }

    pub fn voxel_center(&self, v: [usize; 3]) -> Point3<T> {
        let half = T::lit(0.5);
        self.affine.apply([
            T::lit(v[0] as f64) + half,
            T::lit(v[1] as f64) + half,
            T::lit(v[2] as f64) + half,
        ])
    }

    /// Voxel containing `p`, or `None` outside the grid.
    pub fn locate(&self, p: &Point3<T>) -> Option<[usize; 3]> {
        let c = self.affine.apply_inverse(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let f = c[a].floor();
            // written to reject NaN as well
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(f >= T::zero()) || f >= T::lit(self.shape[a] as f64) {
                return None;
            }
            out[a] = f.to_usize()?;
        }
        Some(out)
    }
}

/// A non-empty set of voxels on a grid. Voxel centers are precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiMask<T = f64> {
    grid: VoxelGrid<T>,
    voxels: BTreeSet<[usize; 3]>,
    centers: Vec<Point3<T>>,
}

impl<T: Real> RoiMask<T> {
    pub fn new(grid: VoxelGrid<T>, voxels: impl IntoIterator<Item = [usize; 3]>) -> Result<Self> {
        let voxels: BTreeSet<[usize; 3]> = voxels.into_iter().collect();
        if voxels.is_empty() {
            return Err(Error::EmptyRoi);
        }
        if let Some(v) = voxels.iter().find(|v| !grid.contains(**v)) {
            return Err(Error::VoxelOutOfShape {
                voxel: *v,
                shape: grid.shape(),
            });
        }
        let centers = voxels.iter().map(|&v| grid.voxel_center(v)).collect();
        Ok(RoiMask {
            grid,
            voxels,
            centers,
        })
    }

    pub fn grid(&self) -> &VoxelGrid<T> {
        &self.grid
    }

    pub fn shape(&self) -> [usize; 3] {
        self.grid.shape()
    }

    pub fn affine(&self) -> &Affine<T> {
        self.grid.affine()
    }

    pub fn voxels(&self) -> &BTreeSet<[usize; 3]> {
        &self.voxels
    }

    /// World coordinates of every voxel center, in voxel order.
    pub fn centers(&self) -> &[Point3<T>] {
        &self.centers
    }

    pub fn voxel_center(&self, v: [usize; 3]) -> Result<Point3<T>> {
        if !self.voxels.contains(&v) {
            return Err(Error::VoxelOutOfMask(v));
        }
        Ok(self.grid.voxel_center(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    #[test]
    fn collinear_points_have_no_warnings() {
        let w = validate_streamline(&[p(0., 0., 0.), p(1., 0., 0.), p(2., 0., 0.)]).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn repeated_point_is_a_warning() {
        let w = validate_streamline(&[p(1., 1., 1.), p(1., 1., 1.)]).unwrap();
        assert_eq!(w, vec![StreamlineWarning::ZeroLengthSegment { index: 0 }]);
        assert!(w[0].to_string().contains("zero-length segment"));
    }

    #[test]
    fn single_point_is_invalid() {
        assert!(matches!(
            validate_streamline(&[p(0., 0., 0.)]),
            Err(Error::InvalidStreamline(_))
        ));
        assert!(Streamline::new(vec![p(0., 0., 0.), p(f64::NAN, 0., 0.)]).is_err());
    }

    #[test]
    fn voxel_centers_use_half_offset() {
        let grid = VoxelGrid::new([4, 4, 4], Affine::identity()).unwrap();
        let roi = RoiMask::new(grid, [[0, 0, 0], [2, 0, 0]]).unwrap();
        assert_eq!(roi.voxel_center([0, 0, 0]).unwrap(), p(0.5, 0.5, 0.5));
        assert_eq!(roi.voxel_center([2, 0, 0]).unwrap(), p(2.5, 0.5, 0.5));
        assert!(matches!(roi.voxel_center([1, 0, 0]), Err(Error::VoxelOutOfMask(_))));

        let hcp = VoxelGrid::new([4, 4, 4], Affine::scaling(1.25)).unwrap();
        assert_eq!(hcp.voxel_center([0, 0, 0]), p(0.625, 0.625, 0.625));
    }

    #[test]
    fn centers_map_back_inside_their_voxel() {
        let affine = Affine::new([
            [1.25, 0.1, 0.0, -30.0],
            [0.0, -1.25, 0.2, 12.5],
            [0.3, 0.0, 1.5, 7.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let grid = VoxelGrid::new([7, 5, 6], affine).unwrap();
        for i in 0..7 {
            for j in 0..5 {
                for k in 0..6 {
                    let c = grid.voxel_center([i, j, k]);
                    assert_eq!(grid.locate(&c), Some([i, j, k]));
                }
            }
        }
    }

    #[test]
    fn singular_affine_rejected() {
        let m = [
            [1.0, 0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        assert!(matches!(Affine::new(m), Err(Error::SingularAffine)));
    }

    #[test]
    fn bundle_rejects_duplicates_and_empty() {
        assert!(matches!(Bundle::<f64>::from_ids("b", [3, 1, 3]), Err(Error::DuplicateId(3))));
        assert!(Bundle::<f64>::from_ids("b", []).is_err());
        let b = Bundle::<f64>::from_ids("b", [5, 2]).unwrap();
        assert_eq!(b.ids().unwrap(), &[2, 5]);
    }

    #[test]
    fn resample_keeps_endpoints() {
        let s: Streamline = Streamline::from_arrays(&[[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 4.0, 0.0]]).unwrap();
        let r = s.resample(8).unwrap();
        assert_eq!(r.len(), 8);
        assert_eq!(r.first(), s.first());
        assert!(r.last().dist(&s.last()) < 1e-12);
        assert!((r.arc_length() - 7.0).abs() < 1e-9);
    }
}
