//! Example-based bundle segmentation.
//!
//! For each example bundle the target tractogram is pruned to a candidate
//! superset (union of per-streamline nearest neighbours under `d_mc`), the
//! geometric, endpoint and ROI cost blocks are computed between example
//! streamlines (rows) and candidates (columns), normalized, fused with the
//! configured weights and handed to the rectangular assignment solver. Runs
//! over several examples are merged by vote.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Bundle, Point3, Streamline, Tractogram};
use crate::lap::{solve_rlap, CostMatrix};
use crate::metrics::{d_end, d_mc, roi_profile, RoiSet};
use crate::real::Real;

/// Weights of the geometric (`D`), endpoint (`E`) and ROI (`R`) blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights<T = f64> {
    pub lambda_d: T,
    pub lambda_e: T,
    pub lambda_r: T,
}

impl<T: Real> CostWeights<T> {
    pub fn new(lambda_d: T, lambda_e: T, lambda_r: T) -> Result<Self> {
        let all = [lambda_d, lambda_e, lambda_r];
        if all.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "weights must be finite and non-negative, got {lambda_d},{lambda_e},{lambda_r}"
            )));
        }
        if all.iter().all(|w| *w == T::zero()) {
            return Err(Error::InvalidConfig("at least one weight must be positive".into()));
        }
        Ok(CostWeights {
            lambda_d,
            lambda_e,
            lambda_r,
        })
    }

    /// `(1, 0.4, 1.6)`: geometry plus both anatomical terms.
    pub fn anatomical() -> Self {
        CostWeights {
            lambda_d: T::one(),
            lambda_e: T::lit(0.4),
            lambda_r: T::lit(1.6),
        }
    }

    /// `(1, 0, 0)`: geometry only.
    pub fn geometric() -> Self {
        CostWeights {
            lambda_d: T::one(),
            lambda_e: T::zero(),
            lambda_r: T::zero(),
        }
    }

    pub fn scaled(&self, alpha: T) -> Result<Self> {
        Self::new(self.lambda_d * alpha, self.lambda_e * alpha, self.lambda_r * alpha)
    }
}

impl<T: Real> Default for CostWeights<T> {
    fn default() -> Self {
        Self::anatomical()
    }
}

impl<T: Real> fmt::Display for CostWeights<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.lambda_d, self.lambda_e, self.lambda_r)
    }
}

impl<T: Real> FromStr for CostWeights<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "weights must be three comma-separated values, got '{s}'"
            )));
        }
        let mut w = [T::zero(); 3];
        for (slot, p) in w.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad weight '{p}'")))?;
        }
        Self::new(w[0], w[1], w[2])
    }
}

/// How each cost block is rescaled before fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Divide by the block maximum.
    #[default]
    MaxScale,
    /// Map `[min, max]` onto `[0, 1]`.
    RangeScale,
    None,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::MaxScale => "max",
            Normalization::RangeScale => "range",
            Normalization::None => "none",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "max-scale" => Ok(Normalization::MaxScale),
            "range" | "range-scale" => Ok(Normalization::RangeScale),
            "none" => Ok(Normalization::None),
            other => Err(Error::InvalidConfig(format!(
                "unknown normalization '{other}' (expected max, range or none)"
            ))),
        }
    }
}

/// Number of per-example runs that must select a streamline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MajorityThreshold {
    /// `ceil(examples / 2)`.
    #[default]
    StrictMajority,
    AtLeast(usize),
}

impl MajorityThreshold {
    pub fn votes_needed(&self, examples: usize) -> usize {
        match self {
            MajorityThreshold::StrictMajority => examples.div_ceil(2),
            MajorityThreshold::AtLeast(n) => *n,
        }
    }
}

impl fmt::Display for MajorityThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MajorityThreshold::StrictMajority => f.write_str("strict-majority"),
            MajorityThreshold::AtLeast(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for MajorityThreshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "strict-majority" {
            return Ok(MajorityThreshold::StrictMajority);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(MajorityThreshold::AtLeast(n)),
            _ => Err(Error::InvalidConfig(format!(
                "threshold must be a positive integer or 'strict-majority', got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig<T = f64> {
    pub weights: CostWeights<T>,
    /// Nearest neighbours kept per example streamline when pruning.
    pub knn: usize,
    pub normalization: Normalization,
    pub threshold: MajorityThreshold,
    /// Seed for randomized experiments built on top of the pipeline. The
    /// pipeline itself is deterministic and does not draw from it.
    pub seed: u64,
}

impl<T: Real> Default for SegmentationConfig<T> {
    fn default() -> Self {
        SegmentationConfig {
            weights: CostWeights::anatomical(),
            knn: 20,
            normalization: Normalization::MaxScale,
            threshold: MajorityThreshold::StrictMajority,
            seed: 0,
        }
    }
}

impl<T: Real> SegmentationConfig<T> {
    /// Geometry-only configuration: weights `(1, 0, 0)`, no normalization.
    pub fn baseline() -> Self {
        SegmentationConfig {
            weights: CostWeights::geometric(),
            normalization: Normalization::None,
            ..Self::default()
        }
    }

    pub fn validate(&self, examples: usize) -> Result<()> {
        if self.knn == 0 {
            return Err(Error::InvalidConfig("knn must be at least 1".into()));
        }
        CostWeights::new(self.weights.lambda_d, self.weights.lambda_e, self.weights.lambda_r)?;
        if let MajorityThreshold::AtLeast(n) = self.threshold {
            if n == 0 || n > examples {
                return Err(Error::InvalidConfig(format!(
                    "threshold {n} must lie in 1..={examples} for {examples} examples"
                )));
            }
        }
        Ok(())
    }
}

/// Geometric, endpoint and ROI distance blocks, examples by candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBlocks<T = f64> {
    pub d: CostMatrix<T>,
    pub e: CostMatrix<T>,
    pub r: CostMatrix<T>,
}

/// Outcome of one example's assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleSegmentation<T = f64> {
    /// Selected target ids, sorted.
    pub ids: Vec<usize>,
    /// Target id matched to each example streamline, in example order.
    pub matches: Vec<usize>,
    pub total_cost: T,
    pub candidate_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult<T = f64> {
    /// Ids kept by the vote, sorted.
    pub selected_ids: Vec<usize>,
    pub per_example_ids: Vec<Vec<usize>>,
    pub per_example_cost: Vec<T>,
    pub per_example_candidates: Vec<usize>,
}

#[derive(Clone, Copy)]
struct Ranked<T>(T, usize);

impl<T: Real> PartialEq for Ranked<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl<T: Real> Eq for Ranked<T> {}

impl<T: Real> PartialOrd for Ranked<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<T: Real> Ord for Ranked<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0
            .partial_cmp(&o.0)
            .unwrap_or(Ordering::Equal)
            .then(self.1.cmp(&o.1))
    }
}

/// Bounding boxes of the target streamlines, reused across queries.
struct BoxIndex<'a, T> {
    tractogram: &'a Tractogram<T>,
    boxes: Vec<(Point3<T>, Point3<T>)>,
}

fn box_dist<T: Real>(p: &Point3<T>, b: &(Point3<T>, Point3<T>)) -> T {
    let axis = |v: T, lo: T, hi: T| {
        if v < lo {
            lo - v
        } else if v > hi {
            v - hi
        } else {
            T::zero()
        }
    };
    let dx = axis(p.x, b.0.x, b.1.x);
    let dy = axis(p.y, b.0.y, b.1.y);
    let dz = axis(p.z, b.0.z, b.1.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn mean_box_dist<T: Real>(s: &Streamline<T>, b: &(Point3<T>, Point3<T>)) -> T {
    let sum: T = s.points().iter().map(|p| box_dist(p, b)).sum();
    sum / T::lit(s.len() as f64)
}

impl<'a, T: Real> BoxIndex<'a, T> {
    fn new(tractogram: &'a Tractogram<T>) -> Self {
        BoxIndex {
            tractogram,
            boxes: tractogram.streamlines().iter().map(Streamline::bounds).collect(),
        }
    }

    /// The `knn` target ids nearest to `query` under `d_mc`, ties broken by
    /// id. Candidates are visited in order of a lower bound on `d_mc`
    /// (mean point-to-bounding-box distance) and the scan stops once that
    /// bound exceeds the current k-th distance.
    fn nearest(&self, query: &Streamline<T>, knn: usize) -> Vec<usize> {
        let all = self.tractogram.streamlines();
        let knn = knn.min(all.len());
        let qbox = query.bounds();
        let mut order: Vec<Ranked<T>> = all
            .iter()
            .zip(&self.boxes)
            .enumerate()
            .map(|(id, (s, b))| {
                let lb = (mean_box_dist(query, b) + mean_box_dist(s, &qbox)) / T::lit(2.0);
                Ranked(lb, id)
            })
            .collect();
        order.sort_unstable();

        let slack = T::one() + T::lit(1e-9);
        let mut heap: BinaryHeap<Ranked<T>> = BinaryHeap::with_capacity(knn + 1);
        for Ranked(lb, id) in order {
            if heap.len() == knn {
                let worst = heap.peek().expect("heap is full").0;
                if lb > worst * slack {
                    break;
                }
            }
            let d = d_mc(query, &all[id]);
            heap.push(Ranked(d, id));
            if heap.len() > knn {
                heap.pop();
            }
        }
        heap.into_iter().map(|r| r.1).collect()
    }

    fn superset(&self, example: &[&Streamline<T>], knn: usize) -> Result<Vec<usize>> {
        if knn == 0 {
            return Err(Error::InvalidConfig("knn must be at least 1".into()));
        }
        let m = self.tractogram.len();
        let k = example.len();
        let mut knn = knn;
        loop {
            let per_row: Vec<Vec<usize>> = example
                .par_iter()
                .map(|s| self.nearest(s, knn))
                .collect();
            let union: BTreeSet<usize> = per_row.into_iter().flatten().collect();
            if union.len() >= k || knn >= m {
                return Ok(union.into_iter().collect());
            }
            knn = (knn * 2).min(m);
        }
    }
}

fn example_streamlines<T: Real>(example: &Bundle<T>) -> Result<Vec<&Streamline<T>>> {
    if example.ids().is_some() {
        return Err(Error::InvalidBundle(format!(
            "example '{}' must carry its own streamlines",
            example.name()
        )));
    }
    example.streamlines(None)
}

/// Sorted union over example streamlines of their `knn` nearest target
/// streamlines. `knn` doubles until the union holds at least as many ids
/// as the example has streamlines (or the whole tractogram is covered).
pub fn candidate_superset<T: Real>(t: &Tractogram<T>, example: &Bundle<T>, knn: usize) -> Result<Vec<usize>> {
    if t.is_empty() {
        return Err(Error::EmptyTractogram);
    }
    BoxIndex::new(t).superset(&example_streamlines(example)?, knn)
}

fn block<T: Real>(
    rows: usize,
    candidates: &[usize],
    f: impl Fn(usize, usize) -> T + Sync,
) -> Result<CostMatrix<T>> {
    let values: Vec<T> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|i| candidates.iter().map(move |&j| (i, j)).collect::<Vec<_>>())
        .map(|(i, j)| f(i, j))
        .collect();
    CostMatrix::new(rows, candidates.len(), values)
}

fn check_candidates<T: Real>(candidates: &[usize], t: &Tractogram<T>) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if let Some(&bad) = candidates.iter().find(|&&id| id >= t.len()) {
        return Err(Error::InvalidBundle(format!(
            "candidate id {bad} out of range for {} streamlines",
            t.len()
        )));
    }
    Ok(())
}

fn geometric_block<T: Real>(ex: &[&Streamline<T>], candidates: &[usize], t: &Tractogram<T>) -> Result<CostMatrix<T>> {
    let s = t.streamlines();
    block(ex.len(), candidates, |i, j| d_mc(ex[i], &s[j]))
}

fn endpoint_block<T: Real>(ex: &[&Streamline<T>], candidates: &[usize], t: &Tractogram<T>) -> Result<CostMatrix<T>> {
    let s = t.streamlines();
    block(ex.len(), candidates, |i, j| d_end(ex[i], &s[j]))
}

fn roi_block<T: Real>(
    ex: &[&Streamline<T>],
    candidates: &[usize],
    t: &Tractogram<T>,
    rois: &RoiSet<T>,
) -> Result<CostMatrix<T>> {
    // |f(a) - f(b)| with f computed once per streamline
    let s = t.streamlines();
    let fa: Vec<T> = ex.par_iter().map(|a| roi_profile(a, rois)).collect();
    let fb: BTreeMap<usize, T> = candidates
        .par_iter()
        .map(|&j| (j, roi_profile(&s[j], rois)))
        .collect();
    block(ex.len(), candidates, |i, j| (fa[i] - fb[&j]).abs())
}

/// `D`, `E` and `R` between every example streamline and every candidate.
pub fn build_cost_blocks<T: Real>(
    example: &Bundle<T>,
    candidates: &[usize],
    t: &Tractogram<T>,
    rois: &RoiSet<T>,
) -> Result<CostBlocks<T>> {
    let ex = example_streamlines(example)?;
    check_candidates(candidates, t)?;
    Ok(CostBlocks {
        d: geometric_block(&ex, candidates, t)?,
        e: endpoint_block(&ex, candidates, t)?,
        r: roi_block(&ex, candidates, t, rois)?,
    })
}

/// Rescales a block. Degenerate blocks (max 0 for max-scale, constant for
/// range-scale) come back unchanged.
pub fn normalize_block<T: Real>(m: &CostMatrix<T>, mode: Normalization) -> CostMatrix<T> {
    let rescaled = match mode {
        Normalization::None => return m.clone(),
        Normalization::MaxScale => {
            let max = m.max_value();
            if max == T::zero() {
                return m.clone();
            }
            m.map(|v| v / max)
        }
        Normalization::RangeScale => {
            let (lo, hi) = (m.min_value(), m.max_value());
            if hi == lo {
                return m.clone();
            }
            m.map(|v| (v - lo) / (hi - lo))
        }
    };
    rescaled.expect("rescaling a finite matrix by a finite non-zero factor stays finite")
}

fn fuse_terms<T: Real>(terms: &[(T, &CostMatrix<T>)], normalization: Normalization) -> Result<CostMatrix<T>> {
    let (_, first) = terms[0];
    let (rows, cols) = (first.rows(), first.cols());
    if let Some((_, m)) = terms.iter().find(|(_, m)| m.rows() != rows || m.cols() != cols) {
        return Err(Error::Shape(format!(
            "cannot fuse {}x{} with {rows}x{cols}",
            m.rows(),
            m.cols()
        )));
    }
    let scaled: Vec<(T, CostMatrix<T>)> = terms
        .iter()
        .map(|(w, m)| (*w, normalize_block(m, normalization)))
        .collect();
    let values = (0..rows * cols)
        .map(|k| {
            scaled
                .iter()
                .fold(T::zero(), |acc, (w, m)| acc + *w * m.values()[k])
        })
        .collect();
    CostMatrix::new(rows, cols, values)
}

/// `λD·D' + λE·E' + λR·R'` over the normalized blocks.
pub fn fuse<T: Real>(
    d: &CostMatrix<T>,
    e: &CostMatrix<T>,
    r: &CostMatrix<T>,
    weights: &CostWeights<T>,
    normalization: Normalization,
) -> Result<CostMatrix<T>> {
    fuse_terms(
        &[(weights.lambda_d, d), (weights.lambda_e, e), (weights.lambda_r, r)],
        normalization,
    )
}

/// Fused cost for one example, computing only blocks with a non-zero weight.
/// Dropping a zero-weight term leaves every sum bit-identical to [`fuse`].
fn fused_cost<T: Real>(
    ex: &[&Streamline<T>],
    candidates: &[usize],
    t: &Tractogram<T>,
    rois: Option<&RoiSet<T>>,
    w: &CostWeights<T>,
    normalization: Normalization,
) -> Result<CostMatrix<T>> {
    let mut blocks = Vec::with_capacity(3);
    if w.lambda_d > T::zero() {
        blocks.push((w.lambda_d, geometric_block(ex, candidates, t)?));
    }
    if w.lambda_e > T::zero() {
        blocks.push((w.lambda_e, endpoint_block(ex, candidates, t)?));
    }
    if w.lambda_r > T::zero() {
        let rois = rois.ok_or_else(|| Error::InvalidConfig("ROI set required when the ROI weight is positive".into()))?;
        blocks.push((w.lambda_r, roi_block(ex, candidates, t, rois)?));
    }
    let terms: Vec<(T, &CostMatrix<T>)> = blocks.iter().map(|(w, m)| (*w, m)).collect();
    fuse_terms(&terms, normalization)
}

fn segment_with_index<T: Real>(
    example: &Bundle<T>,
    index: &BoxIndex<'_, T>,
    rois: Option<&RoiSet<T>>,
    cfg: &SegmentationConfig<T>,
) -> Result<SingleSegmentation<T>> {
    let ex = example_streamlines(example)?;
    let t = index.tractogram;
    let candidates = index.superset(&ex, cfg.knn)?;
    if candidates.len() < ex.len() {
        return Err(Error::Shape(format!(
            "example '{}' has {} streamlines but the target only {}",
            example.name(),
            ex.len(),
            candidates.len()
        )));
    }
    let cost = fused_cost(&ex, &candidates, t, rois, &cfg.weights, cfg.normalization)?;
    let a = solve_rlap(&cost)?;
    let matches: Vec<usize> = a.row_to_col.iter().map(|&j| candidates[j]).collect();
    let mut ids = matches.clone();
    ids.sort_unstable();
    Ok(SingleSegmentation {
        ids,
        matches,
        total_cost: a.total_cost,
        candidate_count: candidates.len(),
    })
}

/// Segments `t` with a single example bundle: exactly one target streamline
/// per example streamline.
pub fn segment_single<T: Real>(
    example: &Bundle<T>,
    t: &Tractogram<T>,
    rois: Option<&RoiSet<T>>,
    cfg: &SegmentationConfig<T>,
) -> Result<SingleSegmentation<T>> {
    cfg.validate(1)?;
    segment_with_index(example, &BoxIndex::new(t), rois, cfg)
}

/// Ids chosen by at least `needed` of the runs, sorted.
pub fn majority_vote(per_example: &[Vec<usize>], needed: usize) -> Vec<usize> {
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for ids in per_example {
        for &id in ids {
            *votes.entry(id).or_default() += 1;
        }
    }
    votes
        .into_iter()
        .filter(|&(_, n)| n >= needed)
        .map(|(id, _)| id)
        .collect()
}

/// One assignment per example, merged by vote.
pub fn segment_multi<T: Real>(
    examples: &[Bundle<T>],
    t: &Tractogram<T>,
    rois: Option<&RoiSet<T>>,
    cfg: &SegmentationConfig<T>,
) -> Result<SegmentationResult<T>> {
    if examples.is_empty() {
        return Err(Error::InvalidConfig("at least one example bundle is required".into()));
    }
    cfg.validate(examples.len())?;
    let index = BoxIndex::new(t);
    let runs = examples
        .par_iter()
        .map(|ex| segment_with_index(ex, &index, rois, cfg))
        .collect::<Result<Vec<_>>>()?;
    let per_example_ids: Vec<Vec<usize>> = runs.iter().map(|r| r.ids.clone()).collect();
    let selected_ids = majority_vote(&per_example_ids, cfg.threshold.votes_needed(examples.len()));
    Ok(SegmentationResult {
        selected_ids,
        per_example_cost: runs.iter().map(|r| r.total_cost).collect(),
        per_example_candidates: runs.iter().map(|r| r.candidate_count).collect(),
        per_example_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Affine, RoiMask, VoxelGrid};

    fn line(a: [f64; 3], b: [f64; 3], n: usize) -> Streamline {
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
            })
            .collect();
        Streamline::from_arrays(&pts).unwrap()
    }

    fn rois() -> RoiSet {
        let grid = VoxelGrid::new([40, 40, 40], Affine::identity()).unwrap();
        RoiSet::new(vec![
            RoiMask::new(grid, [[5, 5, 5]]).unwrap(),
            RoiMask::new(grid, [[15, 5, 5]]).unwrap(),
        ])
        .unwrap()
    }

    /// 10 parallel lines along x, spaced 1 mm apart in y.
    fn ladder() -> Tractogram {
        Tractogram::new((0..10).map(|i| line([0., i as f64, 5.], [20., i as f64, 5.], 11)).collect()).unwrap()
    }

    #[test]
    fn parsing_config_values() {
        let w: CostWeights = "1, 0.4,1.6".parse().unwrap();
        assert_eq!(w, CostWeights::anatomical());
        assert!("1,0".parse::<CostWeights>().is_err());
        assert!("0,0,0".parse::<CostWeights>().is_err());
        assert!("1,-1,0".parse::<CostWeights>().is_err());
        assert_eq!("range".parse::<Normalization>().unwrap(), Normalization::RangeScale);
        assert!("zscore".parse::<Normalization>().is_err());
        assert_eq!("3".parse::<MajorityThreshold>().unwrap(), MajorityThreshold::AtLeast(3));
        assert_eq!(MajorityThreshold::StrictMajority.votes_needed(5), 3);
        assert_eq!(MajorityThreshold::StrictMajority.votes_needed(1), 1);
        assert_eq!(MajorityThreshold::StrictMajority.votes_needed(4), 2);
        let cfg = SegmentationConfig::<f64> {
            threshold: MajorityThreshold::AtLeast(6),
            ..Default::default()
        };
        assert!(cfg.validate(5).is_err());
    }

    #[test]
    fn superset_contains_identical_streamline() {
        let t = ladder();
        let ex = Bundle::from_streamlines("e", vec![t.streamlines()[7].clone()]).unwrap();
        let c = candidate_superset(&t, &ex, 1).unwrap();
        assert_eq!(c, vec![7]);
        let all = candidate_superset(&t, &ex, t.len()).unwrap();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn superset_grows_until_it_covers_the_example() {
        let t = ladder();
        let copy = t.streamlines()[4].clone();
        let ex = Bundle::from_streamlines("e", vec![copy.clone(), copy.clone(), copy]).unwrap();
        let c = candidate_superset(&t, &ex, 1).unwrap();
        assert!(c.len() >= 3);
        assert!(c.contains(&4));
    }

    #[test]
    fn normalization_modes() {
        let m: CostMatrix = CostMatrix::from_rows(&[vec![1.0, 4.0], vec![2.0, 0.5]]).unwrap();
        assert_eq!(normalize_block(&m, Normalization::MaxScale).max_value(), 1.0);
        assert_eq!(normalize_block(&m, Normalization::None), m);
        let r = normalize_block(&m, Normalization::RangeScale);
        assert_eq!((r.min_value(), r.max_value()), (0.0, 1.0));
        let flat = CostMatrix::from_fn(2, 3, |_, _| 2.0).unwrap();
        assert_eq!(normalize_block(&flat, Normalization::RangeScale), flat);
        let zero = CostMatrix::from_fn(2, 3, |_, _| 0.0).unwrap();
        assert_eq!(normalize_block(&zero, Normalization::MaxScale), zero);
    }

    #[test]
    fn fuse_reductions() {
        let d: CostMatrix = CostMatrix::from_rows(&[vec![1.0, 4.0], vec![2.0, 0.5]]).unwrap();
        let e = CostMatrix::from_rows(&[vec![9.0, 1.0], vec![3.0, 7.0]]).unwrap();
        let r = CostMatrix::from_rows(&[vec![0.0, 2.0], vec![5.0, 1.0]]).unwrap();
        let c = fuse(&d, &e, &r, &CostWeights::geometric(), Normalization::None).unwrap();
        assert_eq!(c, d);

        let ones: CostMatrix = CostMatrix::from_fn(3, 4, |_, _| 1.0).unwrap();
        let c = fuse(&ones, &ones, &ones, &CostWeights::anatomical(), Normalization::MaxScale).unwrap();
        assert!(c.values().iter().all(|&v| (v - 3.0).abs() < 1e-15));

        let wrong = CostMatrix::from_fn(3, 2, |_, _| 1.0).unwrap();
        assert!(matches!(
            fuse(&d, &e, &wrong, &CostWeights::anatomical(), Normalization::None),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn cost_blocks_match_metric_calls() {
        let t = ladder();
        let ex = Bundle::from_streamlines("e", vec![t.streamlines()[2].clone(), line([1., 3.5, 5.], [19., 6.5, 5.], 7)])
            .unwrap();
        let rois = rois();
        let cand = [2, 5, 9];
        let b = build_cost_blocks(&ex, &cand, &t, &rois).unwrap();
        let es = ex.streamlines(None).unwrap();
        for (i, a) in es.iter().enumerate() {
            for (j, &id) in cand.iter().enumerate() {
                let s = &t.streamlines()[id];
                assert_eq!(b.d.get(i, j), d_mc(a, s));
                assert_eq!(b.e.get(i, j), d_end(a, s));
                assert_eq!(b.r.get(i, j), crate::metrics::d_rois(a, s, &rois));
            }
        }
        assert_eq!((b.d.get(0, 0), b.e.get(0, 0), b.r.get(0, 0)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn missing_rois_with_roi_weight_is_an_error() {
        let t = ladder();
        let ex = Bundle::from_streamlines("e", vec![t.streamlines()[2].clone()]).unwrap();
        let cfg = SegmentationConfig::default();
        assert!(matches!(segment_single(&ex, &t, None, &cfg), Err(Error::InvalidConfig(_))));
        let base = SegmentationConfig::baseline();
        assert_eq!(segment_single(&ex, &t, None, &base).unwrap().ids, vec![2]);
    }

    #[test]
    fn single_example_row_takes_row_minimum() {
        let t = ladder();
        let q = line([0., 6.2, 5.], [20., 6.2, 5.], 11);
        let ex = Bundle::from_streamlines("e", vec![q]).unwrap();
        let r = segment_single(&ex, &t, Some(&rois()), &SegmentationConfig::default()).unwrap();
        assert_eq!(r.ids, vec![6]);
    }

    #[test]
    fn vote_counts() {
        let runs = vec![vec![1, 2, 9], vec![1, 2], vec![1, 3], vec![4], vec![5]];
        assert_eq!(majority_vote(&runs, 3), vec![1]);
        assert_eq!(majority_vote(&runs, 2), vec![1, 2]);
        assert_eq!(majority_vote(&runs, 1), vec![1, 2, 3, 4, 5, 9]);
    }

    #[test]
    fn id_based_examples_are_rejected() {
        let t = ladder();
        let ex = Bundle::from_ids("e", [1, 2]).unwrap();
        assert!(matches!(candidate_superset(&t, &ex, 2), Err(Error::InvalidBundle(_))));
    }
}
