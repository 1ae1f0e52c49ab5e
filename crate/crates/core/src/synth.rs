//! Synthetic subjects: labeled bundles, waypoint-bypassing streamlines,
//! background distractors and waypoint ROIs.
//!
//! Every subject of a study shares one template. A bundle's template
//! streamlines follow a centerline (line, arc or helix) with a per-streamline
//! core offset and fanned endpoints. A subject differs from the template by a
//! smooth per-streamline jitter and a smooth polynomial warp of space, both
//! keyed by the subject index. With zero jitter and zero deformation all
//! subjects coincide.
//!
//! Unlabeled streamlines come in two kinds. Bypass streamlines are drawn
//! like bundle members but swerve around both waypoints, so they look like
//! the bundle to a purely geometric distance while missing its ROIs; each
//! bundle carries a fixed number of them. Background distractors are smooth
//! curves kept well clear of every bundle.
//!
//! All randomness is drawn from ChaCha streams keyed by
//! `(seed, purpose, subject, bundle, streamline)`, so output does not depend
//! on evaluation order or thread count.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Affine, Bundle, Point3, RoiMask, Streamline, Tractogram, VoxelGrid};
use crate::metrics::RoiSet;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Line,
    Arc,
    Helix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub name: String,
    pub family: Family,
    /// Number of labeled streamlines.
    pub count: usize,
    /// Jitter scale σ in mm: template core spread and per-subject wobble.
    pub jitter: f64,
    /// Radius in mm of the disc the endpoints fan out over.
    pub endpoint_spread: f64,
    /// Unlabeled streamlines that follow the bundle but detour around its
    /// waypoints.
    #[serde(default)]
    pub bypass: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub shape: [usize; 3],
    /// Row-major voxel-to-mm affine.
    pub affine: [[f64; 4]; 4],
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<VoxelGrid> {
        let affine = Affine::new(self.affine).map_err(|e| Error::InvalidSpec(format!("grid: {e}")))?;
        VoxelGrid::new(self.shape, affine).map_err(|e| Error::InvalidSpec(format!("grid: {e}")))
    }
}

impl From<&VoxelGrid> for GridSpec {
    fn from(g: &VoxelGrid) -> Self {
        GridSpec {
            shape: g.shape(),
            affine: *g.affine().matrix(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub bundles: Vec<BundleSpec>,
    /// Background streamlines placed away from every bundle.
    pub distractors: usize,
    /// Scale in mm of the per-subject polynomial warp.
    pub deformation: f64,
    pub grid: GridSpec,
    /// How far in mm bypass streamlines swerve at each waypoint.
    #[serde(default = "defaults::bypass_offset")]
    pub bypass_offset: f64,
    /// Distance in mm between consecutive streamline points.
    #[serde(default = "defaults::point_spacing")]
    pub point_spacing: f64,
    /// Examples drawn per bundle when a study is built from this spec.
    #[serde(default = "defaults::examples")]
    pub examples: usize,
    /// Jitter σ in mm applied to each example.
    #[serde(default = "defaults::example_jitter")]
    pub example_jitter: f64,
}

mod defaults {
    pub fn bypass_offset() -> f64 {
        7.0
    }
    pub fn point_spacing() -> f64 {
        4.0
    }
    pub fn examples() -> usize {
        5
    }
    pub fn example_jitter() -> f64 {
        1.5
    }
}

pub const SMALL_BUNDLE: usize = 20;
pub const LARGE_BUNDLE: usize = 200;

impl SynthSpec {
    /// Two small (20) and two large (200) bundles, arc and line of each,
    /// on an 80³ grid of 2 mm voxels centred at the origin.
    pub fn default_study(seed: u64) -> Self {
        let bundle = |name: &str, family, count| BundleSpec {
            name: name.into(),
            family,
            count,
            jitter: 1.0,
            endpoint_spread: 6.0,
            bypass: 24,
        };
        SynthSpec {
            seed,
            bundles: vec![
                bundle("small_arc", Family::Arc, SMALL_BUNDLE),
                bundle("small_line", Family::Line, SMALL_BUNDLE),
                bundle("large_arc", Family::Arc, LARGE_BUNDLE),
                bundle("large_line", Family::Line, LARGE_BUNDLE),
            ],
            distractors: 100,
            deformation: 2.0,
            grid: GridSpec {
                shape: [80, 80, 80],
                affine: [
                    [2.0, 0.0, 0.0, -80.0],
                    [0.0, 2.0, 0.0, -80.0],
                    [0.0, 0.0, 2.0, -80.0],
                    [0.0, 0.0, 0.0, 1.0],
                ],
            },
            bypass_offset: defaults::bypass_offset(),
            point_spacing: defaults::point_spacing(),
            examples: defaults::examples(),
            example_jitter: defaults::example_jitter(),
        }
    }

    pub fn validate(&self) -> Result<VoxelGrid> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.bundles.is_empty() {
            return bad("at least one bundle is required".into());
        }
        for (i, b) in self.bundles.iter().enumerate() {
            if b.name.trim().is_empty() || b.name.contains(['/', '\\', '\n']) {
                return bad(format!("bundle {i}: name must be a plain non-empty word"));
            }
            if self.bundles[..i].iter().any(|o| o.name == b.name) {
                return bad(format!("bundle name '{}' is used twice", b.name));
            }
            if b.count == 0 {
                return bad(format!("bundle '{}': count must be at least 1", b.name));
            }
            if !(b.jitter >= 0.0 && b.jitter.is_finite()) {
                return bad(format!("bundle '{}': jitter must be finite and >= 0", b.name));
            }
            if !(b.endpoint_spread >= 0.0 && b.endpoint_spread.is_finite()) {
                return bad(format!("bundle '{}': endpoint spread must be finite and >= 0", b.name));
            }
        }
        let nonneg = [
            ("deformation", self.deformation),
            ("bypass_offset", self.bypass_offset),
            ("example_jitter", self.example_jitter),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0"));
            }
        }
        if !(self.point_spacing > 0.0 && self.point_spacing.is_finite()) {
            return bad("point_spacing must be finite and > 0".into());
        }
        if self.examples == 0 {
            return bad("examples must be at least 1".into());
        }
        self.grid.to_grid()
    }
}

/// One generated subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub tractogram: Tractogram,
    /// Ground-truth bundles as id sets, in spec order.
    pub bundles: Vec<Bundle>,
    /// Two waypoint ROIs per bundle, in spec order.
    pub rois: Vec<RoiSet>,
    /// Warped bundle centerlines, in spec order.
    pub centerlines: Vec<Streamline>,
    pub grid: VoxelGrid,
}

// purposes mixed into every random stream key
const LAYOUT: u64 = 1;
const TEMPLATE: u64 = 2;
const JITTER: u64 = 3;
const WARP: u64 = 4;
const BYPASS: u64 = 5;
const BACKGROUND: u64 = 6;
const SHUFFLE: u64 = 7;
const EXAMPLE: u64 = 8;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(key: &[u64]) -> ChaCha8Rng {
    let h = key.iter().fold(0x6a09_e667_f3bc_c908u64, |h, &k| splitmix(h ^ splitmix(k)));
    ChaCha8Rng::seed_from_u64(h)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gauss3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [gauss(rng), gauss(rng), gauss(rng)]
}

/// Uniform point in the disc of radius `r`, as coefficients of a 2-D basis.
fn disc(rng: &mut ChaCha8Rng, r: f64) -> [f64; 2] {
    let rho = r * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    [rho * phi.cos(), rho * phi.sin()]
}

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn norm(a: V3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn unit(a: V3) -> V3 {
    scale(a, 1.0 / norm(a))
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// A centerline placed in the study volume, parameterized at constant speed
/// over `s ∈ [0, 1]`.
#[derive(Debug, Clone, Copy)]
struct Centerline {
    family: Family,
    origin: V3,
    /// In-plane rotation.
    angle: f64,
}

impl Centerline {
    fn local(&self, s: f64) -> V3 {
        match self.family {
            Family::Line => [80.0 * (s - 0.5), 0.0, 0.0],
            Family::Arc => {
                // radius 32 mm over 160 degrees
                let r = 32.0;
                let a = (-80.0 + 160.0 * s).to_radians();
                [r * a.sin(), r * a.cos() - r * 0.6, 0.0]
            }
            Family::Helix => {
                // radius 5 mm, 1.5 turns over 70 mm
                let a = 3.0 * PI * s;
                [70.0 * (s - 0.5), 5.0 * a.cos() - 5.0, 5.0 * a.sin()]
            }
        }
    }

    fn at(&self, s: f64) -> V3 {
        let [x, y, z] = self.local(s);
        let (sn, cs) = self.angle.sin_cos();
        add(self.origin, [cs * x - sn * y, sn * x + cs * y, z])
    }

    /// Unit tangent and two unit normals at `s`.
    fn frame(&self, s: f64) -> (V3, V3, V3) {
        let h = 1e-4;
        let t = unit(sub(self.at((s + h).min(1.0)), self.at((s - h).max(0.0))));
        let n1 = unit(cross([0.0, 0.0, 1.0], t));
        let n2 = cross(t, n1);
        (t, n1, n2)
    }

    fn length(&self) -> f64 {
        let n = 512;
        (0..n)
            .map(|i| norm(sub(self.at((i + 1) as f64 / n as f64), self.at(i as f64 / n as f64))))
            .sum()
    }
}

/// Smooth per-subject displacement field.
#[derive(Debug, Clone, Copy)]
struct Warp {
    amplitude: f64,
    center: V3,
    half: f64,
    t: V3,
    m: [V3; 3],
    q: [[f64; 6]; 3],
}

impl Warp {
    /// Subject 0 is the unwarped reference. Every other subject is shifted
    /// by exactly `deformation` mm in a random direction, plus a milder
    /// linear and quadratic component.
    fn new(spec: &SynthSpec, grid: &VoxelGrid, subject: u64) -> Self {
        let mut rng = stream(&[spec.seed, WARP, subject]);
        let t = unit(gauss3(&mut rng));
        let m = [(); 3].map(|_| scale(gauss3(&mut rng), 0.15));
        let q = [(); 3].map(|_| [(); 6].map(|_| 0.1 * gauss(&mut rng)));
        let (center, half) = volume(grid);
        Warp {
            amplitude: if subject == 0 { 0.0 } else { spec.deformation },
            center,
            half: half.iter().cloned().fold(f64::INFINITY, f64::min),
            t,
            m,
            q,
        }
    }

    fn apply(&self, x: V3) -> V3 {
        if self.amplitude == 0.0 {
            return x;
        }
        let u = scale(sub(x, self.center), 1.0 / self.half);
        let quad = [u[0] * u[0], u[1] * u[1], u[2] * u[2], u[0] * u[1], u[1] * u[2], u[0] * u[2]];
        let d: V3 = std::array::from_fn(|a| {
            let lin: f64 = (0..3).map(|b| self.m[a][b] * u[b]).sum();
            let sq: f64 = (0..6).map(|b| self.q[a][b] * quad[b]).sum();
            self.t[a] + lin + sq
        });
        add(x, scale(d, self.amplitude))
    }
}

/// Center and half extents in mm of the grid's field of view.
fn volume(grid: &VoxelGrid) -> (V3, V3) {
    let s = grid.shape();
    let lo = grid.affine().apply([0.0; 3]).to_array();
    let hi = grid.affine().apply([s[0] as f64, s[1] as f64, s[2] as f64]).to_array();
    let center = scale(add(lo, hi), 0.5);
    let half = std::array::from_fn(|a| (hi[a] - lo[a]).abs() / 2.0);
    (center, half)
}

fn layout(spec: &SynthSpec, grid: &VoxelGrid) -> Vec<Centerline> {
    let (center, half) = volume(grid);
    let nb = spec.bundles.len();
    let slab = (1.5 * half[2] / nb as f64).min(30.0);
    spec.bundles
        .iter()
        .enumerate()
        .map(|(b, bs)| {
            let mut rng = stream(&[spec.seed, LAYOUT, b as u64]);
            let angle = 2.0 * PI * rng.random::<f64>();
            let shift = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
            let z = (b as f64 - (nb as f64 - 1.0) / 2.0) * slab;
            Centerline {
                family: bs.family,
                origin: add(center, [shift[0], shift[1], z]),
                angle,
            }
        })
        .collect()
}

fn samples(length: f64, s0: f64, s1: f64, spacing: f64) -> Vec<f64> {
    let n = ((length * (s1 - s0) / spacing).ceil() as usize).max(1) + 1;
    (0..n).map(|i| s0 + (s1 - s0) * i as f64 / (n - 1) as f64).collect()
}

/// Weight of the endpoint fan: 1 at the end, 0 from a third of the way in.
fn fan_weight(s: f64) -> f64 {
    let w = (1.0 - 3.0 * s).max(0.0);
    w * w
}

/// Points of a streamline following `c` with a lateral offset given in the
/// centerline's normal frame.
fn offset_curve(c: &Centerline, ss: &[f64], offset: impl Fn(f64) -> [f64; 2]) -> Vec<V3> {
    ss.iter()
        .map(|&s| {
            let (_, n1, n2) = c.frame(s);
            let [a, b] = offset(s);
            add(c.at(s), add(scale(n1, a), scale(n2, b)))
        })
        .collect()
}

/// Smooth displacement of scale `sigma` along a polyline: three low-order
/// modes with Gaussian 3-D coefficients, each point clamped to `4σ`.
fn smooth_jitter(points: &[V3], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<V3> {
    let g = [gauss3(rng), gauss3(rng), gauss3(rng)];
    let n = points.len();
    points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let (sn, cs) = (PI * s).sin_cos();
            let mut d = add(scale(g[0], 0.4), add(scale(g[1], 0.35 * cs), scale(g[2], 0.35 * sn)));
            d = scale(d, sigma);
            let len = norm(d);
            if len > 4.0 * sigma {
                d = scale(d, 4.0 * sigma / len);
            }
            add(p, d)
        })
        .collect()
}

fn to_streamline(points: Vec<V3>) -> Result<Streamline> {
    Streamline::from_arrays(&points).map_err(|e| Error::InvalidSpec(format!("generated streamline rejected: {e}")))
}

/// Template points of labeled streamline `i` of bundle `b`.
fn bundle_member(spec: &SynthSpec, c: &Centerline, len: f64, b: usize, i: usize) -> Vec<V3> {
    let bs = &spec.bundles[b];
    let mut rng = stream(&[spec.seed, TEMPLATE, b as u64, i as u64]);
    let core = [bs.jitter * gauss(&mut rng), bs.jitter * gauss(&mut rng)];
    let e0 = disc(&mut rng, bs.endpoint_spread);
    let e1 = disc(&mut rng, bs.endpoint_spread);
    let s0 = rng.random_range(0.0..0.04);
    let s1 = 1.0 - rng.random_range(0.0..0.04);
    offset_curve(c, &samples(len, s0, s1, spec.point_spacing), |s| {
        let (w0, w1) = (fan_weight(s), fan_weight(1.0 - s));
        [
            core[0] + w0 * e0[0] + w1 * e1[0],
            core[1] + w0 * e0[1] + w1 * e1[1],
        ]
    })
}

/// Bump of half-width `w` centred on 0.
fn bump(x: f64, w: f64) -> f64 {
    if x.abs() >= w {
        0.0
    } else {
        let c = (PI * x / (2.0 * w)).cos();
        c * c
    }
}

/// Template points of bypass streamline `j` of bundle `b`: drawn like a
/// member, then pushed `bypass_offset` mm sideways around both waypoints.
fn bypass_member(spec: &SynthSpec, c: &Centerline, len: f64, b: usize, j: usize) -> Vec<V3> {
    let bs = &spec.bundles[b];
    let mut rng = stream(&[spec.seed, BYPASS, b as u64, j as u64]);
    let core = [bs.jitter * gauss(&mut rng), bs.jitter * gauss(&mut rng)];
    let e0 = disc(&mut rng, bs.endpoint_spread);
    let e1 = disc(&mut rng, bs.endpoint_spread);
    let s0 = rng.random_range(0.0..0.04);
    let s1 = 1.0 - rng.random_range(0.0..0.04);
    let phi = 2.0 * PI * rng.random::<f64>();
    let dir = [phi.cos(), phi.sin()];
    let h = spec.bypass_offset;
    offset_curve(c, &samples(len, s0, s1, spec.point_spacing), |s| {
        let (w0, w1) = (fan_weight(s), fan_weight(1.0 - s));
        let swerve = h * (bump(s - 1.0 / 3.0, 0.12) + bump(s - 2.0 / 3.0, 0.12));
        std::array::from_fn(|a| core[a] + w0 * e0[a] + w1 * e1[a] + swerve * dir[a])
    })
}

/// Mean over `a`'s points of the distance to the nearest of `b`'s points.
fn directed_mean(a: &[V3], b: &[V3]) -> f64 {
    let sum: f64 = a
        .iter()
        .map(|p| b.iter().map(|q| norm(sub(*p, *q))).fold(f64::INFINITY, f64::min))
        .sum();
    sum / a.len() as f64
}

/// Background curve `j`: a quadratic Bézier through the volume whose
/// `d_mc` to every template centerline is at least 25 mm.
fn background_member(spec: &SynthSpec, grid: &VoxelGrid, centerlines: &[Vec<V3>], j: usize) -> Result<Vec<V3>> {
    let (center, half) = volume(grid);
    for attempt in 0..1000u64 {
        let mut rng = stream(&[spec.seed, BACKGROUND, j as u64, attempt]);
        let mut pick = || -> V3 { std::array::from_fn(|a| center[a] + rng.random_range(-0.85..0.85) * half[a]) };
        let (p0, p1, p2) = (pick(), pick(), pick());
        let chord = norm(sub(p2, p0));
        if !(30.0..=130.0).contains(&chord) {
            continue;
        }
        let ss = samples(chord * 1.2, 0.0, 1.0, spec.point_spacing);
        let pts: Vec<V3> = ss
            .iter()
            .map(|&s| {
                let (a, b, c) = ((1.0 - s) * (1.0 - s), 2.0 * s * (1.0 - s), s * s);
                add(add(scale(p0, a), scale(p1, b)), scale(p2, c))
            })
            .collect();
        let clear = centerlines
            .iter()
            .all(|c| (directed_mean(&pts, c) + directed_mean(c, &pts)) / 2.0 >= 25.0);
        if clear {
            return Ok(pts);
        }
    }
    Err(Error::InvalidSpec(format!(
        "could not place background streamline {j} clear of the bundles"
    )))
}

/// Voxels whose centers lie within 2 mm of `p`, or the voxel holding `p`
/// when the grid is too coarse for any center to qualify.
fn waypoint(grid: &VoxelGrid, p: V3) -> Result<RoiMask> {
    let pt = Point3::from(p);
    let Some(home) = grid.locate(&pt) else {
        return Err(Error::InvalidSpec(format!(
            "waypoint at ({:.1}, {:.1}, {:.1}) lies outside the grid",
            p[0], p[1], p[2]
        )));
    };
    let reach: [usize; 3] = grid.edge_lengths().map(|e| (2.0 / e).ceil() as usize + 1);
    let shape = grid.shape();
    let mut voxels = Vec::new();
    for i in home[0].saturating_sub(reach[0])..=(home[0] + reach[0]).min(shape[0] - 1) {
        for j in home[1].saturating_sub(reach[1])..=(home[1] + reach[1]).min(shape[1] - 1) {
            for k in home[2].saturating_sub(reach[2])..=(home[2] + reach[2]).min(shape[2] - 1) {
                if grid.voxel_center([i, j, k]).dist(&pt) <= 2.0 {
                    voxels.push([i, j, k]);
                }
            }
        }
    }
    if voxels.is_empty() {
        voxels.push(home);
    }
    RoiMask::new(*grid, voxels)
}

/// Point at fraction `f` of the arclength of a polyline.
fn at_arclength(points: &[V3], f: f64) -> V3 {
    let seg: Vec<f64> = points.windows(2).map(|w| norm(sub(w[1], w[0]))).collect();
    let target = f * seg.iter().sum::<f64>();
    let mut acc = 0.0;
    for (w, l) in points.windows(2).zip(&seg) {
        if acc + l >= target && *l > 0.0 {
            let t = (target - acc) / l;
            return add(w[0], scale(sub(w[1], w[0]), t));
        }
        acc += l;
    }
    points[points.len() - 1]
}

/// Generates subject `subject` of the study described by `spec`.
pub fn generate_subject(spec: &SynthSpec, subject: u64) -> Result<Subject> {
    let grid = spec.validate()?;
    let warp = Warp::new(spec, &grid, subject);
    let centers = layout(spec, &grid);
    let lengths: Vec<f64> = centers.iter().map(Centerline::length).collect();
    let nb = spec.bundles.len();

    let template_lines: Vec<Vec<V3>> = centers
        .iter()
        .zip(&lengths)
        .map(|(c, &len)| samples(len, 0.0, 1.0, spec.point_spacing.min(2.0)).iter().map(|&s| c.at(s)).collect())
        .collect();

    let finish = |points: Vec<V3>, sigma: f64, key: [u64; 3]| -> Result<Streamline> {
        let jittered = if sigma > 0.0 {
            let mut rng = stream(&[spec.seed, JITTER, subject, key[0], key[1], key[2]]);
            smooth_jitter(&points, sigma, &mut rng)
        } else {
            points
        };
        to_streamline(jittered.into_iter().map(|p| warp.apply(p)).collect())
    };

    // (streamline, owning bundle if labeled)
    let mut pool: Vec<(Streamline, Option<usize>)> = Vec::new();
    for (b, bs) in spec.bundles.iter().enumerate() {
        for i in 0..bs.count {
            let pts = bundle_member(spec, &centers[b], lengths[b], b, i);
            pool.push((finish(pts, bs.jitter / 2.0, [0, b as u64, i as u64])?, Some(b)));
        }
    }
    for (b, bs) in spec.bundles.iter().enumerate() {
        for j in 0..bs.bypass {
            let pts = bypass_member(spec, &centers[b], lengths[b], b, j);
            pool.push((finish(pts, bs.jitter / 2.0, [1, b as u64, j as u64])?, None));
        }
    }
    for j in 0..spec.distractors {
        let pts = background_member(spec, &grid, &template_lines, j)?;
        pool.push((finish(pts, 0.0, [2, 0, j as u64])?, None));
    }

    // subject-independent id order
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut rng = stream(&[spec.seed, SHUFFLE]);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut streamlines = Vec::with_capacity(pool.len());
    for (id, &src) in order.iter().enumerate() {
        let (s, owner) = &pool[src];
        if let Some(b) = owner {
            members[*b].push(id);
        }
        streamlines.push(s.clone());
    }

    let bundles = spec
        .bundles
        .iter()
        .zip(members)
        .map(|(bs, ids)| Bundle::from_ids(bs.name.clone(), ids))
        .collect::<Result<Vec<_>>>()?;

    let mut rois = Vec::with_capacity(nb);
    let mut centerlines = Vec::with_capacity(nb);
    for line in &template_lines {
        let warped: Vec<V3> = line.iter().map(|&p| warp.apply(p)).collect();
        let set = RoiSet::new(vec![
            waypoint(&grid, at_arclength(&warped, 1.0 / 3.0))?,
            waypoint(&grid, at_arclength(&warped, 2.0 / 3.0))?,
        ])?;
        rois.push(set);
        centerlines.push(to_streamline(warped)?);
    }

    Ok(Subject {
        tractogram: Tractogram::new(streamlines)?,
        bundles,
        rois,
        centerlines,
        grid,
    })
}

/// Adds smooth correlated jitter of scale `sigma` to every streamline.
/// Each point moves by at most `4σ`; `σ = 0` returns the input unchanged.
pub fn perturb_streamlines<T: Real>(streamlines: &[Streamline<T>], sigma: f64, seed: u64) -> Result<Vec<Streamline<T>>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSpec(format!("jitter must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(streamlines.to_vec());
    }
    streamlines
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pts: Vec<V3> = s.points().iter().map(|p| p.to_array().map(Real::as_f64)).collect();
            let mut rng = stream(&[seed, EXAMPLE, i as u64]);
            let moved: Vec<[T; 3]> = smooth_jitter(&pts, sigma, &mut rng)
                .into_iter()
                .map(|p| p.map(T::lit))
                .collect();
            Streamline::from_arrays(&moved)
        })
        .collect()
}

/// Jittered copy of an example bundle carrying its own geometry.
pub fn perturb_example<T: Real>(example: &Bundle<T>, sigma: f64, seed: u64) -> Result<Bundle<T>> {
    if example.ids().is_some() {
        return Err(Error::InvalidBundle(format!(
            "example '{}' must carry its own streamlines",
            example.name()
        )));
    }
    let owned: Vec<Streamline<T>> = example.streamlines(None)?.into_iter().cloned().collect();
    Bundle::from_streamlines(example.name(), perturb_streamlines(&owned, sigma, seed)?)
}

/// `spec.examples` jittered copies of bundle `b` of `subject`, seeded from
/// the study seed and the example index.
pub fn examples_from(spec: &SynthSpec, subject: &Subject, b: usize) -> Result<Vec<Bundle>> {
    let truth = subject
        .bundles
        .get(b)
        .ok_or_else(|| Error::InvalidSpec(format!("no bundle {b}")))?
        .to_owned_geometry(&subject.tractogram)?;
    (0..spec.examples)
        .map(|e| perturb_example(&truth, spec.example_jitter, splitmix(spec.seed ^ splitmix(((b as u64) << 32) | e as u64))))
        .collect()
}
