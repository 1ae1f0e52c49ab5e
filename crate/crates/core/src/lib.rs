//! Example-based white-matter bundle segmentation.
//!
//! A target tractogram is segmented by matching each streamline of an
//! example bundle to a distinct target streamline through a rectangular
//! linear assignment. The assignment cost fuses a geometric distance
//! (mean of closest points), an endpoint distance and an ROI-based term;
//! several examples are combined by majority vote.
//!
//! The numeric code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below name the common concrete instantiations.

pub mod cli;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod lap;
pub mod metrics;
pub mod real;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{dsc, voxelize, VoxelSet};
pub use geometry::{Affine, Bundle, Point3, RoiMask, Streamline, Tractogram, VoxelGrid};
pub use lap::{brute_force_lap, solve_lap, solve_rlap, Assignment, CostMatrix};
pub use metrics::{d_end, d_mc, d_rois, RoiSet};
pub use real::Real;
pub use segmentation::{
    segment_multi, segment_single, CostWeights, MajorityThreshold, Normalization, SegmentationConfig,
    SegmentationResult,
};

pub type Streamline64 = Streamline<f64>;
pub type Streamline32 = Streamline<f32>;
pub type Tractogram64 = Tractogram<f64>;
pub type Tractogram32 = Tractogram<f32>;
pub type Bundle64 = Bundle<f64>;
pub type Bundle32 = Bundle<f32>;
pub type CostMatrix64 = CostMatrix<f64>;
pub type CostMatrix32 = CostMatrix<f32>;
pub type SegmentationConfig64 = SegmentationConfig<f64>;
pub type SegmentationConfig32 = SegmentationConfig<f32>;
