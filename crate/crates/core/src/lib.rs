//! Quantitative evaluation of volumetric segmentations on anisotropic CT
//! grids.
//!
//! The crate covers the compute side of a segmentation study: a strict
//! NIfTI-1 subset for I/O ([`nifti`]), CT intensity preprocessing
//! ([`preprocess`]), an exact anisotropic Euclidean distance transform
//! ([`distance`]), overlap and surface-distance metrics ([`metrics`]), mask
//! combination and margin expansion ([`masks`]), rank-based statistics
//! ([`stats`]), and synthetic CT phantoms for end-to-end testing
//! ([`phantom`]).
//!
//! All voxel grids carry an explicit per-axis spacing in millimetres, and
//! every distance-aware routine consumes that spacing directly. Nothing is
//! resampled.

pub mod distance;
pub mod error;
pub mod masks;
pub mod metrics;
pub mod nifti;
pub mod phantom;
pub mod preprocess;
pub mod special;
pub mod stats;
pub mod volume;

pub use distance::{
    directed_surface_distances, edt, surface_distance_pair, surface_voxels, DistanceField,
};
pub use error::{Error, Result};
pub use masks::{build_ptv, expand_margin, subtract, union, MarginSpec};
pub use metrics::{dice, evaluate_pair, hausdorff, hd95, MetricRecord, PairMetrics};
pub use phantom::{generate_phantom, perturb_mask, PhantomCase, PhantomSpec};
pub use preprocess::{foreground_stats, normalize, window_lut, NormStats, WindowSpec};
pub use nifti::{load_nifti, save_nifti};
pub use volume::{
    bounding_box, mask_to_volume, threshold_to_mask, BinaryMask, Geometry, IntensityUnit,
    ScalarKind, Volume,
    VoxelBox, VoxelData,
};
