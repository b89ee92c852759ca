//! Scan preprocessing, plane fitting and the iterated pose update.

mod plane;
mod preprocess;
mod update;

pub use plane::{fit_plane, point_to_plane_jacobian, point_to_plane_residual, PlaneFit};
pub use preprocess::{
    center_downsample, deskew_scan, interpolate_track, random_downsample, random_downsample_seeded, DeskewError,
};
pub use update::{
    build_correspondences, iterated_update, Correspondence, EstimatorConfig, UpdateError, UpdateStats,
    DEGENERACY_RATIO,
};
