//! Coarse-to-fine point-cloud registration and SPECT/CTA volume fusion.
//!
//! Landmark similarity alignment seeds one of four fine registrations
//! (ICP, anisotropic-scale ICP, rigid or affine coherent point drift).
//! Around them sit region growing, isosurface meshing, world-coordinate
//! volume warping, perfusion-to-mesh mapping, phantom generators and file
//! formats for every data type.

pub mod coarse;
pub mod cpd;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod icp;
pub mod io;
pub mod phantom;
pub mod pipeline;
pub mod registration;
pub mod segmentation;
pub mod volume;

pub use coarse::{coarse_register, downsample_landmarks, estimate_umeyama, CoarseParams, LandmarkSet};
pub use cpd::{cpd, cpd_affine, cpd_estep, cpd_rigid, CpdMode, CpdParams, GmmState};
pub use error::{Error, Result};
pub use fusion::{dice, map_mpi_to_mesh, mean_distance_error, FusionInput, MpiSource};
pub use geometry::{
    apply_transform, compose, invert, nearest_neighbors, rotation_about, AffineTransform3, Pairing, Point3, PointCloud,
    TransformKind,
};
pub use icp::{icp, sicp, solve_rigid_svd, IcpParams};
pub use registration::{ConvergenceDetail, RegistrationResult};
pub use segmentation::{extract_isosurface, mask_to_point_cloud, region_grow, Mask, TriMesh};
pub use volume::{build_spatial_reference, sample_trilinear, voxel_to_world, warp_volume, SpatialReference, Volume};
