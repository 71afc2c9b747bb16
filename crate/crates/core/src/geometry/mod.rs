//! Triangle meshes and the spatial queries built on them.

mod bvh;
mod mesh;
pub mod obj;
mod procrustes;
mod rng;
mod sampling;
pub mod triangle;
pub(crate) mod voxel;

pub use bvh::{Aabb, Bvh, RayHit};
pub(crate) use mesh::interpolate;
pub use mesh::{SurfacePoint, TriMesh};
pub use procrustes::{procrustes_align, RigidTransform};
pub use rng::SplitMix64;
pub use sampling::{sample_surface, ObjectPointSet};
pub use voxel::{voxelize_region, voxelize_solid, OccupancyGrid};
