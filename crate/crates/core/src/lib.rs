//! Object-centric hand-object correspondence fields.
//!
//! The crate covers the full refinement loop for a single hand interacting
//! with a rigid object:
//!
//! * [`geometry`]: triangle meshes, BVH-accelerated ray casting, winding-number
//!   insideness, closest points, solid voxelization and rigid alignment.
//! * [`hand`]: a linear-blend-skinned parametric hand, its JSON model file and a
//!   procedural synthetic hand used in place of a licensed asset.
//! * [`field`]: extraction of per-object-point correspondence fields from hand
//!   and object meshes, decoding back to partial hand point clouds, and the
//!   binary field file.
//! * [`perturb`]: synthetic tracking noise.
//! * [`denoiser`]: inference of the temporal auto-encoder from exported weights,
//!   a training-free temporal smoother, and latent grasp transfer.
//! * [`fitter`]: two-stage gradient-based fitting of the hand model to fields.
//! * [`metrics`]: joint/vertex errors, intersection volume and contact IoU.
//! * [`pipeline`]: sequence bundles and the end-to-end commands.

pub mod demo;
pub mod denoiser;
pub mod error;
pub mod field;
pub mod fitter;
pub mod geometry;
pub mod hand;
pub mod metrics;
pub mod perturb;
pub mod pipeline;

pub use error::{Error, Result};

/// Double precision 3-vector used for all geometry.
pub type Vec3 = nalgebra::Vector3<f64>;
