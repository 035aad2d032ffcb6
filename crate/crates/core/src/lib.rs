//! Invertible geometric augmentation for unsupervised depth completion.
//!
//! Inputs are augmented photometrically and geometrically, the geometric
//! part is recorded, and the predicted depth is warped back to the original
//! frame so the reconstruction losses are computed on the untouched image
//! and sparse depth.

pub mod cli;
pub mod error;
pub mod geometric;
pub mod harness;
pub mod loss;
pub mod photometric;
pub mod pipeline;
pub mod scenegen;
pub mod sampling;
pub mod types;
pub mod undo;

pub use error::{Error, Result};
pub use types::{
    CameraIntrinsics, DenseDepthMap, DepthRange, Dims, Image, RigidPose, SparseDepthMap,
    ValidityMask,
};
