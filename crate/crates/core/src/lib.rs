//! Differentiable volumetric renderer and multi-view scene fitting.
//!
//! The crate models a scene as a semi-transparent RGBα voxel template paired
//! with an inverse warp field (a mixture of affine warps). Images form by
//! accumulative ray marching through the warped volume; every stage has a
//! hand-written adjoint so the whole pipeline can be fit to posed images by
//! gradient descent.
//!
//! All numeric code is generic over [`num::Real`]; `f32` is the working
//! precision for fitting and rendering, `f64` backs gradient verification.

pub mod error;
pub mod geometry;
pub mod grids;
pub mod img;
pub mod math;
pub mod num;
pub mod warp;

pub use error::{Error, Result};

/// Working precision used by the fitting and rendering binaries.
pub type Scalar = f32;

/// Concrete aliases at working precision.
pub type Vec3f = math::Vec3<Scalar>;
pub type Mat3f = math::Mat3<Scalar>;
pub type CameraF = geometry::Camera<Scalar>;
pub type ImageF = img::Image<Scalar>;
pub type VoxelGridF = grids::VoxelGrid<Scalar>;
