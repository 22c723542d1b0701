//! Visibility-aware trajectory planning for aerial target tracking.

pub mod error;
pub mod banded;
pub mod field;
pub mod geometry;
pub mod lbfgs;
pub mod minco;
pub mod objective;
pub mod path;
pub mod planner;
pub mod prediction;
pub mod sim;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{GridSpec, Vec3, YawPose};
