//! Coupled score distillation over a differentiable 3D Gaussian splatting
//! renderer.
//!
//! The crate is `no_std` (with `alloc`); enable the `parallel` feature to
//! render the four views of an iteration concurrently.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adapter;
pub mod camera;
pub mod csd;
pub mod densify;
pub mod diffusion;
pub mod error;
pub mod gaussian;
pub mod image;
pub mod math;
pub mod mesh;
pub mod optim;
pub mod render;
pub mod score;
pub mod train;

pub use camera::{Camera, CameraQuad, CameraRanges, ViewBucket};
pub use diffusion::{Condition, NoiseSchedule};
pub use error::{Error, Result};
pub use gaussian::{Gaussian, GaussianCloud};
pub use image::Image;
pub use render::{RenderGradients, RenderSettings, RenderedImage};
pub use score::{MultiViewScoreProvider, ScoreProvider, TargetField};
