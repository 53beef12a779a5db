//! Non-neural building blocks of a trajectory-conditioned driving world model.
//!
//! - [`trend`]: clock-direction trend tokens and the trajectory prompt.
//! - [`tsa`]: static spatial anchors, fading trails, motion colors, control frames.
//! - [`dwg`]: anchor visibility and key-frame selection for windowed generation.
//! - [`lma`]: motion-weighted latent consistency loss and its gradient.
//! - [`gae`]: Sim(3) trajectory alignment and the Geometric Alignment Error.
//! - [`synth`]: synthetic scenes with exact ground truth.
//! - [`manifest`] / [`report`]: file formats used by the CLI.

pub mod dwg;
pub mod error;
pub mod gae;
pub mod geometry;
pub mod lma;
pub mod manifest;
pub mod raster;
pub mod report;
pub mod synth;
pub mod trend;
pub mod tsa;

pub use error::{Error, Result};
pub use geometry::{Direction, Intrinsics, Pixel, RigidTransform};
