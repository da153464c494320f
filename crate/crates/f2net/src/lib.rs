//! F2Net: center-guided appearance diffusion for unsupervised video object
//! segmentation, built on a minimal reverse-mode tensor engine and evaluated
//! end-to-end on synthetic sequences.

pub mod center;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod fusion;
pub mod imageio;
pub mod metrics;
pub mod model;
pub mod matching;
pub mod params;
pub mod tensor;

pub use error::{F2NetError, Result};
