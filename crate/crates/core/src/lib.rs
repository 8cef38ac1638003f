//! Unsupervised depth estimation for thermal/visible stereo pairs.
//!
//! A visible-light stereo network is trained with photometric self-supervision,
//! and thermal features are adversarially transferred into its feature space
//! so the same depth decoder serves thermal-left / visible-right pairs.

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod evaluation;
mod error;
pub mod geometry;
pub mod losses;
pub mod networks;
pub mod training;

pub use error::{Error, Result};
