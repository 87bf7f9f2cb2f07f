//! Super-resolution of wireless channel-characteristic maps.
//!
//! The crate covers the whole pipeline: synthetic urban scenes rendered into
//! 7-channel maps ([`scene`], [`dataset`]), a small hand-differentiated
//! convolution stack ([`diffcore`]), the residual multi-task network
//! ([`model`]), masked and uncertainty-weighted losses ([`loss`]), the
//! two-stage training protocol ([`train`]) and evaluation against a
//! bilinear baseline with an ablation driver ([`eval`]). [`cli`] backs the
//! `chansr` binary.

pub mod cli;
pub mod dataset;
pub mod diffcore;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod scene;
pub mod train;

pub use error::{Error, Result};
