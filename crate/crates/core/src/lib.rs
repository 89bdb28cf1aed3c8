//! Batch analysis toolkit for probing how a 4-channel image autoencoder
//! latent space encodes color and shape.
//!
//! The pipeline is split into small, pure stages that communicate through an
//! on-disk dataset layout (see [`tensor_store`]):
//!
//! - [`stimuli`] synthesizes controlled image sets (uniform color grid, hue
//!   wheel, gratings, gray shapes).
//! - [`codec`] maps images to `4 × H/8 × W/8` latents and back, either with
//!   the analytic opponent-color reference codec or with latents produced by
//!   an external autoencoder.
//! - [`pca`] reduces spatially averaged latents to a 4×4 eigenbasis.
//! - [`circstats`] relates principal-component scores to intensity and hue.
//! - [`quality`] and [`ablation`] run the channel-mask reconstruction study.
//! - [`report`] renders tables, scatter data and reconstruction mosaics.
//! - [`pipeline`] wires the stages into the commands exposed by the CLI.

pub mod ablation;
pub mod circstats;
pub mod codec;
pub mod error;
pub mod pca;
pub mod pipeline;
pub mod quality;
pub mod report;
pub mod stimuli;
pub mod tensor_store;

pub use codec::LatentTensor;
pub use error::{Error, Result};
pub use stimuli::ImageTensor;
