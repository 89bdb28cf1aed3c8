//! Image ↔ latent codecs.
//!
//! A latent is four `h × w` planes `c1..c4` with `h = H/8`, `w = W/8`. The
//! [`ReferenceCodec`] is an analytic opponent-color codec used as a
//! deterministic oracle; [`external`] loads latents and reconstructions
//! produced out of process by a real autoencoder.

pub mod external;
mod reference;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

pub use self::reference::{
    gaussian_blur, opponent_basis, ReferenceCodec, BLUR_SIGMA, MAGENTA_GREEN, ORANGE_BLUE, WHITE,
};

use crate::error::{Error, Result};
use crate::stimuli::ImageTensor;

pub const LATENT_CHANNELS: usize = 4;
pub const DOWNSCALE: usize = 8;

/// Four `height × width` planes stored channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTensor {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LatentTensor {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("latent planes must be non-empty"));
        }
        if data.len() != LATENT_CHANNELS * height * width {
            return Err(Error::invalid(format!(
                "latent 4x{height}x{width} needs {} values, got {}",
                LATENT_CHANNELS * height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; LATENT_CHANNELS * height * width],
        }
    }

    pub fn from_planes(height: usize, width: usize, planes: [Vec<f64>; 4]) -> Result<Self> {
        Self::new(height, width, planes.concat())
    }

    /// A latent whose every spatial location holds `v`.
    pub fn constant(height: usize, width: usize, v: [f64; 4]) -> Self {
        let n = height * width;
        let data = v.iter().flat_map(|&c| std::iter::repeat_n(c, n)).collect();
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Plane `k` (0-based: `channel(0)` is `c1`).
    pub fn channel(&self, k: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[k * n..(k + 1) * n]
    }

    /// The 4-vector at spatial index `idx = row·width + col`.
    pub fn vector_at(&self, idx: usize) -> [f64; 4] {
        let n = self.plane_len();
        std::array::from_fn(|k| self.data[k * n + idx])
    }

    pub fn set_vector_at(&mut self, idx: usize, v: [f64; 4]) {
        let n = self.plane_len();
        for (k, c) in v.into_iter().enumerate() {
            self.data[k * n + idx] = c;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CodecDescriptor {
    pub name: String,
    pub downscale: usize,
    pub latent_channels: usize,
    pub deterministic: bool,
}

/// In-process encoder/decoder pair.
pub trait Codec: Sync {
    fn descriptor(&self) -> CodecDescriptor;
    fn encode(&self, x: &ImageTensor) -> Result<LatentTensor>;
    fn decode(&self, z: &LatentTensor) -> Result<ImageTensor>;
}

/// Codec selection as exposed on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodecKind {
    Reference,
    External,
}

impl fmt::Display for CodecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodecKind::Reference => "reference",
            CodecKind::External => "external",
        })
    }
}

impl FromStr for CodecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(CodecKind::Reference),
            "external" => Ok(CodecKind::External),
            other => Err(Error::invalid(format!("unknown codec {other:?}"))),
        }
    }
}
