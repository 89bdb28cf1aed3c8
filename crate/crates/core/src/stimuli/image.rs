use crate::error::{Error, Result};

/// Row-major, channel-interleaved image with unit-range samples.
///
/// Sides are positive multiples of 8 so that every image maps onto a whole
/// number of latent cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

pub(crate) fn check_side(side: usize, what: &str) -> Result<()> {
    if side == 0 || !side.is_multiple_of(8) {
        return Err(Error::invalid(format!(
            "{what} must be a positive multiple of 8, got {side}"
        )));
    }
    Ok(())
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_side(height, "image height")?;
        check_side(width, "image width")?;
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "expected {} samples for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("image sample {bad} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(row, col)` once per pixel; `f` returns
    /// all channel values for that pixel.
    pub fn from_fn<const C: usize>(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [f64; C],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * C);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Self::new(height, width, C, data)
    }

    pub fn uniform(height: usize, width: usize, pixel: &[f64]) -> Result<Self> {
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(height * width * pixel.len())
            .collect();
        Self::new(height, width, pixel.len(), data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Copies one channel out as a dense `height × width` plane.
    pub fn plane(&self, channel: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Single-channel images are replicated to three channels; RGB is cloned.
    pub fn to_rgb(&self) -> ImageTensor {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageTensor {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }

    /// Mean over all pixels and channels.
    pub fn mean_intensity(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}
