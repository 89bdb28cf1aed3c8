use std::f64::consts::FRAC_1_SQRT_2;

use super::{Codec, CodecDescriptor, LatentTensor, DOWNSCALE, LATENT_CHANNELS};
use crate::error::{Error, Result};
use crate::stimuli::{check_side, ImageTensor};

const INV_SQRT_3: f64 = 0.577_350_269_189_625_8;
const INV_SQRT_6: f64 = 0.408_248_290_463_863;

/// Achromatic axis `(1,1,1)/√3`.
pub const WHITE: [f64; 3] = [INV_SQRT_3, INV_SQRT_3, INV_SQRT_3];
/// Magenta–green axis `(1,−2,1)/√6`.
pub const MAGENTA_GREEN: [f64; 3] = [INV_SQRT_6, -2.0 * INV_SQRT_6, INV_SQRT_6];
/// Orange–blue axis `(1,0,−1)/√2`, the orthonormal completion of the other two.
pub const ORANGE_BLUE: [f64; 3] = [FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2];

/// Blur width for the `c2` plane, in latent pixels.
pub const BLUR_SIGMA: f64 = 2.0;

pub fn opponent_basis() -> [[f64; 3]; 3] {
    [WHITE, MAGENTA_GREEN, ORANGE_BLUE]
}

fn dot3(a: [f64; 3], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Mirror index into `0..n` without repeating the edge sample, periodic for
/// offsets larger than `n`.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable Gaussian blur of a `height × width` plane with reflect padding
/// and kernel radius `⌈3σ⌉`.
///
/// Each output is accumulated as `x[i] + Σ w_k (x[i+k] − x[i])`, which equals
/// the usual weighted sum for a normalized kernel and leaves constant planes
/// bit-for-bit unchanged.
pub fn gaussian_blur(plane: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let pass = |src: &[f64], along_rows: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for r in 0..height {
            for c in 0..width {
                let center = src[r * width + c];
                let mut acc = 0.0;
                for (t, &w) in kernel.iter().enumerate() {
                    let k = t as isize - radius;
                    let neighbor = if along_rows {
                        src[r * width + reflect(c as isize + k, width)]
                    } else {
                        src[reflect(r as isize + k, height) * width + c]
                    };
                    acc += w * (neighbor - center);
                }
                out[r * width + c] = center + acc;
            }
        }
        out
    };
    let horizontal = pass(plane, true);
    pass(&horizontal, false)
}

/// Analytic opponent-color codec.
///
/// Encoding centers the image at 0.5, projects every pixel onto the
/// [`WHITE`], [`MAGENTA_GREEN`] and [`ORANGE_BLUE`] axes and average-pools
/// each projection over 8×8 blocks, giving `c1`, `c3` and `c4`; `c2` is `c1`
/// blurred with σ = [`BLUR_SIGMA`]. Decoding forms the intensity plane
/// `c1 + (c2 − blur(c1))`, recombines the three axes around 0.5, upsamples
/// by nearest-neighbor replication and clamps to `[0, 1]`.
///
/// So zeroing `c1` leaves only the blurred intensity carried by `c2`, and
/// zeroing `c2` high-passes intensity.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceCodec;

impl ReferenceCodec {
    /// Decoded RGB samples before clamping, `(8h) × (8w) × 3` interleaved.
    pub fn decode_unclamped(&self, z: &LatentTensor) -> Vec<f64> {
        let (h, w) = (z.height(), z.width());
        let c1 = z.channel(0);
        let blurred = gaussian_blur(c1, h, w, BLUR_SIGMA);
        let cells: Vec<[f64; 3]> = (0..h * w)
            .map(|i| {
                let intensity = c1[i] + (z.channel(1)[i] - blurred[i]);
                let (c3, c4) = (z.channel(2)[i], z.channel(3)[i]);
                std::array::from_fn(|ch| {
                    0.5 + intensity * WHITE[ch] + c3 * MAGENTA_GREEN[ch] + c4 * ORANGE_BLUE[ch]
                })
            })
            .collect();
        let (height, width) = (h * DOWNSCALE, w * DOWNSCALE);
        let mut out = Vec::with_capacity(height * width * 3);
        for row in 0..height {
            for col in 0..width {
                out.extend_from_slice(&cells[(row / DOWNSCALE) * w + col / DOWNSCALE]);
            }
        }
        out
    }
}

impl Codec for ReferenceCodec {
    fn descriptor(&self) -> CodecDescriptor {
        CodecDescriptor {
            name: "reference".into(),
            downscale: DOWNSCALE,
            latent_channels: LATENT_CHANNELS,
            deterministic: true,
        }
    }

    fn encode(&self, x: &ImageTensor) -> Result<LatentTensor> {
        check_side(x.height(), "image height")?;
        check_side(x.width(), "image width")?;
        let (h, w) = (x.height() / DOWNSCALE, x.width() / DOWNSCALE);
        let mut sums = [vec![0.0; h * w], vec![0.0; h * w], vec![0.0; h * w]];
        let gray = x.channels() == 1;
        for row in 0..x.height() {
            for col in 0..x.width() {
                let px = x.pixel(row, col);
                let centered = if gray {
                    [px[0] - 0.5; 3]
                } else {
                    [px[0] - 0.5, px[1] - 0.5, px[2] - 0.5]
                };
                let cell = (row / DOWNSCALE) * w + col / DOWNSCALE;
                for (axis, sum) in opponent_basis().iter().zip(sums.iter_mut()) {
                    sum[cell] += dot3(*axis, &centered);
                }
            }
        }
        let area = (DOWNSCALE * DOWNSCALE) as f64;
        let [c1, c3, c4] = sums.map(|s| s.into_iter().map(|v| v / area).collect::<Vec<_>>());
        let c2 = gaussian_blur(&c1, h, w, BLUR_SIGMA);
        LatentTensor::from_planes(h, w, [c1, c2, c3, c4])
    }

    fn decode(&self, z: &LatentTensor) -> Result<ImageTensor> {
        let data = self
            .decode_unclamped(z)
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        ImageTensor::new(z.height() * DOWNSCALE, z.width() * DOWNSCALE, 3, data)
            .map_err(|e| Error::Data(format!("decode produced an invalid image: {e}")))
    }
}
