//! Image similarity metrics: MSE, PSNR and windowed SSIM, plus min–max
//! normalized SSIM recovery.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stimuli::ImageTensor;

/// Dynamic range of unit-range images.
pub const DYNAMIC_RANGE: f64 = 1.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub ssim: f64,
    /// `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub mse: f64,
}

fn check_dims(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "image dims differ: {}x{}x{} vs {}x{}x{}",
            a.height(),
            a.width(),
            a.channels(),
            b.height(),
            b.width(),
            b.channels()
        )));
    }
    Ok(())
}

pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()
    }
}

pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

/// Renders a PSNR value, using `"inf"` for identical images.
pub fn format_psnr(psnr: f64, decimals: usize) -> String {
    if psnr.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{psnr:.decimals$}")
    }
}

/// Normalized 1D Gaussian for the SSIM window.
pub fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let raw: [f64; SSIM_WINDOW] = std::array::from_fn(|i| {
        let d = i as f64 - r;
        (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
    });
    let total: f64 = raw.iter().sum();
    raw.map(|w| w / total)
}

/// Valid-region separable filtering of a `h × w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        let src = &plane[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = kernel.iter().zip(&src[c..]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = kernel
                .iter()
                .enumerate()
                .map(|(t, k)| k * rows[(r + t) * ow + c])
                .sum();
        }
    }
    out
}

/// SSIM index map of one channel pair over all valid window positions.
fn ssim_map(x: &[f64], y: &[f64], h: usize, w: usize) -> Vec<f64> {
    let kernel = ssim_kernel();
    let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * DYNAMIC_RANGE).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mu_x = filter_valid(x, h, w, &kernel);
    let mu_y = filter_valid(y, h, w, &kernel);
    let e_xx = filter_valid(&xx, h, w, &kernel);
    let e_yy = filter_valid(&yy, h, w, &kernel);
    let e_xy = filter_valid(&xy, h, w, &kernel);
    (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .collect()
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5), no padding, and
/// `C1 = (0.01 L)²`, `C2 = (0.03 L)²`. Channel maps are averaged per window
/// position before the spatial mean.
pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_dims(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let mut maps: Vec<Vec<f64>> = Vec::with_capacity(a.channels());
    for ch in 0..a.channels() {
        let (x, y) = (a.plane(ch), b.plane(ch));
        // Replicated gray channels give identical maps; reuse the previous one.
        let reused = (0..ch).find(|&prev| a.plane(prev) == x && b.plane(prev) == y);
        let map = match reused {
            Some(prev) => maps[prev].clone(),
            None => ssim_map(&x, &y, h, w),
        };
        maps.push(map);
    }
    let positions = maps[0].len();
    let nc = maps.len() as f64;
    let total: f64 = (0..positions)
        .map(|i| maps.iter().map(|m| m[i]).sum::<f64>() / nc)
        .sum();
    Ok(total / positions as f64)
}

/// SSIM, PSNR and MSE in one pass over the inputs.
pub fn compare(a: &ImageTensor, b: &ImageTensor) -> Result<SimilarityReport> {
    let mse = mse(a, b)?;
    Ok(SimilarityReport {
        ssim: ssim(a, b)?,
        psnr: psnr_from_mse(mse),
        mse,
    })
}

/// `100·(s − s_min)/(s_max − s_min)`; values outside the bracket are
/// returned as-is.
pub fn recovery_percent(s: f64, s_min: f64, s_max: f64) -> Result<f64> {
    if s_max.partial_cmp(&s_min) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Degenerate(format!(
            "recovery bracket is empty: max {s_max} <= min {s_min}"
        )));
    }
    Ok(100.0 * ((s - s_min) / (s_max - s_min)))
}
