//! Linear and circular correlation statistics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stimuli::ManifestEntry;

/// One correlation summary as written to `correlations.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub dataset: String,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 samples"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "correlation input contains non-finite values".into(),
        ));
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "zero variance in correlation input".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `atan2(mean sin, mean cos)`.
pub fn circular_mean(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    (s / n).atan2(c / n)
}

/// Jammalamadaka–Sarma circular correlation coefficient.
pub fn circular_corr(alpha: &[f64], beta: &[f64]) -> Result<f64> {
    check_pair(alpha, beta)?;
    let (ma, mb) = (circular_mean(alpha), circular_mean(beta));
    let (mut num, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in alpha.iter().zip(beta) {
        let (sa, sb) = ((a - ma).sin(), (b - mb).sin());
        num += sa * sb;
        saa += sa * sa;
        sbb += sb * sb;
    }
    let tiny = alpha.len() as f64 * 1e-28;
    if saa <= tiny || sbb <= tiny {
        return Err(Error::Degenerate(
            "circular correlation denominator is zero".into(),
        ));
    }
    Ok((num / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Wraps an angle in radians onto `[−π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Hue of a color entry in radians on `[−π, π)`.
pub fn hue_angle(entry: &ManifestEntry) -> Result<f64> {
    if entry.is_achromatic() {
        return Err(Error::Undefined(format!(
            "entry {:?} is achromatic and has no hue",
            entry.id
        )));
    }
    let hue = entry
        .hue
        .ok_or_else(|| Error::Undefined(format!("entry {:?} carries no hue", entry.id)))?;
    Ok(wrap_angle(hue.to_radians()))
}

/// Polar angle of the point `(s2, s3)`.
pub fn plane_angle(s2: f64, s3: f64) -> Result<f64> {
    if s2 == 0.0 && s3 == 0.0 {
        return Err(Error::Undefined("angle of the origin".into()));
    }
    Ok(s3.atan2(s2))
}
