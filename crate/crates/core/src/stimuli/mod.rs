//! Deterministic synthesis of the controlled stimulus sets: a uniform HSV
//! color grid, a hue wheel, sinusoidal/square gratings and gray shapes.
//!
//! Every generator is a pure function of its arguments; identical arguments
//! give bit-identical tensors.

mod image;
mod manifest;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub(crate) use self::image::check_side;
pub use self::image::ImageTensor;
pub use self::manifest::{Band, ManifestEntry, StimulusKind, StimulusManifest};

use crate::error::{Error, Result};

/// Gratings at or below this many cycles per image are tagged low-frequency.
pub const LOW_BAND_MAX_FREQUENCY: f64 = 4.0;
/// Shapes at or above this fraction of the image side are tagged low-frequency.
pub const LOW_BAND_MIN_SCALE: f64 = 0.5;

/// Foreground and background levels for the gray shapes.
pub const SHAPE_LIGHT: f64 = 0.9;
pub const SHAPE_DARK: f64 = 0.1;

/// Surround level outside the hue-wheel disc.
pub const WHEEL_SURROUND: f64 = 0.5;

/// Hexcone HSV to RGB. `hue` in degrees on `[0, 360)`, `saturation` and
/// `value` on `[0, 1]`.
pub fn hsv_to_rgb(hue: f64, saturation: f64, value: f64) -> Result<[f64; 3]> {
    if !(0.0..360.0).contains(&hue) {
        return Err(Error::invalid(format!("hue {hue} outside [0, 360)")));
    }
    if !(0.0..=1.0).contains(&saturation) || !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(format!(
            "saturation {saturation} / value {value} outside [0, 1]"
        )));
    }
    let chroma = value * saturation;
    let sector = hue / 60.0;
    let secondary = chroma * (1.0 - (sector % 2.0 - 1.0).abs());
    let (r, g, b) = match sector as u32 {
        0 => (chroma, secondary, 0.0),
        1 => (secondary, chroma, 0.0),
        2 => (0.0, chroma, secondary),
        3 => (0.0, secondary, chroma),
        4 => (secondary, 0.0, chroma),
        _ => (chroma, 0.0, secondary),
    };
    let m = value - chroma;
    Ok([r + m, g + m, b + m])
}

/// `count` evenly spaced levels on `(0, 1]`, the last one exactly 1.
fn unit_levels(count: usize) -> impl Iterator<Item = f64> {
    (1..=count).map(move |k| k as f64 / count as f64)
}

/// A stimulus set whose images are rendered on demand, one per manifest
/// entry, so large sets never have to be held in memory at once.
pub struct StimulusSet {
    manifest: StimulusManifest,
    render: Box<dyn Fn(usize) -> Result<ImageTensor> + Send + Sync>,
}

impl StimulusSet {
    fn new(
        manifest: StimulusManifest,
        render: impl Fn(usize) -> Result<ImageTensor> + Send + Sync + 'static,
    ) -> Self {
        Self {
            manifest,
            render: Box::new(render),
        }
    }

    pub fn manifest(&self) -> &StimulusManifest {
        &self.manifest
    }

    pub fn into_manifest(self) -> StimulusManifest {
        self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.is_empty()
    }

    /// Image of entry `index`.
    pub fn render(&self, index: usize) -> Result<ImageTensor> {
        if index >= self.len() {
            return Err(Error::invalid(format!(
                "stimulus index {index} out of range"
            )));
        }
        (self.render)(index)
    }

    pub fn render_all(self) -> Result<(Vec<ImageTensor>, StimulusManifest)> {
        let images = (0..self.len())
            .map(|i| self.render(i))
            .collect::<Result<_>>()?;
        Ok((images, self.manifest))
    }
}

impl fmt::Debug for StimulusSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StimulusSet")
            .field("manifest", &self.manifest)
            .finish_non_exhaustive()
    }
}

/// One spatially uniform RGB image per (hue, saturation, value) triple.
///
/// Hues are `k·360/n_hues`; saturations and values are `k/n` for `k = 1..=n`.
/// Iteration order is hue-major, then saturation, then value.
pub fn color_grid(n_hues: usize, n_sats: usize, n_vals: usize, side: usize) -> Result<StimulusSet> {
    if n_hues == 0 || n_sats == 0 || n_vals == 0 {
        return Err(Error::invalid("color grid counts must all be at least 1"));
    }
    check_side(side, "side")?;
    let mut colors = Vec::with_capacity(n_hues * n_sats * n_vals);
    let mut entries = Vec::with_capacity(colors.capacity());
    for hi in 0..n_hues {
        let hue = hi as f64 * 360.0 / n_hues as f64;
        for (si, sat) in unit_levels(n_sats).enumerate() {
            for (vi, val) in unit_levels(n_vals).enumerate() {
                colors.push(hsv_to_rgb(hue, sat, val)?);
                let mut entry =
                    ManifestEntry::new(format!("color_h{hi:02}_s{si}_v{vi}"), StimulusKind::Color);
                entry.hue = Some(hue);
                entry.saturation = Some(sat);
                entry.value = Some(val);
                entries.push(entry);
            }
        }
    }
    Ok(StimulusSet::new(StimulusManifest::new(entries), move |i| {
        ImageTensor::uniform(side, side, &colors[i])
    }))
}

pub fn synth_color_grid(
    n_hues: usize,
    n_sats: usize,
    n_vals: usize,
    side: usize,
) -> Result<(Vec<ImageTensor>, StimulusManifest)> {
    color_grid(n_hues, n_sats, n_vals, side)?.render_all()
}

/// Hue wheel: hue is the polar angle about the center (0° to the right,
/// 90° straight up), saturation ramps linearly from 0 at the center to 1 at
/// radius `side/2`, and pixels beyond that radius are mid-gray.
pub fn synth_color_wheel(side: usize, value: f64) -> Result<ImageTensor> {
    check_wheel(side, value)?;
    let radius = side as f64 / 2.0;
    let mut err = None;
    let image = ImageTensor::from_fn(side, side, |row, col| {
        let dx = col as f64 + 0.5 - radius;
        let dy = radius - (row as f64 + 0.5);
        let r = dx.hypot(dy);
        if r > radius {
            return [WHEEL_SURROUND; 3];
        }
        let mut hue = dy.atan2(dx).to_degrees();
        if hue < 0.0 {
            hue += 360.0;
        }
        if hue >= 360.0 {
            hue = 0.0;
        }
        let saturation = (r / radius).min(1.0);
        hsv_to_rgb(hue, saturation, value).unwrap_or_else(|e| {
            err.get_or_insert(e);
            [0.0; 3]
        })
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(image),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Waveform {
    Sine,
    Square,
}

impl fmt::Display for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Waveform::Sine => "sine",
            Waveform::Square => "square",
        })
    }
}

impl FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(Waveform::Sine),
            "square" => Ok(Waveform::Square),
            other => Err(Error::invalid(format!("unknown waveform {other:?}"))),
        }
    }
}

fn frequency_band(frequency: f64) -> Band {
    if frequency <= LOW_BAND_MAX_FREQUENCY {
        Band::Low
    } else {
        Band::High
    }
}

/// Single-channel gratings `0.5 + 0.5·w(2π f u / side)`.
///
/// `u` is the pixel-center position along the grating axis, measured from
/// the point where that axis, drawn through the image center, leaves the
/// image on the left. For 0° this is simply `col + 0.5`; for other
/// orientations it keeps integer-frequency gratings point-symmetric about
/// the center. Iteration order: waveform, frequency, orientation.
pub fn gratings(
    frequencies: &[f64],
    orientations: &[f64],
    waveforms: &[Waveform],
    side: usize,
) -> Result<StimulusSet> {
    check_side(side, "side")?;
    if frequencies.is_empty() || orientations.is_empty() || waveforms.is_empty() {
        return Err(Error::invalid(
            "grating frequency, orientation and waveform lists must be non-empty",
        ));
    }
    if let Some(f) = frequencies.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(Error::invalid(format!(
            "grating frequency {f} must be positive"
        )));
    }
    let mut params = Vec::new();
    let mut entries = Vec::new();
    for &waveform in waveforms {
        for &frequency in frequencies {
            for &orientation in orientations {
                params.push((waveform, frequency, orientation));
                let mut entry = ManifestEntry::new(
                    format!("grating_{waveform}_f{frequency}_o{orientation}"),
                    StimulusKind::Grating,
                )
                .with_extra("waveform", waveform.to_string());
                entry.frequency = Some(frequency);
                entry.orientation = Some(orientation);
                entry.band = Some(frequency_band(frequency));
                entries.push(entry);
            }
        }
    }
    let half = side as f64 / 2.0;
    Ok(StimulusSet::new(StimulusManifest::new(entries), move |i| {
        let (waveform, frequency, orientation) = params[i];
        let (sin_t, cos_t) = orientation.to_radians().sin_cos();
        ImageTensor::from_fn(side, side, |row, col| {
            let dx = col as f64 + 0.5 - half;
            let dy = row as f64 + 0.5 - half;
            let u = dx * cos_t + dy * sin_t + half;
            let s = (2.0 * PI * frequency * u / side as f64).sin();
            let v = match waveform {
                Waveform::Sine => 0.5 + 0.5 * s,
                Waveform::Square if s >= 0.0 => 1.0,
                Waveform::Square => 0.0,
            };
            [v]
        })
    }))
}

pub fn synth_gratings(
    frequencies: &[f64],
    orientations: &[f64],
    waveforms: &[Waveform],
    side: usize,
) -> Result<(Vec<ImageTensor>, StimulusManifest)> {
    gratings(frequencies, orientations, waveforms, side)?.render_all()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Disc,
    Square,
    Triangle,
    Annulus,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Disc,
        ShapeKind::Square,
        ShapeKind::Triangle,
        ShapeKind::Annulus,
    ];

    /// Containment test for a pixel center at offset `(dx, dy)` from the
    /// image center (y pointing down), for a shape of half-extent `half`.
    fn contains(self, dx: f64, dy: f64, half: f64) -> bool {
        match self {
            ShapeKind::Disc => dx * dx + dy * dy <= half * half,
            ShapeKind::Square => dx.abs() <= half && dy.abs() <= half,
            // Upward-pointing isosceles triangle inscribed in the bounding square.
            ShapeKind::Triangle => dy.abs() <= half && dx.abs() <= (dy + half) / 2.0,
            ShapeKind::Annulus => {
                let r2 = dx * dx + dy * dy;
                r2 <= half * half && r2 >= half * half / 4.0
            }
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeKind::Disc => "disc",
            ShapeKind::Square => "square",
            ShapeKind::Triangle => "triangle",
            ShapeKind::Annulus => "annulus",
        })
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disc" => Ok(ShapeKind::Disc),
            "square" => Ok(ShapeKind::Square),
            "triangle" => Ok(ShapeKind::Triangle),
            "annulus" => Ok(ShapeKind::Annulus),
            other => Err(Error::invalid(format!("unknown shape {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    DarkOnLight,
    LightOnDark,
}

impl Polarity {
    pub const ALL: [Polarity; 2] = [Polarity::DarkOnLight, Polarity::LightOnDark];

    fn levels(self) -> (f64, f64) {
        match self {
            Polarity::DarkOnLight => (SHAPE_DARK, SHAPE_LIGHT),
            Polarity::LightOnDark => (SHAPE_LIGHT, SHAPE_DARK),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::DarkOnLight => "dark-on-light",
            Polarity::LightOnDark => "light-on-dark",
        })
    }
}

/// The ten default shape scales `0.05, 0.15, …, 0.95`: five on each side of
/// the band threshold.
pub fn default_shape_scales() -> Vec<f64> {
    (0..10).map(|k| (2 * k + 1) as f64 / 20.0).collect()
}

fn scale_band(scale: f64) -> Band {
    if scale >= LOW_BAND_MIN_SCALE {
        Band::Low
    } else {
        Band::High
    }
}

/// Centered filled gray shapes of diameter `scale·side`. Iteration order:
/// kind, scale, polarity.
pub fn shapes(
    kinds: &[ShapeKind],
    scales: &[f64],
    polarities: &[Polarity],
    side: usize,
) -> Result<StimulusSet> {
    check_side(side, "side")?;
    if kinds.is_empty() || scales.is_empty() || polarities.is_empty() {
        return Err(Error::invalid(
            "shape kinds, scales and polarities must be non-empty",
        ));
    }
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
        return Err(Error::invalid(format!("shape scale {s} outside (0, 1]")));
    }
    let mut params = Vec::new();
    let mut entries = Vec::new();
    for &kind in kinds {
        for (si, &scale) in scales.iter().enumerate() {
            for &polarity in polarities {
                params.push((kind, scale * side as f64 / 2.0, polarity));
                let mut entry = ManifestEntry::new(
                    format!("shape_{kind}_s{si:02}_{polarity}"),
                    StimulusKind::Shape,
                )
                .with_extra("shape", kind.to_string())
                .with_extra("scale", scale)
                .with_extra("polarity", polarity.to_string());
                entry.band = Some(scale_band(scale));
                entries.push(entry);
            }
        }
    }
    let center = side as f64 / 2.0;
    Ok(StimulusSet::new(StimulusManifest::new(entries), move |i| {
        let (kind, half, polarity) = params[i];
        let (fg, bg) = polarity.levels();
        ImageTensor::from_fn(side, side, |row, col| {
            let dx = col as f64 + 0.5 - center;
            let dy = row as f64 + 0.5 - center;
            [if kind.contains(dx, dy, half) { fg } else { bg }]
        })
    }))
}

pub fn synth_shapes(
    kinds: &[ShapeKind],
    scales: &[f64],
    polarities: &[Polarity],
    side: usize,
) -> Result<(Vec<ImageTensor>, StimulusManifest)> {
    shapes(kinds, scales, polarities, side)?.render_all()
}

/// The default 80-image gray shape set: 4 kinds × 10 scales × 2 polarities.
pub fn default_shapes(side: usize) -> Result<(Vec<ImageTensor>, StimulusManifest)> {
    synth_shapes(
        &ShapeKind::ALL,
        &default_shape_scales(),
        &Polarity::ALL,
        side,
    )
}

fn check_wheel(side: usize, value: f64) -> Result<()> {
    check_side(side, "side")?;
    if !(value > 0.0 && value <= 1.0) {
        return Err(Error::invalid(format!(
            "wheel value {value} outside (0, 1]"
        )));
    }
    Ok(())
}

/// The hue wheel as a one-entry set.
pub fn color_wheel(side: usize, value: f64) -> Result<StimulusSet> {
    check_wheel(side, value)?;
    Ok(StimulusSet::new(
        StimulusManifest::new(vec![wheel_entry(value)]),
        move |_| synth_color_wheel(side, value),
    ))
}

/// Manifest entry for the hue wheel.
pub fn wheel_entry(value: f64) -> ManifestEntry {
    let mut entry = ManifestEntry::new("wheel", StimulusKind::Wheel);
    entry.value = Some(value);
    entry
}
