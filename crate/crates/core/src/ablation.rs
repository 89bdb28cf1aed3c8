//! Channel-mask ablation: zero a subset of latent channels, decode, and
//! measure how much of the original image survives.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::codec::external::{check_latent_geometry, ExternalDecoder};
use crate::codec::{Codec, LatentTensor, LATENT_CHANNELS};
use crate::error::{Error, Result};
use crate::quality::{compare, recovery_percent, SimilarityReport};
use crate::stimuli::{Band, ImageTensor, ManifestEntry};
use crate::tensor_store::{read_latent, Dataset};

/// Which latent channels survive; `keep[0]` is `c1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct ChannelMask {
    pub keep: [bool; 4],
}

impl ChannelMask {
    pub const FULL: ChannelMask = ChannelMask { keep: [true; 4] };
    pub const EMPTY: ChannelMask = ChannelMask { keep: [false; 4] };

    pub fn new(keep: [bool; 4]) -> Self {
        Self { keep }
    }

    /// Mask keeping exactly channel `k` (0-based).
    pub fn single(k: usize) -> Self {
        Self {
            keep: std::array::from_fn(|i| i == k),
        }
    }

    pub fn count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// Compact form such as `"1010"`, used for file names.
    pub fn bits(&self) -> String {
        self.keep
            .iter()
            .map(|&k| if k { '1' } else { '0' })
            .collect()
    }
}

impl From<[u8; 4]> for ChannelMask {
    fn from(bits: [u8; 4]) -> Self {
        Self {
            keep: bits.map(|b| b != 0),
        }
    }
}

/// Renders as e.g. `[0,0,c3,0]`.
impl fmt::Display for ChannelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .keep
            .iter()
            .enumerate()
            .map(|(i, &k)| if k { format!("c{}", i + 1) } else { "0".into() })
            .collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl FromStr for ChannelMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Data(format!("malformed channel mask {s:?}"));
        let inner = s
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != LATENT_CHANNELS {
            return Err(bad());
        }
        let mut keep = [false; 4];
        for (i, part) in parts.iter().enumerate() {
            keep[i] = match *part {
                "0" => false,
                p if p == format!("c{}", i + 1) => true,
                _ => return Err(bad()),
            };
        }
        Ok(Self { keep })
    }
}

/// Zeroes every channel not kept by `mask`.
pub fn apply_mask(z: &LatentTensor, mask: ChannelMask) -> LatentTensor {
    let mut out = z.clone();
    for (k, &keep) in mask.keep.iter().enumerate() {
        if !keep {
            out.channel_mut(k).iter_mut().for_each(|v| *v = 0.0);
        }
    }
    out
}

/// All 16 masks, by number of kept channels and then lexicographically on
/// `(k1, k2, k3, k4)`.
pub fn enumerate_masks() -> Vec<ChannelMask> {
    let mut masks: Vec<ChannelMask> = (0u8..16)
        .map(|b| ChannelMask::from([(b >> 3) & 1, (b >> 2) & 1, (b >> 1) & 1, b & 1]))
        .collect();
    masks.sort_by_key(|m| (m.count(), m.keep));
    masks
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BandFilter {
    All,
    Low,
    High,
}

impl BandFilter {
    fn band(self) -> Option<Band> {
        match self {
            BandFilter::All => None,
            BandFilter::Low => Some(Band::Low),
            BandFilter::High => Some(Band::High),
        }
    }
}

impl fmt::Display for BandFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandFilter::All => "all",
            BandFilter::Low => "low",
            BandFilter::High => "high",
        })
    }
}

impl FromStr for BandFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(BandFilter::All),
            "low" => Ok(BandFilter::Low),
            "high" => Ok(BandFilter::High),
            other => Err(Error::invalid(format!("unknown band filter {other:?}"))),
        }
    }
}

/// Splits a dataset into its low- and high-frequency views.
pub fn split_by_frequency(ds: &Dataset) -> Result<(Dataset, Dataset)> {
    let mut low = Vec::new();
    let mut high = Vec::new();
    for entry in ds.entries() {
        match entry.band {
            Some(Band::Low) => low.push(entry.clone()),
            Some(Band::High) => high.push(entry.clone()),
            None => {
                return Err(Error::Validation(format!(
                    "entry {:?} has no frequency band tag",
                    entry.id
                )))
            }
        }
    }
    Ok((ds.subset(low), ds.subset(high)))
}

/// One table row: mean metrics of a mask over every image in a band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub mask: ChannelMask,
    pub mean_ssim: f64,
    pub recovery_pct: f64,
    pub mean_psnr: f64,
    pub mean_mse: f64,
    pub n_images: usize,
    pub band: BandFilter,
}

/// Where latents come from and how masked latents are turned back into
/// images.
pub trait AblationBackend: Sync {
    fn latent(
        &self,
        ds: &Dataset,
        entry: &ManifestEntry,
        image: &ImageTensor,
    ) -> Result<LatentTensor>;

    fn reconstruct(
        &self,
        ds: &Dataset,
        entry: &ManifestEntry,
        mask: ChannelMask,
        masked: &LatentTensor,
    ) -> Result<ImageTensor>;
}

impl<C: Codec> AblationBackend for C {
    fn latent(
        &self,
        _ds: &Dataset,
        _entry: &ManifestEntry,
        image: &ImageTensor,
    ) -> Result<LatentTensor> {
        self.encode(&image.to_rgb())
    }

    fn reconstruct(
        &self,
        _ds: &Dataset,
        _entry: &ManifestEntry,
        _mask: ChannelMask,
        masked: &LatentTensor,
    ) -> Result<ImageTensor> {
        self.decode(masked)
    }
}

/// Directory (under the dataset root) holding decode requests for one mask.
pub fn masked_request_dir(ds: &Dataset, mask: ChannelMask) -> std::path::PathBuf {
    ds.root().join("masked").join(mask.bits())
}

/// Latents from `<id>.lat.lpt`; reconstructions from the bridge through
/// `masked/<bits>/` request directories.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExternalBackend;

impl AblationBackend for ExternalBackend {
    fn latent(
        &self,
        ds: &Dataset,
        entry: &ManifestEntry,
        image: &ImageTensor,
    ) -> Result<LatentTensor> {
        let path = ds.latent_path(entry);
        if !path.is_file() {
            return Err(Error::MissingArtifact {
                ids: vec![entry.id.clone()],
            });
        }
        let z = read_latent(path)?;
        check_latent_geometry(&entry.id, image, &z)?;
        Ok(z)
    }

    fn reconstruct(
        &self,
        ds: &Dataset,
        entry: &ManifestEntry,
        mask: ChannelMask,
        masked: &LatentTensor,
    ) -> Result<ImageTensor> {
        ExternalDecoder::new(masked_request_dir(ds, mask))
            .decode(&entry.id, masked)
            .map_err(|e| match e {
                Error::MissingArtifact { .. } => Error::MissingArtifact {
                    ids: vec![format!("{}/{}", mask.bits(), entry.id)],
                },
                other => other,
            })
    }
}

/// Metrics of every mask (canonical order) for one image. Masks whose
/// masked latent equals an earlier one reuse its result.
pub fn evaluate_image(
    ds: &Dataset,
    entry: &ManifestEntry,
    backend: &dyn AblationBackend,
    masks: &[ChannelMask],
) -> Result<Vec<SimilarityReport>> {
    let image = ds.load_image(entry)?;
    let reference = image.to_rgb();
    let z = backend.latent(ds, entry, &image)?;
    let mut seen: Vec<(LatentTensor, SimilarityReport)> = Vec::new();
    let mut out = Vec::with_capacity(masks.len());
    let mut missing = Vec::new();
    for &mask in masks {
        let masked = apply_mask(&z, mask);
        if let Some((_, report)) = seen.iter().find(|(prev, _)| *prev == masked) {
            out.push(*report);
            continue;
        }
        match backend.reconstruct(ds, entry, mask, &masked) {
            Ok(recon) => {
                let report = compare(&reference, &recon.to_rgb())?;
                seen.push((masked, report));
                out.push(report);
            }
            Err(Error::MissingArtifact { ids }) => missing.extend(ids),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingArtifact { ids: missing });
    }
    Ok(out)
}

/// Runs every mask over the images of `band`, averages the metrics per
/// mask, normalizes SSIM against this run's empty and full masks, and
/// returns the rows sorted by ascending mean SSIM.
pub fn run_ablation(
    ds: &Dataset,
    backend: &dyn AblationBackend,
    band: BandFilter,
) -> Result<Vec<AblationRow>> {
    let view = match band.band() {
        None => ds.clone(),
        Some(wanted) => {
            let (low, high) = split_by_frequency(ds)?;
            if wanted == Band::Low {
                low
            } else {
                high
            }
        }
    };
    if view.entries().is_empty() {
        return Err(Error::invalid(format!("no images in band {band}")));
    }
    let masks = enumerate_masks();
    let per_image: Vec<Result<Vec<SimilarityReport>>> = view
        .entries()
        .par_iter()
        .map(|entry| evaluate_image(&view, entry, backend, &masks))
        .collect();

    let mut missing = Vec::new();
    let mut reports = Vec::with_capacity(per_image.len());
    for result in per_image {
        match result {
            Ok(r) => reports.push(r),
            Err(Error::MissingArtifact { ids }) => missing.extend(ids),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingArtifact { ids: missing });
    }

    let n = reports.len() as f64;
    let mean = |m: usize, f: fn(&SimilarityReport) -> f64| {
        reports.iter().map(|r| f(&r[m])).sum::<f64>() / n
    };
    let stats: Vec<(f64, f64, f64)> = (0..masks.len())
        .map(|m| (mean(m, |r| r.ssim), mean(m, |r| r.psnr), mean(m, |r| r.mse)))
        .collect();
    let empty = masks
        .iter()
        .position(|m| *m == ChannelMask::EMPTY)
        .expect("empty mask enumerated");
    let full = masks
        .iter()
        .position(|m| *m == ChannelMask::FULL)
        .expect("full mask enumerated");
    let (s_min, s_max) = (stats[empty].0, stats[full].0);
    let mut rows = masks
        .iter()
        .zip(&stats)
        .map(|(&mask, &(ssim, psnr, mse))| {
            Ok(AblationRow {
                mask,
                mean_ssim: ssim,
                recovery_pct: recovery_percent(ssim, s_min, s_max)?,
                mean_psnr: psnr,
                mean_mse: mse,
                n_images: reports.len(),
                band,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.mean_ssim.total_cmp(&b.mean_ssim));
    Ok(rows)
}
