//! Deterministic emitters: ablation tables, PC scatter data, reconstruction
//! mosaics, and comparison of a computed eigenbasis with published values.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::ablation::{apply_mask, AblationRow, ChannelMask};
use crate::codec::LatentTensor;
use crate::error::{Error, Result};
use crate::pca::{pc_filter_latent, PcaResult};
use crate::quality::format_psnr;
use crate::stimuli::{hsv_to_rgb, ImageTensor, StimulusManifest};

/// Explained-variance fractions and eigenvector rows published for the
/// Stable Diffusion VAE latent of a uniform color grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceEigenData {
    pub eigenvalues: [f64; 4],
    pub eigenvectors: [[f64; 4]; 4],
}

pub const PUBLISHED_EIGENVALUES: [f64; 4] = [0.5463, 0.3172, 0.1348, 0.0018];

#[rustfmt::skip]
pub const PUBLISHED_EIGENVECTORS: [[f64; 4]; 4] = [
    [ 0.572,   0.8058, -0.146,  -0.0466],
    [ 0.1516, -0.2781, -0.7591, -0.5687],
    [-0.024,  -0.0436, -0.5917,  0.8046],
    [-0.8058,  0.521,  -0.2289, -0.1641],
];

impl Default for ReferenceEigenData {
    fn default() -> Self {
        Self {
            eigenvalues: PUBLISHED_EIGENVALUES,
            eigenvectors: PUBLISHED_EIGENVECTORS,
        }
    }
}

impl ReferenceEigenData {
    /// The published values as a [`PcaResult`] with a zero mean.
    pub fn as_pca_result(&self) -> PcaResult {
        PcaResult {
            mean: crate::pca::LatentVec4([0.0; 4]),
            eigenvalues: self.eigenvalues,
            eigenvectors: self.eigenvectors,
            explained: self.eigenvalues,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenComparison {
    /// `|cos|` between computed and published axis `k`.
    pub abs_cosine: [f64; 4],
    /// `|explained_k − published_k|`.
    pub eigenvalue_delta: [f64; 4],
}

fn cosine(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn compare_eigenbasis(computed: &PcaResult, reference: &ReferenceEigenData) -> EigenComparison {
    EigenComparison {
        abs_cosine: std::array::from_fn(|k| {
            cosine(&computed.eigenvectors[k], &reference.eigenvectors[k])
                .abs()
                .min(1.0)
        }),
        eigenvalue_delta: std::array::from_fn(|k| {
            (computed.explained[k] - reference.eigenvalues[k]).abs()
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

pub const TABLE_ROWS: usize = 16;
pub const CSV_HEADER: [&str; 6] = ["id", "mask", "ssim", "recovery_pct", "psnr", "mse"];

/// Renders a 16-row ablation table. CSV rows carry the band label as `id`.
pub fn emit_ablation_table(rows: &[AblationRow], format: TableFormat) -> Result<String> {
    if rows.len() != TABLE_ROWS {
        return Err(Error::invalid(format!(
            "ablation table needs {TABLE_ROWS} rows, got {}",
            rows.len()
        )));
    }
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for r in rows {
                w.write_record([
                    r.band.to_string(),
                    r.mask.to_string(),
                    format!("{:.4}", r.mean_ssim),
                    format!("{:.2}", r.recovery_pct),
                    format_psnr(r.mean_psnr, 2),
                    format!("{:.4}", r.mean_mse),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "Band: {}, images: {}\n",
                rows[0].band, rows[0].n_images
            );
            out.push_str("| Channels | SSIM (recovery %) | PSNR | MSE |\n");
            out.push_str("|---|---|---|---|\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "| {} | {:.4} ({:.2}%) | {} | {:.4} |",
                    r.mask,
                    r.mean_ssim,
                    r.recovery_pct,
                    format_psnr(r.mean_psnr, 2),
                    r.mean_mse
                );
            }
            Ok(out)
        }
    }
}

/// A row read back from an emitted CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedRow {
    pub id: String,
    pub mask: ChannelMask,
    pub ssim: f64,
    pub recovery_pct: f64,
    pub psnr: f64,
    pub mse: f64,
}

fn parse_number(field: &str) -> Result<f64> {
    if field == "inf" {
        return Ok(f64::INFINITY);
    }
    f64::from_str(field).map_err(|_| Error::Data(format!("not a number: {field:?}")))
}

pub fn parse_ablation_csv(text: &str) -> Result<Vec<ParsedRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Data(format!("unexpected CSV header {header:?}")));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(ParsedRow {
                id: rec[0].to_owned(),
                mask: rec[1].parse()?,
                ssim: parse_number(&rec[2])?,
                recovery_pct: parse_number(&rec[3])?,
                psnr: parse_number(&rec[4])?,
                mse: parse_number(&rec[5])?,
            })
        })
        .collect()
}

/// Scatter data for the first three PC scores: `id,pc1,pc2,pc3,r,g,b`, with
/// the stimulus RGB recomputed from its manifest HSV.
pub fn emit_scatter(scores: &[(String, [f64; 3])], manifest: &StimulusManifest) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "pc1", "pc2", "pc3", "r", "g", "b"])?;
    for (id, s) in scores {
        let entry = manifest
            .get(id)
            .ok_or_else(|| Error::Validation(format!("score id {id:?} not in manifest")))?;
        let (Some(h), Some(sat), Some(v)) = (entry.hue, entry.saturation, entry.value) else {
            return Err(Error::Validation(format!(
                "entry {id:?} carries no HSV color"
            )));
        };
        let rgb = hsv_to_rgb(h, sat, v).map_err(|e| Error::Validation(e.to_string()))?;
        let mut record = vec![id.clone()];
        record.extend(s.iter().chain(&rgb).map(|x| x.to_string()));
        w.write_record(&record)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Labeled reconstruction cells plus their 6×2 mosaic.
#[derive(Clone, Debug)]
pub struct ReconGrid {
    pub cells: Vec<(String, ImageTensor)>,
    pub mosaic: ImageTensor,
}

pub const GRID_COLUMNS: usize = 6;
pub const GRID_LABELS: [&str; 11] = [
    "input", "full", "pc1", "pc2", "pc3", "pc4", "zero", "c1", "c2", "c3", "c4",
];

/// Builds the 11-cell grid: the input, the full decode, decodes of the latent
/// projected on each principal axis, decodes keeping one channel, and the
/// decode of the zero latent. `decode` receives the cell label with each
/// latent; missing-artifact errors from it are collected across all cells.
pub fn emit_recon_grid(
    x: &ImageTensor,
    z: &LatentTensor,
    pca: &PcaResult,
    decode: impl Fn(&str, &LatentTensor) -> Result<ImageTensor>,
) -> Result<ReconGrid> {
    let mut latents: Vec<(String, LatentTensor)> = vec![("full".into(), z.clone())];
    for k in 1..=4 {
        latents.push((format!("pc{k}"), pc_filter_latent(z, pca, k)?));
    }
    latents.push(("zero".into(), LatentTensor::zeros(z.height(), z.width())));
    for k in 0..4 {
        latents.push((format!("c{}", k + 1), apply_mask(z, ChannelMask::single(k))));
    }
    let mut cells = vec![("input".to_owned(), x.to_rgb())];
    let mut missing = Vec::new();
    for (label, latent) in &latents {
        match decode(label, latent) {
            Ok(img) => cells.push((label.clone(), img.to_rgb())),
            Err(Error::MissingArtifact { ids }) => missing.extend(ids),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingArtifact { ids: missing });
    }
    cells.sort_by_key(|(label, _)| GRID_LABELS.iter().position(|l| l == label));
    let mosaic = mosaic(&cells, GRID_COLUMNS)?;
    Ok(ReconGrid { cells, mosaic })
}

/// Tiles equally sized RGB cells row by row; unused slots are white.
pub fn mosaic(cells: &[(String, ImageTensor)], columns: usize) -> Result<ImageTensor> {
    let first = &cells
        .first()
        .ok_or_else(|| Error::invalid("mosaic needs at least one cell"))?
        .1;
    let (h, w) = (first.height(), first.width());
    if cells
        .iter()
        .any(|(_, c)| c.height() != h || c.width() != w || c.channels() != 3)
    {
        return Err(Error::invalid("mosaic cells must share one RGB size"));
    }
    let rows = cells.len().div_ceil(columns);
    ImageTensor::from_fn(rows * h, columns * w, |r, c| {
        let slot = (r / h) * columns + c / w;
        match cells.get(slot) {
            Some((_, img)) => {
                let p = img.pixel(r % h, c % w);
                [p[0], p[1], p[2]]
            }
            None => [1.0; 3],
        }
    })
}
