//! The commands exposed by the CLI. Each reads and writes only the on-disk
//! dataset layout, so an external codec can run between any two of them.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::ablation::{run_ablation, AblationBackend, AblationRow, BandFilter, ExternalBackend};
use crate::circstats::{circular_corr, hue_angle, pearson, plane_angle, CorrelationRow};
use crate::codec::external::{check_latent_geometry, ExternalDecoder};
use crate::codec::{Codec, CodecKind, ReferenceCodec};
use crate::error::{Error, Result};
use crate::pca::{fit_pca, project, spatial_mean, LatentVec4, PcaResult};
use crate::report::{
    compare_eigenbasis, emit_ablation_table, emit_recon_grid, emit_scatter, ReferenceEigenData,
    TableFormat,
};
use crate::stimuli::{
    color_grid, color_wheel, default_shape_scales, gratings, shapes, ImageTensor, ManifestEntry,
    Polarity, ShapeKind, StimulusSet, Waveform,
};
use crate::tensor_store::{
    read_image, read_latent, read_png, write_atomic, write_image, write_png, Dataset,
    LATENT_SUFFIX, TENSOR_EXT,
};

pub const DEFAULT_SIDE: usize = 512;
pub const PCA_FILE: &str = "pca.json";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const ANGLES_FILE: &str = "angles.csv";
pub const CORRELATIONS_FILE: &str = "correlations.json";
pub const COMPARE_FILE: &str = "compare.json";
pub const PNG_DIR: &str = "png";
pub const GRID_DIR: &str = "grid";
pub const GRID_REQUEST_DIR: &str = "requests";

/// Settings shared by every command.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub codec: CodecKind,
    pub out_dir: PathBuf,
    pub force: bool,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            codec: CodecKind::Reference,
            out_dir: out_dir.into(),
            force: false,
            threads: 0,
        }
    }

    /// Runs `f` on a pool of `self.threads` workers.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?
            .install(f)
    }
}

/// Creates `dir`, refusing a non-empty existing directory unless `force`.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::invalid(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let mut listing = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if listing.next().is_some() && !force {
            return Err(Error::invalid(format!(
                "{} is not empty (use --force to write into it)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Clone, Debug)]
pub enum SynthKind {
    Colors {
        hues: usize,
        sats: usize,
        vals: usize,
    },
    Wheel {
        value: f64,
    },
    Shapes {
        kinds: Vec<ShapeKind>,
        scales: Vec<f64>,
        polarities: Vec<Polarity>,
    },
    Gratings {
        frequencies: Vec<f64>,
        orientations: Vec<f64>,
        waveforms: Vec<Waveform>,
    },
}

impl SynthKind {
    pub fn default_colors() -> Self {
        SynthKind::Colors {
            hues: 12,
            sats: 6,
            vals: 5,
        }
    }

    pub fn default_shapes() -> Self {
        SynthKind::Shapes {
            kinds: ShapeKind::ALL.to_vec(),
            scales: default_shape_scales(),
            polarities: Polarity::ALL.to_vec(),
        }
    }

    pub fn default_gratings() -> Self {
        SynthKind::Gratings {
            frequencies: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
            orientations: vec![0.0, 45.0, 90.0, 135.0],
            waveforms: vec![Waveform::Sine, Waveform::Square],
        }
    }

    pub fn stimuli(&self, side: usize) -> Result<StimulusSet> {
        match self {
            SynthKind::Colors { hues, sats, vals } => color_grid(*hues, *sats, *vals, side),
            SynthKind::Wheel { value } => color_wheel(side, *value),
            SynthKind::Shapes {
                kinds,
                scales,
                polarities,
            } => shapes(kinds, scales, polarities, side),
            SynthKind::Gratings {
                frequencies,
                orientations,
                waveforms,
            } => gratings(frequencies, orientations, waveforms, side),
        }
    }
}

/// Synthesizes a dataset into `cfg.out_dir`, with 8-bit PNG previews under
/// `png/` when `png` is set.
pub fn cmd_synth(kind: &SynthKind, side: usize, png: bool, cfg: &RunConfig) -> Result<Dataset> {
    let set = kind.stimuli(side)?;
    prepare_out_dir(&cfg.out_dir, cfg.force)?;
    let png_dir = png.then(|| cfg.out_dir.join(PNG_DIR));
    cfg.install(|| Dataset::create_from_set(&cfg.out_dir, set, png_dir.as_deref()))
}

/// Mean intensity and spatially averaged latent of every entry, in
/// manifest order. Images are loaded one at a time.
fn summarize(ds: &Dataset, codec: CodecKind) -> Result<(Vec<f64>, Vec<LatentVec4>)> {
    if codec == CodecKind::External {
        let missing: Vec<String> = ds
            .entries()
            .iter()
            .filter(|e| !ds.latent_path(e).is_file())
            .map(|e| e.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingArtifact { ids: missing });
        }
    }
    let rows: Vec<(f64, LatentVec4)> = ds
        .entries()
        .par_iter()
        .map(|entry| {
            let x = ds.load_image(entry)?;
            let z = match codec {
                CodecKind::Reference => ReferenceCodec.encode(&x.to_rgb())?,
                CodecKind::External => {
                    let z = read_latent(ds.latent_path(entry))?;
                    check_latent_geometry(&entry.id, &x, &z)?;
                    z
                }
            };
            Ok((x.mean_intensity(), spatial_mean(&z)?))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().unzip())
}

fn dataset_label(ds: &Dataset) -> String {
    ds.root()
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| ds.root().display().to_string())
}

/// Everything `cmd_pca` writes, in memory.
#[derive(Clone, Debug)]
pub struct PcaReport {
    pub pca: PcaResult,
    /// PC scores per entry, in manifest order.
    pub scores: Vec<[f64; 4]>,
    pub correlations: Vec<CorrelationRow>,
    /// `(id, hue, plane angle)` for every chromatic entry.
    pub angles: Vec<(String, f64, f64)>,
}

pub const METRIC_PEARSON: &str = "pearson_pc1_mean_intensity";
pub const METRIC_CIRCULAR: &str = "circular_hue_pc23";
pub const METRIC_CIRCULAR_SLICE: &str = "circular_hue_pc23_max_sat_val";

impl PcaReport {
    pub fn correlation(&self, metric: &str) -> Option<&CorrelationRow> {
        self.correlations.iter().find(|r| r.metric == metric)
    }
}

/// Indices of the entries at the largest saturation and value present.
fn max_sat_val(entries: &[&ManifestEntry]) -> Vec<usize> {
    let max_of = |f: fn(&ManifestEntry) -> Option<f64>| {
        entries
            .iter()
            .filter_map(|e| f(e))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (s_max, v_max) = (max_of(|e| e.saturation), max_of(|e| e.value));
    (0..entries.len())
        .filter(|&i| entries[i].saturation == Some(s_max) && entries[i].value == Some(v_max))
        .collect()
}

/// Hue against the angle in the PC2–PC3 plane for every chromatic entry
/// whose plane angle is defined.
fn hue_plane_pairs(entries: &[&ManifestEntry], scores: &[&[f64; 4]]) -> Vec<(String, f64, f64)> {
    entries
        .iter()
        .zip(scores)
        .filter(|(e, _)| e.hue.is_some() && !e.is_achromatic())
        .filter_map(|(e, s)| {
            let hue = hue_angle(e).ok()?;
            let plane = plane_angle(s[1], s[2]).ok()?;
            Some((e.id.clone(), hue, plane))
        })
        .collect()
}

fn push_correlation(
    rows: &mut Vec<CorrelationRow>,
    metric: &str,
    dataset: &str,
    n: usize,
    value: Result<f64>,
) -> Result<()> {
    match value {
        Ok(value) => rows.push(CorrelationRow {
            metric: metric.into(),
            value,
            n,
            dataset: dataset.into(),
        }),
        Err(Error::Degenerate(_)) | Err(Error::InvalidArgument(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(())
}

/// PCA of the spatially averaged latents `vectors`, Pearson correlation of
/// PC1 with `intensity`, and circular correlation of hue with the PC2–PC3
/// plane angle, over all chromatic entries and over the slice at maximal
/// saturation and value. Correlations that are undefined for the data are
/// omitted.
pub fn analyze_pca(
    entries: &[ManifestEntry],
    intensity: &[f64],
    vectors: &[LatentVec4],
    dataset: &str,
) -> Result<PcaReport> {
    if entries.len() != vectors.len() || intensity.len() != vectors.len() {
        return Err(Error::invalid(
            "entries, intensities and latents differ in length",
        ));
    }
    let pca = fit_pca(vectors)?;
    let scores: Vec<[f64; 4]> = vectors.iter().map(|v| project(&pca, v)).collect();
    let mut correlations = Vec::new();
    let pc1: Vec<f64> = scores.iter().map(|s| s[0]).collect();
    push_correlation(
        &mut correlations,
        METRIC_PEARSON,
        dataset,
        pc1.len(),
        pearson(&pc1, intensity),
    )?;

    let (colored, colored_scores): (Vec<&ManifestEntry>, Vec<&[f64; 4]>) = entries
        .iter()
        .zip(&scores)
        .filter(|(e, _)| e.hue.is_some())
        .unzip();
    let angles = hue_plane_pairs(&colored, &colored_scores);
    let slice = max_sat_val(&colored);
    let slice_entries: Vec<&ManifestEntry> = slice.iter().map(|&i| colored[i]).collect();
    let slice_scores: Vec<&[f64; 4]> = slice.iter().map(|&i| colored_scores[i]).collect();
    let slice_angles = hue_plane_pairs(&slice_entries, &slice_scores);
    for (metric, pairs) in [
        (METRIC_CIRCULAR, &angles),
        (METRIC_CIRCULAR_SLICE, &slice_angles),
    ] {
        let hue: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let plane: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        push_correlation(
            &mut correlations,
            metric,
            dataset,
            hue.len(),
            circular_corr(&hue, &plane),
        )?;
    }
    Ok(PcaReport {
        pca,
        scores,
        correlations,
        angles,
    })
}

/// Writes `pca.json`, `scatter.csv`, `angles.csv`, `correlations.json`, and
/// `compare.json` for the external codec.
pub fn cmd_pca(dataset_dir: &Path, cfg: &RunConfig) -> Result<PcaReport> {
    let ds = Dataset::open(dataset_dir)?;
    let (intensity, vectors) = cfg.install(|| summarize(&ds, cfg.codec))?;
    let report = analyze_pca(ds.entries(), &intensity, &vectors, &dataset_label(&ds))?;

    prepare_out_dir(&cfg.out_dir, cfg.force)?;
    let out = &cfg.out_dir;
    write_json(&out.join(PCA_FILE), &report.pca)?;
    let scatter_rows: Vec<(String, [f64; 3])> = ds
        .entries()
        .iter()
        .zip(&report.scores)
        .filter(|(e, _)| e.hue.is_some() && e.saturation.is_some() && e.value.is_some())
        .map(|(e, s)| (e.id.clone(), [s[0], s[1], s[2]]))
        .collect();
    write_atomic(
        &out.join(SCATTER_FILE),
        emit_scatter(&scatter_rows, ds.manifest())?.as_bytes(),
    )?;
    let mut angles = csv::Writer::from_writer(Vec::new());
    angles.write_record(["id", "hue_rad", "pc23_rad"])?;
    for (id, hue, plane) in &report.angles {
        angles.write_record([id.clone(), hue.to_string(), plane.to_string()])?;
    }
    let angles = angles
        .into_inner()
        .map_err(|e| Error::Data(e.to_string()))?;
    write_atomic(&out.join(ANGLES_FILE), &angles)?;
    write_json(&out.join(CORRELATIONS_FILE), &report.correlations)?;
    if cfg.codec == CodecKind::External {
        let cmp = compare_eigenbasis(&report.pca, &ReferenceEigenData::default());
        write_json(&out.join(COMPARE_FILE), &cmp)?;
    }
    Ok(report)
}

/// Band selection for `cmd_ablate`; `Split` runs the low and high bands
/// as two tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandSelection {
    All,
    Low,
    High,
    Split,
}

impl BandSelection {
    pub fn filters(self) -> Vec<BandFilter> {
        match self {
            BandSelection::All => vec![BandFilter::All],
            BandSelection::Low => vec![BandFilter::Low],
            BandSelection::High => vec![BandFilter::High],
            BandSelection::Split => vec![BandFilter::Low, BandFilter::High],
        }
    }
}

impl std::str::FromStr for BandSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(BandSelection::All),
            "low" => Ok(BandSelection::Low),
            "high" => Ok(BandSelection::High),
            "split" => Ok(BandSelection::Split),
            other => Err(Error::invalid(format!("unknown band {other:?}"))),
        }
    }
}

pub fn table_file_stem(band: BandFilter) -> String {
    format!("table_{band}")
}

/// Channel-mask ablation; writes `table_<band>.csv` and `.md` per band.
pub fn cmd_ablate(
    dataset_dir: &Path,
    bands: BandSelection,
    cfg: &RunConfig,
) -> Result<Vec<Vec<AblationRow>>> {
    let ds = Dataset::open(dataset_dir)?;
    let backend: &dyn AblationBackend = match cfg.codec {
        CodecKind::Reference => &ReferenceCodec,
        CodecKind::External => &ExternalBackend,
    };
    let tables = cfg.install(|| {
        bands
            .filters()
            .into_iter()
            .map(|band| run_ablation(&ds, backend, band))
            .collect::<Result<Vec<_>>>()
    })?;
    prepare_out_dir(&cfg.out_dir, cfg.force)?;
    for rows in &tables {
        let stem = table_file_stem(rows[0].band);
        let csv = emit_ablation_table(rows, TableFormat::Csv)?;
        let md = emit_ablation_table(rows, TableFormat::Markdown)?;
        write_atomic(&cfg.out_dir.join(format!("{stem}.csv")), csv.as_bytes())?;
        write_atomic(&cfg.out_dir.join(format!("{stem}.md")), md.as_bytes())?;
    }
    Ok(tables)
}

fn read_any_image(path: &Path) -> Result<ImageTensor> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => read_png(path),
        Some(TENSOR_EXT) => read_image(path),
        _ => Err(Error::invalid(format!(
            "{} is neither a .png nor a .{TENSOR_EXT} image",
            path.display()
        ))),
    }
}

/// Latent file paired with an image tensor `<stem>.lpt`.
pub fn paired_latent_path(image_path: &Path) -> Result<PathBuf> {
    let name = image_path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(&format!(".{TENSOR_EXT}")))
        .ok_or_else(|| {
            Error::invalid(format!(
                "external codec needs a .{TENSOR_EXT} image with a paired latent, got {}",
                image_path.display()
            ))
        })?;
    Ok(image_path.with_file_name(format!("{name}{LATENT_SUFFIX}")))
}

/// Reconstruction grid for one image. Writes each cell as PNG and tensor
/// under `grid/`, plus `mosaic.png` and `mosaic.lpt`. With the external
/// codec, decode requests go to `requests/` in the output directory.
pub fn cmd_grid(image_path: &Path, pca_path: &Path, cfg: &RunConfig) -> Result<Vec<String>> {
    if !pca_path.is_file() {
        return Err(Error::invalid(format!(
            "PCA file {} not found",
            pca_path.display()
        )));
    }
    let text = fs::read_to_string(pca_path).map_err(|e| Error::io(pca_path, e))?;
    let pca: PcaResult = serde_json::from_str(&text)?;
    pca.validate()?;
    let x = read_any_image(image_path)?;
    prepare_out_dir(&cfg.out_dir, cfg.force)?;
    let grid = match cfg.codec {
        CodecKind::Reference => {
            let z = ReferenceCodec.encode(&x.to_rgb())?;
            emit_recon_grid(&x, &z, &pca, |_, l| ReferenceCodec.decode(l))?
        }
        CodecKind::External => {
            let latent_path = paired_latent_path(image_path)?;
            if !latent_path.is_file() {
                return Err(Error::MissingArtifact {
                    ids: vec![latent_path.display().to_string()],
                });
            }
            let z = read_latent(&latent_path)?;
            check_latent_geometry(&image_path.display().to_string(), &x, &z)?;
            let decoder = ExternalDecoder::new(cfg.out_dir.join(GRID_REQUEST_DIR));
            emit_recon_grid(&x, &z, &pca, |label, l| decoder.decode(label, l))?
        }
    };
    let dir = cfg.out_dir.join(GRID_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (label, img) in &grid.cells {
        write_png(dir.join(format!("{label}.png")), img)?;
        write_image(dir.join(format!("{label}.{TENSOR_EXT}")), img)?;
    }
    write_png(cfg.out_dir.join("mosaic.png"), &grid.mosaic)?;
    write_image(
        cfg.out_dir.join(format!("mosaic.{TENSOR_EXT}")),
        &grid.mosaic,
    )?;
    Ok(grid.cells.into_iter().map(|(label, _)| label).collect())
}
