//! LPT1 binary tensor files, JSON manifests and the on-disk dataset layout.
//!
//! File layout, all little-endian:
//!
//! ```text
//! magic   4 bytes   "LPT1"
//! ndim    u32       1, 2 or 3
//! dims    ndim×u32
//! payload prod(dims)×f32, row-major, last dimension fastest
//! ```
//!
//! No trailing bytes are allowed. A dataset directory holds `manifest.json`
//! plus one `.lpt` file per entry; latents sit next to their image as
//! `<id>.lat.lpt` with dims `(4, h, w)`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::codec::{LatentTensor, LATENT_CHANNELS};
use crate::error::{Error, Result};
use crate::stimuli::{ImageTensor, ManifestEntry, StimulusManifest, StimulusSet};

pub const MAGIC: &[u8; 4] = b"LPT1";
pub const MAX_NDIM: usize = 3;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TENSOR_EXT: &str = "lpt";
pub const LATENT_SUFFIX: &str = ".lat.lpt";

/// Dense `f32` tensor exactly as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_NDIM {
            return Err(Error::invalid(format!(
                "tensor rank must be 1..={MAX_NDIM}, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0 || d > u32::MAX as usize) {
            return Err(Error::invalid(format!(
                "tensor dims {dims:?} must be in 1..=u32::MAX"
            )));
        }
        let count: usize = dims.iter().product();
        if count != data.len() {
            return Err(Error::invalid(format!(
                "dims {dims:?} need {count} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_parts(self) -> (Vec<usize>, Vec<f32>) {
        (self.dims, self.data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |at: usize| -> Result<u32> {
            bytes
                .get(at..at + 4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .ok_or_else(|| Error::Format(format!("truncated header at byte {at}")))
        };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, expected \"LPT1\"".into()));
        }
        let ndim = word(4)? as usize;
        if ndim == 0 || ndim > MAX_NDIM {
            return Err(Error::Format(format!("ndim {ndim} outside 1..={MAX_NDIM}")));
        }
        let dims = (0..ndim)
            .map(|i| word(8 + 4 * i).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if dims.contains(&0) {
            return Err(Error::Format(format!("zero-sized dimension in {dims:?}")));
        }
        let header = 8 + 4 * ndim;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
        let expected = count
            .checked_mul(4)
            .and_then(|p| p.checked_add(header))
            .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "dims {dims:?} need {expected} bytes, file has {}",
                bytes.len()
            )));
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(Self { dims, data })
    }
}

impl From<&ImageTensor> for Tensor {
    fn from(img: &ImageTensor) -> Self {
        Tensor {
            dims: vec![img.height(), img.width(), img.channels()],
            data: img.data().iter().map(|&v| v as f32).collect(),
        }
    }
}

impl TryFrom<Tensor> for ImageTensor {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Self> {
        let (h, w, c) = match *t.dims() {
            [h, w] => (h, w, 1),
            [h, w, c] => (h, w, c),
            ref d => {
                return Err(Error::Data(format!(
                    "image tensor needs 2 or 3 dims, got {d:?}"
                )))
            }
        };
        let data = t.data.iter().map(|&v| v as f64).collect();
        ImageTensor::new(h, w, c, data).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::Data(msg),
            other => other,
        })
    }
}

impl From<&LatentTensor> for Tensor {
    fn from(z: &LatentTensor) -> Self {
        Tensor {
            dims: vec![LATENT_CHANNELS, z.height(), z.width()],
            data: z.data().iter().map(|&v| v as f32).collect(),
        }
    }
}

impl TryFrom<Tensor> for LatentTensor {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Self> {
        let [c, h, w] = *t.dims() else {
            return Err(Error::Data(format!(
                "latent needs dims (4, h, w), got {:?}",
                t.dims()
            )));
        };
        if c != LATENT_CHANNELS {
            return Err(Error::Data(format!(
                "latent needs 4 channels, got dims {:?}",
                t.dims()
            )));
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("latent contains NaN or infinite values".into()));
        }
        let data = t.data.iter().map(|&v| v as f64).collect();
        LatentTensor::new(h, w, data).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::Data(msg),
            other => other,
        })
    }
}

/// Writes `bytes` to `path` through a sibling temp file and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    write_atomic(path.as_ref(), &t.to_bytes())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_image(path: impl AsRef<Path>, img: &ImageTensor) -> Result<()> {
    write_tensor(path, &Tensor::from(img))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    ImageTensor::try_from(read_tensor(path)?)
}

pub fn write_latent(path: impl AsRef<Path>, z: &LatentTensor) -> Result<()> {
    write_tensor(path, &Tensor::from(z))
}

pub fn read_latent(path: impl AsRef<Path>) -> Result<LatentTensor> {
    let path = path.as_ref();
    LatentTensor::try_from(read_tensor(path)?).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &StimulusManifest) -> Result<()> {
    manifest.validate()?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_atomic(path.as_ref(), text.as_bytes())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<StimulusManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: StimulusManifest = serde_json::from_str(&text)?;
    manifest.validate()?;
    Ok(manifest)
}

/// 8-bit PNG export: each sample is rounded to the nearest of `v·255`.
pub fn write_png(path: impl AsRef<Path>, img: &ImageTensor) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    let color = if img.channels() == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    let mut encoded = Vec::new();
    image::ImageEncoder::write_image(
        image::codecs::png::PngEncoder::new(&mut encoded),
        &bytes,
        img.width() as u32,
        img.height() as u32,
        color,
    )
    .map_err(|source| Error::Png {
        path: path.to_owned(),
        source,
    })?;
    write_atomic(path, &encoded)
}

/// Reads an 8-bit PNG; gray images stay single-channel, anything else is
/// converted to RGB.
pub fn read_png(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|source| Error::Png {
        path: path.to_owned(),
        source,
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, raw) = match decoded {
        image::DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        other => (3, other.to_rgb8().into_raw()),
    };
    let data = raw.into_iter().map(|b| b as f64 / 255.0).collect();
    ImageTensor::new(h, w, channels, data)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// A dataset directory: `manifest.json` plus one tensor file per entry.
#[derive(Clone, Debug)]
pub struct Dataset {
    root: PathBuf,
    manifest: StimulusManifest,
}

impl Dataset {
    /// Opens `root` and checks that every manifest tensor path exists.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let manifest_path = root.join(MANIFEST_FILE);
        if !manifest_path.is_file() {
            return Err(Error::invalid(format!(
                "{} is not a dataset directory (no {MANIFEST_FILE})",
                root.display()
            )));
        }
        let manifest = read_manifest(&manifest_path)?;
        let ds = Self { root, manifest };
        let missing: Vec<String> = ds
            .manifest
            .entries
            .iter()
            .filter(|e| !ds.image_path(e).map(|p| p.is_file()).unwrap_or(false))
            .map(|e| e.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingArtifact { ids: missing });
        }
        Ok(ds)
    }

    /// Writes images and manifest into `root` (created if needed).
    pub fn create(
        root: impl Into<PathBuf>,
        images: &[ImageTensor],
        manifest: StimulusManifest,
    ) -> Result<Self> {
        let root = root.into();
        if images.len() != manifest.len() {
            return Err(Error::invalid(format!(
                "{} images for {} manifest entries",
                images.len(),
                manifest.len()
            )));
        }
        manifest.validate()?;
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let ds = Self { root, manifest };
        for (entry, img) in ds.manifest.entries.iter().zip(images) {
            write_image(ds.image_path(entry)?, img)?;
        }
        write_manifest(ds.root.join(MANIFEST_FILE), &ds.manifest)?;
        Ok(ds)
    }

    /// Renders and writes every image of `set` into `root`, one at a time,
    /// with an 8-bit PNG copy per image in `png_dir` when given.
    pub fn create_from_set(
        root: impl Into<PathBuf>,
        set: StimulusSet,
        png_dir: Option<&Path>,
    ) -> Result<Self> {
        let root = root.into();
        set.manifest().validate()?;
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        if let Some(dir) = png_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let entries = set.manifest().entries.clone();
        entries.par_iter().enumerate().try_for_each(|(i, entry)| {
            let img = set.render(i)?;
            write_image(root.join(entry.tensor_path()?), &img)?;
            if let Some(dir) = png_dir {
                write_png(dir.join(format!("{}.png", entry.id)), &img)?;
            }
            Ok::<_, Error>(())
        })?;
        let ds = Self {
            root,
            manifest: set.into_manifest(),
        };
        write_manifest(ds.root.join(MANIFEST_FILE), &ds.manifest)?;
        Ok(ds)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &StimulusManifest {
        &self.manifest
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.manifest.entries
    }

    /// A view of this dataset restricted to `entries` (same root).
    pub fn subset(&self, entries: Vec<ManifestEntry>) -> Dataset {
        Dataset {
            root: self.root.clone(),
            manifest: StimulusManifest {
                entries,
                extra: self.manifest.extra.clone(),
            },
        }
    }

    pub fn image_path(&self, entry: &ManifestEntry) -> Result<PathBuf> {
        Ok(self.root.join(entry.tensor_path()?))
    }

    pub fn latent_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(format!("{}{LATENT_SUFFIX}", entry.id))
    }

    pub fn load_image(&self, entry: &ManifestEntry) -> Result<ImageTensor> {
        read_image(self.image_path(entry)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::{synth_color_grid, StimulusKind};
    use rand::{Rng, SeedableRng};

    #[test]
    fn header_arithmetic() {
        let t = Tensor::new(vec![1, 1, 1], vec![0.5]).unwrap();
        assert_eq!(t.to_bytes().len(), 24);
        let t = Tensor::new(vec![4, 64, 64], vec![0.0; 4 * 64 * 64]).unwrap();
        assert_eq!(t.to_bytes().len() - (8 + 12), 65536);
    }

    #[test]
    fn exact_byte_layout() {
        let t = Tensor::new(vec![2], vec![1.0, -2.5]).unwrap();
        let mut want = b"LPT1".to_vec();
        want.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0]);
        want.extend_from_slice(&1.0f32.to_le_bytes());
        want.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(t.to_bytes(), want);
    }

    #[test]
    fn round_trip_random_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for i in 0..100 {
            let ndim = rng.gen_range(1..=3);
            let dims: Vec<usize> = (0..ndim).map(|_| rng.gen_range(1..6)).collect();
            let n = dims.iter().product();
            let data = (0..n)
                .map(|_| f32::from_bits(rng.gen::<u32>() & 0x7f7f_ffff))
                .collect();
            let t = Tensor::new(dims, data).unwrap();
            let path = dir.path().join(format!("{i}.lpt"));
            write_tensor(&path, &t).unwrap();
            let back = read_tensor(&path).unwrap();
            assert_eq!(back.to_bytes(), t.to_bytes());
        }
    }

    #[test]
    fn rejects_malformed_files() {
        let good = Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap().to_bytes();
        let mut bad_magic = good.clone();
        bad_magic[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            Tensor::from_bytes(&bad_magic),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            Tensor::from_bytes(&good[..good.len() - 4]),
            Err(Error::Format(_))
        ));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(
            Tensor::from_bytes(&trailing),
            Err(Error::Format(_))
        ));
        let mut rank4 = good.clone();
        rank4[4] = 4;
        assert!(matches!(Tensor::from_bytes(&rank4), Err(Error::Format(_))));
        assert!(matches!(Tensor::from_bytes(b"LP"), Err(Error::Format(_))));
        assert!(matches!(
            Tensor::from_bytes(b"LPT1\x02\x00"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn rejects_bad_tensors_on_construction() {
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![1, 1, 1, 1], vec![0.0]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn latent_conversion_checks() {
        let t = Tensor::new(vec![3, 2, 2], vec![0.0; 12]).unwrap();
        assert!(matches!(LatentTensor::try_from(t), Err(Error::Data(_))));
        let mut data = vec![0.0; 16];
        data[5] = f32::NAN;
        let t = Tensor::new(vec![4, 2, 2], data).unwrap();
        assert!(matches!(LatentTensor::try_from(t), Err(Error::Data(_))));
    }

    #[test]
    fn manifest_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);

        write_manifest(&path, &StimulusManifest::default()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"entries\": []"));

        let (_, manifest) = synth_color_grid(12, 6, 5, 8).unwrap();
        write_manifest(&path, &manifest).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), manifest);

        let dup = StimulusManifest::new(vec![
            ManifestEntry::new("a", StimulusKind::Wheel),
            ManifestEntry::new("a", StimulusKind::Wheel),
        ]);
        assert!(matches!(
            write_manifest(&path, &dup),
            Err(Error::Validation(_))
        ));

        let mut no_path = ManifestEntry::new("b", StimulusKind::Wheel);
        no_path.tensor_path = None;
        let m = StimulusManifest::new(vec![no_path]);
        assert!(matches!(
            write_manifest(&path, &m),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn manifest_preserves_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = r#"{"entries":[{"id":"w","kind":"wheel","tensor_path":"w.lpt","note":{"x":[1,2]}}],"producer":"bridge"}"#;
        fs::write(&path, text).unwrap();
        let m = read_manifest(&path).unwrap();
        assert_eq!(m.extra["producer"], "bridge");
        write_manifest(&path, &m).unwrap();
        let back: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back["producer"], "bridge");
        assert_eq!(back["entries"][0]["note"]["x"][1], 2);
    }

    #[test]
    fn png_round_trip_at_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let img =
            ImageTensor::from_fn(8, 16, |r, c| [r as f64 / 7.0, c as f64 / 15.0, 0.5]).unwrap();
        let path = dir.path().join("x.png");
        write_png(&path, &img).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back.channels(), 3);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
        let gray = ImageTensor::uniform(8, 8, &[0.2]).unwrap();
        write_png(&path, &gray).unwrap();
        assert_eq!(read_png(&path).unwrap().channels(), 1);
    }

    #[test]
    fn dataset_reports_missing_tensors() {
        let dir = tempfile::tempdir().unwrap();
        let (images, manifest) = synth_color_grid(2, 1, 1, 8).unwrap();
        let ds = Dataset::create(dir.path(), &images, manifest).unwrap();
        let victim = ds.entries()[1].clone();
        fs::remove_file(ds.image_path(&victim).unwrap()).unwrap();
        match Dataset::open(dir.path()) {
            Err(Error::MissingArtifact { ids }) => assert_eq!(ids, vec![victim.id]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
