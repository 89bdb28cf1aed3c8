//! Adapter for latents and reconstructions produced by an out-of-process
//! autoencoder.
//!
//! Encoding side: the bridge writes `<id>.lat.lpt` next to each dataset
//! image. Decoding side: any directory of `<name>.lat.lpt` requests is
//! answered by the bridge with `<name>.png` (or `<name>.lpt`).

use std::fs;
use std::path::{Path, PathBuf};

use super::{LatentTensor, DOWNSCALE};
use crate::error::{Error, Result};
use crate::stimuli::ImageTensor;
use crate::tensor_store::{
    read_image, read_latent, read_png, read_tensor, write_latent, Dataset, LATENT_SUFFIX,
};

/// Loads the latent of every dataset entry, in manifest order. All missing
/// files are reported together.
pub fn load_latents(ds: &Dataset) -> Result<Vec<LatentTensor>> {
    let missing: Vec<String> = ds
        .entries()
        .iter()
        .filter(|e| !ds.latent_path(e).is_file())
        .map(|e| e.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifact { ids: missing });
    }
    ds.entries()
        .iter()
        .map(|e| read_latent(ds.latent_path(e)))
        .collect()
}

/// Checks that `z` has the spatial size the codec would produce for `x`.
pub fn check_latent_geometry(id: &str, x: &ImageTensor, z: &LatentTensor) -> Result<()> {
    if z.height() * DOWNSCALE != x.height() || z.width() * DOWNSCALE != x.width() {
        return Err(Error::Data(format!(
            "latent for {id:?} is {}x{}, image {}x{} needs {}x{}",
            z.height(),
            z.width(),
            x.height(),
            x.width(),
            x.height() / DOWNSCALE,
            x.width() / DOWNSCALE
        )));
    }
    Ok(())
}

/// Pairs every dataset image with its external latent.
pub fn load_pairs(ds: &Dataset) -> Result<Vec<(ImageTensor, LatentTensor)>> {
    let latents = load_latents(ds)?;
    ds.entries()
        .iter()
        .zip(latents)
        .map(|(entry, z)| {
            let x = ds.load_image(entry)?;
            check_latent_geometry(&entry.id, &x, &z)?;
            Ok((x, z))
        })
        .collect()
}

/// A directory where decode requests are dropped as latents and picked up
/// as images once the bridge has run.
#[derive(Clone, Debug)]
pub struct ExternalDecoder {
    dir: PathBuf,
}

impl ExternalDecoder {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn request_path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}{LATENT_SUFFIX}"))
    }

    /// The decoded image for `name`, if the bridge has produced one.
    pub fn decoded(&self, name: &str) -> Result<Option<ImageTensor>> {
        let tensor = self.dir.join(format!("{name}.lpt"));
        if tensor.is_file() {
            return read_image(tensor).map(Some);
        }
        let png = self.dir.join(format!("{name}.png"));
        if png.is_file() {
            return read_png(png).map(Some);
        }
        Ok(None)
    }

    /// Writes `z` as a decode request, leaving an identical existing request
    /// untouched.
    pub fn request(&self, name: &str, z: &LatentTensor) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.request_path(name);
        if path.is_file() {
            if let Ok(existing) = read_latent(&path) {
                if existing
                    .data()
                    .iter()
                    .zip(z.data())
                    .all(|(a, b)| *a == (*b as f32) as f64)
                    && existing.height() == z.height()
                    && existing.width() == z.width()
                {
                    return Ok(());
                }
            }
        }
        write_latent(path, z)
    }

    /// Decoded image for `z`, or a missing-artifact error after leaving a
    /// request behind.
    pub fn decode(&self, name: &str, z: &LatentTensor) -> Result<ImageTensor> {
        match self.decoded(name)? {
            Some(img) => Ok(img),
            None => {
                self.request(name, z)?;
                Err(Error::MissingArtifact {
                    ids: vec![name.to_owned()],
                })
            }
        }
    }
}

/// Loads the bridge's reconstruction for every latent request in
/// `latent_dir`, sorted by name.
pub fn external_decode(latent_dir: impl AsRef<Path>) -> Result<Vec<(String, ImageTensor)>> {
    let dir = latent_dir.as_ref();
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| {
            entry
                .file_name()
                .to_str()
                .and_then(|n| n.strip_suffix(LATENT_SUFFIX))
                .map(str::to_owned)
        })
        .collect();
    names.sort();
    let decoder = ExternalDecoder::new(dir);
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        // Validate the request itself even when its image exists.
        read_tensor(decoder.request_path(&name))?;
        match decoder.decoded(&name)? {
            Some(img) => out.push((name, img)),
            None => missing.push(name),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingArtifact { ids: missing });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{Codec, ReferenceCodec};
    use crate::stimuli::synth_color_grid;
    use crate::tensor_store::{write_image, write_tensor, Tensor};

    fn dataset_with_latents(n_hues: usize) -> (tempfile::TempDir, Dataset) {
        let dir = tempfile::tempdir().unwrap();
        let (images, manifest) = synth_color_grid(n_hues, 1, 1, 16).unwrap();
        let ds = Dataset::create(dir.path(), &images, manifest).unwrap();
        for (entry, img) in ds.entries().iter().zip(&images) {
            write_latent(ds.latent_path(entry), &ReferenceCodec.encode(img).unwrap()).unwrap();
        }
        (dir, ds)
    }

    #[test]
    fn pairs_every_image() {
        let (_dir, ds) = dataset_with_latents(6);
        let pairs = load_pairs(&ds).unwrap();
        assert_eq!(pairs.len(), 6);
        assert_eq!((pairs[0].1.height(), pairs[0].1.width()), (2, 2));
    }

    #[test]
    fn lists_exactly_the_missing_id() {
        let (_dir, ds) = dataset_with_latents(4);
        let victim = &ds.entries()[2];
        fs::remove_file(ds.latent_path(victim)).unwrap();
        match load_latents(&ds) {
            Err(Error::MissingArtifact { ids }) => assert_eq!(ids, vec![victim.id.clone()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_channel_count_and_non_finite() {
        let (_dir, ds) = dataset_with_latents(2);
        let path = ds.latent_path(&ds.entries()[0]);
        write_tensor(&path, &Tensor::new(vec![3, 2, 2], vec![0.0; 12]).unwrap()).unwrap();
        assert!(matches!(load_latents(&ds), Err(Error::Data(_))));
        let mut data = vec![0.0; 16];
        data[0] = f32::INFINITY;
        write_tensor(&path, &Tensor::new(vec![4, 2, 2], data).unwrap()).unwrap();
        assert!(matches!(load_latents(&ds), Err(Error::Data(_))));
        write_tensor(&path, &Tensor::new(vec![4, 1, 1], vec![0.0; 4]).unwrap()).unwrap();
        assert!(matches!(load_pairs(&ds), Err(Error::Data(_))));
    }

    #[test]
    fn decoder_requests_then_serves() {
        let dir = tempfile::tempdir().unwrap();
        let decoder = ExternalDecoder::new(dir.path().join("req"));
        let z = LatentTensor::zeros(1, 1);
        match decoder.decode("zero", &z) {
            Err(Error::MissingArtifact { ids }) => assert_eq!(ids, vec!["zero".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(decoder.request_path("zero").is_file());
        match external_decode(decoder.dir()) {
            Err(Error::MissingArtifact { ids }) => assert_eq!(ids, vec!["zero".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        let img = ReferenceCodec.decode(&z).unwrap();
        write_image(decoder.dir().join("zero.lpt"), &img).unwrap();
        assert_eq!(decoder.decode("zero", &z).unwrap(), img);
        let all = external_decode(decoder.dir()).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].0, "zero");
    }
}
