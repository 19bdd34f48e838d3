//! File-level pipeline stages: clean-image preparation and noise application.

use std::fs;
use std::path::{Path, PathBuf};

use super::image::{decode_image, encode_image, resize_bilinear, ImageRecord};
use super::manifest::{base_dir, DatasetManifest, ManifestRecord, MANIFEST_VERSION};
use super::noise::{corrupt, NoiseSpec};
use super::phantom::gen_synthetic_phantoms;
use super::split::{split_dataset, SplitFractions};
use crate::error::{Error, Result};

pub enum Source {
    /// Every decodable `.pgm` / `.png` file in a directory (non-recursive).
    Dir(PathBuf),
    Synthetic {
        count: usize,
    },
}

/// Writes resized clean images next to `out_manifest` and a manifest with
/// splits but no noise.
pub fn prepare_dataset(
    source: &Source,
    size: usize,
    fractions: SplitFractions,
    seed: u64,
    out_manifest: &Path,
) -> Result<DatasetManifest> {
    let images = match source {
        Source::Synthetic { count } => gen_synthetic_phantoms(*count, size, seed),
        Source::Dir(dir) => load_dir(dir)?,
    };
    if images.is_empty() {
        return Err(Error::Domain("no decodable images found".into()));
    }
    let base = base_dir(out_manifest);
    let mut records = Vec::with_capacity(images.len());
    for img in &images {
        let resized = if img.width == size && img.height == size {
            img.clone()
        } else {
            resize_bilinear(img, size)?
        };
        let rel = format!("clean/{}.png", img.id);
        encode_image(&resized, &base.join(&rel))?;
        records.push(ManifestRecord {
            id: img.id.clone(),
            clean: rel,
            noisy: None,
        });
    }
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let split = split_dataset(&ids, fractions, seed)?;
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        records,
        split,
        noise: None,
        resize_to: size,
        created_seed: seed,
    };
    manifest.validate()?;
    manifest.save(out_manifest)?;
    Ok(manifest)
}

fn load_dir(dir: &Path) -> Result<Vec<ImageRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("png"))
        })
        .collect();
    paths.sort();
    let mut out: Vec<ImageRecord> = Vec::new();
    for p in paths {
        match decode_image(&p) {
            Ok(img) => {
                if out.iter().any(|o| o.id == img.id) {
                    return Err(Error::Format(format!("duplicate image id {}", img.id)));
                }
                out.push(img);
            }
            Err(e) => log::warn!("skipping {}: {e}", p.display()),
        }
    }
    Ok(out)
}

/// Writes a noisy copy of every record and records the noise in the manifest.
pub fn corrupt_dataset(manifest_path: &Path, spec: &NoiseSpec) -> Result<DatasetManifest> {
    spec.validate()?;
    let mut manifest = DatasetManifest::load(manifest_path)?;
    let base = base_dir(manifest_path);
    let dir = format!("noisy_{}", spec.tag());
    for rec in &mut manifest.records {
        let mut clean = decode_image(&base.join(&rec.clean))?;
        clean.id = rec.id.clone();
        let noisy = corrupt(&clean, spec);
        let rel = format!("{dir}/{}.png", rec.id);
        encode_image(&noisy, &base.join(&rel))?;
        rec.noisy = Some(rel);
    }
    manifest.noise = Some(*spec);
    manifest.save(manifest_path)?;
    Ok(manifest)
}
