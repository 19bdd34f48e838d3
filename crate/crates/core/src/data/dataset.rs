use std::path::Path;

use super::image::decode_image;
use super::manifest::DatasetManifest;
use crate::error::{size_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// In-memory (noisy, clean) pairs of equal square size.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub size: usize,
    pub ids: Vec<String>,
    pub noisy: Vec<Vec<f32>>,
    pub clean: Vec<Vec<f32>>,
}

/// Model input and target, both `[N, 1, size, size]`.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub noisy: Tensor<T>,
    pub clean: Tensor<T>,
}

impl Dataset {
    pub fn new(size: usize, pairs: Vec<(String, Vec<f32>, Vec<f32>)>) -> Result<Self> {
        let mut ds = Dataset {
            size,
            ids: Vec::new(),
            noisy: Vec::new(),
            clean: Vec::new(),
        };
        for (id, noisy, clean) in pairs {
            if noisy.len() != size * size || clean.len() != size * size {
                return Err(size_err!("pair {id} is not {size}x{size}"));
            }
            ds.ids.push(id);
            ds.noisy.push(noisy);
            ds.clean.push(clean);
        }
        Ok(ds)
    }

    /// Loads the records named in `ids` (noisy files must exist).
    pub fn load(manifest: &DatasetManifest, base: &Path, ids: &[String]) -> Result<Self> {
        let mut pairs = Vec::with_capacity(ids.len());
        for id in ids {
            let rec = manifest
                .record(id)
                .ok_or_else(|| Error::Format(format!("unknown id {id}")))?;
            let noisy_rel = rec
                .noisy
                .as_ref()
                .ok_or_else(|| Error::Format(format!("record {id} has no noisy image")))?;
            let clean = decode_image(&base.join(&rec.clean))?;
            let noisy = decode_image(&base.join(noisy_rel))?;
            if (clean.width, clean.height) != (manifest.resize_to, manifest.resize_to)
                || (noisy.width, noisy.height) != (manifest.resize_to, manifest.resize_to)
            {
                return Err(size_err!(
                    "record {id} does not match resize_to {}",
                    manifest.resize_to
                ));
            }
            pairs.push((id.clone(), noisy.pixels, clean.pixels));
        }
        Dataset::new(manifest.resize_to, pairs)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> Batch<T> {
        let shape = [indices.len(), 1, self.size, self.size];
        let gather = |src: &Vec<Vec<f32>>| -> Tensor<T> {
            let data = indices
                .iter()
                .flat_map(|&i| src[i].iter().map(|&v| T::from_f64_lossy(v as f64)))
                .collect();
            Tensor::from_vec(&shape, data).expect("gathered extent matches shape")
        };
        Batch {
            noisy: gather(&self.noisy),
            clean: gather(&self.clean),
        }
    }
}
