//! Image ingestion, obfuscation noise, splitting, sharding and the dataset
//! manifest handed from the data-owning site to the training site.

mod dataset;
mod image;
mod manifest;
mod noise;
mod phantom;
mod prepare;
mod sampler;
mod split;

pub use dataset::{Batch, Dataset};
pub use image::{decode_image, encode_image, resize_bilinear, ImageRecord};
pub use manifest::{base_dir, DatasetManifest, ManifestRecord, MANIFEST_VERSION};
pub use noise::{corrupt, NoiseSpec};
pub use phantom::gen_synthetic_phantoms;
pub use prepare::{corrupt_dataset, prepare_dataset, Source};
pub use sampler::{make_batches, shard_indices};
pub use split::{split_dataset, Split, SplitFractions};
