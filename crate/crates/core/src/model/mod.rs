//! U-Net and U-Net++ denoisers.

mod config;
mod graph;
mod recipe;

pub use config::{Arch, ModelConfig};
pub use graph::{Forward, Graph};
pub use recipe::{BlockSpec, HeadSpec, Recipe, UpSpec};
