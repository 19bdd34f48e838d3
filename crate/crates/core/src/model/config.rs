use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Unet,
    Unetpp,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Unet => "unet",
            Arch::Unetpp => "unetpp",
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unet" => Ok(Arch::Unet),
            "unetpp" | "unet++" => Ok(Arch::Unetpp),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Architecture hyper-parameters. Channel width at level `l` is `base_ch * 2^l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arch: Arch,
    pub base_ch: usize,
    pub depth: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    #[serde(default)]
    pub deep_supervision: bool,
}

impl ModelConfig {
    pub fn unet(base_ch: usize, depth: usize) -> Self {
        Self {
            arch: Arch::Unet,
            base_ch,
            depth,
            in_ch: 1,
            out_ch: 1,
            deep_supervision: false,
        }
    }

    pub fn unetpp(base_ch: usize, depth: usize, deep_supervision: bool) -> Self {
        Self {
            arch: Arch::Unetpp,
            base_ch,
            depth,
            in_ch: 1,
            out_ch: 1,
            deep_supervision,
        }
    }

    pub fn new(arch: Arch, base_ch: usize, depth: usize, deep_supervision: bool) -> Self {
        match arch {
            Arch::Unet => Self::unet(base_ch, depth),
            Arch::Unetpp => Self::unetpp(base_ch, depth, deep_supervision),
        }
    }

    /// Channel width of encoder level `level`.
    pub fn width(&self, level: usize) -> usize {
        self.base_ch << level
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_ch == 0 {
            return Err(Error::Config("base_ch must be positive".into()));
        }
        if self.depth < 2 {
            return Err(Error::Config(format!(
                "depth must be at least 2, got {}",
                self.depth
            )));
        }
        if self.in_ch != 1 || self.out_ch != 1 {
            return Err(Error::Config(format!(
                "grayscale models need in_ch == out_ch == 1, got {} and {}",
                self.in_ch, self.out_ch
            )));
        }
        if self.deep_supervision && self.arch == Arch::Unet {
            return Err(Error::Config(
                "deep supervision applies to unetpp only".into(),
            ));
        }
        Ok(())
    }

    /// Spatial extents must halve cleanly `depth - 1` times.
    pub fn check_extent(&self, h: usize, w: usize) -> Result<()> {
        let q = 1usize << (self.depth - 1);
        if h == 0 || w == 0 || !h.is_multiple_of(q) || !w.is_multiple_of(q) {
            return Err(Error::Config(format!(
                "input {h}x{w} is not divisible by {q} (depth {})",
                self.depth
            )));
        }
        Ok(())
    }
}
