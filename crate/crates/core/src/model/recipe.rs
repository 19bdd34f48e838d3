//! Structural description of both architectures, independent of weights.

use super::config::{Arch, ModelConfig};

/// Two 3x3 conv -> batch-norm -> ReLU stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
    /// `(i, j)` position in the U-Net++ node grid; `(level, 0)` for encoders.
    pub node: (usize, usize),
}

/// Learned 2x upsampling (transposed conv); U-Net only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpSpec {
    pub name: String,
    pub cin: usize,
    pub cout: usize,
}

/// 1x1 output convolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadSpec {
    pub name: String,
    pub cin: usize,
    /// Decoder node the head reads.
    pub node: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recipe {
    pub encoder: Vec<BlockSpec>,
    pub decoder: Vec<BlockSpec>,
    pub ups: Vec<UpSpec>,
    pub heads: Vec<HeadSpec>,
}

impl Recipe {
    pub fn new(cfg: &ModelConfig) -> Self {
        let d = cfg.depth;
        let encoder = (0..d)
            .map(|i| BlockSpec {
                name: format!("x{i}_0"),
                cin: if i == 0 { cfg.in_ch } else { cfg.width(i - 1) },
                cout: cfg.width(i),
                node: (i, 0),
            })
            .collect();
        match cfg.arch {
            Arch::Unet => {
                // decoder at level i consumes [skip_i, up(level i + 1)]
                let mut decoder = Vec::new();
                let mut ups = Vec::new();
                for i in (0..d - 1).rev() {
                    ups.push(UpSpec {
                        name: format!("up{i}"),
                        cin: cfg.width(i + 1),
                        cout: cfg.width(i),
                    });
                    decoder.push(BlockSpec {
                        name: format!("dec{i}"),
                        cin: 2 * cfg.width(i),
                        cout: cfg.width(i),
                        node: (i, d - 1 - i),
                    });
                }
                let heads = vec![HeadSpec {
                    name: "head".into(),
                    cin: cfg.width(0),
                    node: (0, d - 1),
                }];
                Recipe {
                    encoder,
                    decoder,
                    ups,
                    heads,
                }
            }
            Arch::Unetpp => {
                let mut decoder = Vec::new();
                for j in 1..d {
                    for i in 0..d - j {
                        decoder.push(BlockSpec {
                            name: format!("x{i}_{j}"),
                            cin: j * cfg.width(i) + cfg.width(i + 1),
                            cout: cfg.width(i),
                            node: (i, j),
                        });
                    }
                }
                let head_cols: Vec<usize> = if cfg.deep_supervision {
                    (1..d).collect()
                } else {
                    vec![d - 1]
                };
                let heads = head_cols
                    .into_iter()
                    .map(|j| HeadSpec {
                        name: format!("head{j}"),
                        cin: cfg.width(0),
                        node: (0, j),
                    })
                    .collect();
                Recipe {
                    encoder,
                    decoder,
                    ups: Vec::new(),
                    heads,
                }
            }
        }
    }

    /// Decoder nodes left after dropping the nested intermediate nodes, i.e.
    /// those strictly inside the U-Net++ grid (`i + j < depth - 1`).
    pub fn outer_decoder(&self, depth: usize) -> Vec<&BlockSpec> {
        self.decoder
            .iter()
            .filter(|b| b.node.0 + b.node.1 == depth - 1)
            .collect()
    }
}
