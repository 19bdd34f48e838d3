//! Checkpoint files: a magic line, a one-line JSON header, then the raw
//! little-endian `f32` payload of every tensor in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amp::LossScalerState;
use crate::error::{Error, Result};
use crate::model::{Graph, ModelConfig};
use crate::nn::{BN_EPS, BN_MOMENTUM};
use crate::optim::AdamState;
use crate::scalar::{DType, Scalar};

const MAGIC: &str = "DENOISE-CKPT v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorGroup {
    Param,
    Buffer,
    AdamM,
    AdamV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub group: TensorGroup,
    pub shape: Vec<usize>,
    pub dtype: DType,
    /// Byte offset into the payload.
    pub offset: u64,
}

/// Training bookkeeping stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub val_loss: f64,
    pub lr: f64,
    pub adam_step: u64,
    pub scaler: Option<LossScalerState>,
    /// Execution mode label of the run that wrote the file.
    #[serde(default)]
    pub mode: String,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub amp: bool,
}

/// Batch-norm constants the weights were trained with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct NormSettings {
    momentum: f64,
    eps: f64,
}

const NORM: NormSettings = NormSettings {
    momentum: BN_MOMENTUM,
    eps: BN_EPS,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    seed: u64,
    norm: NormSettings,
    tensors: Vec<TensorEntry>,
    meta: CheckpointMeta,
}

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub graph: Graph<T>,
    /// Present when the file carried optimizer moments.
    pub adam: Option<AdamState<T>>,
    pub meta: CheckpointMeta,
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    graph: &Graph<T>,
    adam: Option<&AdamState<T>>,
    meta: &CheckpointMeta,
) -> Result<()> {
    let mut tensors = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    let mut push = |name: &str, group: TensorGroup, shape: &[usize], data: &[T]| {
        tensors.push(TensorEntry {
            name: name.to_string(),
            group,
            shape: shape.to_vec(),
            dtype: DType::F32,
            offset: payload.len() as u64,
        });
        for v in data {
            payload.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    };
    for (n, t) in graph.params() {
        push(n, TensorGroup::Param, t.shape(), t.data());
    }
    for (n, t) in graph.buffers() {
        push(n, TensorGroup::Buffer, t.shape(), t.data());
    }
    if let Some(a) = adam {
        for ((n, t), (m, v)) in graph.params().iter().zip(a.m.iter().zip(&a.v)) {
            push(n, TensorGroup::AdamM, t.shape(), m);
            push(n, TensorGroup::AdamV, t.shape(), v);
        }
    }
    let header = Header {
        config: *graph.config(),
        seed: graph.seed(),
        norm: NORM,
        tensors,
        meta: meta.clone(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut bytes = Vec::with_capacity(payload.len() + 4096);
    writeln!(bytes, "{MAGIC}").expect("vec write");
    serde_json::to_writer(&mut bytes, &header)?;
    bytes.push(b'\n');
    bytes.extend_from_slice(&payload);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Rebuilds the graph from the stored config and seed, then overwrites every
/// tensor from the payload. Any name or shape disagreement is a load error.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, rest) =
        split_line(&bytes).ok_or_else(|| Error::Load("missing magic line".into()))?;
    if magic != MAGIC.as_bytes() {
        return Err(Error::Load("not a checkpoint file".into()));
    }
    let (head, payload) = split_line(rest).ok_or_else(|| Error::Load("missing header".into()))?;
    let header: Header =
        serde_json::from_slice(head).map_err(|e| Error::Load(format!("bad header: {e}")))?;
    if header.norm != NORM {
        return Err(Error::Load(format!(
            "checkpoint uses batch-norm {:?}, this build uses {:?}",
            header.norm, NORM
        )));
    }
    let mut graph = Graph::<T>::build(header.config, header.seed)
        .map_err(|e| Error::Load(format!("stored config rejected: {e}")))?;
    let mut adam = AdamState::new(&graph, header.meta.lr);
    adam.step_count = header.meta.adam_step;
    let mut seen = [0usize; 4];
    for e in &header.tensors {
        let values = read_payload::<T>(payload, e)?;
        let slot = match e.group {
            TensorGroup::Param => graph.params_mut().get_index_of(&e.name).map(|i| (0, i)),
            TensorGroup::Buffer => graph.buffers().get_index_of(&e.name).map(|i| (1, i)),
            TensorGroup::AdamM => graph.params().get_index_of(&e.name).map(|i| (2, i)),
            TensorGroup::AdamV => graph.params().get_index_of(&e.name).map(|i| (3, i)),
        };
        let (g, i) = slot.ok_or_else(|| Error::Load(format!("unexpected tensor {}", e.name)))?;
        let expected_shape = match g {
            1 => graph.buffers()[i].shape().to_vec(),
            _ => graph.params()[i].shape().to_vec(),
        };
        if expected_shape != e.shape {
            return Err(Error::Load(format!(
                "tensor {} has shape {:?}, model expects {:?}",
                e.name, e.shape, expected_shape
            )));
        }
        let target: &mut [T] = match g {
            0 => graph.params_mut()[i].data_mut(),
            1 => graph.buffers_mut()[i].data_mut(),
            2 => &mut adam.m[i],
            _ => &mut adam.v[i],
        };
        target.copy_from_slice(&values);
        seen[g] += 1;
    }
    if seen[0] != graph.params().len() || seen[1] != graph.buffers().len() {
        return Err(Error::Load(
            "checkpoint does not cover every parameter and buffer".into(),
        ));
    }
    let has_adam = seen[2] == graph.params().len() && seen[3] == graph.params().len();
    if !has_adam && seen[2] + seen[3] > 0 {
        return Err(Error::Load("partial optimizer state".into()));
    }
    Ok(Checkpoint {
        graph,
        adam: has_adam.then_some(adam),
        meta: header.meta,
    })
}

/// Loads a checkpoint and checks it holds the architecture the caller expects.
pub fn load_for_config<T: Scalar>(path: &Path, cfg: &ModelConfig) -> Result<Checkpoint<T>> {
    let ck = load_checkpoint::<T>(path)?;
    if ck.graph.config() != cfg {
        return Err(Error::Load(format!(
            "checkpoint holds {:?}, expected {:?}",
            ck.graph.config(),
            cfg
        )));
    }
    Ok(ck)
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let nl = bytes.iter().position(|&b| b == b'\n')?;
    Some((&bytes[..nl], &bytes[nl + 1..]))
}

fn read_payload<T: Scalar>(payload: &[u8], e: &TensorEntry) -> Result<Vec<T>> {
    if e.dtype != DType::F32 {
        return Err(Error::Load(format!(
            "tensor {} stored as {:?}",
            e.name, e.dtype
        )));
    }
    let n: usize = e.shape.iter().product();
    let start = usize::try_from(e.offset).map_err(|_| Error::Load("offset overflow".into()))?;
    let end = start + 4 * n;
    let raw = payload
        .get(start..end)
        .ok_or_else(|| Error::Load(format!("payload truncated at tensor {}", e.name)))?;
    Ok(raw
        .chunks_exact(4)
        .map(|c| T::from_f64_lossy(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect())
}
