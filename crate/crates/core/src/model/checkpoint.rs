//! Single-file model container: a magic line, a little-endian `u64` header
//! length, a JSON header, then every parameter as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, Method, Model, TrainConfig};
use crate::data::TaskKind;
use crate::error::{GrdaError, Result};
use crate::graph::NodeEmbeddingTable;
use crate::tensor::{ParamStore, Tensor};

pub const CKPT_MAGIC: &str = "grda-ckpt-v1\n";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    method: Method,
    task: TaskKind,
    config: Option<TrainConfig>,
    embeddings: NodeEmbeddingTable,
    architecture: Architecture,
    tensors: Vec<TensorEntry>,
}

impl Model {
    pub fn to_bytes(&self, config: Option<&TrainConfig>) -> Result<Vec<u8>> {
        let mut tensors = Vec::new();
        let mut data: Vec<u8> = Vec::new();
        let mut offset = 0;
        for (_, p) in self.store.iter() {
            tensors.push(TensorEntry { name: p.name.clone(), shape: p.value.shape().to_vec(), offset });
            offset += p.value.numel();
            for v in p.value.data() {
                data.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            format: CKPT_MAGIC.trim().to_string(),
            method: self.method,
            task: self.task,
            config: config.cloned(),
            embeddings: self.embeddings.clone(),
            architecture: self.arch.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(CKPT_MAGIC.len() + 8 + json.len() + data.len());
        out.extend_from_slice(CKPT_MAGIC.as_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&data);
        Ok(out)
    }

    /// Returns the model and the training configuration stored with it.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, Option<TrainConfig>)> {
        let bad = |m: &str| GrdaError::input(format!("not a valid checkpoint: {m}"));
        let mut r = bytes;
        let mut magic = vec![0u8; CKPT_MAGIC.len()];
        r.read_exact(&mut magic).map_err(|_| bad("truncated"))?;
        if magic != CKPT_MAGIC.as_bytes() {
            return Err(bad("missing grda-ckpt-v1 tag"));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| bad("truncated"))?;
        let len = usize::try_from(u64::from_le_bytes(len)).map_err(|_| bad("header length"))?;
        if r.len() < len {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&r[..len])?;
        let data = &r[len..];
        let mut store = ParamStore::new();
        for t in &header.tensors {
            let n: usize = t.shape.iter().product();
            let start = t.offset * 8;
            let chunk = data.get(start..start + n * 8).ok_or_else(|| bad("truncated tensor data"))?;
            let values =
                chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
            store.add(t.name.clone(), Tensor::new(t.shape.clone(), values)?);
        }
        let model = Model {
            method: header.method,
            task: header.task,
            embeddings: header.embeddings,
            arch: header.architecture,
            store,
        };
        Ok((model, header.config))
    }

    pub fn save(&self, path: &Path, config: Option<&TrainConfig>) -> Result<()> {
        let bytes = self.to_bytes(config)?;
        let mut f = std::fs::File::create(path).map_err(|e| GrdaError::io(path, e))?;
        f.write_all(&bytes).map_err(|e| GrdaError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, Option<TrainConfig>)> {
        let bytes = std::fs::read(path).map_err(|e| GrdaError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
