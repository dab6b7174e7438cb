//! JSON checkpoints: `{format, version, meta, params: {name: {shape, data}}}`.
//!
//! Floats are written with shortest round-trip formatting and parsed with
//! correct rounding, so a save/load cycle is bit-exact.

use super::{ParamSet, Tensor, TensorError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "tosg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Architecture description needed to rebuild the parameter layout.
    pub meta: serde_json::Value,
    pub params: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamSet, meta: serde_json::Value) -> Self {
        let params = params
            .names()
            .iter()
            .zip(params.tensors())
            .map(|(n, t)| (n.clone(), StoredTensor { shape: t.shape(), data: t.data().to_vec() }))
            .collect();
        Self { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, meta, params }
    }

    /// Copies stored values into `params`, which must have exactly the same
    /// names and shapes.
    pub fn load_into(&self, params: &mut ParamSet) -> Result<(), TensorError> {
        if self.params.len() != params.len() {
            return Err(TensorError::Checkpoint(format!(
                "checkpoint has {} tensors, model has {}",
                self.params.len(),
                params.len()
            )));
        }
        let names = params.names().to_vec();
        for (i, name) in names.iter().enumerate() {
            let stored = self
                .params
                .get(name)
                .ok_or_else(|| TensorError::Checkpoint(format!("missing parameter `{name}`")))?;
            let t = &mut params.tensors_mut()[i];
            if stored.shape != t.shape() || stored.data.len() != t.len() {
                return Err(TensorError::Checkpoint(format!("shape mismatch for `{name}`")));
            }
            *t = Tensor::from_vec(stored.shape[0], stored.shape[1], stored.data.clone());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, TensorError> {
        let ck: Checkpoint = serde_json::from_str(s).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(TensorError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Ok(ck)
    }
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), TensorError> {
    std::fs::write(path, ck.to_json()).map_err(|e| TensorError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, TensorError> {
    let s = std::fs::read_to_string(path).map_err(|e| TensorError::Checkpoint(format!("{}: {e}", path.display())))?;
    Checkpoint::from_json(&s)
}
