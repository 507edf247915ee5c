//! Self-describing JSON checkpoint container.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::adam::AdamHyper;
use super::norm::NormStats;
use super::params::{CellDims, SharedCellParams};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// A named parameter array with its row/column dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

/// All arrays of one shared cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub dims: CellDims,
    pub arrays: Vec<NamedArray>,
}

impl CellRecord {
    pub fn from_params(p: &SharedCellParams) -> Self {
        let arrays = p
            .tensors()
            .iter()
            .zip(p.tensor_dims())
            .map(|((name, t), d)| NamedArray { name: name.to_string(), dims: d.to_vec(), data: t.to_vec() })
            .collect();
        Self { dims: p.dims, arrays }
    }

    pub fn to_params(&self) -> Result<SharedCellParams> {
        let mut p = SharedCellParams::zeros(self.dims);
        let expected = p.tensor_dims();
        for ((name, slot), dims) in p.tensors_mut().into_iter().zip(expected) {
            let arr = self
                .arrays
                .iter()
                .find(|a| a.name == name)
                .ok_or_else(|| Error::Input(format!("checkpoint is missing array {name}")))?;
            if arr.dims != dims || arr.data.len() != slot.len() {
                return Err(Error::Input(format!(
                    "checkpoint array {name} has dims {:?}, expected {:?}",
                    arr.dims, dims
                )));
            }
            slot.copy_from_slice(&arr.data);
        }
        p.validate()?;
        Ok(p)
    }
}

/// Checkpoint of a cascade model: topology metadata `T`, optimizer
/// hyperparameters, normalization statistics, and one cell record per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub format_version: u32,
    pub kind: String,
    pub topology: T,
    pub hyper: AdamHyper,
    pub normalization: NormStats,
    pub units: Vec<CellRecord>,
}

impl<T: Serialize + DeserializeOwned> Checkpoint<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str, expected_kind: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported checkpoint format version {} (expected {FORMAT_VERSION})",
                ck.format_version
            )));
        }
        if ck.kind != expected_kind {
            return Err(Error::Input(format!(
                "checkpoint holds a {} model, expected {expected_kind}",
                ck.kind
            )));
        }
        ck.normalization.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path, expected_kind: &str) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read checkpoint {}: {e}", path.display())))?;
        Self::from_json(&text, expected_kind)
    }
}
