//! JSON checkpoints with value-exact parameter round trips.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{CellKind, ModelParams, ModelShape, TimeGates};
use crate::error::{Error, Result};
use crate::numfmt::to_json_string;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub cell_kind: CellKind,
    pub shape: ModelShape,
    /// Free-form training hyperparameters echoed for provenance.
    pub hyperparameters: serde_json::Value,
    pub parameters: BTreeMap<String, Tensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_gates: Option<TimeGates>,
}

impl Checkpoint {
    pub fn from_model(model: &ModelParams, hyperparameters: serde_json::Value) -> Self {
        let parameters = model
            .weights
            .tensors()
            .into_iter()
            .map(|(name, shape, data)| {
                (
                    name,
                    Tensor {
                        shape,
                        data: data.to_vec(),
                    },
                )
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            cell_kind: model.shape.cell,
            shape: model.shape,
            hyperparameters,
            parameters,
            time_gates: model.time_gates.clone(),
        }
    }

    pub fn to_model(&self) -> Result<ModelParams> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported checkpoint format {}",
                self.format_version
            )));
        }
        if self.cell_kind != self.shape.cell {
            return Err(Error::Data("cell_kind disagrees with shape".into()));
        }
        let mut model = ModelParams::zeros(self.shape);
        let expected: Vec<(String, Vec<usize>)> = model
            .weights
            .tensors()
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        if expected.len() != self.parameters.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} tensors, model needs {}",
                self.parameters.len(),
                expected.len()
            )));
        }
        for ((name, slot), (_, shape)) in model.weights.tensors_mut().into_iter().zip(&expected) {
            let t = self
                .parameters
                .get(&name)
                .ok_or_else(|| Error::Data(format!("checkpoint lacks `{name}`")))?;
            if &t.shape != shape || t.data.len() != slot.len() {
                return Err(Error::Data(format!(
                    "`{name}` has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            slot.copy_from_slice(&t.data);
        }
        if self.shape.cell == CellKind::Phased {
            let gates = self
                .time_gates
                .clone()
                .ok_or_else(|| Error::Data("phased checkpoint lacks time gates".into()))?;
            model.time_gates = Some(gates);
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(to_json_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
