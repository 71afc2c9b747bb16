//! Hand model JSON document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HandModel, HandModelParts};
use crate::{Error, Result, Vec3};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk layout. `shape_basis` is K × 3 × B.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandModelFile {
    pub version: u32,
    pub template_vertices: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
    pub skinning_weights: Vec<Vec<f64>>,
    pub parents: Vec<Option<usize>>,
    pub joint_rest_positions: Vec<[f64; 3]>,
    pub shape_basis: Vec<Vec<Vec<f64>>>,
    pub joint_regressor: Vec<Vec<f64>>,
}

impl From<&HandModel> for HandModelFile {
    fn from(model: &HandModel) -> Self {
        let p = model.parts();
        let b = model.shape_count();
        HandModelFile {
            version: MODEL_FORMAT_VERSION,
            template_vertices: p
                .template_vertices
                .iter()
                .map(|v| [v.x, v.y, v.z])
                .collect(),
            faces: p.faces.clone(),
            skinning_weights: p.skinning_weights.clone(),
            parents: p.parents.clone(),
            joint_rest_positions: p
                .joint_rest_positions
                .iter()
                .map(|v| [v.x, v.y, v.z])
                .collect(),
            shape_basis: p
                .shape_basis
                .iter()
                .map(|row| {
                    (0..3)
                        .map(|c| (0..b).map(|i| row[i][c]).collect())
                        .collect()
                })
                .collect(),
            joint_regressor: p.joint_regressor.clone(),
        }
    }
}

impl HandModelFile {
    pub fn into_model(self) -> Result<HandModel> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelMismatch(format!(
                "unsupported hand model version {}",
                self.version
            )));
        }
        let b = self
            .shape_basis
            .first()
            .and_then(|r| r.first())
            .map_or(0, Vec::len);
        let mut shape_basis = Vec::with_capacity(self.shape_basis.len());
        for (k, row) in self.shape_basis.iter().enumerate() {
            if row.len() != 3 || row.iter().any(|c| c.len() != b) {
                return Err(Error::ModelMismatch(format!(
                    "shape_basis[{k}] is not 3 x {b}"
                )));
            }
            shape_basis.push(
                (0..b)
                    .map(|i| Vec3::new(row[0][i], row[1][i], row[2][i]))
                    .collect(),
            );
        }
        let vec3 = |v: &[f64; 3]| Vec3::new(v[0], v[1], v[2]);
        HandModel::new(HandModelParts {
            template_vertices: self.template_vertices.iter().map(vec3).collect(),
            faces: self.faces,
            skinning_weights: self.skinning_weights,
            parents: self.parents,
            joint_rest_positions: self.joint_rest_positions.iter().map(vec3).collect(),
            shape_basis,
            joint_regressor: self.joint_regressor,
        })
    }
}

pub fn read_model(path: &Path) -> Result<HandModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: HandModelFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    file.into_model()
}

pub fn write_model(model: &HandModel, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&HandModelFile::from(model))
        .map_err(|e| Error::parse(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
