//! JSON model files.

use nalgebra::{DMatrix, DVector};
use polyridge::basis::{AffineMap, BasisFamily};
use polyridge::grassmann::Subspace;
use polyridge::RidgeModel;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub samples: usize,
    pub residual_norm: f64,
    pub normalized_residual: f64,
    /// Decimal string so 64-bit seeds survive JSON readers that use doubles.
    pub seed: String,
    pub solver: String,
    pub status: String,
    pub iterations: usize,
    pub features: Vec<String>,
    pub target: String,
}

/// On-disk form of a fitted model. `U` is stored row-major (`m` rows of
/// length `n`); `c` follows the graded-lexicographic index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub family: BasisFamily,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub training: TrainingMetadata,
}

impl ModelDocument {
    pub fn from_model(model: &RidgeModel, training: TrainingMetadata) -> Self {
        let u = model.subspace().matrix();
        ModelDocument {
            schema_version: SCHEMA_VERSION,
            m: model.ambient_dim(),
            n: model.dim(),
            p: model.degree(),
            family: model.family(),
            a: model.affine().offset().to_vec(),
            d: model.affine().scale().to_vec(),
            u: (0..u.nrows())
                .map(|i| u.row(i).iter().copied().collect())
                .collect(),
            c: model.coefficients().iter().copied().collect(),
            training,
        }
    }

    pub fn to_model(&self) -> Result<RidgeModel, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Model(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n == 0 || self.n > self.m {
            return Err(CliError::Model(format!(
                "need 1 <= n <= m, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        if self.u.len() != self.m || self.u.iter().any(|row| row.len() != self.n) {
            return Err(CliError::Model(format!(
                "U must be {} rows of length {}",
                self.m, self.n
            )));
        }
        if self.training.features.len() != self.m {
            return Err(CliError::Model(format!(
                "{} feature names for m = {}",
                self.training.features.len(),
                self.m
            )));
        }
        let u = DMatrix::from_fn(self.m, self.n, |i, j| self.u[i][j]);
        let subspace = Subspace::new(u).map_err(|e| CliError::Model(e.to_string()))?;
        let affine = AffineMap::new(self.a.clone(), self.d.clone())
            .map_err(|e| CliError::Model(e.to_string()))?;
        RidgeModel::new(
            self.p,
            self.family,
            subspace,
            affine,
            DVector::from_vec(self.c.clone()),
            self.training.residual_norm,
        )
        .map_err(|e| CliError::Model(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("finite values serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Model(e.to_string()))
    }

    pub fn read(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
