//! JSON system descriptions and the bundled example systems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::DelaySystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalBounds {
    pub lower: f64,
    pub upper: f64,
}

/// On-disk form of a delay system. Matrices are row-major arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n_x: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "A_d1")]
    pub a_d1: Vec<Vec<f64>>,
    #[serde(rename = "A_d2", default, skip_serializing_if = "Option::is_none")]
    pub a_d2: Option<Vec<Vec<f64>>>,
    /// Reference values, informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytical_bounds: Option<AnalyticalBounds>,
}

fn to_matrix(name: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        let shape: Vec<usize> = rows.iter().map(Vec::len).collect();
        return Err(Error::DimensionMismatch(format!(
            "{name} must be {n}x{n}, got {} rows with lengths {shape:?}",
            rows.len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text).map_err(|e| {
            Error::InvalidInput(format!("malformed system file at line {}, column {}: {e}", e.line(), e.column()))
        })?;
        file.to_system()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system files serialize")
    }

    pub fn to_system(&self) -> Result<DelaySystem> {
        let n = self.n_x;
        if n == 0 {
            return Err(Error::InvalidInput("n_x must be positive".into()));
        }
        let a = to_matrix("A", &self.a, n)?;
        let a_d1 = to_matrix("A_d1", &self.a_d1, n)?;
        let a_d2 = self.a_d2.as_ref().map(|m| to_matrix("A_d2", m, n)).transpose()?;
        DelaySystem::new(a, a_d1, a_d2)
    }

    pub fn from_system(sys: &DelaySystem, name: Option<String>) -> Self {
        Self {
            name,
            n_x: sys.n_x(),
            a: from_matrix(&sys.a),
            a_d1: from_matrix(&sys.a_d1),
            a_d2: Some(from_matrix(&sys.a_d2)),
            analytical_bounds: None,
        }
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| "system".into())
    }
}

const BUNDLED: [(&str, &str); 3] = [
    ("example1", include_str!("../../../systems/example1.json")),
    ("example2", include_str!("../../../systems/example2.json")),
    ("example3", include_str!("../../../systems/example3.json")),
];

/// Names of the bundled example systems.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled(name: &str) -> Result<SystemFile> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| SystemFile::from_json(text))
        .unwrap_or_else(|| Err(Error::InvalidInput(format!("unknown bundled system {name:?}"))))
}
