//! Input loading: spaces, member points, raw coordinate vectors, and bare
//! matrices, with digest bookkeeping for the report. Loaders re-validate
//! everything they read.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use moebius::matrix::SquareMatrix;
use moebius::space::{AntipodalSpace, MoebiusPoint, Tolerances};

use crate::report::digest;

#[derive(Debug, Deserialize, Serialize)]
pub struct SpaceJson {
    pub labels: Vec<String>,
    pub rho: SquareMatrix,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct PointJson {
    pub space: String,
    pub tau: Vec<f64>,
    pub residual: f64,
}

pub struct Inputs {
    pub digests: BTreeMap<String, String>,
}

impl Inputs {
    pub fn new() -> Self {
        Inputs {
            digests: BTreeMap::new(),
        }
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.digests.insert(name.to_string(), digest(bytes));
    }

    pub fn read_file(&mut self, name: &str, path: &str) -> Result<String, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
        self.record(name, text.as_bytes());
        Ok(text)
    }

    /// Loads and re-validates a space, optionally renormalizing the kernel to
    /// diameter one first (never silently: the flag is echoed in the config).
    pub fn load_space(
        &mut self,
        path: &str,
        tol: &Tolerances,
        renormalize: bool,
    ) -> Result<AntipodalSpace, String> {
        let text = self.read_file("space", path)?;
        let parsed: SpaceJson = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
        let rho = if renormalize {
            let max = parsed.rho.iter().fold(0.0_f64, f64::max);
            if !(max > 0.0) {
                return Err(format!("{path}: cannot renormalize an all-zero matrix"));
            }
            parsed.rho.map(|x| x / max)
        } else {
            parsed.rho
        };
        AntipodalSpace::new(parsed.labels, rho, tol).map_err(|e| format!("{path}: {e}"))
    }

    /// Loads a member point and re-certifies it against the space.
    pub fn load_point(
        &mut self,
        name: &str,
        path: &str,
        space: &AntipodalSpace,
        tol_flow: f64,
    ) -> Result<MoebiusPoint, String> {
        let text = self.read_file(name, path)?;
        let parsed: PointJson = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
        let id = format!("{:016x}", space.id());
        if parsed.space != id && !looks_like_path(&parsed.space) {
            return Err(format!(
                "{path}: point belongs to space {} but {} was loaded",
                parsed.space, id
            ));
        }
        space
            .certify(parsed.tau, tol_flow.max(parsed.residual * 1.5 + 1e-15))
            .map_err(|e| format!("{path}: {e}"))
    }

    /// Parses a coordinate vector given inline (`[1,0,0]`) or as a file path.
    /// Accepts a bare array or an object with a `tau` field.
    pub fn load_tau(&mut self, name: &str, arg: &str) -> Result<Vec<f64>, String> {
        let text = if arg.trim_start().starts_with('[') || arg.trim_start().starts_with('{') {
            self.record(name, arg.as_bytes());
            arg.to_string()
        } else {
            self.read_file(name, arg)?
        };
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format!("{name}: {e}"))?;
        let arr = match &value {
            serde_json::Value::Array(_) => value.clone(),
            serde_json::Value::Object(map) => map
                .get("tau")
                .cloned()
                .ok_or_else(|| format!("{name}: object has no `tau` field"))?,
            _ => return Err(format!("{name}: expected an array or an object with `tau`")),
        };
        serde_json::from_value(arr).map_err(|e| format!("{name}: {e}"))
    }

    /// Loads a bare square matrix (either a nested array or a space JSON).
    pub fn load_matrix(&mut self, name: &str, path: &str) -> Result<SquareMatrix, String> {
        let text = self.read_file(name, path)?;
        if let Ok(m) = serde_json::from_str::<SquareMatrix>(&text) {
            return Ok(m);
        }
        let parsed: SpaceJson = serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
        Ok(parsed.rho)
    }
}

fn looks_like_path(s: &str) -> bool {
    s.contains('/') || s.contains('.') || Path::new(s).exists()
}

pub fn point_json(space_ref: &str, p: &MoebiusPoint) -> PointJson {
    PointJson {
        space: space_ref.to_string(),
        tau: p.tau().to_vec(),
        residual: p.residual(),
    }
}

pub fn space_json(space: &AntipodalSpace) -> SpaceJson {
    SpaceJson {
        labels: space.labels().to_vec(),
        rho: space.rho().clone(),
    }
}
