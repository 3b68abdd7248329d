//! Run reports: every command emits one JSON report with input digests, the
//! full tolerance/seed configuration, command-specific results, and a list of
//! named checks carrying both the observed value and its bound.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub bound: f64,
}

impl Check {
    /// observed <= bound.
    pub fn le(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            pass: observed <= bound,
            observed,
            bound,
        }
    }

    /// observed >= bound.
    pub fn ge(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            pass: observed >= bound,
            observed,
            bound,
        }
    }

    /// Boolean check; observed is 1 for true, bound is 1.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            pass: ok,
            observed: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub tol_validate: f64,
    pub tol_flow: f64,
    pub tol_antipode: f64,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub step_h: f64,
    pub max_time: f64,
    pub sample_every: f64,
    pub method: String,
    pub renormalize: bool,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub config: ConfigEcho,
    pub results: Value,
    pub checks: Vec<Check>,
    pub wall_time_ms: u64,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// FNV-1a digest of raw bytes, hex-encoded; stable across runs and platforms.
pub fn digest(bytes: &[u8]) -> String {
    let mut h = moebius::space::Fnv1a::new();
    h.update(bytes);
    format!("{:016x}", h.finish())
}
