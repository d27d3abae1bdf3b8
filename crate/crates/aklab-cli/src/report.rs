//! Machine-readable reports and atomic file output.

use std::fs;
use std::path::Path;

use serde::Serialize;

use aklab_core::operators::OperatorReport;

use crate::config::RunConfig;

/// The convention sheet embedded in every report so each number is
/// interpretable post hoc.
#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub curvature_sign: &'static str,
    pub ricci: &'static str,
    pub twisted_differential: &'static str,
    pub two_form_inner_product: &'static str,
    pub flow: &'static str,
    pub symbol_normalization: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            curvature_sign: "R(X,Y) = D_[X,Y] − [D_X, D_Y]",
            ricci: "Ric(X,Y) = Σ_a g(R(e_a, X) e_a, Y); positive on the round sphere",
            twisted_differential: "(d^c f)(X) = −df(JX)",
            two_form_inner_product: "(α,β) = ½ α_ij β_kl g^ik g^jl",
            flow: "dJ/dt = JP(s^∇) = ½ Jℒ_K J",
            symbol_normalization: "flat plane-wave action of 2JP(JP)* equals ½(v,Ξ)Ξ",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerificationReport {
    pub artifact: &'static str,
    pub version: &'static str,
    pub timestamp_unix: u64,
    pub conventions: Conventions,
    pub config: RunConfig,
    pub entries: Vec<OperatorReport>,
    pub overall_pass: bool,
}

impl VerificationReport {
    pub fn new(config: RunConfig, entries: Vec<OperatorReport>) -> Self {
        let overall_pass = entries.iter().all(|e| e.pass);
        Self {
            artifact: "aklab",
            version: env!("CARGO_PKG_VERSION"),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            conventions: Conventions::default(),
            config,
            entries,
            overall_pass,
        }
    }
}

/// Writes via a temp file in the same directory plus rename, so readers
/// never observe a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
