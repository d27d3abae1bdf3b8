//! Run configuration: a single TOML file with nested sections. Unknown keys
//! are errors, so a misspelled tolerance cannot silently pass.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use aklab_core::structure::SpMode;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Single entropy source; every random field derives from it.
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub geodesic: GeodesicConfig,
    #[serde(default)]
    pub hessian: HessianConfig,
    #[serde(default)]
    pub symbol: SymbolConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Complex dimension, 1 or 2.
    pub m: usize,
    /// Points per axis, even, ≥ 8.
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    /// Band limit of the generating potential (≤ n/3).
    pub cutoff: usize,
    /// Per-component sup-norm bound; 0 gives the flat structure.
    pub amplitude: f64,
    /// Explicit mode list; when non-empty it replaces seeded generation.
    pub modes: Vec<ModeConfig>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            cutoff: 3,
            amplitude: 0.0,
            modes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    /// Wavevector k ∈ ℤ^{2m}.
    pub k: Vec<i64>,
    /// Index into the documented ordered sp(2m,ℝ) basis
    /// (symmetric blocks first, then the gl part).
    pub basis: usize,
    pub cos: f64,
    pub sin: f64,
}

impl ModeConfig {
    pub fn to_sp_mode(&self) -> SpMode {
        SpMode {
            k: self.k.clone(),
            basis: self.basis,
            cos_amp: self.cos,
            sin_amp: self.sin,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Time step; 0 selects the stability default c_cfl·h⁴/m².
    pub dt: f64,
    pub steps: usize,
    pub c_cfl: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt: 0.0,
            steps: 100,
            c_cfl: 0.005,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeodesicConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Amplitude of the random initial velocity.
    pub amplitude: f64,
    /// Band limit of the random initial velocity.
    pub cutoff: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 1e-3,
            amplitude: 0.5,
            cutoff: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct HessianConfig {
    /// Mixed finite-difference step schedule (coarse to fine).
    pub fd_steps: Vec<f64>,
    pub amplitude: f64,
    pub cutoff: usize,
}

impl Default for HessianConfig {
    fn default() -> Self {
        Self {
            fd_steps: vec![1e-2, 5e-3, 2.5e-3],
            amplitude: 0.5,
            cutoff: 4,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymbolConfig {
    pub samples: usize,
}

impl Default for SymbolConfig {
    fn default() -> Self {
        Self { samples: 1000 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Band limit of the random scalar/one-form/tangent verification inputs.
    pub input_cutoff: usize,
    /// Number of random pairs for the adjointness checks.
    pub pairs: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            input_cutoff: 2,
            pairs: 5,
        }
    }
}

/// Named tolerances of the verification suite. Absent keys take defaults;
/// unknown keys are rejected by the parser.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub identity_battery: f64,
    pub adjointness: f64,
    pub lichnerowicz_routes: f64,
    pub mohsen_gap: f64,
    /// Allowed deviation of the FD order ratio from 4.
    pub mohsen_order_window: f64,
    pub lichnerowicz_explicit: f64,
    pub salamon: f64,
    pub lie_k_composition: f64,
    pub anti_self_adjoint: f64,
    pub variation_orthogonality: f64,
    pub hessian_gap: f64,
    pub hessian_order_window: f64,
    pub symbol_extraction: f64,
    pub symbol_positivity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity_battery: 1e-6,
            adjointness: 1e-9,
            lichnerowicz_routes: 1e-9,
            mohsen_gap: 1e-5,
            mohsen_order_window: 0.5,
            lichnerowicz_explicit: 1e-6,
            salamon: 1e-7,
            lie_k_composition: 1e-7,
            anti_self_adjoint: 1e-9,
            variation_orthogonality: 1e-8,
            hessian_gap: 1e-4,
            hessian_order_window: 0.5,
            symbol_extraction: 1e-10,
            symbol_positivity: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(1..=2).contains(&self.grid.m) {
            bail!("grid.m = {} (expected 1 or 2)", self.grid.m);
        }
        if self.grid.n < 8 || self.grid.n % 2 != 0 {
            bail!("grid.n = {} (expected even n ≥ 8)", self.grid.n);
        }
        if 3 * self.potential.cutoff > self.grid.n {
            bail!(
                "potential.cutoff = {} exceeds n/3 = {}",
                self.potential.cutoff,
                self.grid.n / 3
            );
        }
        for mode in &self.potential.modes {
            if mode.k.len() != 2 * self.grid.m {
                bail!("potential mode wavevector {:?} has wrong dimension", mode.k);
            }
            let sup = mode.k.iter().map(|v| v.abs()).max().unwrap_or(0) as usize;
            if 3 * sup > self.grid.n {
                bail!("potential mode {:?} exceeds the n/3 band limit", mode.k);
            }
        }
        if self.flow.dt < 0.0 {
            bail!("flow.dt must be ≥ 0 (0 selects the stability default)");
        }
        if self.flow.dt == 0.0 && self.flow.c_cfl <= 0.0 {
            bail!("flow.c_cfl must be positive");
        }
        if self.geodesic.dt <= 0.0 || self.geodesic.t_end <= 0.0 {
            bail!("geodesic.dt and geodesic.t_end must be positive");
        }
        if self.hessian.fd_steps.is_empty() || self.hessian.fd_steps.iter().any(|s| *s <= 0.0) {
            bail!("hessian.fd_steps must be non-empty and positive");
        }
        Ok(())
    }
}
