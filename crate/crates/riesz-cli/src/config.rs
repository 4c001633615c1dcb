//! Declarative run configuration: a versioned JSON document validated before
//! any computation starts. Schema violations exit with code 2.

use riesz_core::geometry::{Region, SampleMode};
use riesz_core::kernel::RieszParams;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RunConfig {
    pub schema_version: u32,
    pub params: ParamsConfig,
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: Option<SampleMode>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub n: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Tolerances {
    pub tol_kkt: f64,
    pub tol_mass: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_kkt: 1e-8,
            tol_mass: 1e-6,
        }
    }
}

impl RunConfig {
    pub fn minimal(n: usize, alpha: f64) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            params: ParamsConfig { n, alpha },
            region: None,
            resolution: None,
            seed: None,
            mode: None,
            tolerances: Tolerances::default(),
            output_dir: None,
        }
    }

    /// Structural and range validation. Every check here runs before any
    /// numerics; violations surface as configuration errors (exit code 2).
    pub fn validate(&self) -> Result<RieszParams, String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schemaVersion {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let params = RieszParams::new(self.params.n, self.params.alpha)
            .map_err(|e| format!("params: {e}"))?;
        if let Some(region) = &self.region {
            region.validate().map_err(|e| format!("region: {e}"))?;
            let dim = region.dim().map_err(|e| format!("region: {e}"))?;
            if dim != params.n {
                return Err(format!(
                    "region dimension {dim} does not match params.n {}",
                    params.n
                ));
            }
        }
        if let Some(r) = self.resolution {
            if r == 0 {
                return Err("resolution must be positive".into());
            }
        }
        if !(self.tolerances.tol_kkt > 0.0) || !(self.tolerances.tol_mass > 0.0) {
            return Err("tolerances must be positive".into());
        }
        Ok(params)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Human-readable schema description, printed alongside usage errors.
pub const SCHEMA_DOC: &str = r#"config schema (version 1):
{
  "schemaVersion": 1,
  "params": { "n": <int >= 2>, "alpha": <0 < alpha <= 2, alpha < n> },
  "region": <region descriptor, optional>,
  "resolution": <positive int, optional>,
  "seed": <u64, optional>,
  "mode": "surface" | "volume" (optional),
  "tolerances": { "tolKkt": <positive>, "tolMass": <positive> } (optional),
  "outputDir": <path, optional>
}"#;
