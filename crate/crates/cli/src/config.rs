//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use qeflab_core::{BasisConfig, Mat, McConfig, OscillatorSpec, PanelGrid, ScanConfig};

use crate::error::CliError;

/// Published JSON schema of [`RunConfig`].
pub const SCHEMA: &str = include_str!("../config/run_config.schema.json");
/// Example configuration for the one-mode fixture.
pub const EXAMPLE: &str = include_str!("../config/fixture.json");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub oscillator: OscillatorConfig,
    pub grid: GridConfig,
    pub eigen: EigenConfig,
    pub qef: QefConfig,
    pub mc: McSection,
    pub fock: FockConfig,
    pub output_dir: PathBuf,
}

/// Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorConfig {
    pub ccr: Vec<Vec<f64>>,
    pub energy: Vec<Vec<f64>>,
    pub coupling: Vec<Vec<f64>>,
    pub horizon: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub panels: usize,
    pub nodes_per_panel: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub omega_min: f64,
    /// Required but nullable.
    #[serde(deserialize_with = "nullable")]
    pub omega_max: Option<f64>,
    pub samples: usize,
    pub capture_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QefConfig {
    pub theta_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub samples: usize,
    pub seed: u64,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub omega_list: Vec<f64>,
    pub quad_order: usize,
    /// Largest accepted corner-block error, also the quadrature-change threshold.
    pub tolerance: f64,
}

fn nullable<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Option::<f64>::deserialize(d)
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::config("InvalidConfig", message)
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Mat, CliError> {
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::config("SchemaViolation", format!("{name} must be a non-empty rectangular array")));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn ensure_finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::config("SchemaViolation", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("ConfigUnreadable", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Range checks beyond the schema; model errors keep their own codes.
    pub fn validate(&self) -> Result<(), CliError> {
        self.spec()?;
        if self.grid.panels == 0 || self.grid.nodes_per_panel < 2 {
            return Err(invalid("grid needs at least one panel and two nodes per panel"));
        }
        let e = &self.eigen;
        ensure_finite("eigen.omega_min", e.omega_min)?;
        if e.omega_min <= 0.0 {
            return Err(invalid("eigen.omega_min must be positive"));
        }
        if let Some(hi) = e.omega_max {
            ensure_finite("eigen.omega_max", hi)?;
            if hi <= e.omega_min {
                return Err(invalid("eigen.omega_max must exceed eigen.omega_min"));
            }
        }
        if e.samples < 2 {
            return Err(invalid("eigen.samples must be at least 2"));
        }
        if !(e.capture_fraction > 0.0 && e.capture_fraction < 1.0) {
            return Err(invalid("eigen.capture_fraction must lie in (0, 1)"));
        }
        for &t in &self.qef.theta_list {
            ensure_finite("qef.theta_list", t)?;
            if t < 0.0 {
                return Err(invalid("qef.theta_list entries must be nonnegative"));
            }
        }
        if self.qef.theta_list.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("qef.theta_list must be sorted ascending"));
        }
        self.mc_config(None).validate().map_err(|e| invalid(e.to_string()))?;
        let f = &self.fock;
        if f.n < 4 || f.quad_order == 0 {
            return Err(invalid("fock.N must be at least 4 and fock.quad_order positive"));
        }
        ensure_finite("fock.tolerance", f.tolerance)?;
        if f.tolerance <= 0.0 {
            return Err(invalid("fock.tolerance must be positive"));
        }
        for &w in &f.omega_list {
            ensure_finite("fock.omega_list", w)?;
            if w < 0.0 {
                return Err(invalid("fock.omega_list entries must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<OscillatorSpec, CliError> {
        let o = &self.oscillator;
        let spec = OscillatorSpec::new(
            matrix("oscillator.ccr", &o.ccr)?,
            matrix("oscillator.energy", &o.energy)?,
            matrix("oscillator.coupling", &o.coupling)?,
            o.horizon,
            o.theta,
        )?;
        Ok(spec)
    }

    pub fn grid(&self) -> Result<PanelGrid, CliError> {
        Ok(PanelGrid::new(self.oscillator.horizon, self.grid.panels, self.grid.nodes_per_panel)?)
    }

    pub fn basis_config(&self) -> BasisConfig {
        BasisConfig {
            scan: ScanConfig {
                omega_min: self.eigen.omega_min,
                omega_max: self.eigen.omega_max,
                samples: self.eigen.samples,
            },
            capture_fraction: self.eigen.capture_fraction,
        }
    }

    /// Monte-Carlo settings, with the seed optionally overridden.
    pub fn mc_config(&self, seed: Option<u64>) -> McConfig {
        McConfig { samples: self.mc.samples, seed: seed.unwrap_or(self.mc.seed), batches: self.mc.batches }
    }
}
