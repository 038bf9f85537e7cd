//! TOML experiment configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use lamesolve::besov::make_basis;
use lamesolve::grid::Grid;
use lamesolve::symbols::Material;
use lamesolve::wholespace::EstimateParams;
use lamesolve::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub alpha: f64,
    pub beta: f64,
    pub rho_star: f64,
    pub p_prime: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let m = Material::default();
        MaterialConfig { alpha: m.alpha, beta: m.beta, rho_star: m.rho_star, p_prime: m.p_prime }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectorConfig {
    pub epsilon: f64,
    pub lambda0: f64,
}

impl Default for SectorConfig {
    fn default() -> Self {
        SectorConfig { epsilon: PI / 6.0, lambda0: 1.0 }
    }
}

/// Unset fields fall back to the per-experiment defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: Option<usize>,
    pub n: Option<usize>,
    pub extent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesovConfig {
    pub s: f64,
    pub sigma: f64,
    pub q: f64,
}

impl Default for BesovConfig {
    fn default() -> Self {
        let p = EstimateParams::default();
        BesovConfig { s: p.s, sigma: p.sigma, q: p.q }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    /// Unset: 2 lambda_4 for Stokes families, 2 lambda_0 for Lame families.
    pub gamma: Option<f64>,
    /// Unset: chosen from the smallest requested time.
    pub r_max: Option<f64>,
    pub n: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { gamma: None, r_max: None, n: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub material: MaterialConfig,
    pub sector: SectorConfig,
    pub grid: GridConfig,
    pub besov: BesovConfig,
    pub contour: ContourConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            seed: 7,
            output_dir: PathBuf::from("lamesolve-out"),
            material: MaterialConfig::default(),
            sector: SectorConfig::default(),
            grid: GridConfig::default(),
            besov: BesovConfig::default(),
            contour: ContourConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Missing file is an IO problem, malformed content a configuration one.
    pub fn load(path: &Path) -> std::result::Result<Self, crate::CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::from_toml(&text)?)
    }

    pub fn material(&self) -> Result<Material> {
        let m = &self.material;
        Material::new(m.alpha, m.beta, m.rho_star, m.p_prime)
    }

    pub fn params(&self) -> EstimateParams {
        EstimateParams { s: self.besov.s, sigma: self.besov.sigma, q: self.besov.q, ..EstimateParams::default() }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim.unwrap_or(2)
    }

    /// Grid with the configured overrides applied to the experiment default.
    pub fn grid_or(&self, n: usize, extent: f64) -> Result<Grid> {
        Grid::new(self.dim(), self.grid.n.unwrap_or(n), self.grid.extent.unwrap_or(extent))
    }

    /// Like `grid_or` but for solvers that only support two dimensions.
    pub fn plane_grid_or(&self, n: usize, extent: f64) -> Result<Grid> {
        if self.dim() != 2 {
            return Err(Error::Param(format!("this experiment runs on planar grids, got dim = {}", self.dim())));
        }
        self.grid_or(n, extent)
    }

    pub fn validate(&self) -> Result<()> {
        self.material()?;
        let SectorConfig { epsilon, lambda0 } = self.sector;
        if !(epsilon > 0.0 && epsilon < PI / 2.0) {
            return Err(Error::Param(format!("sector epsilon = {epsilon} outside (0, pi/2)")));
        }
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::Param(format!("lambda0 = {lambda0} must be positive")));
        }
        self.params().validate()?;
        if let Some(d) = self.grid.dim {
            if !(2..=3).contains(&d) {
                return Err(Error::Param(format!("grid dim = {d}, expected 2 or 3")));
            }
        }
        if self.grid.n.is_some() || self.grid.extent.is_some() {
            let g = self.grid_or(16, 1.0)?;
            make_basis(&g)?;
        }
        if self.contour.n < 16 {
            return Err(Error::Config(format!("contour n = {} below 16", self.contour.n)));
        }
        if let Some(g) = self.contour.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Param(format!("contour gamma = {g} must be positive")));
            }
        }
        if let Some(r) = self.contour.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("contour r_max = {r} must be positive")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_files() {
        let c = ExperimentConfig::from_toml("experiment = \"causality\"\n[material]\nalpha = 2.0\n[contour]\ngamma = 3.0\n").unwrap();
        assert_eq!(c.material.alpha, 2.0);
        assert_eq!(c.material.beta, 1.0);
        assert_eq!(c.contour.gamma, Some(3.0));
        assert_eq!(c.contour.n, 20);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(ExperimentConfig::from_toml("[material]\ngamma = 1.0\n"), Err(Error::Config(_))));
        let c = ExperimentConfig::from_toml("[besov]\nsigma = 0.9\n").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_toml("[material]\nalpha = -1.0\n").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_toml("[contour]\nn = 8\n").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
