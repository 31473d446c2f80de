use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::forward::Spectrum;
use crate::geometry::{default_geometry, Grid, ImagingGeometry};
use crate::objects::CircuitSpec;
use crate::recon_fbp::FbpSettings;
use crate::recon_mle::{MleSettings, PriorSettings};
use crate::volume::{VoxelSize, CIRCUIT_VOXEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mle,
    Fbp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::Fbp => "fbp",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "mle" => Ok(Method::Mle),
            "fbp" => Ok(Method::Fbp),
            _ => Err(TomoError::Config(format!("unknown method {s:?}, expected mle or fbp"))),
        }
    }
}

/// Approximant written next to each truth by `export`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMode {
    Mle,
    Fbp,
    /// Detector transmission `g / N0` with dims (cols, rows, angles).
    Raw,
}

impl ExportMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportMode::Mle => "mle",
            ExportMode::Fbp => "fbp",
            ExportMode::Raw => "raw",
        }
    }

    pub fn parse(s: &str) -> Result<ExportMode> {
        match s {
            "mle" => Ok(ExportMode::Mle),
            "fbp" => Ok(ExportMode::Fbp),
            "raw" => Ok(ExportMode::Raw),
            _ => Err(TomoError::Config(format!("unknown export mode {s:?}, expected mle, fbp or raw"))),
        }
    }
}

/// Ground-truth object family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phantom {
    #[default]
    Circuit,
    /// Independent coin toss per voxel on the circuit grid.
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportSettings {
    pub mode: ExportMode,
    pub photons: f64,
}

impl Default for ExportSettings {
    fn default() -> Self {
        ExportSettings { mode: ExportMode::Mle, photons: 640.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub circuit: CircuitSpec,
    pub phantom: Phantom,
    pub voxel_size: VoxelSize,
    pub geometry: ImagingGeometry,
    /// Simulation spectrum; its photon count is replaced per condition.
    pub spectrum: Spectrum,
    pub mle: MleSettings,
    pub prior: PriorSettings,
    pub fbp: FbpSettings,
    pub photons_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub n_train: usize,
    pub n_test: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub export: ExportSettings,
}

pub fn default_photons_grid() -> Vec<f64> {
    vec![100.0, 256.0, 320.0, 400.0, 640.0, 800.0, 1000.0, 4000.0, 5000.0, 10000.0]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            circuit: CircuitSpec::default(),
            phantom: Phantom::default(),
            voxel_size: CIRCUIT_VOXEL,
            geometry: default_geometry(),
            spectrum: Spectrum::default(),
            mle: MleSettings::default(),
            prior: PriorSettings::default(),
            fbp: FbpSettings::default(),
            photons_grid: default_photons_grid(),
            methods: vec![Method::Mle, Method::Fbp],
            n_train: 400,
            n_test: 50,
            master_seed: 0,
            out_dir: PathBuf::from("run"),
            export: ExportSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TomoError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| TomoError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        if let Phantom::Bernoulli { p } = self.phantom {
            if !(0.0..=1.0).contains(&p) {
                return Err(TomoError::Config(format!("bernoulli p must lie in [0, 1], got {p}")));
            }
        }
        self.grid().validate().map_err(|e| TomoError::Config(e.to_string()))?;
        self.geometry.validate().map_err(|e| TomoError::Config(e.to_string()))?;
        self.spectrum.validate()?;
        self.mle.validate()?;
        self.prior.validate()?;
        self.fbp.validate()?;
        if self.photons_grid.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(TomoError::Config("photons_grid entries must be positive".into()));
        }
        if self.photons_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(TomoError::Config("photons_grid must be strictly increasing".into()));
        }
        if self.methods.is_empty() {
            return Err(TomoError::Config("methods must not be empty".into()));
        }
        if !(self.export.photons > 0.0) {
            return Err(TomoError::Config("export.photons must be positive".into()));
        }
        if self.n_samples() == 0 {
            return Err(TomoError::Config("n_train + n_test must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.circuit.dims(), self.voxel_size)
    }

    pub fn n_samples(&self) -> usize {
        self.n_train + self.n_test
    }

    pub fn spectrum_at(&self, photons: f64) -> Spectrum {
        self.spectrum.with_photons(photons)
    }
}

/// Directory-safe label: integral counts print without a fraction.
pub fn photons_label(photons: f64) -> String {
    if photons.fract() == 0.0 && photons.abs() < 1e15 {
        format!("{}", photons as i64)
    } else {
        format!("{photons}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.n_samples(), 450);
    }

    #[test]
    fn default_grid_names_every_condition() {
        let g = default_photons_grid();
        for p in [100.0, 256.0, 320.0, 400.0, 640.0, 800.0, 1000.0, 4000.0, 5000.0, 10000.0] {
            assert!(g.contains(&p));
        }
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        let cfg = RunConfig { photons_grid: vec![100.0, 100.0], ..RunConfig::default() };
        assert!(cfg.validate().unwrap_err().is_config());
        let cfg = RunConfig { photons_grid: vec![-1.0], ..RunConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn phantom_kind_parses() {
        let cfg: RunConfig = serde_json::from_str(r#"{"phantom": {"kind": "bernoulli", "p": 0.5}}"#).unwrap();
        assert_eq!(cfg.phantom, Phantom::Bernoulli { p: 0.5 });
    }

    #[test]
    fn labels() {
        assert_eq!(photons_label(256.0), "256");
        assert_eq!(photons_label(1e6), "1000000");
        assert_eq!(photons_label(12.5), "12.5");
    }
}
