use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fem::SigmaArc;
use crate::forward::{Component, ExcitationSpec, ForwardConfig};
use crate::inversion::NewtonConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub radius: f64,
    pub h: f64,
    /// Measurement arc `[sigma_start, sigma_end]` in radians.
    #[serde(default)]
    pub sigma_start: f64,
    #[serde(default = "full_turn")]
    pub sigma_end: f64,
}

fn full_turn() -> f64 {
    TAU
}

impl MeshConfig {
    pub fn sigma(&self) -> SigmaArc {
        SigmaArc::new(self.sigma_start, self.sigma_end)
    }
}

/// Physical material constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Speed of sound.
    pub c: f64,
    /// Diffusivity of sound.
    pub frak_b: f64,
    /// Nonlinearity parameter `B/A`.
    pub ba: f64,
    pub rho0: f64,
}

/// Disk-shaped inclusion. Unset material constants fall back to the
/// background; `component` restricts the change to one transformed
/// coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phantom {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frak_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ba: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<Component>,
}

impl Phantom {
    pub fn material(&self, background: &Material) -> Material {
        Material {
            c: self.c.unwrap_or(background.c),
            frak_b: self.frak_b.unwrap_or(background.frak_b),
            ba: self.ba.unwrap_or(background.ba),
            rho0: self.rho0.unwrap_or(background.rho0),
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Relative noise level in the measurement norm.
    pub level: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { level: 0.0, seed: 1 }
    }
}

/// Value of `η` in the reference point `x⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaReference {
    #[default]
    Background,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineData {
    pub h: f64,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilityConfig {
    pub eigenvalues: usize,
    pub floor: f64,
}

impl Default for AdmissibilityConfig {
    fn default() -> Self {
        AdmissibilityConfig { eigenvalues: 20, floor: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub output: PathBuf,
    pub gamma: f64,
    /// Solve the linear model: `η ≡ 0` in data and reconstruction.
    #[serde(default)]
    pub linear: bool,
    #[serde(default)]
    pub x0_eta: EtaReference,
    pub mesh: MeshConfig,
    pub background: Material,
    #[serde(default)]
    pub phantoms: Vec<Phantom>,
    pub excitations: Vec<ExcitationSpec>,
    pub forward: ForwardConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub admissibility: AdmissibilityConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_data: Option<FineData>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.mesh;
        if !(m.radius > 0.0 && m.h > 0.0 && m.h < m.radius) {
            return Err(Error::Config(format!("mesh needs 0 < h < radius, got h = {}, R = {}", m.h, m.radius)));
        }
        if !(m.sigma_end > m.sigma_start) {
            return Err(Error::Config("measurement arc must have positive length".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if self.excitations.len() != 3 {
            return Err(Error::Config(format!("exactly three excitations are required, got {}", self.excitations.len())));
        }
        for e in &self.excitations {
            e.validate().map_err(|err| Error::Config(err.to_string()))?;
        }
        for (k, p) in self.phantoms.iter().enumerate() {
            if !(p.radius > 0.0) || p.center[0].hypot(p.center[1]) + p.radius >= m.radius {
                return Err(Error::Config(format!("phantom {k} does not lie strictly inside the domain")));
            }
        }
        if self.forward.order < 2 {
            return Err(Error::Config("harmonic order must be at least 2".into()));
        }
        if !(self.noise.level >= 0.0) {
            return Err(Error::Config("noise level must be nonnegative".into()));
        }
        if let Some(f) = &self.fine_data {
            if !(f.h > 0.0) || f.order < self.forward.order {
                return Err(Error::Config("fine data need h > 0 and an order at least the inversion order".into()));
            }
        }
        self.newton.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "sample"
output = "runs/sample"
gamma = 1.0

[mesh]
radius = 0.2
h = 0.02

[background]
c = 10.0
frak_b = 0.05
ba = 0.0
rho0 = 1000.0

[[phantoms]]
center = [0.0, 0.1]
radius = 0.03
c = 10.11
ba = 7.0

[[phantoms]]
center = [0.1, 0.0]
radius = 0.02
frak_b = 0.052
component = "b"

[[excitations]]
period = 0.05
a_offset = 1.0
amplitude = 1000.0

[[excitations]]
period = 0.035
a_offset = 1.0
amplitude = 1000.0

[[excitations]]
period = 0.05
a_offset = 1.0
amplitude = 1000.0
psi = "doubled"

[forward]
order = 3
fp_tol = 1e-10
max_fp_iters = 50
kappa = { mode = "local" }

[newton]
max_iters = 12
"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.phantoms.len(), 2);
        assert_eq!(cfg.phantoms[1].component, Some(Component::B));
        assert_eq!(cfg.mesh.sigma_end, TAU);
        assert_eq!(cfg.newton.max_iters, 12);
        assert_eq!(cfg.newton.q, 0.6);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_bad_configs() {
        let two = SAMPLE.replacen("[[excitations]]\nperiod = 0.035\na_offset = 1.0\namplitude = 1000.0\n", "", 1);
        assert!(matches!(ExperimentConfig::from_toml(&two), Err(Error::Config(_))));
        let outside = SAMPLE.replace("center = [0.0, 0.1]", "center = [0.0, 0.18]");
        assert!(matches!(ExperimentConfig::from_toml(&outside), Err(Error::Config(_))));
        let typo = SAMPLE.replace("gamma = 1.0", "gama = 1.0");
        assert!(matches!(ExperimentConfig::from_toml(&typo), Err(Error::Parse(_))));
    }
}
