use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::LsOptions;
use crate::io::sha256_hex;
use crate::potentials::{PotentialKind, PotentialSpec, SmoothnessSpec};

/// Where the true potential comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum PotentialSource {
    /// Synthetic fixture sampled on the configured grid.
    Fixture(PotentialSpec),
    /// MCIP container on disk.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// DtN data, zero background.
    Algo1,
    /// DtN data, diagonal background `diag(Λ)·1_D`.
    Algo1a,
    /// Scattering-amplitude data.
    Algo2,
    /// Linearized reconstruction from the scattering amplitude.
    Born,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Algo1 => "algo1",
            Algorithm::Algo1a => "algo1a",
            Algorithm::Algo2 => "algo2",
            Algorithm::Born => "born",
        }
    }

    pub fn uses_dtn(self) -> bool {
        matches!(self, Algorithm::Algo1 | Algorithm::Algo1a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Absolute L² sizes of the data perturbation.
    pub levels: Vec<f64>,
    /// Independent noise draws per level.
    pub draws: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { levels: vec![1e-4, 1e-3, 1e-2], draws: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    /// Evaluate every `stride`-th node of the potential grid.
    pub stride: usize,
    /// Window radius beyond the support radius.
    pub margin: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { stride: 1, margin: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub condition_limit: f64,
    pub residual_limit: f64,
    pub dtn_self_convergence: f64,
    pub dtn_richardson: bool,
    pub forward: LsOptions,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            condition_limit: crate::numerics::linalg::DEFAULT_CONDITION_LIMIT,
            residual_limit: 1e-9,
            dtn_self_convergence: 1e-3,
            dtn_richardson: true,
            forward: LsOptions::default(),
        }
    }
}

/// One experiment. Every field has a default; the stored copy has all of
/// them materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub potential: PotentialSource,
    pub smoothness: SmoothnessSpec,
    /// Ascending, positive.
    pub energies: Vec<f64>,
    /// Circle grid size `N` at the lowest energy.
    pub circle_grid: usize,
    /// Grow `N` like `√E` (next power of two) across the energy list.
    pub scale_circle_grid: bool,
    /// Boundary grid `N_b` for DtN data.
    pub boundary_grid: usize,
    /// Radial grid `N_r` of the DtN solver.
    pub radial_grid: usize,
    /// Diagonal background levels `Λ` for `algo1a`.
    pub background: Vec<f64>,
    pub noise: NoiseConfig,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub window: WindowConfig,
    pub output_dir: PathBuf,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            potential: PotentialSource::Fixture(PotentialSpec {
                kind: PotentialKind::PolynomialCompact { amplitude: 1.0, exponent: 3 },
                channels: 2,
                support_radius: 1.0,
                half_width: 1.5,
                nx: 64,
            }),
            smoothness: SmoothnessSpec::default(),
            energies: vec![50.0, 100.0, 200.0, 400.0],
            circle_grid: 64,
            scale_circle_grid: true,
            boundary_grid: 128,
            radial_grid: 256,
            background: vec![1.0, 2.0],
            noise: NoiseConfig::default(),
            seed: 0,
            algorithm: Algorithm::Algo2,
            window: WindowConfig::default(),
            output_dir: PathBuf::from("out"),
            tolerances: Tolerances::default(),
        }
    }
}

fn power_of_two(name: &str, v: usize) -> Result<()> {
    if !v.is_power_of_two() {
        return Err(Error::Config(format!("{name} must be a power of two, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        power_of_two("circle_grid", self.circle_grid)?;
        power_of_two("boundary_grid", self.boundary_grid)?;
        power_of_two("radial_grid", self.radial_grid)?;
        if self.circle_grid < 8 {
            return Err(Error::Config("circle_grid must be at least 8".into()));
        }
        if let PotentialSource::Fixture(spec) = &self.potential {
            power_of_two("potential.nx", spec.nx)?;
            if self.algorithm.uses_dtn() && spec.support_radius > 1.0 {
                return Err(Error::Config(format!("DtN data needs support inside the unit disk, got radius {}", spec.support_radius)));
            }
            if self.algorithm == Algorithm::Algo1a && self.background.len() != spec.channels {
                return Err(Error::Config(format!("background has {} levels for {} channels", self.background.len(), spec.channels)));
            }
        }
        if self.energies.is_empty() {
            return Err(Error::Config("energy list is empty".into()));
        }
        if self.energies.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Config("energies must be positive".into()));
        }
        if self.energies.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("energies must be strictly ascending".into()));
        }
        if self.noise.levels.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        if self.window.stride == 0 || !(self.window.margin >= 0.0) {
            return Err(Error::Config("window stride must be positive and margin non-negative".into()));
        }
        if !(self.tolerances.condition_limit > 1.0) || !(self.tolerances.residual_limit > 0.0) {
            return Err(Error::Config("condition limit must exceed 1 and residual limit must be positive".into()));
        }
        self.smoothness.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Canonical JSON with every default written out.
    pub fn materialized(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical JSON.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// `N` used at energy `e`.
    pub fn circle_grid_at(&self, e: f64) -> usize {
        if !self.scale_circle_grid {
            return self.circle_grid;
        }
        let base = self.energies[0];
        let want = (self.circle_grid as f64 * (e / base).max(1.0).sqrt()).ceil() as usize;
        want.next_power_of_two()
    }
}

/// JSON Schema of [`ExperimentConfig`].
pub fn config_schema() -> String {
    serde_json::to_string_pretty(&schemars::schema_for!(ExperimentConfig)).expect("schema serializes")
}
