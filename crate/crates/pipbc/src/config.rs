//! TOML scenario files. Matrices are lists of rows.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Every random stream (samplers, initial conditions, perturbation
    /// signs) is derived from this seed.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub plant: PlantConfig,
    pub target: TargetConfig,
    pub gains: GainsConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    pipbc_core::sampling::DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    Thermal {
        a1: Vec<Vec<f64>>,
        a2: Vec<Vec<f64>>,
        t_rad: Vec<f64>,
        t_conv: Vec<f64>,
        g: Vec<Vec<f64>>,
    },
    Ph {
        j: Vec<Vec<f64>>,
        r: Vec<Vec<f64>>,
        g: Vec<Vec<f64>>,
        hamiltonian: HamiltonianConfig,
    },
    /// A plant registered in code under `name`.
    Custom { name: String },
}

/// `H = Σ w_i ψ_i(x_u,i) + Σ d_i φ_i(x_a,i)` with quadratic-plus-quartic terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub h_u_weights: Vec<f64>,
    pub h_u: Vec<TermConfig>,
    pub d: Vec<f64>,
    pub phi: Vec<TermConfig>,
}

/// `c2 x² / 2 + c4 x⁴ / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub quadratic: f64,
    #[serde(default)]
    pub quartic: f64,
}

/// Exactly one of `actuated` (completed on the assignable set) or `full`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuated: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub gamma_p: Vec<f64>,
    pub gamma_i: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Robust,
    Ideal,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(default)]
    pub variant: Variant,
    /// `‖δ‖ / ‖d‖` for the perturbed variant, with seeded signs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Explicit `δ`; takes precedence over `ratio`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub method: MethodConfig,
    /// CSV rows are written every `record_every` steps.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_blowup")]
    pub blowup_bound: f64,
}

fn default_step() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    50.0
}
fn default_record_every() -> usize {
    100
}
fn default_blowup() -> f64 {
    pipbc_core::sim::DEFAULT_BLOWUP_BOUND
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            step: default_step(),
            horizon: default_horizon(),
            method: MethodConfig::default(),
            record_every: default_record_every(),
            blowup_bound: default_blowup(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_state_tol")]
    pub state_tolerance: f64,
    #[serde(default = "default_ea_tol")]
    pub ea_tolerance: f64,
}

fn default_state_tol() -> f64 {
    1e-3
}
fn default_ea_tol() -> f64 {
    1e-5
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            state_tolerance: default_state_tol(),
            ea_tolerance: default_ea_tol(),
        }
    }
}

/// Explicit `states`, or `random` seeded draws from `[lower, upper]`.
/// With neither, a single run starts from the open-loop equilibrium
/// (thermal) or the origin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    /// Defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Overrides the seed derived from the top-level one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_count() -> usize {
    pipbc_core::sampling::DEFAULT_SAMPLE_COUNT
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            lower: None,
            upper: None,
            count: default_count(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Scalar grid values `γ`, applied as `Γ = γ I`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma_p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma_i: Vec<f64>,
    /// Perturbation ratios `‖δ‖ / ‖d‖`, run with the configured gains.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ratios: Vec<f64>,
    /// Run gain cells until settled, up to this horizon. Without it,
    /// cells use the integrator horizon like `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settle_horizon: Option<f64>,
    #[serde(default = "default_dwell")]
    pub dwell: f64,
}

fn default_dwell() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write one CSV trace per simulated initial condition.
    #[serde(default = "default_true")]
    pub traces: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            traces: true,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks that need no model construction.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
        if self.gains.gamma_p.is_empty() || self.gains.gamma_p.len() != self.gains.gamma_i.len() {
            return bad("gamma_p and gamma_i must be nonempty and of equal length");
        }
        if !positive(&self.gains.gamma_p) || !positive(&self.gains.gamma_i) {
            return bad("gains must be strictly positive");
        }
        match (&self.target.actuated, &self.target.full) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("target needs exactly one of `actuated` or `full`"),
        }
        if let PlantConfig::Thermal { a1, a2, t_rad, t_conv, g } = &self.plant {
            let n = t_rad.len();
            if !square(a1, n) || !square(a2, n) || t_conv.len() != n || !rows(g, n) {
                return bad("thermal matrices are not dimension-consistent");
            }
        }
        if let PlantConfig::Ph { j, r, g, hamiltonian: h } = &self.plant {
            let n = j.len();
            if !square(j, n) || !square(r, n) || !rows(g, n) {
                return bad("pH matrices are not dimension-consistent");
            }
            if h.h_u.len() != h.h_u_weights.len() || h.phi.len() != h.d.len() || h.h_u.len() + h.d.len() != n {
                return bad("Hamiltonian terms do not match the state dimension");
            }
        }
        let i = &self.integrator;
        if !(i.step > 0.0 && i.horizon > i.step && i.record_every > 0) {
            return bad("integrator needs step > 0, horizon > step, record_every >= 1");
        }
        if let Some(r) = self.controller.ratio {
            if !(0.0..1.0).contains(&r) {
                return bad("perturbation ratio must lie in [0, 1)");
            }
        }
        if let Some(s) = &self.sweep {
            if !positive(&s.gamma_p) || !positive(&s.gamma_i) {
                return bad("gains must be strictly positive");
            }
            if s.gamma_p.is_empty() != s.gamma_i.is_empty() {
                return bad("sweep needs both gamma_p and gamma_i grids");
            }
            if s.ratios.iter().any(|r| !(0.0..1.0).contains(r)) {
                return bad("perturbation ratio must lie in [0, 1)");
            }
        }
        if self.sampler.count == 0 {
            return bad("sampler count must be positive");
        }
        Ok(())
    }
}

fn square(m: &[Vec<f64>], n: usize) -> bool {
    m.len() == n && m.iter().all(|r| r.len() == n)
}

fn rows(m: &[Vec<f64>], n: usize) -> bool {
    m.len() == n && m.first().is_some_and(|r| !r.is_empty()) && m.iter().all(|r| r.len() == m[0].len())
}
