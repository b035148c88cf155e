//! Turns a [`ScenarioConfig`] into models, laws, oracles and samplers.

use std::collections::BTreeMap;
use std::sync::Arc;

use pipbc_core::controller::{
    matched_ideal_gains, IdealPiPbc, PerturbedEstimate, PerturbedPiPbc, PiLaw, RobustGains, RobustPiPbc,
};
use pipbc_core::model::{self, InputMatrix, LinearField, PlantModel, VectorField, EQUILIBRIUM_TOLERANCE};
use pipbc_core::ph::PhModel;
use pipbc_core::sampling::BoxSampler;
use pipbc_core::sim::{self, IntegratorConfig, Method, Oracle, SettleCriterion, Trajectory};
use pipbc_core::storage::{
    DiagonalWeights, PhiFamily, QuadraticQuartic, SeparableEnergy, SeparableStorage, SeparableTerm,
};
use pipbc_core::thermal::{self, QuarticPower, ThermalModel, ThermalSpec};
use pipbc_core::verify::{self, CertificationReport, Subject};
use pipbc_core::{instances, Matrix, Vector};

use crate::config::{HamiltonianConfig, MethodConfig, PlantConfig, ScenarioConfig, TermConfig, Variant};
use crate::error::CliError;

/// Independent random streams derived from the scenario seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Certification = 1,
    InitialConditions = 2,
    Perturbation = 3,
}

/// SplitMix64 of `seed` mixed with the stream tag.
pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    let mut z = seed ^ (stream as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A plant registered in code for `kind = "custom"` configurations.
#[derive(Clone)]
pub struct CustomPlant {
    pub g: Matrix,
    pub field: Arc<dyn VectorField>,
    /// Storage used by the certifier and the oracle; its target is replaced.
    pub storage: SeparableStorage,
}

#[derive(Clone, Default)]
pub struct Registry {
    plants: BTreeMap<String, CustomPlant>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `linear_damped`: `f(x) = [[-1, 1], [-1, -1]] x`, `H = ½‖x‖²`.
    /// `concave_counterexample`: a storage whose actuated term is concave.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        let g = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let input = InputMatrix::new(g.clone()).expect("builtin G");
        let quad: Arc<dyn SeparableTerm> = Arc::new(QuadraticQuartic::quadratic(1.0));
        let storage = SeparableStorage::new(
            &input,
            Arc::new(SeparableEnergy::new(vec![1.0], vec![quad.clone()]).expect("builtin H_u")),
            DiagonalWeights::new(Vector::from_element(1, 1.0)).expect("builtin D"),
            PhiFamily::new(vec![quad]).expect("builtin phi"),
            Vector::zeros(2),
        )
        .expect("builtin storage");
        r.register(
            "linear_damped",
            CustomPlant {
                g,
                field: Arc::new(
                    LinearField::new(Matrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, -1.0])).expect("builtin field"),
                ),
                storage,
            },
        );
        let c = instances::concave_storage();
        r.register(
            "concave_counterexample",
            CustomPlant {
                g: c.g,
                field: c.field,
                storage: c.storage,
            },
        );
        r
    }

    pub fn register(&mut self, name: &str, plant: CustomPlant) {
        self.plants.insert(name.to_string(), plant);
    }

    pub fn get(&self, name: &str) -> Option<&CustomPlant> {
        self.plants.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.plants.keys().map(String::as_str)
    }
}

#[derive(Clone)]
pub enum PlantKind {
    Thermal(ThermalModel),
    Ph(PhModel),
    Custom(CustomPlant),
}

/// A validated scenario. States are temperatures for thermal plants and
/// the model's own coordinates otherwise.
#[derive(Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub kind: PlantKind,
    pub plant: PlantModel,
    pub x_star: Vector,
    /// `None` when `x*` is not assignable.
    pub u_star: Option<Vector>,
    /// Oracle storage at `x*`, or the reason it is unavailable.
    pub storage: Result<SeparableStorage, String>,
}

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    Matrix::from_fn(r, c, |i, j| rows[i][j])
}

fn vector(v: &[f64]) -> Vector {
    Vector::from_column_slice(v)
}

fn terms(t: &[TermConfig]) -> Vec<Arc<dyn SeparableTerm>> {
    t.iter()
        .map(|t| {
            Arc::new(QuadraticQuartic {
                quadratic: t.quadratic,
                quartic: t.quartic,
            }) as Arc<dyn SeparableTerm>
        })
        .collect()
}

fn hamiltonian(input: &InputMatrix, h: &HamiltonianConfig) -> Result<SeparableStorage, CliError> {
    let n = input.dims().n();
    Ok(SeparableStorage::new(
        input,
        Arc::new(SeparableEnergy::new(h.h_u_weights.clone(), terms(&h.h_u))?),
        DiagonalWeights::new(vector(&h.d))?,
        PhiFamily::new(terms(&h.phi))?,
        Vector::zeros(n),
    )?)
}

impl Scenario {
    pub fn from_config(config: ScenarioConfig, registry: &Registry) -> Result<Self, CliError> {
        config.validate()?;
        let (kind, plant) = match &config.plant {
            PlantConfig::Thermal { a1, a2, t_rad, t_conv, g } => {
                let m = ThermalModel::new(ThermalSpec {
                    a1: matrix(a1),
                    a2: matrix(a2),
                    t_rad: vector(t_rad),
                    t_conv: vector(t_conv),
                    g: matrix(g),
                })?;
                let p = m.temperature_plant();
                (PlantKind::Thermal(m), p)
            }
            PlantConfig::Ph { j, r, g, hamiltonian: h } => {
                let input = InputMatrix::new(matrix(g))?;
                let hs = hamiltonian(&input, h)?;
                let m = PhModel::new(matrix(j), matrix(r), input, hs)?;
                let p = m.plant();
                (PlantKind::Ph(m), p)
            }
            PlantConfig::Custom { name } => {
                let c = registry.get(name).ok_or_else(|| {
                    let known: Vec<&str> = registry.names().collect();
                    CliError::Config(format!("unknown custom plant `{name}` (registered: {})", known.join(", ")))
                })?;
                let p = PlantModel::new(c.field.clone(), InputMatrix::new(c.g.clone())?)?;
                (PlantKind::Custom(c.clone()), p)
            }
        };
        let n = plant.dims().n();
        let x_star = match (&config.target.actuated, &config.target.full) {
            (Some(a), _) => match &kind {
                PlantKind::Thermal(m) => m.assignable_target(&vector(a))?,
                _ => model::complete_assignable(&plant, &vector(a), &Vector::zeros(n - plant.dims().m()), 1e-12)?,
            },
            (None, Some(full)) => {
                if full.len() != n {
                    return Err(CliError::Config(format!("target has {} entries, plant has {n}", full.len())));
                }
                vector(full)
            }
            (None, None) => unreachable!("validated"),
        };
        let m = plant.dims().m();
        if config.gains.gamma_p.len() != m {
            return Err(CliError::Config(format!("gains have {} entries, plant has {m} inputs", config.gains.gamma_p.len())));
        }
        let u_star = model::solve_ustar(&plant, &x_star, EQUILIBRIUM_TOLERANCE).ok();
        let storage = match &kind {
            PlantKind::Thermal(tm) => thermal::diagonal_stability_solve(tm.a1())
                .map_err(|e| e.to_string())
                .and_then(|c| thermal::temperature_storage(tm, &c.p, x_star.clone()).map_err(|e| e.to_string())),
            PlantKind::Ph(pm) => pm.storage_at(x_star.clone()).map_err(|e| e.to_string()),
            PlantKind::Custom(c) => c.storage.with_target(x_star.clone()).map_err(|e| e.to_string()),
        };
        Ok(Self {
            config,
            kind,
            plant,
            x_star,
            u_star,
            storage,
        })
    }

    pub fn n(&self) -> usize {
        self.plant.dims().n()
    }

    pub fn m(&self) -> usize {
        self.plant.dims().m()
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn x_a_star(&self) -> Vector {
        self.plant.input().actuated_part(self.x_star.as_slice())
    }

    fn default_box(&self) -> (Vector, Vector) {
        match &self.kind {
            PlantKind::Thermal(m) => m.default_box(Some(&self.x_star)),
            _ => (self.x_star.add_scalar(-2.0), self.x_star.add_scalar(2.0)),
        }
    }

    fn configured_box(&self, lower: &Option<Vec<f64>>, upper: &Option<Vec<f64>>, default: (Vector, Vector)) -> (Vector, Vector) {
        (
            lower.as_deref().map_or(default.0, vector),
            upper.as_deref().map_or(default.1, vector),
        )
    }

    pub fn certification_sampler(&self) -> Result<BoxSampler, CliError> {
        let s = &self.config.sampler;
        let (lo, hi) = self.configured_box(&s.lower, &s.upper, self.default_box());
        let seed = s.seed.unwrap_or_else(|| derive_seed(self.seed(), Stream::Certification));
        Ok(BoxSampler::new(lo, hi, s.count, seed)?)
    }

    pub fn certify(&self) -> Result<CertificationReport, CliError> {
        let sampler = self.certification_sampler()?;
        Ok(match &self.kind {
            PlantKind::Thermal(m) => verify::certify(Subject::Thermal(m), &self.x_star, &sampler),
            PlantKind::Ph(m) => verify::certify(Subject::PortHamiltonian(m), &self.x_star, &sampler),
            PlantKind::Custom(c) => verify::certify(
                Subject::Custom {
                    g: &c.g,
                    field: c.field.clone(),
                    storage: Some(&c.storage),
                },
                &self.x_star,
                &sampler,
            ),
        })
    }

    /// Explicit states, seeded random draws, or the default start.
    pub fn initial_conditions(&self) -> Result<Vec<Vector>, CliError> {
        let ic = &self.config.initial;
        let n = self.n();
        let check = |x: Vector| {
            if x.len() == n {
                Ok(x)
            } else {
                Err(CliError::Config(format!("initial state has {} entries, plant has {n}", x.len())))
            }
        };
        if let Some(states) = &ic.states {
            return states.iter().map(|s| check(vector(s))).collect();
        }
        if let Some(count) = ic.random {
            let default = match &self.kind {
                PlantKind::Thermal(m) => (Vector::zeros(n), m.t_bar() * 2.0),
                _ => self.default_box(),
            };
            let (lo, hi) = self.configured_box(&ic.lower, &ic.upper, default);
            let sampler = BoxSampler::new(lo, hi, count, derive_seed(self.seed(), Stream::InitialConditions))?;
            return Ok(sampler.points()?);
        }
        Ok(vec![match &self.kind {
            PlantKind::Thermal(m) => m.t_bar().clone(),
            _ => Vector::zeros(n),
        }])
    }

    pub fn z0(&self) -> Result<Vector, CliError> {
        match &self.config.initial.z0 {
            Some(z) if z.len() == self.m() => Ok(vector(z)),
            Some(z) => Err(CliError::Config(format!("z0 has {} entries, plant has {} inputs", z.len(), self.m()))),
            None => Ok(Vector::zeros(self.m())),
        }
    }

    pub fn gains(&self) -> (Vector, Vector) {
        (vector(&self.config.gains.gamma_p), vector(&self.config.gains.gamma_i))
    }

    pub fn robust_gains(&self, gamma_p: Vector, gamma_i: Vector) -> Result<RobustGains, CliError> {
        Ok(RobustGains::new(gamma_p, gamma_i, self.plant.input().g2().clone())?)
    }

    fn oracle_storage(&self) -> Result<&SeparableStorage, CliError> {
        self.storage
            .as_ref()
            .map_err(|e| CliError::Certification(format!("no storage function available: {e}")))
    }

    fn controller_phis(&self) -> Result<PhiFamily, CliError> {
        match &self.kind {
            PlantKind::Thermal(_) => Ok(PhiFamily::uniform(Arc::new(QuarticPower), self.m())?),
            PlantKind::Ph(m) => Ok(m.hamiltonian().phis().clone()),
            PlantKind::Custom(c) => Ok(c.storage.phis().clone()),
        }
    }

    pub fn robust_law(&self, gamma_p: Vector, gamma_i: Vector) -> Result<RobustPiPbc, CliError> {
        match &self.kind {
            PlantKind::Thermal(m) => Ok(thermal::build_thermal_controller(m, &self.x_star, gamma_p, gamma_i)?),
            _ => Ok(RobustPiPbc::new(
                self.robust_gains(gamma_p, gamma_i)?,
                self.controller_phis()?,
                self.x_a_star(),
            )?),
        }
    }

    /// Perturbed law with `K_P`, `K_I` matched to the true weights and
    /// `D0 = D - diag(δ)`.
    pub fn perturbed_law(
        &self,
        gamma_p: Vector,
        gamma_i: Vector,
        estimate: PerturbedEstimate,
    ) -> Result<PerturbedPiPbc, CliError> {
        let storage = self.oracle_storage()?;
        let matched = matched_ideal_gains(&self.robust_gains(gamma_p, gamma_i)?, storage.weights())?;
        Ok(PerturbedPiPbc::new(
            estimate,
            self.plant.input().g2().clone(),
            matched.kp().clone(),
            matched.ki().clone(),
            self.controller_phis()?,
            self.x_a_star(),
        )?)
    }

    /// Estimate for the configured variant: explicit `δ`, else `ratio`
    /// with signs from the perturbation stream.
    pub fn estimate(&self, ratio: Option<f64>) -> Result<PerturbedEstimate, CliError> {
        let weights = self.oracle_storage()?.weights();
        if ratio.is_none() {
            if let Some(d) = &self.config.controller.delta {
                if d.len() != self.m() {
                    return Err(CliError::Config(format!("delta has {} entries, plant has {} inputs", d.len(), self.m())));
                }
                return Ok(PerturbedEstimate::from_truth(weights, vector(d))?);
            }
        }
        let r = ratio.or(self.config.controller.ratio).unwrap_or(0.0);
        Ok(PerturbedEstimate::with_ratio(weights, r, derive_seed(self.seed(), Stream::Perturbation))?)
    }

    /// The configured controller variant.
    pub fn law(&self, gamma_p: Vector, gamma_i: Vector) -> Result<Box<dyn PiLaw>, CliError> {
        Ok(match self.config.controller.variant {
            Variant::Robust => Box::new(self.robust_law(gamma_p, gamma_i)?),
            Variant::Ideal => {
                let storage = self.oracle_storage()?.clone();
                let gains = matched_ideal_gains(&self.robust_gains(gamma_p, gamma_i)?, storage.weights())?;
                Box::new(IdealPiPbc::new(gains, storage, self.plant.input().g2().clone())?)
            }
            Variant::Perturbed => Box::new(self.perturbed_law(gamma_p, gamma_i, self.estimate(None)?)?),
        })
    }

    /// Oracle for auditing runs with the given robust gains, when both a
    /// storage function and `u*` are available.
    pub fn oracle(&self, gamma_p: &Vector, gamma_i: &Vector) -> Result<Option<Oracle>, CliError> {
        let (Ok(storage), Some(u_star)) = (&self.storage, &self.u_star) else {
            return Ok(None);
        };
        let gains = self.robust_gains(gamma_p.clone(), gamma_i.clone())?;
        Ok(Some(Oracle::for_robust(storage.clone(), u_star.clone(), &gains)?))
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        let i = &self.config.integrator;
        let mut cfg = IntegratorConfig::new(i.step, i.horizon)?
            .with_method(match i.method {
                MethodConfig::Rk4 => Method::Rk4,
                MethodConfig::Euler => Method::Euler,
            })
            .with_record_every(i.record_every);
        cfg.blowup_bound = i.blowup_bound;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn settle_criterion(&self, dwell: f64) -> SettleCriterion {
        SettleCriterion {
            state_tolerance: self.config.convergence.state_tolerance,
            ea_tolerance: self.config.convergence.ea_tolerance,
            dwell,
        }
    }

    pub fn simulate(
        &self,
        law: &dyn PiLaw,
        x0: &Vector,
        z0: &Vector,
        cfg: &IntegratorConfig,
        oracle: Option<&Oracle>,
    ) -> Result<Trajectory, CliError> {
        Ok(sim::simulate_closed_loop(&self.plant, law, x0, z0, cfg, oracle)?)
    }

    /// `‖e_a(x)‖ = ‖G2ᵀ D Φ̃‖` when the storage is known.
    pub fn ea_norm(&self, x: &Vector) -> Option<f64> {
        self.storage.as_ref().ok().map(|s| s.output_error(x.as_slice()).norm())
    }
}
