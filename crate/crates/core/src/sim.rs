//! Fixed-step integration of closed and open loops with a streaming
//! Lyapunov/passivity auditor.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_traits::Float;

use crate::controller::{self, PiLaw, RobustGains};
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::model::PlantModel;
use crate::storage::SeparableStorage;
use crate::{Matrix, Vector};

pub const DEFAULT_BLOWUP_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

/// Early stop once `‖x - x*‖ ≤ state_tolerance` and `‖e_a‖ ≤ ea_tolerance`
/// have held for `dwell` time units. Requires oracle data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleCriterion {
    pub state_tolerance: f64,
    pub ea_tolerance: f64,
    pub dwell: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub horizon: f64,
    pub method: Method,
    pub blowup_bound: f64,
    /// Record every k-th grid point (the final point is always recorded).
    pub record_every: usize,
    pub settle: Option<SettleCriterion>,
}

impl IntegratorConfig {
    pub fn new(step: f64, horizon: f64) -> Result<Self> {
        let cfg = Self {
            step,
            horizon,
            method: Method::Rk4,
            blowup_bound: DEFAULT_BLOWUP_BOUND,
            record_every: 1,
            settle: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn with_settle(mut self, settle: SettleCriterion) -> Self {
        self.settle = Some(settle);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig("step must be positive"));
        }
        if !(self.horizon > self.step && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig("horizon must exceed the step"));
        }
        if !(self.blowup_bound > 0.0) {
            return Err(Error::InvalidConfig("blow-up bound must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        Float::round(self.horizon / self.step) as usize
    }
}

/// Autonomous right-hand side `ẏ = F(y)`; `&mut self` allows scratch reuse.
pub trait Dynamics {
    fn dim(&self) -> usize;
    fn eval(&mut self, y: &[f64], dy: &mut [f64]);
}

pub struct FnDynamics<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64], &mut [f64])> FnDynamics<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: FnMut(&[f64], &mut [f64])> Dynamics for FnDynamics<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&mut self, y: &[f64], dy: &mut [f64]) {
        (self.f)(y, dy)
    }
}

/// In-place RK4/Euler stepper with preallocated stage buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    method: Method,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(dim: usize, method: Method) -> Self {
        Self {
            method,
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` by `h`. Returns `false` (leaving `y` untouched) when a
    /// stage evaluation or the result is not finite.
    pub fn step(&mut self, field: &mut impl Dynamics, y: &mut [f64], h: f64) -> bool {
        let n = y.len();
        match self.method {
            Method::Euler => {
                field.eval(y, &mut self.k1);
                if !all_finite(&self.k1) {
                    return false;
                }
                for i in 0..n {
                    self.tmp[i] = y[i] + h * self.k1[i];
                }
            }
            Method::Rk4 => {
                field.eval(y, &mut self.k1);
                for i in 0..n {
                    self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
                }
                field.eval(&self.tmp, &mut self.k2);
                for i in 0..n {
                    self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
                }
                field.eval(&self.tmp, &mut self.k3);
                for i in 0..n {
                    self.tmp[i] = y[i] + h * self.k3[i];
                }
                field.eval(&self.tmp, &mut self.k4);
                let w = h / 6.0;
                for i in 0..n {
                    self.tmp[i] =
                        y[i] + w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
                }
            }
        }
        if !all_finite(&self.tmp) {
            return false;
        }
        y.copy_from_slice(&self.tmp);
        true
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// One step from `state`; non-finite output is reported as a blow-up at `t = 0`.
pub fn integrate_step(field: &mut impl Dynamics, state: &Vector, h: f64, method: Method) -> Result<Vector> {
    check_len("state", field.dim(), state.len())?;
    let mut y = state.clone();
    let mut stepper = Stepper::new(state.len(), method);
    if stepper.step(field, y.as_mut_slice(), h) {
        Ok(y)
    } else {
        Err(Error::BlowUp {
            time: 0.0,
            last_state: state.iter().copied().collect(),
        })
    }
}

/// Plant in feedback with a PI law; the state is `(x, z)`.
pub struct ClosedLoop<'a> {
    plant: &'a PlantModel,
    law: &'a dyn PiLaw,
    x_a: Vec<f64>,
    u: Vec<f64>,
    z_dot: Vec<f64>,
    signal: Vec<f64>,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(plant: &'a PlantModel, law: &'a dyn PiLaw) -> Result<Self> {
        let m = plant.dims().m();
        check_len("controller inputs", m, law.inputs())?;
        Ok(Self {
            plant,
            law,
            x_a: vec![0.0; m],
            u: vec![0.0; m],
            z_dot: vec![0.0; m],
            signal: vec![0.0; m],
        })
    }

    /// Control at `y = (x, z)`.
    pub fn control_into(&mut self, y: &[f64], u: &mut [f64]) {
        let n = self.plant.dims().n();
        let (x, z) = y.split_at(n);
        for (k, &i) in self.plant.input().actuated_rows().iter().enumerate() {
            self.x_a[k] = x[i];
        }
        self.law.step_into(&self.x_a, z, u, &mut self.z_dot, &mut self.signal);
    }
}

impl Dynamics for ClosedLoop<'_> {
    fn dim(&self) -> usize {
        self.plant.dims().n() + self.plant.dims().m()
    }

    fn eval(&mut self, y: &[f64], dy: &mut [f64]) {
        let n = self.plant.dims().n();
        let (x, z) = y.split_at(n);
        let (dx, dz) = dy.split_at_mut(n);
        for (k, &i) in self.plant.input().actuated_rows().iter().enumerate() {
            self.x_a[k] = x[i];
        }
        self.law.step_into(&self.x_a, z, &mut self.u, dz, &mut self.signal);
        self.plant.drift_into(x, dx);
        self.plant.input().add_input(&self.u, dx);
    }
}

/// Incremental input `ũ(t)` applied on top of `u*`.
pub trait InputSignal {
    fn value_into(&self, t: f64, out: &mut [f64]);
}

/// `ũ(t) = values[k]` on `[k·hold, (k+1)·hold)`, last value held afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    pub hold: f64,
    pub values: Vec<Vector>,
}

impl PiecewiseConstant {
    /// Seeded random levels uniform in `[-amplitude, amplitude]`.
    pub fn random(m: usize, pieces: usize, hold: f64, amplitude: f64, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..pieces)
            .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-amplitude..=amplitude)))
            .collect();
        Self { hold, values }
    }
}

impl InputSignal for PiecewiseConstant {
    fn value_into(&self, t: f64, out: &mut [f64]) {
        if self.values.is_empty() {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        // A small guard keeps grid points exactly on a break in the new piece.
        let k = Float::floor(t / self.hold + 1e-9).max(0.0) as usize;
        out.copy_from_slice(self.values[k.min(self.values.len() - 1)].as_slice());
    }
}

/// Plant driven by `u* + ũ(t)`, with `ũ` held constant over each step.
struct OpenLoop<'a> {
    plant: &'a PlantModel,
    u: Vec<f64>,
}

impl Dynamics for OpenLoop<'_> {
    fn dim(&self) -> usize {
        self.plant.dims().n()
    }

    fn eval(&mut self, y: &[f64], dy: &mut [f64]) {
        self.plant.drift_into(y, dy);
        self.plant.input().add_input(&self.u, dy);
    }
}

/// Data that only a verifier has: the storage, `u*` and the Λ matrices.
#[derive(Debug, Clone)]
pub struct Oracle {
    storage: SeparableStorage,
    u_star: Vector,
    lambda_i: Option<Matrix>,
    lambda_p: Option<Matrix>,
    /// Simulation coordinates are `storage coordinates + offset`.
    offset: Option<Vector>,
}

impl Oracle {
    pub fn new(storage: SeparableStorage, u_star: Vector) -> Result<Self> {
        check_len("u*", storage.phis().len(), u_star.len())?;
        Ok(Self {
            storage,
            u_star,
            lambda_i: None,
            lambda_p: None,
            offset: None,
        })
    }

    /// Attaches `Λ_I` and `Λ_P` of a robust law so `W` and the `Ẇ`
    /// identity can be audited.
    pub fn for_robust(storage: SeparableStorage, u_star: Vector, gains: &RobustGains) -> Result<Self> {
        let li = controller::lambda_i(gains, storage.weights())?;
        let lp = controller::lambda_p(gains, storage.weights())?;
        Ok(Self::new(storage, u_star)?.with_lambdas(li, Some(lp)))
    }

    pub fn with_lambdas(mut self, lambda_i: Matrix, lambda_p: Option<Matrix>) -> Self {
        self.lambda_i = Some(lambda_i);
        self.lambda_p = lambda_p;
        self
    }

    pub fn with_offset(mut self, offset: Vector) -> Self {
        self.offset = Some(offset);
        self
    }

    pub fn storage(&self) -> &SeparableStorage {
        &self.storage
    }

    pub fn u_star(&self) -> &Vector {
        &self.u_star
    }

    pub fn lambda_i(&self) -> Option<&Matrix> {
        self.lambda_i.as_ref()
    }

    pub fn lambda_p(&self) -> Option<&Matrix> {
        self.lambda_p.as_ref()
    }

    pub fn offset(&self) -> Option<&Vector> {
        self.offset.as_ref()
    }

    /// `x*` in simulation coordinates.
    pub fn target(&self) -> Vector {
        match &self.offset {
            Some(o) => self.storage.x_star() + o,
            None => self.storage.x_star().clone(),
        }
    }
}

/// Oracle quantities at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSample {
    pub u_storage: f64,
    pub w: f64,
    pub q: f64,
    pub e_norm: f64,
    pub ea_norm: f64,
    /// `eᵀ ũ`.
    pub supply: f64,
    /// `eᵀ ũ` with the input of the previous sample, i.e. the one held over
    /// the step that ends here.
    pub held_supply: f64,
    /// `-Q - eᵀ Λ_P e` when `Λ_P` is known.
    pub dotw_rhs: Option<f64>,
}

/// Evaluates oracle samples with reusable scratch space.
pub struct OracleProbe<'a> {
    oracle: &'a Oracle,
    plant: &'a PlantModel,
    f_star: Vector,
    shifted: Vec<f64>,
    f: Vec<f64>,
    x_a: Vec<f64>,
    e: Vec<f64>,
    z_tilde: Vec<f64>,
    u_prev: Option<Vec<f64>>,
}

impl<'a> OracleProbe<'a> {
    pub fn new(oracle: &'a Oracle, plant: &'a PlantModel) -> Result<Self> {
        let n = plant.dims().n();
        let m = plant.dims().m();
        check_len("oracle storage", n, oracle.storage.dim())?;
        if oracle.storage.actuated_rows() != plant.input().actuated_rows() {
            return Err(Error::InvalidConfig("oracle storage and plant disagree on actuated rows"));
        }
        let f_star = plant.drift(&oracle.target());
        Ok(Self {
            oracle,
            plant,
            f_star,
            shifted: vec![0.0; n],
            f: vec![0.0; n],
            x_a: vec![0.0; m],
            e: vec![0.0; m],
            z_tilde: vec![0.0; m],
            u_prev: None,
        })
    }

    /// `x` in simulation coordinates; `z` empty for open-loop runs.
    pub fn sample(&mut self, x: &[f64], z: &[f64], u: &[f64]) -> OracleSample {
        let storage = &self.oracle.storage;
        match &self.oracle.offset {
            Some(o) => {
                for i in 0..x.len() {
                    self.shifted[i] = x[i] - o[i];
                }
            }
            None => self.shifted.copy_from_slice(x),
        }
        let xs = &self.shifted;
        let u_storage = storage.incremental_storage_slice(xs);
        self.plant.drift_into(x, &mut self.f);
        let q = storage.dissipation_from(xs, &self.f, self.f_star.as_slice());
        for (k, &i) in storage.actuated_rows().iter().enumerate() {
            self.x_a[k] = xs[i];
        }
        storage.passive_output_into(storage.g2(), &self.x_a, &mut self.e);
        let e_norm = linalg::norm(&self.e);
        let ea_norm = Float::sqrt(q * q + e_norm * e_norm);
        let supply: f64 = (0..u.len())
            .map(|k| self.e[k] * (u[k] - self.oracle.u_star[k]))
            .sum();
        let held_supply = match &mut self.u_prev {
            Some(prev) => {
                let v = (0..u.len()).map(|k| self.e[k] * (prev[k] - self.oracle.u_star[k])).sum();
                prev.copy_from_slice(u);
                v
            }
            None => {
                self.u_prev = Some(u.to_vec());
                supply
            }
        };
        let mut w = u_storage;
        if let (Some(li), false) = (&self.oracle.lambda_i, z.is_empty()) {
            for k in 0..z.len() {
                self.z_tilde[k] = z[k] - self.oracle.u_star[k];
            }
            w += 0.5 * controller::quadratic_form(li, &self.z_tilde);
        }
        let dotw_rhs = self
            .oracle
            .lambda_p
            .as_ref()
            .filter(|_| !z.is_empty())
            .map(|lp| -q - controller::quadratic_form(lp, &self.e));
        OracleSample {
            u_storage,
            w,
            q,
            e_norm,
            ea_norm,
            supply,
            held_supply,
            dotw_rhs,
        }
    }
}

/// `(Q(x), e(x_a))` for `x` in simulation coordinates.
pub fn augmented_error(oracle: &Oracle, plant: &PlantModel, x: &Vector) -> Result<Vector> {
    check_len("state", plant.dims().n(), x.len())?;
    let shifted = match oracle.offset() {
        Some(o) => x - o,
        None => x.clone(),
    };
    let storage = oracle.storage();
    let q = storage.dissipation_from(
        shifted.as_slice(),
        plant.drift(x).as_slice(),
        plant.drift(&oracle.target()).as_slice(),
    );
    let e = storage.output_error(shifted.as_slice());
    let mut out = DVector::zeros(1 + e.len());
    out[0] = q;
    out.rows_mut(1, e.len()).copy_from(&e);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// `max_k (W_{k+1} - W_k)`, floored at zero.
    pub max_w_increase: f64,
    /// `max_t U(x(t)) - U(x(0)) - ∫ eᵀũ`, trapezoidal, floored at zero.
    pub passivity_gap: f64,
    pub final_state_error: f64,
    pub e_a_final: f64,
    /// `max_k |(W_{k+1} - W_{k-1}) / 2h + Q_k + e_kᵀ Λ_P e_k|` over
    /// interior points, when `Λ_P` is known.
    pub dotw_identity_residual: Option<f64>,
    /// `max |W'''|` from third differences; the central-difference part of
    /// the residual is bounded by `h² / 6` times this.
    pub w_third_derivative: f64,
    /// Grid points the audit covered.
    pub samples: usize,
}

/// Streaming reduction behind [`AuditReport`].
#[derive(Debug, Clone)]
pub struct Auditor {
    h: f64,
    target: Vector,
    count: usize,
    u0: f64,
    w_prev3: f64,
    w_prev2: f64,
    w_prev: f64,
    w_third: f64,
    rhs_prev: Option<f64>,
    supply_prev: f64,
    integral: f64,
    max_w_increase: f64,
    passivity_gap: f64,
    residual: Option<f64>,
    last_error: f64,
    last_ea: f64,
}

impl Auditor {
    pub fn new(h: f64, target: Vector) -> Self {
        Self {
            h,
            target,
            count: 0,
            u0: 0.0,
            w_prev3: 0.0,
            w_prev2: 0.0,
            w_prev: 0.0,
            w_third: 0.0,
            rhs_prev: None,
            supply_prev: 0.0,
            integral: 0.0,
            max_w_increase: 0.0,
            passivity_gap: 0.0,
            residual: None,
            last_error: f64::NAN,
            last_ea: f64::NAN,
        }
    }

    pub fn push(&mut self, x: &[f64], s: &OracleSample) {
        if self.count == 0 {
            self.u0 = s.u_storage;
        } else {
            self.max_w_increase = self.max_w_increase.max(s.w - self.w_prev);
            self.integral += 0.5 * self.h * (self.supply_prev + s.held_supply);
            let gap = s.u_storage - self.u0 - self.integral;
            self.passivity_gap = self.passivity_gap.max(gap);
        }
        if self.count >= 2 {
            if let Some(rhs) = self.rhs_prev {
                let fd = (s.w - self.w_prev2) / (2.0 * self.h);
                let r = (fd - rhs).abs();
                self.residual = Some(self.residual.map_or(r, |v: f64| v.max(r)));
            }
        }
        if self.count >= 3 {
            let d3 = s.w - 3.0 * self.w_prev + 3.0 * self.w_prev2 - self.w_prev3;
            self.w_third = self.w_third.max(d3.abs() / (self.h * self.h * self.h));
        }
        self.w_prev3 = self.w_prev2;
        self.w_prev2 = self.w_prev;
        self.w_prev = s.w;
        self.rhs_prev = s.dotw_rhs;
        self.supply_prev = s.supply;
        self.last_ea = s.ea_norm;
        self.last_error = Float::sqrt(
            x.iter()
                .zip(self.target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
        );
        self.count += 1;
    }

    /// Running `∫ eᵀũ`.
    pub fn supply_integral(&self) -> f64 {
        self.integral
    }

    pub fn report(&self) -> AuditReport {
        AuditReport {
            max_w_increase: self.max_w_increase,
            passivity_gap: self.passivity_gap,
            final_state_error: self.last_error,
            e_a_final: self.last_ea,
            dotw_identity_residual: self.residual,
            w_third_derivative: self.w_third,
            samples: self.count,
        }
    }
}

/// Oracle columns of a recorded trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleTrace {
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    pub u_storage: Vec<f64>,
    pub e_norms: Vec<f64>,
    pub e_a_norms: Vec<f64>,
    pub supply_integral: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub controls: Vec<Vector>,
    /// Empty vectors for open-loop runs.
    pub z_states: Vec<Vector>,
    pub trace: Option<OracleTrace>,
    /// Audit over every integration step, not only the recorded ones.
    pub audit: Option<AuditReport>,
    /// Start of the final settled stretch, when a settle criterion fired.
    pub settled_at: Option<f64>,
    pub step: f64,
}

impl Trajectory {
    fn new(step: f64) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            controls: Vec::new(),
            z_states: Vec::new(),
            trace: None,
            audit: None,
            settled_at: None,
            step,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&Vector> {
        self.states.last()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

struct Recorder<'a> {
    cfg: &'a IntegratorConfig,
    probe: Option<OracleProbe<'a>>,
    auditor: Option<Auditor>,
    traj: Trajectory,
    settle_start: Option<f64>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a IntegratorConfig, plant: &'a PlantModel, oracle: Option<&'a Oracle>) -> Result<Self> {
        if cfg.settle.is_some() && oracle.is_none() {
            return Err(Error::InvalidConfig("settle criterion needs oracle data"));
        }
        let probe = oracle.map(|o| OracleProbe::new(o, plant)).transpose()?;
        let auditor = oracle.map(|o| Auditor::new(cfg.step, o.target()));
        let mut traj = Trajectory::new(cfg.step * cfg.record_every as f64);
        if oracle.is_some() {
            traj.trace = Some(OracleTrace::default());
        }
        Ok(Self {
            cfg,
            probe,
            auditor,
            traj,
            settle_start: None,
        })
    }

    /// Returns `true` once the settle criterion has held long enough.
    fn observe(&mut self, k: usize, last: bool, x: &[f64], z: &[f64], u: &[f64]) -> bool {
        let t = k as f64 * self.cfg.step;
        let mut sample = None;
        if let (Some(probe), Some(auditor)) = (self.probe.as_mut(), self.auditor.as_mut()) {
            let s = probe.sample(x, z, u);
            auditor.push(x, &s);
            sample = Some(s);
        }
        let mut done = false;
        if let (Some(c), Some(s), Some(a)) = (self.cfg.settle, sample, self.auditor.as_ref()) {
            if a.last_error <= c.state_tolerance && s.ea_norm <= c.ea_tolerance {
                let start = *self.settle_start.get_or_insert(t);
                done = t - start >= c.dwell;
            } else {
                self.settle_start = None;
            }
        }
        if k.is_multiple_of(self.cfg.record_every) || last || done {
            self.traj.times.push(t);
            self.traj.states.push(DVector::from_column_slice(x));
            self.traj.controls.push(DVector::from_column_slice(u));
            self.traj.z_states.push(DVector::from_column_slice(z));
            if let (Some(tr), Some(s), Some(a)) = (self.traj.trace.as_mut(), sample, self.auditor.as_ref()) {
                tr.w.push(s.w);
                tr.q.push(s.q);
                tr.u_storage.push(s.u_storage);
                tr.e_norms.push(s.e_norm);
                tr.e_a_norms.push(s.ea_norm);
                tr.supply_integral.push(a.supply_integral());
            }
        }
        done
    }

    fn finish(mut self, settled: bool) -> Trajectory {
        self.traj.audit = self.auditor.as_ref().map(Auditor::report);
        if settled {
            self.traj.settled_at = self.settle_start;
        }
        self.traj
    }
}

fn check_bound(x: &[f64], bound: f64) -> bool {
    linalg::norm(x) <= bound
}

/// Integrates `ẋ = f(x) + G u`, `ż` from the PI law.
pub fn simulate_closed_loop(
    plant: &PlantModel,
    law: &dyn PiLaw,
    x0: &Vector,
    z0: &Vector,
    cfg: &IntegratorConfig,
    oracle: Option<&Oracle>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = plant.dims().n();
    let m = plant.dims().m();
    check_len("x0", n, x0.len())?;
    check_len("z0", m, z0.len())?;
    let mut cl = ClosedLoop::new(plant, law)?;
    let mut rec = Recorder::new(cfg, plant, oracle)?;
    let mut stepper = Stepper::new(n + m, cfg.method);
    let mut y: Vec<f64> = x0.iter().chain(z0.iter()).copied().collect();
    let mut u = vec![0.0; m];
    let steps = cfg.steps();
    let mut settled = false;
    for k in 0..=steps {
        cl.control_into(&y, &mut u);
        if rec.observe(k, k == steps, &y[..n], &y[n..], &u) {
            settled = true;
            break;
        }
        if k == steps {
            break;
        }
        let before = y.clone();
        if !stepper.step(&mut cl, &mut y, cfg.step) || !check_bound(&y[..n], cfg.blowup_bound) {
            return Err(Error::BlowUp {
                time: k as f64 * cfg.step,
                last_state: before,
            });
        }
    }
    Ok(rec.finish(settled))
}

/// Integrates `ẋ = f(x) + G (u* + ũ(t))` with `ũ` sampled at each step start.
pub fn simulate_open_loop(
    plant: &PlantModel,
    u_star: &Vector,
    input: &dyn InputSignal,
    x0: &Vector,
    cfg: &IntegratorConfig,
    oracle: Option<&Oracle>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = plant.dims().n();
    let m = plant.dims().m();
    check_len("x0", n, x0.len())?;
    check_len("u*", m, u_star.len())?;
    let mut ol = OpenLoop {
        plant,
        u: vec![0.0; m],
    };
    let mut rec = Recorder::new(cfg, plant, oracle)?;
    let mut stepper = Stepper::new(n, cfg.method);
    let mut x = x0.as_slice().to_vec();
    let mut u_tilde = vec![0.0; m];
    let steps = cfg.steps();
    let mut settled = false;
    for k in 0..=steps {
        input.value_into(k as f64 * cfg.step, &mut u_tilde);
        for i in 0..m {
            ol.u[i] = u_star[i] + u_tilde[i];
        }
        let u = ol.u.clone();
        if rec.observe(k, k == steps, &x, &[], &u) {
            settled = true;
            break;
        }
        if k == steps {
            break;
        }
        let before = x.clone();
        if !stepper.step(&mut ol, &mut x, cfg.step) || !check_bound(&x, cfg.blowup_bound) {
            return Err(Error::BlowUp {
                time: k as f64 * cfg.step,
                last_state: before,
            });
        }
    }
    Ok(rec.finish(settled))
}

/// Replays the auditor over recorded grid points. Exact for runs recorded
/// with `record_every = 1`; coarser records give a coarser audit.
pub fn audit(trajectory: &Trajectory, oracle: &Oracle, plant: &PlantModel) -> Result<AuditReport> {
    let mut probe = OracleProbe::new(oracle, plant)?;
    let mut auditor = Auditor::new(trajectory.step, oracle.target());
    for k in 0..trajectory.len() {
        let x = trajectory.states[k].as_slice();
        let s = probe.sample(x, trajectory.z_states[k].as_slice(), trajectory.controls[k].as_slice());
        auditor.push(x, &s);
    }
    Ok(auditor.report())
}
