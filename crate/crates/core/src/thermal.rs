//! Radiative-convective thermal plants `Ṫ = A1 Ψ(T) + A2 T + E + G u`
//! with `Ψ(T) = col(T_i⁴)` and `E = -A1 Ψ(T_rad) - A2 T_conv`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::{RobustGains, RobustPiPbc};
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::model::{self, InputMatrix, PlantModel, VectorField};
use crate::sampling::BoxSampler;
use crate::storage::{
    DiagonalWeights, PhiFamily, SeparableEnergy, SeparableStorage, SeparableTerm, CHECK_TOLERANCE,
};
use crate::{Matrix, Vector};

/// Residual target for the open-loop equilibrium.
pub const EQUILIBRIUM_RESIDUAL: f64 = 1e-10;
const MAX_NEWTON_ITERATIONS: usize = 100;

/// `col(T_i⁴)`.
pub fn psi(t: &Vector) -> Vector {
    t.map(|v| v * v * v * v)
}

/// Raw thermal data before derived quantities are computed.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalSpec {
    pub a1: Matrix,
    pub a2: Matrix,
    pub t_rad: Vector,
    pub t_conv: Vector,
    pub g: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalModel {
    a1: Matrix,
    a2: Matrix,
    t_rad: Vector,
    t_conv: Vector,
    input: InputMatrix,
    e: Vector,
    t_bar: Vector,
}

fn check_square(context: &'static str, n: usize, m: &Matrix) -> Result<()> {
    check_len(context, n, m.nrows())?;
    check_len(context, n, m.ncols())
}

impl ThermalModel {
    pub fn new(spec: ThermalSpec) -> Result<Self> {
        let n = spec.g.nrows();
        check_square("A1", n, &spec.a1)?;
        check_square("A2", n, &spec.a2)?;
        check_len("T_rad", n, spec.t_rad.len())?;
        check_len("T_conv", n, spec.t_conv.len())?;
        if spec.t_rad.iter().chain(spec.t_conv.iter()).any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidConfig("reference temperatures must be nonnegative"));
        }
        if !linalg::is_hurwitz(&spec.a1) {
            return Err(Error::NotHurwitz("A1"));
        }
        if !linalg::is_hurwitz(&spec.a2) {
            return Err(Error::NotHurwitz("A2"));
        }
        let input = InputMatrix::new(spec.g)?;
        let e = -(&spec.a1 * psi(&spec.t_rad)) - &spec.a2 * &spec.t_conv;
        let guess = spec.t_rad.zip_map(&spec.t_conv, f64::max);
        let t_bar = solve_open_loop_equilibrium(&spec.a1, &spec.a2, &e, &guess)?;
        Ok(Self {
            a1: spec.a1,
            a2: spec.a2,
            t_rad: spec.t_rad,
            t_conv: spec.t_conv,
            input,
            e,
            t_bar,
        })
    }

    pub fn n(&self) -> usize {
        self.e.len()
    }

    pub fn a1(&self) -> &Matrix {
        &self.a1
    }

    pub fn a2(&self) -> &Matrix {
        &self.a2
    }

    pub fn t_rad(&self) -> &Vector {
        &self.t_rad
    }

    pub fn t_conv(&self) -> &Vector {
        &self.t_conv
    }

    pub fn input(&self) -> &InputMatrix {
        &self.input
    }

    pub fn e(&self) -> &Vector {
        &self.e
    }

    /// Open-loop equilibrium `T̄`.
    pub fn t_bar(&self) -> &Vector {
        &self.t_bar
    }

    /// `A1 Ψ(T) + A2 T + E`.
    pub fn drift_temperature(&self, t: &Vector) -> Vector {
        &self.a1 * psi(t) + &self.a2 * t + &self.e
    }

    pub fn equilibrium_residual(&self) -> f64 {
        self.drift_temperature(&self.t_bar).norm()
    }

    /// `f(x) = A1 Ψ(x + T̄) + A2 (x + T̄) + E`.
    pub fn shifted_field(&self, x: &Vector) -> Vector {
        self.drift_temperature(&(x + &self.t_bar))
    }

    /// Plant in temperature coordinates.
    pub fn temperature_plant(&self) -> PlantModel {
        let field = ThermalField {
            a1: self.a1.clone(),
            a2: self.a2.clone(),
            e: self.e.clone(),
            shift: DVector::zeros(self.n()),
        };
        PlantModel::new(Arc::new(field), self.input.clone()).expect("dimensions checked at construction")
    }

    /// Plant in shifted coordinates `x = T - T̄`.
    pub fn shifted_plant(&self) -> PlantModel {
        let field = ThermalField {
            a1: self.a1.clone(),
            a2: self.a2.clone(),
            e: self.e.clone(),
            shift: self.t_bar.clone(),
        };
        PlantModel::new(Arc::new(field), self.input.clone()).expect("dimensions checked at construction")
    }

    /// `‖G⊥ (A1 Ψ(T*) + A2 T* + E)‖`.
    pub fn assignable_residual(&self, t_star: &Vector) -> Result<f64> {
        Ok(model::assignable_residual(&self.temperature_plant(), t_star)?.norm())
    }

    /// Completes `T*` from its actuated part by solving the unactuated rows.
    pub fn assignable_target(&self, t_a_star: &Vector) -> Result<Vector> {
        let guess = self.input.unactuated_part(self.t_bar.as_slice());
        let t = model::complete_assignable(&self.temperature_plant(), t_a_star, &guess, 1e-13)?;
        if t.iter().any(|&v| v < 0.0) {
            return Err(Error::NonphysicalEquilibrium);
        }
        Ok(t)
    }

    /// `u*` for an assignable `T*`.
    pub fn u_star(&self, t_star: &Vector) -> Result<Vector> {
        model::solve_ustar(&self.temperature_plant(), t_star, model::EQUILIBRIUM_TOLERANCE)
    }

    /// Default certification box `[0, 2 max(T̄, T*)]`, in temperature coordinates.
    pub fn default_box(&self, t_star: Option<&Vector>) -> (Vector, Vector) {
        let top = match t_star {
            Some(t) => self.t_bar.zip_map(t, f64::max),
            None => self.t_bar.clone(),
        };
        (DVector::zeros(self.n()), top * 2.0)
    }
}

struct ThermalField {
    a1: Matrix,
    a2: Matrix,
    e: Vector,
    shift: Vector,
}

impl VectorField for ThermalField {
    fn dim(&self) -> usize {
        self.e.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        // Stack buffer keeps the integrator loop allocation-free for n <= 16.
        let mut buf = [0.0; 32];
        let mut heap;
        let (t, p): (&mut [f64], &mut [f64]) = if n <= 16 {
            buf[..2 * n].split_at_mut(n)
        } else {
            heap = vec![0.0; 2 * n];
            heap.split_at_mut(n)
        };
        for i in 0..n {
            t[i] = x[i] + self.shift[i];
            let t2 = t[i] * t[i];
            p[i] = t2 * t2;
        }
        for i in 0..n {
            let mut acc = self.e[i];
            for j in 0..n {
                acc += self.a1[(i, j)] * p[j] + self.a2[(i, j)] * t[j];
            }
            out[i] = acc;
        }
    }
}

fn residual(a1: &Matrix, a2: &Matrix, e: &Vector, t: &Vector) -> Vector {
    a1 * psi(t) + a2 * t + e
}

/// Solves `A1 Ψ(T) + A2 T + E = 0` for `T ≥ 0`.
///
/// Newton with backtracking first; if that leaves the nonnegative orthant or
/// stalls, nonlinear Gauss-Seidel sweeps with per-coordinate bisection
/// produce a bracketed iterate that Newton then polishes.
pub fn solve_open_loop_equilibrium(a1: &Matrix, a2: &Matrix, e: &Vector, guess: &Vector) -> Result<Vector> {
    let n = e.len();
    check_square("A1", n, a1)?;
    check_square("A2", n, a2)?;
    check_len("initial guess", n, guess.len())?;
    if guess.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidConfig("initial guess must be nonnegative"));
    }
    match newton(a1, a2, e, guess.clone()) {
        Ok(t) if t.iter().all(|&v| v >= 0.0) => return Ok(t),
        Err(err @ Error::Singular(_)) => return Err(err),
        _ => {}
    }
    let start = bisection_sweeps(a1, a2, e, guess)?;
    let t = newton(a1, a2, e, start)?;
    if t.iter().any(|&v| v < 0.0) {
        return Err(Error::NonphysicalEquilibrium);
    }
    Ok(t)
}

fn newton(a1: &Matrix, a2: &Matrix, e: &Vector, mut t: Vector) -> Result<Vector> {
    let mut r = residual(a1, a2, e, &t);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if r.norm() <= EQUILIBRIUM_RESIDUAL {
            return Ok(t);
        }
        let jac = a1 * linalg::diag(&t.map(|v| 4.0 * v * v * v)) + a2;
        let step = jac.lu().solve(&r).ok_or(Error::Singular("equilibrium Jacobian"))?;
        let mut lambda = 1.0;
        loop {
            let trial = &t - &step * lambda;
            let rt = residual(a1, a2, e, &trial);
            if rt.norm() < r.norm() || lambda < 1e-10 {
                t = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if r.norm() <= EQUILIBRIUM_RESIDUAL {
        return Ok(t);
    }
    Err(Error::NoConvergence {
        solver: "open-loop equilibrium",
        residual: r.norm(),
        iterations: MAX_NEWTON_ITERATIONS,
        last_iterate: t.iter().copied().collect(),
    })
}

fn bisection_sweeps(a1: &Matrix, a2: &Matrix, e: &Vector, guess: &Vector) -> Result<Vector> {
    let n = e.len();
    let mut t = guess.clone();
    for sweep in 0..500 {
        for i in 0..n {
            let (a, b) = (a1[(i, i)], a2[(i, i)]);
            let rest: f64 = e[i]
                + (0..n)
                    .filter(|&j| j != i)
                    .map(|j| a1[(i, j)] * t[j].powi(4) + a2[(i, j)] * t[j])
                    .sum::<f64>();
            // g(s) = a s⁴ + b s + rest is decreasing on s ≥ 0 when a, b < 0.
            let g = |s: f64| a * s.powi(4) + b * s + rest;
            if !(a < 0.0 && b < 0.0) || g(0.0) < 0.0 {
                return Err(Error::NonphysicalEquilibrium);
            }
            let mut hi = t[i].max(1.0);
            while g(hi) > 0.0 {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::NonphysicalEquilibrium);
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            t[i] = 0.5 * (lo + hi);
        }
        let r = residual(a1, a2, e, &t).norm();
        if r <= 1e-6 || (sweep > 50 && r <= 1e-3) {
            return Ok(t);
        }
    }
    let r = residual(a1, a2, e, &t).norm();
    Err(Error::NoConvergence {
        solver: "open-loop equilibrium (bisection sweeps)",
        residual: r,
        iterations: 500,
        last_iterate: t.iter().copied().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateMethod {
    /// `P = diag(w_i / v_i)` from `A v < 0`, `Aᵀ w < 0`.
    Metzler,
    ProjectedSubgradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCertificate {
    /// Diagonal of `P`, scaled so that `max p_i = 1`.
    pub p: Vector,
    /// `-λ_max(P A + Aᵀ P) > 0`.
    pub margin: f64,
    pub method: CertificateMethod,
}

fn lyapunov_sym(a: &Matrix, p: &Vector) -> Matrix {
    let pa = linalg::diag(p) * a;
    &pa + pa.transpose()
}

fn certificate(a: &Matrix, p: Vector, method: CertificateMethod) -> Option<DiagonalCertificate> {
    let top = p.max();
    if !(top > 0.0) || p.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let p = p / top;
    let lmax = linalg::max_symmetric_eigenvalue(&lyapunov_sym(a, &p));
    (lmax < 0.0).then_some(DiagonalCertificate {
        p,
        margin: -lmax,
        method,
    })
}

/// Searches for a diagonal `P ≻ 0` with `P A + Aᵀ P ≺ 0`.
///
/// Failure of the search is not a proof of infeasibility.
pub fn diagonal_stability_solve(a: &Matrix) -> Result<DiagonalCertificate> {
    check_square("A1", a.nrows(), a)?;
    if !linalg::is_hurwitz(a) {
        return Err(Error::NoDiagonalCertificate);
    }
    let n = a.nrows();
    if linalg::is_metzler(a) {
        let ones = DVector::from_element(n, 1.0);
        let lu = a.clone().lu();
        let lu_t = a.transpose().lu();
        if let (Some(v), Some(w)) = (lu.solve(&ones), lu_t.solve(&ones)) {
            let p = (-w).component_div(&(-v));
            if let Some(c) = certificate(a, p, CertificateMethod::Metzler) {
                return Ok(c);
            }
        }
    }
    subgradient_search(a).ok_or(Error::NoDiagonalCertificate)
}

fn subgradient_search(a: &Matrix) -> Option<DiagonalCertificate> {
    const LOWER: f64 = 1e-6;
    const STARTS: usize = 16;
    const ITERATIONS: usize = 3000;
    let n = a.nrows();
    let scale = linalg::max_abs(a).max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1a9);
    let mut best: Option<DiagonalCertificate> = None;
    for start in 0..STARTS {
        let mut p = if start == 0 {
            DVector::from_element(n, 1.0)
        } else {
            DVector::from_fn(n, |_, _| rng.random_range(LOWER..=1.0))
        };
        for k in 0..ITERATIONS {
            let (lmax, v) = linalg::max_symmetric_eigen(&lyapunov_sym(a, &p));
            if lmax < 0.0 {
                break;
            }
            let av = a * &v;
            let grad = DVector::from_fn(n, |i, _| 2.0 * v[i] * av[i]);
            let gn = grad.norm();
            if gn == 0.0 {
                break;
            }
            let step = 0.5 / (scale * Float::sqrt((k + 1) as f64));
            p -= grad * (step / gn);
            p.apply(|x| *x = x.clamp(LOWER, 1.0));
            let top = p.max();
            p /= top;
            p.apply(|x| *x = x.max(LOWER));
        }
        if let Some(c) = certificate(a, p, CertificateMethod::ProjectedSubgradient) {
            if best.as_ref().is_none_or(|b| c.margin > b.margin) {
                best = Some(c);
            }
            break;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Largest eigenvalue of `A2ᵀ P Λ + Λ P A2`, `Λ = diag(T_i³)`, found on the box.
    pub margin: f64,
    pub witness: Option<Vector>,
    /// Decided analytically (diagonal, negative `A2`).
    pub analytic: bool,
    pub passed: bool,
}

/// Checks `A2ᵀ P diag(T³) + diag(T³) P A2 ≼ 0` over a temperature box.
pub fn monotonicity_check(a2: &Matrix, p: &Vector, sampler: &BoxSampler, tolerance: f64) -> Result<MonotonicityReport> {
    let n = p.len();
    check_square("A2", n, a2)?;
    check_len("monotonicity box", n, sampler.dim())?;
    if p.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveWeight);
    }
    if linalg::is_diagonal(a2) && a2.diagonal().iter().all(|&v| v < 0.0) {
        let lower = sampler.lower();
        if lower.iter().all(|&v| v >= 0.0) {
            let margin = (0..n)
                .map(|i| 2.0 * a2[(i, i)] * p[i] * lower[i].powi(3))
                .fold(f64::NEG_INFINITY, f64::max);
            return Ok(MonotonicityReport {
                margin,
                witness: Some(lower.clone()),
                analytic: true,
                passed: true,
            });
        }
    }
    let pm = linalg::diag(p);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let check = |t: &Vector| {
        let lam = linalg::diag(&t.map(|v| v * v * v));
        let m = a2.transpose() * &pm * &lam + &lam * &pm * a2;
        linalg::max_symmetric_eigenvalue(&linalg::symmetric_part(&m))
    };
    for t in sampler.corners().into_iter().chain(sampler.points()?) {
        let v = check(&t);
        if v > worst {
            worst = v;
            witness = Some(t);
        }
    }
    Ok(MonotonicityReport {
        margin: worst,
        witness,
        analytic: false,
        passed: worst <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalCertificate {
    pub p: Vector,
    /// `S = -½ (P A1 + A1ᵀ P)`.
    pub s: Matrix,
    pub diagonal_margin: f64,
    pub method: CertificateMethod,
    pub monotonicity: MonotonicityReport,
}

impl ThermalCertificate {
    /// Assumption-4 certificate on the given temperature box.
    pub fn certify(model: &ThermalModel, sampler: &BoxSampler) -> Result<Self> {
        let diag = diagonal_stability_solve(model.a1())?;
        let monotonicity = monotonicity_check(model.a2(), &diag.p, sampler, CHECK_TOLERANCE)?;
        let s = lyapunov_sym(model.a1(), &diag.p) * -0.5;
        if linalg::min_symmetric_eigenvalue(&s) <= 0.0 {
            return Err(Error::NotPositiveDefinite("S"));
        }
        Ok(Self {
            p: diag.p,
            s,
            diagonal_margin: diag.margin,
            method: diag.method,
            monotonicity,
        })
    }

    pub fn passed(&self) -> bool {
        self.monotonicity.passed
    }
}

/// `φ(x) = (x + T̄)⁵/5 - T̄⁴ x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedQuintic {
    pub t_bar: f64,
}

impl SeparableTerm for ShiftedQuintic {
    fn value(&self, x: f64) -> f64 {
        (x + self.t_bar).powi(5) / 5.0 - self.t_bar.powi(4) * x
    }

    fn derivative(&self, x: f64) -> f64 {
        (x + self.t_bar).powi(4) - self.t_bar.powi(4)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        4.0 * (x + self.t_bar).powi(3)
    }
}

/// `φ(T) = T⁵/5`, which the controller uses on measured temperatures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticPower;

impl SeparableTerm for QuarticPower {
    fn value(&self, t: f64) -> f64 {
        t.powi(5) / 5.0
    }

    fn derivative(&self, t: f64) -> f64 {
        let t2 = t * t;
        t2 * t2
    }

    fn second_derivative(&self, t: f64) -> f64 {
        4.0 * t * t * t
    }
}

fn quintic_terms(t_bar: &Vector, rows: &[usize]) -> Vec<Arc<dyn SeparableTerm>> {
    rows.iter()
        .map(|&i| Arc::new(ShiftedQuintic { t_bar: t_bar[i] }) as Arc<dyn SeparableTerm>)
        .collect()
}

/// `H(x) = Σ p_i φ_i(x_i) - Σ p_i T̄_i⁵ / 5` in shifted coordinates;
/// `D` is the actuated block of `P`.
pub fn storage_from_certificate(model: &ThermalModel, p: &Vector, x_star: Vector) -> Result<SeparableStorage> {
    let n = model.n();
    check_len("P diagonal", n, p.len())?;
    check_len("target", n, x_star.len())?;
    let input = model.input();
    let t_bar = model.t_bar();
    let h_u = SeparableEnergy::new(
        input.zero_rows().iter().map(|&i| p[i]).collect(),
        quintic_terms(t_bar, input.zero_rows()),
    )?;
    let weights = DiagonalWeights::new(linalg::select_entries(p.as_slice(), input.actuated_rows()))?;
    let phis = PhiFamily::new(quintic_terms(t_bar, input.actuated_rows()))?;
    let k = -(0..n).map(|i| p[i] * t_bar[i].powi(5)).sum::<f64>() / 5.0;
    Ok(SeparableStorage::new(input, Arc::new(h_u), weights, phis, x_star)?.with_constant(k))
}

/// `H(T) = Σ p_i T_i⁵ / 5` in temperature coordinates. Differs from
/// [`storage_from_certificate`] by an affine term, so `U`, `Q` and `e` agree.
pub fn temperature_storage(model: &ThermalModel, p: &Vector, t_star: Vector) -> Result<SeparableStorage> {
    check_len("P diagonal", model.n(), p.len())?;
    check_len("target", model.n(), t_star.len())?;
    let input = model.input();
    let quartic = |rows: &[usize]| -> Vec<Arc<dyn SeparableTerm>> {
        rows.iter().map(|_| Arc::new(QuarticPower) as Arc<dyn SeparableTerm>).collect()
    };
    let h_u = SeparableEnergy::new(
        input.zero_rows().iter().map(|&i| p[i]).collect(),
        quartic(input.zero_rows()),
    )?;
    let weights = DiagonalWeights::new(linalg::select_entries(p.as_slice(), input.actuated_rows()))?;
    let phis = PhiFamily::new(quartic(input.actuated_rows()))?;
    SeparableStorage::new(input, Arc::new(h_u), weights, phis, t_star)
}

/// Robust PI-PBC on measured temperatures: `Φ̃ = Ψ_a(T_a) - Ψ_a(T_a*)`.
/// Only `G2` and the target are read from the model.
pub fn build_thermal_controller(model: &ThermalModel, t_star: &Vector, gamma_p: Vector, gamma_i: Vector) -> Result<RobustPiPbc> {
    check_len("T*", model.n(), t_star.len())?;
    let residual = model.assignable_residual(t_star)?;
    if !(residual <= model::EQUILIBRIUM_TOLERANCE) {
        return Err(Error::NotAssignable { residual });
    }
    let input = model.input();
    let gains = RobustGains::new(gamma_p, gamma_i, input.g2().clone())?;
    let phis = PhiFamily::uniform(Arc::new(QuarticPower), input.dims().m())?;
    RobustPiPbc::new(gains, phis, input.actuated_part(t_star.as_slice()))
}

/// `Q = Φ̃ᵀ S Φ̃` with `Φ̃ = Ψ(T) - Ψ(T*)`.
pub fn thermal_q(cert: &ThermalCertificate, t: &Vector, t_star: &Vector) -> f64 {
    let d = psi(t) - psi(t_star);
    crate::controller::quadratic_form(&cert.s, d.as_slice())
}

/// Sampler over [`ThermalModel::default_box`].
pub fn default_sampler(model: &ThermalModel, t_star: Option<&Vector>, count: usize, seed: u64) -> Result<BoxSampler> {
    let (lo, hi) = model.default_box(t_star);
    BoxSampler::new(lo, hi, count, seed)
}
