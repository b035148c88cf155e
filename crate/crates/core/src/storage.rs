//! Separable storage functions `H(x) = H_u(x_u) + Σ d_i φ_i(x_i)`.
//!
//! `H_u` and the weights `d_i` are oracle data: only the sampled checks,
//! the simulator's auditor and the ideal controller read them.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::model::{InputMatrix, PlantModel};
use crate::sampling::BoxSampler;
use crate::{Matrix, Vector};

/// Default absolute tolerance for sampled inequality checks.
pub const CHECK_TOLERANCE: f64 = 1e-9;

/// Relative tolerance used when comparing derivatives with finite differences.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-5;

/// A twice differentiable scalar function with its first two derivatives.
pub trait SeparableTerm: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;
}

/// `φ(x) = c2 x²/2 + c4 x⁴/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticQuartic {
    pub quadratic: f64,
    pub quartic: f64,
}

impl QuadraticQuartic {
    pub fn quadratic(c2: f64) -> Self {
        Self {
            quadratic: c2,
            quartic: 0.0,
        }
    }
}

impl SeparableTerm for QuadraticQuartic {
    fn value(&self, x: f64) -> f64 {
        let x2 = x * x;
        0.5 * self.quadratic * x2 + 0.25 * self.quartic * x2 * x2
    }

    fn derivative(&self, x: f64) -> f64 {
        self.quadratic * x + self.quartic * x * x * x
    }

    fn second_derivative(&self, x: f64) -> f64 {
        self.quadratic + 3.0 * self.quartic * x * x
    }
}

/// Closure-backed term.
pub struct FnTerm<F, G, H> {
    pub value: F,
    pub derivative: G,
    pub second_derivative: H,
}

impl<F, G, H> SeparableTerm for FnTerm<F, G, H>
where
    F: Fn(f64) -> f64 + Send + Sync,
    G: Fn(f64) -> f64 + Send + Sync,
    H: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        (self.second_derivative)(x)
    }
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn derivative_agrees(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= DERIVATIVE_TOLERANCE * analytic.abs().max(1.0)
}

/// Known functions `φ_i` of the actuated coordinates, in actuated-row order.
#[derive(Clone)]
pub struct PhiFamily {
    terms: Vec<Arc<dyn SeparableTerm>>,
}

impl PhiFamily {
    /// Checks `φ'` and `φ''` against finite differences on a fixed grid.
    /// Convexity is not enforced here; it is an item of the assumption check.
    pub fn new(terms: Vec<Arc<dyn SeparableTerm>>) -> Result<Self> {
        const GRID: [f64; 9] = [-1.0, -0.75, -0.5, -0.25, 0.0, 0.3, 0.6, 0.9, 1.0];
        for (index, term) in terms.iter().enumerate() {
            for &x in &GRID {
                let d1 = central_difference(|s| term.value(s), x);
                let d2 = central_difference(|s| term.derivative(s), x);
                if !derivative_agrees(term.derivative(x), d1)
                    || !derivative_agrees(term.second_derivative(x), d2)
                {
                    return Err(Error::InconsistentDerivative { index, at: x });
                }
            }
        }
        Ok(Self { terms })
    }

    pub fn uniform(term: Arc<dyn SeparableTerm>, m: usize) -> Result<Self> {
        Self::new(vec![term; m])
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, i: usize) -> &Arc<dyn SeparableTerm> {
        &self.terms[i]
    }

    /// `Φ(x_a) = col(φ_i'(x_i))`.
    pub fn gradient_into(&self, x_a: &[f64], out: &mut [f64]) {
        for ((o, t), &x) in out.iter_mut().zip(&self.terms).zip(x_a) {
            *o = t.derivative(x);
        }
    }

    /// `Φ̃(x_a) = Φ(x_a) - Φ(x_a*)`.
    pub fn tilde_into(&self, x_a: &[f64], x_a_star: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let t = &self.terms[i];
            *o = t.derivative(x_a[i]) - t.derivative(x_a_star[i]);
        }
    }

    pub fn tilde(&self, x_a: &Vector, x_a_star: &Vector) -> Vector {
        let mut out = DVector::zeros(self.len());
        self.tilde_into(x_a.as_slice(), x_a_star.as_slice(), out.as_mut_slice());
        out
    }
}

impl fmt::Debug for PhiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiFamily").field("len", &self.len()).finish()
    }
}

/// The unknown component `H_u` of the storage function.
pub trait UnactuatedEnergy: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x_u: &[f64]) -> f64;
    fn gradient_into(&self, x_u: &[f64], out: &mut [f64]);
}

/// `H_u(x_u) = Σ w_i ψ_i(x_i)`.
#[derive(Clone)]
pub struct SeparableEnergy {
    weights: Vec<f64>,
    terms: Vec<Arc<dyn SeparableTerm>>,
}

impl SeparableEnergy {
    pub fn new(weights: Vec<f64>, terms: Vec<Arc<dyn SeparableTerm>>) -> Result<Self> {
        check_len("unactuated energy terms", weights.len(), terms.len())?;
        Ok(Self { weights, terms })
    }
}

impl UnactuatedEnergy for SeparableEnergy {
    fn dim(&self) -> usize {
        self.terms.len()
    }

    fn value(&self, x_u: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(&self.weights)
            .zip(x_u)
            .map(|((t, w), &x)| w * t.value(x))
            .sum()
    }

    fn gradient_into(&self, x_u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.weights[i] * self.terms[i].derivative(x_u[i]);
        }
    }
}

/// Closure-backed `H_u`.
pub struct FnEnergy<F, G> {
    pub dim: usize,
    pub value: F,
    pub gradient: G,
}

impl<F, G> UnactuatedEnergy for FnEnergy<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x_u: &[f64]) -> f64 {
        (self.value)(x_u)
    }

    fn gradient_into(&self, x_u: &[f64], out: &mut [f64]) {
        (self.gradient)(x_u, out)
    }
}

/// `D = diag(d_i)` with `d_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeights {
    d: Vector,
}

impl DiagonalWeights {
    pub fn new(d: Vector) -> Result<Self> {
        if d.is_empty() || !d.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveWeight);
        }
        Ok(Self { d })
    }

    pub fn as_vector(&self) -> &Vector {
        &self.d
    }

    pub fn matrix(&self) -> Matrix {
        linalg::diag(&self.d)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

#[derive(Clone)]
pub struct SeparableStorage {
    zero_rows: Vec<usize>,
    actuated_rows: Vec<usize>,
    g2: Matrix,
    h_u: Arc<dyn UnactuatedEnergy>,
    weights: DiagonalWeights,
    phis: PhiFamily,
    x_star: Vector,
    constant: f64,
    h_star: f64,
    grad_star: Vector,
}

impl SeparableStorage {
    pub fn new(
        input: &InputMatrix,
        h_u: Arc<dyn UnactuatedEnergy>,
        weights: DiagonalWeights,
        phis: PhiFamily,
        x_star: Vector,
    ) -> Result<Self> {
        let dims = input.dims();
        check_len("H_u dimension", dims.unactuated(), h_u.dim())?;
        check_len("weights", dims.m(), weights.len())?;
        check_len("phi family", dims.m(), phis.len())?;
        check_len("target", dims.n(), x_star.len())?;
        let mut storage = Self {
            zero_rows: input.zero_rows().to_vec(),
            actuated_rows: input.actuated_rows().to_vec(),
            g2: input.g2().clone(),
            h_u,
            weights,
            phis,
            constant: 0.0,
            h_star: 0.0,
            grad_star: DVector::zeros(dims.n()),
            x_star,
        };
        storage.refresh_target();
        if !storage.h_u_gradient_consistent() {
            return Err(Error::InconsistentDerivative {
                index: 0,
                at: storage.x_star.norm(),
            });
        }
        if !storage.value(&DVector::zeros(dims.n())).is_finite() {
            return Err(Error::InvalidConfig("H(0) is not finite"));
        }
        Ok(storage)
    }

    fn refresh_target(&mut self) {
        let x_star = self.x_star.clone();
        self.h_star = self.value(&x_star);
        let mut g = DVector::zeros(x_star.len());
        self.gradient_into(x_star.as_slice(), g.as_mut_slice());
        self.grad_star = g;
    }

    fn h_u_gradient_consistent(&self) -> bool {
        let p = self.zero_rows.len();
        if p == 0 {
            return true;
        }
        let base = linalg::select_entries(self.x_star.as_slice(), &self.zero_rows);
        let probes = [base.clone(), base.map(|v| 0.5 * v + 0.25), DVector::zeros(p)];
        let mut grad = vec![0.0; p];
        probes.iter().all(|x| {
            self.h_u.gradient_into(x.as_slice(), &mut grad);
            (0..p).all(|i| {
                let fd = central_difference(
                    |s| {
                        let mut y = x.clone();
                        y[i] = s;
                        self.h_u.value(y.as_slice())
                    },
                    x[i],
                );
                derivative_agrees(grad[i], fd)
            })
        })
    }

    /// Adds a constant to `H`, e.g. to make `H(0) = 0`.
    pub fn with_constant(mut self, k: f64) -> Self {
        self.constant = k;
        self.refresh_target();
        self
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Same storage, shifted to a new target.
    pub fn with_target(&self, x_star: Vector) -> Result<Self> {
        check_len("target", self.x_star.len(), x_star.len())?;
        let mut s = self.clone();
        s.x_star = x_star;
        s.refresh_target();
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    pub fn x_star(&self) -> &Vector {
        &self.x_star
    }

    pub fn x_a_star(&self) -> Vector {
        linalg::select_entries(self.x_star.as_slice(), &self.actuated_rows)
    }

    pub fn weights(&self) -> &DiagonalWeights {
        &self.weights
    }

    pub fn phis(&self) -> &PhiFamily {
        &self.phis
    }

    pub fn h_u(&self) -> &Arc<dyn UnactuatedEnergy> {
        &self.h_u
    }

    pub fn g2(&self) -> &Matrix {
        &self.g2
    }

    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }

    pub fn actuated_rows(&self) -> &[usize] {
        &self.actuated_rows
    }

    /// `∇H(x*)`.
    pub fn gradient_at_target(&self) -> &Vector {
        &self.grad_star
    }

    fn unactuated(&self, x: &[f64]) -> Vec<f64> {
        self.zero_rows.iter().map(|&i| x[i]).collect()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.value_slice(x.as_slice())
    }

    pub fn value_slice(&self, x: &[f64]) -> f64 {
        let h_u = self.h_u.value(&self.unactuated(x));
        let h_a: f64 = self
            .actuated_rows
            .iter()
            .enumerate()
            .map(|(k, &i)| self.weights.d[k] * self.phis.terms[k].value(x[i]))
            .sum();
        h_u + h_a + self.constant
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let x_u = self.unactuated(x);
        let mut g_u = vec![0.0; x_u.len()];
        self.h_u.gradient_into(&x_u, &mut g_u);
        for (k, &i) in self.zero_rows.iter().enumerate() {
            out[i] = g_u[k];
        }
        for (k, &i) in self.actuated_rows.iter().enumerate() {
            out[i] = self.weights.d[k] * self.phis.terms[k].derivative(x[i]);
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let mut out = DVector::zeros(x.len());
        self.gradient_into(x.as_slice(), out.as_mut_slice());
        out
    }

    /// `e = G2ᵀ D Φ̃(x_a)`.
    pub fn passive_output(&self, g2: &Matrix, x_a: &Vector) -> Vector {
        let mut e = DVector::zeros(x_a.len());
        self.passive_output_into(g2, x_a.as_slice(), e.as_mut_slice());
        e
    }

    pub fn passive_output_into(&self, g2: &Matrix, x_a: &[f64], out: &mut [f64]) {
        let m = x_a.len();
        let mut dphi = [0.0; 8];
        let mut heap;
        let w: &mut [f64] = if m <= dphi.len() {
            &mut dphi[..m]
        } else {
            heap = vec![0.0; m];
            &mut heap
        };
        for (k, &i) in self.actuated_rows.iter().enumerate() {
            let t = &self.phis.terms[k];
            w[k] = self.weights.d[k] * (t.derivative(x_a[k]) - t.derivative(self.x_star[i]));
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..m).map(|k| g2[(k, j)] * w[k]).sum();
        }
    }

    /// Passive output evaluated on the full state with the stored `G2`.
    pub fn output_error(&self, x: &[f64]) -> Vector {
        let x_a = linalg::select_entries(x, &self.actuated_rows);
        self.passive_output(&self.g2, &x_a)
    }

    /// `U(x) = H(x) - H(x*) - ∇H(x*)ᵀ(x - x*)`, so `U(x*) = 0` and `U ≥ 0`
    /// under convexity.
    pub fn incremental_storage(&self, x: &Vector) -> f64 {
        self.incremental_storage_slice(x.as_slice())
    }

    pub fn incremental_storage_slice(&self, x: &[f64]) -> f64 {
        let linear: f64 = (0..x.len())
            .map(|i| self.grad_star[i] * (x[i] - self.x_star[i]))
            .sum();
        self.value_slice(x) - self.h_star - linear
    }

    /// `∇U(x) = ∇H(x) - ∇H(x*)`.
    pub fn incremental_gradient(&self, x: &Vector) -> Vector {
        self.gradient(x) - &self.grad_star
    }

    /// `Q(x) = -(∇H(x) - ∇H(x*))ᵀ (f(x) - f(x*))`.
    pub fn dissipation(&self, plant: &PlantModel, x: &Vector) -> f64 {
        let f = plant.drift(x);
        let f_star = plant.drift(&self.x_star);
        self.dissipation_from(x.as_slice(), f.as_slice(), f_star.as_slice())
    }

    /// `Q` from precomputed drifts.
    pub fn dissipation_from(&self, x: &[f64], f_x: &[f64], f_star: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        -(0..x.len())
            .map(|i| (g[i] - self.grad_star[i]) * (f_x[i] - f_star[i]))
            .sum::<f64>()
    }
}

impl fmt::Debug for SeparableStorage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeparableStorage")
            .field("x_star", &self.x_star)
            .field("weights", &self.weights)
            .field("phis", &self.phis)
            .finish_non_exhaustive()
    }
}

/// Free-function form of [`SeparableStorage::passive_output`].
pub fn passive_output(storage: &SeparableStorage, g2: &Matrix, x_a: &Vector) -> Vector {
    storage.passive_output(g2, x_a)
}

/// Worst sampled value of one inequality together with where it occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCheck {
    pub worst: f64,
    pub witness: Option<Vector>,
    pub passed: bool,
}

impl ItemCheck {
    fn structural(passed: bool) -> Self {
        Self {
            worst: if passed { 0.0 } else { 1.0 },
            witness: None,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption3Report {
    /// `max ∇H(x)ᵀ f(x)`.
    pub item_i: ItemCheck,
    /// `min Q(x)`.
    pub item_ii: ItemCheck,
    /// Separability holds by construction of [`SeparableStorage`].
    pub item_iii: ItemCheck,
    /// `min(φ_i'', midpoint convexity gap of H_u)`.
    pub item_iv: ItemCheck,
    /// `min H(x)` over the samples; informational.
    pub positivity: ItemCheck,
    pub samples: usize,
    pub tolerance: f64,
}

impl Assumption3Report {
    pub fn passed(&self) -> bool {
        self.item_i.passed && self.item_ii.passed && self.item_iii.passed && self.item_iv.passed
    }
}

struct Tracker {
    worst: f64,
    witness: Option<Vector>,
    maximize: bool,
}

impl Tracker {
    fn new(maximize: bool) -> Self {
        Self {
            worst: if maximize {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            witness: None,
            maximize,
        }
    }

    fn offer(&mut self, value: f64, at: &Vector) {
        let worse = if self.maximize {
            value > self.worst
        } else {
            value < self.worst
        };
        if worse || value.is_nan() {
            self.worst = value;
            self.witness = Some(at.clone());
        }
    }

    fn finish(self, passed: impl Fn(f64) -> bool) -> ItemCheck {
        ItemCheck {
            passed: passed(self.worst),
            worst: self.worst,
            witness: self.witness,
        }
    }
}

/// Sampled check of items (i)-(iv) over the sampler's box.
pub fn check_assumption3(
    storage: &SeparableStorage,
    plant: &PlantModel,
    sampler: &BoxSampler,
    tolerance: f64,
) -> Result<Assumption3Report> {
    let n = storage.dim();
    check_len("sampler dimension", n, sampler.dim())?;
    check_len("plant dimension", n, plant.dims().n())?;
    let points = sampler.points()?;
    let f_star = plant.drift(storage.x_star());
    let mut f = DVector::zeros(n);
    let mut g = DVector::zeros(n);

    let mut item_i = Tracker::new(true);
    let mut item_ii = Tracker::new(false);
    let mut item_iv = Tracker::new(false);
    let mut positivity = Tracker::new(false);

    let zero_rows = storage.zero_rows();
    for (idx, x) in points.iter().enumerate() {
        plant.drift_into(x.as_slice(), f.as_mut_slice());
        storage.gradient_into(x.as_slice(), g.as_mut_slice());
        item_i.offer(linalg::dot(g.as_slice(), f.as_slice()), x);
        item_ii.offer(
            storage.dissipation_from(x.as_slice(), f.as_slice(), f_star.as_slice()),
            x,
        );
        positivity.offer(storage.value(x), x);

        for (k, &i) in storage.actuated_rows().iter().enumerate() {
            item_iv.offer(storage.phis().term(k).second_derivative(x[i]), x);
        }
        if !zero_rows.is_empty() {
            let y = &points[(idx + 1) % points.len()];
            let a: Vec<f64> = zero_rows.iter().map(|&i| x[i]).collect();
            let b: Vec<f64> = zero_rows.iter().map(|&i| y[i]).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            let h = storage.h_u();
            let gap = 0.5 * (h.value(&a) + h.value(&b)) - h.value(&mid);
            item_iv.offer(gap, x);
        }
    }

    let h0 = storage.value(&DVector::zeros(n));
    Ok(Assumption3Report {
        item_i: item_i.finish(|w| w <= tolerance),
        item_ii: item_ii.finish(|w| w >= -tolerance),
        item_iii: ItemCheck::structural(true),
        item_iv: item_iv.finish(|w| w >= -tolerance),
        positivity: positivity.finish(|w| w >= -tolerance && h0.abs() <= tolerance),
        samples: points.len(),
        tolerance,
    })
}
