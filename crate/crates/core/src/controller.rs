//! PI passivity-based control laws.
//!
//! [`RobustPiPbc`] is the implementable law: it is built from `Γ_P`, `Γ_I`,
//! `G2` and the known `φ` family only, so it has no access to the weights
//! `D`. [`IdealPiPbc`] and [`PerturbedPiPbc`] are the oracle and estimated
//! variants fed by `e = G2ᵀ D Φ̃` and `e0 = G2ᵀ D0 Φ̃`.

use alloc::vec::Vec;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::storage::{DiagonalWeights, PhiFamily, SeparableStorage};
use crate::{Matrix, Vector};

/// Control, integrator derivative and the signal the law was fed with
/// (`Φ̃` for the robust law, `e` or `e0` for the others).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: Vector,
    pub z_dot: Vector,
    pub signal: Vector,
}

/// A static PI law `u = -K_P s(x_a) + z`, `ż = -K_I s(x_a)`.
pub trait PiLaw: Send + Sync {
    fn inputs(&self) -> usize;

    /// Writes `u`, `ż` and the feedback signal; must not allocate.
    fn step_into(&self, x_a: &[f64], z: &[f64], u: &mut [f64], z_dot: &mut [f64], signal: &mut [f64]);

    fn step(&self, x_a: &Vector, z: &Vector) -> ControlOutput {
        let m = self.inputs();
        let mut out = ControlOutput {
            u: DVector::zeros(m),
            z_dot: DVector::zeros(m),
            signal: DVector::zeros(m),
        };
        self.step_into(
            x_a.as_slice(),
            z.as_slice(),
            out.u.as_mut_slice(),
            out.z_dot.as_mut_slice(),
            out.signal.as_mut_slice(),
        );
        out
    }
}

fn apply_pi(kp: &Matrix, ki: &Matrix, s: &[f64], z: &[f64], u: &mut [f64], z_dot: &mut [f64]) {
    let m = s.len();
    for i in 0..m {
        let mut p = 0.0;
        let mut q = 0.0;
        for (j, sj) in s.iter().enumerate() {
            p += kp[(i, j)] * sj;
            q += ki[(i, j)] * sj;
        }
        u[i] = z[i] - p;
        z_dot[i] = -q;
    }
}

fn check_positive_diagonal(v: &Vector) -> Result<()> {
    if v.iter().all(|&g| g > 0.0 && g.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonPositiveGain)
    }
}

fn diagonal_entries(m: &Matrix) -> Result<Vector> {
    if !m.is_square() || !linalg::is_diagonal(m) {
        return Err(Error::InvalidConfig("robust gains must be diagonal"));
    }
    Ok(m.diagonal())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustGains {
    gamma_p: Vector,
    gamma_i: Vector,
    g2: Matrix,
    g2_inv: Matrix,
    kp: Matrix,
    ki: Matrix,
}

impl RobustGains {
    /// `Γ_P = diag(gamma_p)`, `Γ_I = diag(gamma_i)`; `g2` may be `G2` or
    /// the shuffled block `G_s`.
    pub fn new(gamma_p: Vector, gamma_i: Vector, g2: Matrix) -> Result<Self> {
        let m = g2.nrows();
        check_len("G2 columns", m, g2.ncols())?;
        check_len("Gamma_P", m, gamma_p.len())?;
        check_len("Gamma_I", m, gamma_i.len())?;
        check_positive_diagonal(&gamma_p)?;
        check_positive_diagonal(&gamma_i)?;
        let g2_inv = g2.clone().try_inverse().ok_or(Error::Singular("G2"))?;
        let kp = &g2_inv * linalg::diag(&gamma_p);
        let ki = &g2_inv * linalg::diag(&gamma_i);
        Ok(Self {
            gamma_p,
            gamma_i,
            g2,
            g2_inv,
            kp,
            ki,
        })
    }

    pub fn from_matrices(gamma_p: &Matrix, gamma_i: &Matrix, g2: Matrix) -> Result<Self> {
        Self::new(diagonal_entries(gamma_p)?, diagonal_entries(gamma_i)?, g2)
    }

    pub fn gamma_p(&self) -> &Vector {
        &self.gamma_p
    }

    pub fn gamma_i(&self) -> &Vector {
        &self.gamma_i
    }

    pub fn g2(&self) -> &Matrix {
        &self.g2
    }

    pub fn g2_inv(&self) -> &Matrix {
        &self.g2_inv
    }

    /// `K_P = G2⁻¹ Γ_P`.
    pub fn kp(&self) -> &Matrix {
        &self.kp
    }

    /// `K_I = G2⁻¹ Γ_I`.
    pub fn ki(&self) -> &Matrix {
        &self.ki
    }

    pub fn inputs(&self) -> usize {
        self.g2.nrows()
    }
}

/// `u = -G2⁻¹ Γ_P Φ̃(x_a) + z`, `ż = -G2⁻¹ Γ_I Φ̃(x_a)`.
#[derive(Debug, Clone)]
pub struct RobustPiPbc {
    gains: RobustGains,
    phis: PhiFamily,
    x_a_star: Vector,
}

impl RobustPiPbc {
    pub fn new(gains: RobustGains, phis: PhiFamily, x_a_star: Vector) -> Result<Self> {
        let m = gains.inputs();
        check_len("phi family", m, phis.len())?;
        check_len("actuated target", m, x_a_star.len())?;
        Ok(Self {
            gains,
            phis,
            x_a_star,
        })
    }

    pub fn gains(&self) -> &RobustGains {
        &self.gains
    }

    pub fn phis(&self) -> &PhiFamily {
        &self.phis
    }

    pub fn x_a_star(&self) -> &Vector {
        &self.x_a_star
    }
}

impl PiLaw for RobustPiPbc {
    fn inputs(&self) -> usize {
        self.gains.inputs()
    }

    fn step_into(&self, x_a: &[f64], z: &[f64], u: &mut [f64], z_dot: &mut [f64], signal: &mut [f64]) {
        self.phis.tilde_into(x_a, self.x_a_star.as_slice(), signal);
        apply_pi(&self.gains.kp, &self.gains.ki, signal, z, u, z_dot);
    }
}

pub fn robust_pi_step(
    gains: &RobustGains,
    phis: &PhiFamily,
    x_a: &Vector,
    x_a_star: &Vector,
    z: &Vector,
) -> Result<ControlOutput> {
    let law = RobustPiPbc::new(gains.clone(), phis.clone(), x_a_star.clone())?;
    check_len("x_a", law.inputs(), x_a.len())?;
    check_len("z", law.inputs(), z.len())?;
    Ok(law.step(x_a, z))
}

fn symmetric_positive_definite(m: &Matrix) -> bool {
    let scale = linalg::max_abs(m).max(f64::MIN_POSITIVE);
    m.is_square()
        && m.iter().all(|v| v.is_finite())
        && linalg::asymmetry(m) <= 1e-10 * scale
        && linalg::min_symmetric_eigenvalue(&linalg::symmetric_part(m)) > 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealGains {
    kp: Matrix,
    ki: Matrix,
    weights: DiagonalWeights,
}

impl IdealGains {
    pub fn new(kp: Matrix, ki: Matrix, weights: DiagonalWeights) -> Result<Self> {
        let m = weights.len();
        check_len("K_P", m, kp.nrows())?;
        check_len("K_I", m, ki.nrows())?;
        if !symmetric_positive_definite(&kp) {
            return Err(Error::NotPositiveDefinite("K_P"));
        }
        if !symmetric_positive_definite(&ki) {
            return Err(Error::NotPositiveDefinite("K_I"));
        }
        Ok(Self { kp, ki, weights })
    }

    pub fn kp(&self) -> &Matrix {
        &self.kp
    }

    pub fn ki(&self) -> &Matrix {
        &self.ki
    }

    pub fn weights(&self) -> &DiagonalWeights {
        &self.weights
    }
}

/// `u = -K_P e + z`, `ż = -K_I e` with the true passive output `e`.
#[derive(Debug, Clone)]
pub struct IdealPiPbc {
    gains: IdealGains,
    storage: SeparableStorage,
    g2: Matrix,
}

impl IdealPiPbc {
    /// The storage supplies `φ`, the target and (oracle) `D`; the gains'
    /// weights must match it.
    pub fn new(gains: IdealGains, storage: SeparableStorage, g2: Matrix) -> Result<Self> {
        check_len("K_P", storage.phis().len(), gains.kp.nrows())?;
        check_len("G2", gains.kp.nrows(), g2.nrows())?;
        if gains.weights != *storage.weights() {
            return Err(Error::InvalidConfig("ideal gains and storage disagree on D"));
        }
        Ok(Self { gains, storage, g2 })
    }
}

impl PiLaw for IdealPiPbc {
    fn inputs(&self) -> usize {
        self.g2.nrows()
    }

    fn step_into(&self, x_a: &[f64], z: &[f64], u: &mut [f64], z_dot: &mut [f64], signal: &mut [f64]) {
        self.storage.passive_output_into(&self.g2, x_a, signal);
        apply_pi(&self.gains.kp, &self.gains.ki, signal, z, u, z_dot);
    }
}

pub fn ideal_pi_step(
    gains: &IdealGains,
    storage: &SeparableStorage,
    g2: &Matrix,
    x_a: &Vector,
    z: &Vector,
) -> Result<ControlOutput> {
    let law = IdealPiPbc::new(gains.clone(), storage.clone(), g2.clone())?;
    check_len("x_a", law.inputs(), x_a.len())?;
    check_len("z", law.inputs(), z.len())?;
    Ok(law.step(x_a, z))
}

/// `Λ_P = G2⁻¹ Γ_P D⁻¹ G2⁻ᵀ`.
pub fn lambda_p(gains: &RobustGains, weights: &DiagonalWeights) -> Result<Matrix> {
    check_len("weights", gains.inputs(), weights.len())?;
    let d_inv = linalg::diag(&weights.as_vector().map(|d| 1.0 / d));
    Ok(gains.g2_inv() * linalg::diag(gains.gamma_p()) * d_inv * gains.g2_inv().transpose())
}

/// `Λ_I = G2ᵀ D Γ_I⁻¹ G2`.
pub fn lambda_i(gains: &RobustGains, weights: &DiagonalWeights) -> Result<Matrix> {
    check_len("weights", gains.inputs(), weights.len())?;
    let gi_inv = linalg::diag(&gains.gamma_i().map(|g| 1.0 / g));
    Ok(gains.g2().transpose() * weights.matrix() * gi_inv * gains.g2())
}

/// Ideal gains reproducing the robust law exactly: `K_P = Λ_P`, `K_I = Λ_I⁻¹`.
pub fn matched_ideal_gains(gains: &RobustGains, weights: &DiagonalWeights) -> Result<IdealGains> {
    let kp = lambda_p(gains, weights)?;
    let ki = lambda_i(gains, weights)?
        .try_inverse()
        .ok_or(Error::Singular("Lambda_I"))?;
    IdealGains::new(kp, ki, weights.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue {
    /// `U(x)`.
    pub storage: f64,
    /// `½ z̃ᵀ Λ_I z̃`.
    pub integrator: f64,
}

impl LyapunovValue {
    pub fn total(&self) -> f64 {
        self.storage + self.integrator
    }
}

pub(crate) fn quadratic_form(m: &Matrix, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += v[i] * m[(i, j)] * v[j];
        }
    }
    acc
}

/// `W = U(x) + ½ (z - u*)ᵀ Λ_I (z - u*)`.
pub fn lyapunov_w(
    storage: &SeparableStorage,
    lambda_i: &Matrix,
    x: &Vector,
    z: &Vector,
    u_star: &Vector,
) -> Result<LyapunovValue> {
    check_len("state", storage.dim(), x.len())?;
    check_len("z", u_star.len(), z.len())?;
    let z_tilde: Vec<f64> = z.iter().zip(u_star.iter()).map(|(a, b)| a - b).collect();
    Ok(LyapunovValue {
        storage: storage.incremental_storage(x),
        integrator: 0.5 * quadratic_form(lambda_i, &z_tilde),
    })
}

/// Constant estimate `D0` of the weights, with `D = D0 + diag(δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedEstimate {
    d0: Vector,
    delta: Vector,
}

impl PerturbedEstimate {
    pub fn new(d0: Vector, delta: Vector) -> Result<Self> {
        check_len("delta", d0.len(), delta.len())?;
        DiagonalWeights::new(d0.clone())?;
        Ok(Self { d0, delta })
    }

    /// `D0 = D - diag(δ)`.
    pub fn from_truth(weights: &DiagonalWeights, delta: Vector) -> Result<Self> {
        Self::new(weights.as_vector() - &delta, delta)
    }

    /// `δ_i = ± ratio · d_i` with seeded signs, so `‖δ‖ / ‖d‖ = ratio`.
    pub fn with_ratio(weights: &DiagonalWeights, ratio: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::InvalidConfig("perturbation ratio must lie in [0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let delta = weights.as_vector().map(|d| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * ratio * d
        });
        Self::from_truth(weights, delta)
    }

    pub fn d0(&self) -> &Vector {
        &self.d0
    }

    pub fn delta(&self) -> &Vector {
        &self.delta
    }

    /// `‖δ‖ / ‖D0 + δ‖`.
    pub fn ratio(&self) -> f64 {
        self.delta.norm() / (&self.d0 + &self.delta).norm()
    }
}

/// `u = -K_P e0 + z`, `ż = -K_I e0` with `e0 = G2ᵀ D0 Φ̃(x_a)`.
#[derive(Debug, Clone)]
pub struct PerturbedPiPbc {
    estimate: PerturbedEstimate,
    g2: Matrix,
    kp: Matrix,
    ki: Matrix,
    phis: PhiFamily,
    x_a_star: Vector,
}

impl PerturbedPiPbc {
    pub fn new(
        estimate: PerturbedEstimate,
        g2: Matrix,
        kp: Matrix,
        ki: Matrix,
        phis: PhiFamily,
        x_a_star: Vector,
    ) -> Result<Self> {
        let m = g2.nrows();
        for (ctx, len) in [
            ("D0", estimate.d0.len()),
            ("K_P", kp.nrows()),
            ("K_I", ki.nrows()),
            ("phi family", phis.len()),
            ("actuated target", x_a_star.len()),
        ] {
            check_len(ctx, m, len)?;
        }
        Ok(Self {
            estimate,
            g2,
            kp,
            ki,
            phis,
            x_a_star,
        })
    }

    pub fn estimate(&self) -> &PerturbedEstimate {
        &self.estimate
    }
}

impl PiLaw for PerturbedPiPbc {
    fn inputs(&self) -> usize {
        self.g2.nrows()
    }

    fn step_into(&self, x_a: &[f64], z: &[f64], u: &mut [f64], z_dot: &mut [f64], signal: &mut [f64]) {
        let m = x_a.len();
        // signal temporarily holds D0 Φ̃, then G2ᵀ D0 Φ̃ via u as scratch.
        self.phis.tilde_into(x_a, self.x_a_star.as_slice(), signal);
        for (k, s) in signal.iter_mut().enumerate() {
            *s *= self.estimate.d0[k];
        }
        for j in 0..m {
            u[j] = (0..m).map(|k| self.g2[(k, j)] * signal[k]).sum();
        }
        signal.copy_from_slice(u);
        apply_pi(&self.kp, &self.ki, signal, z, u, z_dot);
    }
}

#[allow(clippy::too_many_arguments)]
pub fn perturbed_pi_step(
    estimate: &PerturbedEstimate,
    g2: &Matrix,
    kp: &Matrix,
    ki: &Matrix,
    phis: &PhiFamily,
    x_a: &Vector,
    x_a_star: &Vector,
    z: &Vector,
) -> Result<ControlOutput> {
    let law = PerturbedPiPbc::new(
        estimate.clone(),
        g2.clone(),
        kp.clone(),
        ki.clone(),
        phis.clone(),
        x_a_star.clone(),
    )?;
    check_len("x_a", law.inputs(), x_a.len())?;
    check_len("z", law.inputs(), z.len())?;
    Ok(law.step(x_a, z))
}
