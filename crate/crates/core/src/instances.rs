//! Pinned instances used by the tests, the acceptance suite and the
//! example configurations. Only primary data lives here; equilibria and
//! inputs are recomputed by the solvers.

use alloc::sync::Arc;
use alloc::vec;

use nalgebra::{dmatrix, dvector};

use crate::model::{InputMatrix, LinearField, VectorField};
use crate::ph::PhModel;
use crate::storage::{
    DiagonalWeights, PhiFamily, QuadraticQuartic, SeparableEnergy, SeparableStorage, SeparableTerm,
};
use crate::thermal::{ThermalModel, ThermalSpec};
use crate::{Matrix, Vector};

/// n = 2, m = 1 thermal plant with `T̄ = (1, 1)`.
pub fn tp1_spec() -> ThermalSpec {
    ThermalSpec {
        a1: dmatrix![-2.0, 1.0; 0.5, -3.0],
        a2: -Matrix::identity(2, 2),
        t_rad: dvector![1.0, 1.0],
        t_conv: dvector![1.0, 1.0],
        g: dmatrix![0.0; 1.0],
    }
}

pub const TP1_TARGET: [f64; 1] = [1.2];

pub fn tp1() -> ThermalModel {
    ThermalModel::new(tp1_spec()).expect("pinned instance")
}

/// TP-1 with its completed target `T*`.
pub fn tp1_with_target() -> (ThermalModel, Vector) {
    let m = tp1();
    let t = m.assignable_target(&Vector::from_row_slice(&TP1_TARGET)).expect("pinned target");
    (m, t)
}

/// n = 4, m = 2 thermal plant with a non-standard `G2`.
pub fn tp2_spec() -> ThermalSpec {
    ThermalSpec {
        a1: dmatrix![
            -3.0, 0.5, 0.4, 0.2;
            0.5, -3.0, 0.2, 0.4;
            0.4, 0.3, -2.5, 0.5;
            0.3, 0.4, 0.5, -2.5
        ],
        a2: -Matrix::from_diagonal(&dvector![1.0, 1.2, 0.8, 1.0]),
        t_rad: dvector![1.0, 0.9, 1.1, 1.0],
        t_conv: dvector![0.8, 1.0, 0.9, 1.2],
        g: dmatrix![0.0, 0.0; 0.0, 0.0; 1.0, 0.2; 0.3, 1.0],
    }
}

pub const TP2_TARGET: [f64; 2] = [1.2, 1.25];

pub fn tp2() -> ThermalModel {
    ThermalModel::new(tp2_spec()).expect("pinned instance")
}

pub fn tp2_with_target() -> (ThermalModel, Vector) {
    let m = tp2();
    let t = m.assignable_target(&Vector::from_row_slice(&TP2_TARGET)).expect("pinned target");
    (m, t)
}

/// n = 2, m = 1 port-Hamiltonian plant with
/// `H = ½ x1² + 2 (½ x2² + ¼ x2⁴)`.
pub fn ph1() -> PhModel {
    let input = InputMatrix::new(dmatrix![0.0; 1.0]).expect("pinned G");
    let h = SeparableStorage::new(
        &input,
        Arc::new(
            SeparableEnergy::new(vec![1.0], vec![Arc::new(QuadraticQuartic::quadratic(1.0)) as Arc<dyn SeparableTerm>])
                .expect("pinned H_u"),
        ),
        DiagonalWeights::new(dvector![2.0]).expect("pinned D"),
        PhiFamily::new(vec![Arc::new(QuadraticQuartic {
            quadratic: 1.0,
            quartic: 1.0,
        })])
        .expect("pinned phi"),
        Vector::zeros(2),
    )
    .expect("pinned storage");
    PhModel::new(
        dmatrix![0.0, 1.0; -1.0, 0.0],
        Matrix::from_diagonal(&dvector![0.5, 0.2]),
        input,
        h,
    )
    .expect("pinned structure")
}

pub const PH1_TARGET: [f64; 1] = [0.5];

/// Thermal plant whose `A1` is Hurwitz but neither Metzler nor
/// diagonally stable. Its open-loop equilibrium `T̄ = (1, 1)` is a valid target.
pub fn non_diagonally_stable() -> ThermalModel {
    ThermalModel::new(ThermalSpec {
        a1: dmatrix![0.5, 1.0; -3.0, -1.0],
        ..tp1_spec()
    })
    .expect("pinned instance")
}

/// Linear plant `f(x) = (-x1, x2)` paired with a concave actuated term.
pub struct ConcaveCase {
    pub g: Matrix,
    pub field: Arc<dyn VectorField>,
    pub storage: SeparableStorage,
    pub x_star: Vector,
}

pub fn concave_storage() -> ConcaveCase {
    let g = dmatrix![0.0; 1.0];
    let input = InputMatrix::new(g.clone()).expect("pinned G");
    let x_star = dvector![0.0, 0.5];
    let storage = SeparableStorage::new(
        &input,
        Arc::new(
            SeparableEnergy::new(vec![1.0], vec![Arc::new(QuadraticQuartic::quadratic(1.0)) as Arc<dyn SeparableTerm>])
                .expect("pinned H_u"),
        ),
        DiagonalWeights::new(dvector![1.0]).expect("pinned D"),
        PhiFamily::new(vec![Arc::new(QuadraticQuartic::quadratic(-2.0))]).expect("pinned phi"),
        x_star.clone(),
    )
    .expect("pinned storage");
    ConcaveCase {
        g,
        field: Arc::new(LinearField::new(dmatrix![-1.0, 0.0; 0.0, 1.0]).expect("pinned field")),
        storage,
        x_star,
    }
}

/// TP-1 target with the unactuated temperature moved off the assignable set.
pub fn tp1_non_assignable_target() -> (ThermalModel, Vector) {
    let (m, mut t) = tp1_with_target();
    t[0] += 0.1;
    (m, t)
}
