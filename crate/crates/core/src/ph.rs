//! Port-Hamiltonian plants `ẋ = (J - R) ∇H(x) + G u` with constant `J`, `R`.

use alloc::sync::Arc;
use alloc::vec;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::model::{PlantModel, VectorField};
use crate::sampling::BoxSampler;
use crate::storage::{check_assumption3, Assumption3Report, ItemCheck, SeparableStorage};
use crate::{Matrix, Vector};

pub const STRUCTURE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PhModel {
    j: Matrix,
    r: Matrix,
    hamiltonian: SeparableStorage,
    input: crate::model::InputMatrix,
}

impl PhModel {
    pub fn new(
        j: Matrix,
        r: Matrix,
        input: crate::model::InputMatrix,
        hamiltonian: SeparableStorage,
    ) -> Result<Self> {
        let n = input.dims().n();
        for (ctx, m) in [("J", &j), ("R", &r)] {
            check_len(ctx, n, m.nrows())?;
            check_len(ctx, n, m.ncols())?;
        }
        check_len("Hamiltonian", n, hamiltonian.dim())?;
        if hamiltonian.actuated_rows() != input.actuated_rows() {
            return Err(Error::InvalidConfig("Hamiltonian and G disagree on actuated rows"));
        }
        if linalg::max_abs(&(&j + j.transpose())) > STRUCTURE_TOLERANCE {
            return Err(Error::NotSkewSymmetric);
        }
        if linalg::asymmetry(&r) > STRUCTURE_TOLERANCE
            || linalg::min_symmetric_eigenvalue(&linalg::symmetric_part(&r)) < -STRUCTURE_TOLERANCE
        {
            return Err(Error::InvalidDamping);
        }
        Ok(Self {
            j,
            r,
            hamiltonian,
            input,
        })
    }

    pub fn j(&self) -> &Matrix {
        &self.j
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn hamiltonian(&self) -> &SeparableStorage {
        &self.hamiltonian
    }

    pub fn input(&self) -> &crate::model::InputMatrix {
        &self.input
    }

    /// `(J - R) ∇H(x)`.
    pub fn field(&self, x: &Vector) -> Vector {
        (&self.j - &self.r) * self.hamiltonian.gradient(x)
    }

    pub fn plant(&self) -> PlantModel {
        let field = PhField {
            jr: &self.j - &self.r,
            h: self.hamiltonian.clone(),
        };
        PlantModel::new(Arc::new(field), self.input.clone()).expect("dimensions checked at construction")
    }

    /// The Hamiltonian re-targeted at `x_star`, for incremental quantities.
    pub fn storage_at(&self, x_star: Vector) -> Result<SeparableStorage> {
        self.hamiltonian.with_target(x_star)
    }
}

struct PhField {
    jr: Matrix,
    h: SeparableStorage,
}

impl VectorField for PhField {
    fn dim(&self) -> usize {
        self.jr.nrows()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let mut buf = [0.0; 16];
        let mut heap;
        let g: &mut [f64] = if n <= buf.len() {
            &mut buf[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        self.h.gradient_into(x, g);
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|k| self.jr[(i, k)] * g[k]).sum();
        }
    }
}

/// Free-function form of [`PhModel::field`].
pub fn ph_field(model: &PhModel, x: &Vector) -> Vector {
    model.field(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhReport {
    /// `max ∇Hᵀ (J - R) ∇H`.
    pub item_i: ItemCheck,
    /// `max (∇H - ∇H*)ᵀ (J - R) (∇H - ∇H*)`.
    pub item_ii: ItemCheck,
    /// `max |∇Hᵀ J ∇H|`, zero up to rounding.
    pub skew_residual: f64,
    /// Items (iii) and (iv) come from the generic check on the same samples.
    pub assumption3: Assumption3Report,
}

impl PhReport {
    pub fn passed(&self) -> bool {
        self.item_i.passed && self.item_ii.passed && self.assumption3.passed()
    }
}

pub fn verify_ph_assumptions(
    model: &PhModel,
    x_star: &Vector,
    sampler: &BoxSampler,
    tolerance: f64,
) -> Result<PhReport> {
    let n = model.input.dims().n();
    check_len("target", n, x_star.len())?;
    check_len("sampler", n, sampler.dim())?;
    let storage = model.storage_at(x_star.clone())?;
    let jr = &model.j - &model.r;
    let g_star = storage.gradient_at_target().clone();
    let mut worst_i = (f64::NEG_INFINITY, None);
    let mut worst_ii = (f64::NEG_INFINITY, None);
    let mut skew: f64 = 0.0;
    for x in sampler.points()? {
        let g = storage.gradient(&x);
        let v_i = g.dot(&(&jr * &g));
        let dg: DVector<f64> = &g - &g_star;
        let v_ii = dg.dot(&(&jr * &dg));
        skew = skew.max(g.dot(&(&model.j * &g)).abs());
        if v_i > worst_i.0 {
            worst_i = (v_i, Some(x.clone()));
        }
        if v_ii > worst_ii.0 {
            worst_ii = (v_ii, Some(x));
        }
    }
    let assumption3 = check_assumption3(&storage, &model.plant(), sampler, tolerance)?;
    Ok(PhReport {
        item_i: ItemCheck {
            passed: worst_i.0 <= tolerance,
            worst: worst_i.0,
            witness: worst_i.1,
        },
        item_ii: ItemCheck {
            passed: worst_ii.0 <= tolerance,
            worst: worst_ii.0,
            witness: worst_ii.1,
        },
        skew_residual: skew,
        assumption3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InputMatrix;
    use crate::storage::{
        DiagonalWeights, PhiFamily, QuadraticQuartic, SeparableEnergy, SeparableTerm, CHECK_TOLERANCE,
    };
    use nalgebra::{dmatrix, dvector, DMatrix};
    use proptest::prelude::*;

    fn quadratic_hamiltonian(input: &InputMatrix) -> SeparableStorage {
        let q: Arc<dyn SeparableTerm> = Arc::new(QuadraticQuartic::quadratic(1.0));
        let p = input.dims().unactuated();
        let m = input.dims().m();
        SeparableStorage::new(
            input,
            Arc::new(SeparableEnergy::new(vec![1.0; p], vec![q.clone(); p]).unwrap()),
            DiagonalWeights::new(DVector::from_element(m, 1.0)).unwrap(),
            PhiFamily::uniform(q, m).unwrap(),
            DVector::zeros(input.dims().n()),
        )
        .unwrap()
    }

    fn model(r: Matrix) -> PhModel {
        let input = InputMatrix::new(dmatrix![0.0; 1.0]).unwrap();
        let h = quadratic_hamiltonian(&input);
        PhModel::new(dmatrix![0.0, 1.0; -1.0, 0.0], r, input, h).unwrap()
    }

    #[test]
    fn field_examples() {
        let m = model(DMatrix::zeros(2, 2));
        assert_eq!(m.field(&dvector![0.0, 0.0]), dvector![0.0, 0.0]);
        let x = dvector![0.7, -1.3];
        assert_eq!(ph_field(&m, &x), dvector![-1.3, -0.7]);
        assert_eq!(x.dot(&(m.j() * &x)), 0.0);

        let damped = model(DMatrix::identity(2, 2));
        let f = damped.field(&x);
        assert!((x.dot(&f) + x.norm_squared()).abs() < 1e-15);
        assert_eq!(damped.plant().drift(&x), f);
    }

    #[test]
    fn structure_validation() {
        let input = InputMatrix::new(dmatrix![0.0; 1.0]).unwrap();
        let h = quadratic_hamiltonian(&input);
        assert!(matches!(
            PhModel::new(dmatrix![0.0, 1.0; 1.0, 0.0], DMatrix::zeros(2, 2), input.clone(), h.clone()),
            Err(Error::NotSkewSymmetric)
        ));
        assert!(matches!(
            PhModel::new(DMatrix::zeros(2, 2), dmatrix![1.0, 0.0; 0.0, -0.1], input.clone(), h.clone()),
            Err(Error::InvalidDamping)
        ));
        assert!(matches!(
            PhModel::new(DMatrix::zeros(2, 2), dmatrix![1.0, 0.2; 0.0, 1.0], input, h),
            Err(Error::InvalidDamping)
        ));
    }

    #[test]
    fn lossless_margins_are_zero() {
        let m = model(DMatrix::zeros(2, 2));
        let s = BoxSampler::new(dvector![-2.0, -2.0], dvector![2.0, 2.0], 500, 4).unwrap();
        let r = verify_ph_assumptions(&m, &dvector![0.5, 0.25], &s, CHECK_TOLERANCE).unwrap();
        assert!(r.item_i.worst.abs() <= 1e-15 && r.item_ii.worst.abs() <= 1e-15);
        assert!(r.passed());
    }

    #[test]
    fn partial_damping_margins() {
        let m = model(dmatrix![1.0, 0.0; 0.0, 0.0]);
        let s = BoxSampler::new(dvector![-2.0, -2.0], dvector![2.0, 2.0], 500, 4).unwrap();
        let r = verify_ph_assumptions(&m, &dvector![0.0, 0.0], &s, CHECK_TOLERANCE).unwrap();
        assert!(r.item_i.worst <= 0.0 && r.item_ii.worst <= 0.0);
        assert!(r.skew_residual <= 1e-12);
    }

    proptest! {
        #[test]
        fn skew_identity_and_dissipation(
            j in -3.0f64..3.0, r11 in 0.0f64..2.0, r22 in 0.0f64..2.0, r12 in -1.0f64..1.0,
            c4 in 0.0f64..2.0, x in proptest::collection::vec(-3.0f64..3.0, 2),
        ) {
            let r12 = r12 * num_traits::Float::sqrt(r11 * r22);
            let input = InputMatrix::new(dmatrix![0.0; 1.0]).unwrap();
            let phi: Arc<dyn SeparableTerm> = Arc::new(QuadraticQuartic { quadratic: 1.0, quartic: c4 });
            let h = SeparableStorage::new(
                &input,
                Arc::new(SeparableEnergy::new(vec![1.0], vec![Arc::new(QuadraticQuartic::quadratic(1.0))]).unwrap()),
                DiagonalWeights::new(dvector![1.5]).unwrap(),
                PhiFamily::new(vec![phi]).unwrap(),
                dvector![0.0, 0.0],
            ).unwrap();
            let m = PhModel::new(dmatrix![0.0, j; -j, 0.0], dmatrix![r11, r12; r12, r22], input, h).unwrap();
            let x = DVector::from_vec(x);
            let g = m.hamiltonian().gradient(&x);
            prop_assert!(g.dot(&(m.j() * &g)).abs() <= 1e-12 * g.norm_squared().max(1.0));
            prop_assert!(g.dot(&m.field(&x)) <= 1e-12 * g.norm_squared().max(1.0));
        }
    }
}
