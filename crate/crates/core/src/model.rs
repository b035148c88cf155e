//! Input-affine plants `ẋ = f(x) + G u` with a constant input matrix.
//!
//! The input matrix carries the actuated/unactuated split used everywhere
//! else: rows of `G` that are identically zero mark unactuated coordinates,
//! the remaining `m` rows form the invertible block `G2`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::{Matrix, Vector};

/// Default tolerance for equilibrium residuals.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    n: usize,
    m: usize,
}

impl Dimensions {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m >= 1 && n > m {
            Ok(Self { n, m })
        } else {
            Err(Error::InvalidDimensions { n, m })
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of unactuated coordinates, `n - m`.
    pub fn unactuated(&self) -> usize {
        self.n - self.m
    }
}

/// Constant input matrix with exactly `n - m` identically zero rows.
///
/// Zero rows are detected exactly: the structure is declared by the user,
/// not inferred numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    dims: Dimensions,
    entries: Matrix,
    zero_rows: Vec<usize>,
    actuated_rows: Vec<usize>,
    g2: Matrix,
    g2_inv: Matrix,
}

impl InputMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        let dims = Dimensions::new(entries.nrows(), entries.ncols())?;
        let (zero_rows, actuated_rows): (Vec<usize>, Vec<usize>) =
            (0..dims.n).partition(|&i| entries.row(i).iter().all(|&v| v == 0.0));
        if zero_rows.len() > dims.unactuated() {
            return Err(Error::NotFullRank);
        }
        if zero_rows.len() < dims.unactuated() {
            return Err(Error::ZeroRowCount {
                found: zero_rows.len(),
                expected: dims.unactuated(),
            });
        }
        let g2 = linalg::select_rows(&entries, &actuated_rows);
        let scale = linalg::max_abs(&g2).max(f64::MIN_POSITIVE);
        if g2.rank(1e-12 * scale) < dims.m {
            return Err(Error::NotFullRank);
        }
        let g2_inv = g2.clone().try_inverse().ok_or(Error::Singular("G2"))?;
        Ok(Self {
            dims,
            entries,
            zero_rows,
            actuated_rows,
            g2,
            g2_inv,
        })
    }

    /// `G = [0; G2]` with the unactuated coordinates first.
    pub fn standard(g2: Matrix, n: usize) -> Result<Self> {
        let m = g2.ncols();
        check_len("G2 rows", m, g2.nrows())?;
        Dimensions::new(n, m)?;
        let mut entries = DMatrix::zeros(n, m);
        entries.rows_mut(n - m, m).copy_from(&g2);
        Self::new(entries)
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }

    pub fn actuated_rows(&self) -> &[usize] {
        &self.actuated_rows
    }

    pub fn g2(&self) -> &Matrix {
        &self.g2
    }

    pub fn g2_inv(&self) -> &Matrix {
        &self.g2_inv
    }

    /// True when the zero rows come first, i.e. `G = [0; G2]`.
    pub fn is_standard_form(&self) -> bool {
        self.zero_rows.iter().enumerate().all(|(k, &i)| k == i)
    }

    /// Actuated entries of a full state, in ascending index order.
    pub fn actuated_part(&self, x: &[f64]) -> Vector {
        linalg::select_entries(x, &self.actuated_rows)
    }

    pub fn unactuated_part(&self, x: &[f64]) -> Vector {
        linalg::select_entries(x, &self.zero_rows)
    }

    /// `out += G u`, touching only actuated rows.
    pub(crate) fn add_input(&self, u: &[f64], out: &mut [f64]) {
        for &r in &self.actuated_rows {
            let mut acc = 0.0;
            for (j, uj) in u.iter().enumerate() {
                acc += self.entries[(r, j)] * uj;
            }
            out[r] += acc;
        }
    }
}

/// Deterministic, side-effect free evaluation contract for `f`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &Vector) -> Vector {
        let mut out = DVector::zeros(self.dim());
        self.eval_into(x.as_slice(), out.as_mut_slice());
        out
    }
}

/// Closure-backed vector field writing into a caller buffer.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Linear drift `f(x) = A x`.
#[derive(Debug, Clone)]
pub struct LinearField {
    a: Matrix,
}

impl LinearField {
    pub fn new(a: Matrix) -> Result<Self> {
        check_len("linear field", a.nrows(), a.ncols())?;
        Ok(Self { a })
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..x.len()).map(|j| self.a[(i, j)] * x[j]).sum();
        }
    }
}

#[derive(Clone)]
pub struct PlantModel {
    field: Arc<dyn VectorField>,
    input: InputMatrix,
}

impl PlantModel {
    pub fn new(field: Arc<dyn VectorField>, input: InputMatrix) -> Result<Self> {
        check_len("vector field dimension", input.dims().n(), field.dim())?;
        Ok(Self { field, input })
    }

    pub fn dims(&self) -> Dimensions {
        self.input.dims()
    }

    pub fn input(&self) -> &InputMatrix {
        &self.input
    }

    pub fn field(&self) -> &Arc<dyn VectorField> {
        &self.field
    }

    /// `f(x)`.
    pub fn drift(&self, x: &Vector) -> Vector {
        self.field.eval(x)
    }

    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.field.eval_into(x, out)
    }

    /// `f(x) + G u`.
    pub fn rhs(&self, x: &Vector, u: &Vector) -> Vector {
        let mut out = self.drift(x);
        self.input.add_input(u.as_slice(), out.as_mut_slice());
        out
    }
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("dims", &self.dims())
            .field("input", &self.input)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedState {
    pub x_u: Vector,
    pub x_a: Vector,
    /// `order[k]` is the original index of the k-th entry of `(x_u, x_a)`.
    pub order: Vec<usize>,
}

impl PartitionedState {
    pub fn assemble(&self) -> Vector {
        let mut x = DVector::zeros(self.order.len());
        for (k, &i) in self.order.iter().enumerate() {
            x[i] = if k < self.x_u.len() {
                self.x_u[k]
            } else {
                self.x_a[k - self.x_u.len()]
            };
        }
        x
    }
}

pub fn partition_state(x: &Vector, input: &InputMatrix) -> Result<PartitionedState> {
    check_len("state", input.dims().n(), x.len())?;
    let order = input
        .zero_rows()
        .iter()
        .chain(input.actuated_rows())
        .copied()
        .collect();
    Ok(PartitionedState {
        x_u: input.unactuated_part(x.as_slice()),
        x_a: input.actuated_part(x.as_slice()),
        order,
    })
}

/// Result of bringing a full-column-rank `G` to `T G S = [0; I_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    /// Invertible `n × n` state transform.
    pub transform: Matrix,
    /// Invertible `m × m` input transform.
    pub input_scaling: Matrix,
    /// `[0; I_m]`.
    pub normalized: InputMatrix,
    /// Actuated block of `T G` before input scaling (`G_s` for shuffled inputs).
    pub shuffled_g2: Matrix,
    /// Set when `T` is not a pure row permutation, so the physical state
    /// structure is lost under `z = T x`.
    pub structure_destroying: bool,
}

impl Normalization {
    /// First `n - m` rows of `T`, a full-rank left annihilator of `G`.
    pub fn left_annihilator(&self) -> Matrix {
        let p = self.normalized.dims().unactuated();
        self.transform.rows(0, p).into_owned()
    }
}

pub fn normalize_input_matrix(g: &Matrix) -> Result<Normalization> {
    let dims = Dimensions::new(g.nrows(), g.ncols())?;
    let (n, m) = (dims.n(), dims.m());
    let normalized = InputMatrix::standard(DMatrix::identity(m, m), n)?;

    if let Ok(structured) = InputMatrix::new(g.clone()) {
        let order: Vec<usize> = structured
            .zero_rows()
            .iter()
            .chain(structured.actuated_rows())
            .copied()
            .collect();
        let mut t = DMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            t[(k, i)] = 1.0;
        }
        return Ok(Normalization {
            transform: t,
            input_scaling: structured.g2_inv().clone(),
            normalized,
            shuffled_g2: structured.g2().clone(),
            structure_destroying: false,
        });
    }

    // Gauss-Jordan with partial pivoting; ties go to the later row so rows
    // already sitting at the bottom stay there.
    let scale = linalg::max_abs(g);
    if scale == 0.0 {
        return Err(Error::NotFullRank);
    }
    let mut work = g.clone();
    let mut elim = DMatrix::<f64>::identity(n, n);
    let mut used = vec![false; n];
    let mut pivots = Vec::with_capacity(m);
    for j in 0..m {
        let mut best: Option<usize> = None;
        for r in (0..n).filter(|&r| !used[r]) {
            match best {
                Some(b) if work[(r, j)].abs() < work[(b, j)].abs() => {}
                _ => best = Some(r),
            }
        }
        let r = best.ok_or(Error::NotFullRank)?;
        let pivot = work[(r, j)];
        if pivot.abs() <= 1e-12 * scale {
            return Err(Error::NotFullRank);
        }
        used[r] = true;
        pivots.push(r);
        for i in (0..n).filter(|&i| i != r) {
            let factor = work[(i, j)] / pivot;
            if factor != 0.0 {
                for c in 0..m {
                    work[(i, c)] -= factor * work[(r, c)];
                }
                for c in 0..n {
                    elim[(i, c)] -= factor * elim[(r, c)];
                }
            }
        }
    }
    let free_rows = (0..n).filter(|&r| !used[r]);
    let order: Vec<usize> = free_rows.chain(pivots.iter().copied()).collect();
    let t = DMatrix::from_fn(n, n, |k, c| elim[(order[k], c)]);
    let shuffled_g2 = DMatrix::from_fn(m, m, |i, c| work[(pivots[i], c)]);
    let input_scaling =
        DMatrix::from_fn(m, m, |i, c| if i == c { 1.0 / shuffled_g2[(i, i)] } else { 0.0 });
    Ok(Normalization {
        transform: t,
        input_scaling,
        normalized,
        shuffled_g2,
        structure_destroying: true,
    })
}

/// Selector of the unactuated rows, `G⊥ G = 0`.
pub fn left_annihilator(input: &InputMatrix) -> Matrix {
    let n = input.dims().n();
    let rows = input.zero_rows();
    DMatrix::from_fn(rows.len(), n, |k, c| if rows[k] == c { 1.0 } else { 0.0 })
}

/// Left annihilator of an arbitrary full-column-rank matrix.
pub fn left_annihilator_of(g: &Matrix) -> Result<Matrix> {
    Ok(normalize_input_matrix(g)?.left_annihilator())
}

/// `G⊥ f(x)`; zero exactly on the assignable equilibrium set.
pub fn assignable_residual(plant: &PlantModel, x: &Vector) -> Result<Vector> {
    check_len("state", plant.dims().n(), x.len())?;
    let f = plant.drift(x);
    Ok(plant.input().unactuated_part(f.as_slice()))
}

/// Constant input assigning `x_star`: `u* = -G2⁻¹ f_a(x*)`.
pub fn solve_ustar(plant: &PlantModel, x_star: &Vector, tolerance: f64) -> Result<Vector> {
    let residual = assignable_residual(plant, x_star)?.norm();
    if !(residual <= tolerance) {
        return Err(Error::NotAssignable { residual });
    }
    let f = plant.drift(x_star);
    let f_a = plant.input().actuated_part(f.as_slice());
    Ok(-(plant.input().g2_inv() * f_a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPair {
    pub x_star: Vector,
    pub u_star: Vector,
    pub tolerance: f64,
}

impl EquilibriumPair {
    pub fn new(plant: &PlantModel, x_star: Vector, tolerance: f64) -> Result<Self> {
        let u_star = solve_ustar(plant, &x_star, tolerance)?;
        Ok(Self {
            x_star,
            u_star,
            tolerance,
        })
    }

    /// `‖f(x*) + G u*‖`.
    pub fn residual(&self, plant: &PlantModel) -> f64 {
        plant.rhs(&self.x_star, &self.u_star).norm()
    }
}

/// Completes a target given its actuated part by solving `G⊥ f(x) = 0`
/// for the unactuated coordinates (Newton with a central-difference
/// Jacobian and backtracking).
pub fn complete_assignable(
    plant: &PlantModel,
    x_a_star: &Vector,
    x_u_guess: &Vector,
    tolerance: f64,
) -> Result<Vector> {
    let input = plant.input();
    let dims = plant.dims();
    check_len("actuated target", dims.m(), x_a_star.len())?;
    check_len("unactuated guess", dims.unactuated(), x_u_guess.len())?;
    let assemble = |x_u: &Vector| {
        let mut x = DVector::zeros(dims.n());
        for (k, &i) in input.zero_rows().iter().enumerate() {
            x[i] = x_u[k];
        }
        for (k, &i) in input.actuated_rows().iter().enumerate() {
            x[i] = x_a_star[k];
        }
        x
    };
    let residual = |x_u: &Vector| assignable_residual(plant, &assemble(x_u));
    let mut x_u = x_u_guess.clone();
    let mut r = residual(&x_u)?;
    let p = dims.unactuated();
    const MAX_ITER: usize = 100;
    for _ in 0..MAX_ITER {
        if r.norm() <= tolerance {
            return Ok(assemble(&x_u));
        }
        let mut jac = DMatrix::zeros(p, p);
        for c in 0..p {
            let h = 1e-6 * x_u[c].abs().max(1.0);
            let mut plus = x_u.clone();
            let mut minus = x_u.clone();
            plus[c] += h;
            minus[c] -= h;
            let col = (residual(&plus)? - residual(&minus)?) / (2.0 * h);
            jac.set_column(c, &col);
        }
        let step = jac
            .lu()
            .solve(&r)
            .ok_or(Error::Singular("assignable-set Jacobian"))?;
        let mut lambda = 1.0;
        loop {
            let trial = &x_u - &step * lambda;
            let rt = residual(&trial)?;
            if rt.norm() < r.norm() || lambda < 1e-8 {
                x_u = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if r.norm() <= tolerance {
        return Ok(assemble(&x_u));
    }
    Err(Error::NoConvergence {
        solver: "assignable completion",
        residual: r.norm(),
        iterations: MAX_ITER,
        last_iterate: x_u.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn linear_plant(a: Matrix, g: Matrix) -> PlantModel {
        PlantModel::new(Arc::new(LinearField::new(a).unwrap()), InputMatrix::new(g).unwrap())
            .unwrap()
    }

    #[test]
    fn dimensions_require_n_greater_than_m() {
        assert!(Dimensions::new(2, 1).is_ok());
        assert_eq!(Dimensions::new(2, 2), Err(Error::InvalidDimensions { n: 2, m: 2 }));
        assert!(Dimensions::new(3, 0).is_err());
    }

    #[test]
    fn input_matrix_structure() {
        let g = InputMatrix::new(dmatrix![0.0; 1.0]).unwrap();
        assert_eq!(g.zero_rows(), &[0]);
        assert_eq!(g.actuated_rows(), &[1]);
        assert!(g.is_standard_form());

        assert_eq!(
            InputMatrix::new(dmatrix![1.0; 1.0]),
            Err(Error::ZeroRowCount { found: 0, expected: 1 })
        );
        assert_eq!(
            InputMatrix::new(dmatrix![0.0, 0.0; 0.0, 0.0; 1.0, 2.0]),
            Err(Error::NotFullRank)
        );
        assert_eq!(
            InputMatrix::new(dmatrix![0.0, 0.0; 1.0, 2.0; 2.0, 4.0]),
            Err(Error::NotFullRank)
        );
    }

    #[test]
    fn normalize_already_normal() {
        let norm = normalize_input_matrix(&dmatrix![0.0; 1.0]).unwrap();
        assert_eq!(norm.transform, DMatrix::identity(2, 2));
        assert_eq!(norm.input_scaling, dmatrix![1.0]);
        assert_eq!(norm.normalized.g2(), &dmatrix![1.0]);
        assert!(!norm.structure_destroying);
    }

    #[test]
    fn normalize_column_of_ones() {
        let g = dmatrix![1.0; 1.0];
        let norm = normalize_input_matrix(&g).unwrap();
        assert_eq!(norm.transform, dmatrix![1.0, -1.0; 0.0, 1.0]);
        assert_eq!(norm.input_scaling, dmatrix![1.0]);
        assert!(norm.structure_destroying);
        let tgs = &norm.transform * &g * &norm.input_scaling;
        assert!((tgs - dmatrix![0.0; 1.0]).amax() <= 1e-12);
        assert_eq!(norm.left_annihilator(), dmatrix![1.0, -1.0]);
    }

    #[test]
    fn normalize_shuffled_rows() {
        let g = dmatrix![1.0, 0.0; 0.0, 0.0; 0.0, 2.0];
        let norm = normalize_input_matrix(&g).unwrap();
        assert_eq!(
            norm.transform,
            dmatrix![0.0, 1.0, 0.0; 1.0, 0.0, 0.0; 0.0, 0.0, 1.0]
        );
        assert_eq!(norm.shuffled_g2, dmatrix![1.0, 0.0; 0.0, 2.0]);
        assert!(!norm.structure_destroying);
        let tgs = &norm.transform * &g * &norm.input_scaling;
        assert!((tgs - norm.normalized.entries()).amax() <= 1e-12);
    }

    #[test]
    fn normalize_rejects_rank_deficient() {
        assert_eq!(
            normalize_input_matrix(&dmatrix![1.0, 2.0; 2.0, 4.0; 3.0, 6.0]),
            Err(Error::NotFullRank)
        );
        assert_eq!(normalize_input_matrix(&dmatrix![0.0; 0.0]), Err(Error::NotFullRank));
    }

    #[test]
    fn partition_examples() {
        let g = InputMatrix::new(dmatrix![0.0; 0.0; 1.0]).unwrap();
        let p = partition_state(&dvector![1.0, 2.0, 3.0], &g).unwrap();
        assert_eq!(p.x_u, dvector![1.0, 2.0]);
        assert_eq!(p.x_a, dvector![3.0]);

        let shuffled = InputMatrix::new(dmatrix![1.0, 0.0; 0.0, 0.0; 0.0, 2.0]).unwrap();
        let p = partition_state(&dvector![5.0, 6.0, 7.0], &shuffled).unwrap();
        assert_eq!(p.x_u, dvector![6.0]);
        assert_eq!(p.x_a, dvector![5.0, 7.0]);

        let p = partition_state(&DVector::zeros(3), &g).unwrap();
        assert_eq!(p.x_u.norm() + p.x_a.norm(), 0.0);

        assert!(matches!(
            partition_state(&dvector![1.0, 2.0], &g),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn annihilator_examples() {
        let g = InputMatrix::new(dmatrix![0.0; 1.0]).unwrap();
        assert_eq!(left_annihilator(&g), dmatrix![1.0, 0.0]);
        let g4 = InputMatrix::new(dmatrix![0.0, 0.0; 0.0, 0.0; 1.0, 0.0; 0.0, 1.0]).unwrap();
        assert_eq!(
            left_annihilator(&g4),
            dmatrix![1.0, 0.0, 0.0, 0.0; 0.0, 1.0, 0.0, 0.0]
        );
        // Null-space oracle for col(1, 1): any multiple of (1, -1).
        let ann = left_annihilator_of(&dmatrix![1.0; 1.0]).unwrap();
        assert!((ann[(0, 0)] + ann[(0, 1)]).abs() < 1e-15 && ann[(0, 0)] != 0.0);
    }

    #[test]
    fn ustar_examples() {
        // f(x) = A x with A Hurwitz: the origin is an open-loop equilibrium.
        let plant = linear_plant(dmatrix![-1.0, 0.0; 1.0, -2.0], dmatrix![0.0; 1.0]);
        let u = solve_ustar(&plant, &dvector![0.0, 0.0], EQUILIBRIUM_TOLERANCE).unwrap();
        assert_eq!(u, dvector![0.0]);

        // f_a(x*) = -3 with G2 = 1 gives u* = 3.
        let plant = linear_plant(dmatrix![-1.0, 0.0; 0.0, -1.0], dmatrix![0.0; 1.0]);
        let x_star = dvector![0.0, 3.0];
        let u = solve_ustar(&plant, &x_star, EQUILIBRIUM_TOLERANCE).unwrap();
        assert_eq!(u, dvector![3.0]);
        let pair = EquilibriumPair::new(&plant, x_star, EQUILIBRIUM_TOLERANCE).unwrap();
        assert!(pair.residual(&plant) <= 1e-15);

        match solve_ustar(&plant, &dvector![1.0, 0.0], EQUILIBRIUM_TOLERANCE) {
            Err(Error::NotAssignable { residual }) => assert_eq!(residual, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn complete_assignable_solves_unactuated_rows() {
        let plant = linear_plant(dmatrix![-2.0, 1.0; 0.5, -3.0], dmatrix![0.0; 1.0]);
        let x = complete_assignable(&plant, &dvector![2.0], &dvector![0.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10);
        assert!(assignable_residual(&plant, &x).unwrap().norm() <= 1e-12);
    }

    proptest! {
        #[test]
        fn partition_then_assemble_is_identity(v in proptest::collection::vec(-1e3f64..1e3, 4)) {
            let g = InputMatrix::new(dmatrix![0.0, 1.0; 0.0, 0.0; 2.0, 0.0; 0.0, 0.0]).unwrap();
            let x = DVector::from_vec(v);
            let p = partition_state(&x, &g).unwrap();
            prop_assert_eq!(p.assemble(), x);
        }

        #[test]
        fn annihilator_and_selector_reconstruct_g(a in -5.0f64..5.0, b in 0.5f64..5.0, c in -5.0f64..5.0) {
            let g = InputMatrix::new(dmatrix![0.0, 0.0; b, a; 0.0, 0.0; c, b + 1.0]).unwrap();
            prop_assert!((left_annihilator(&g) * g.entries()).amax() == 0.0);
            let sel = linalg::select_rows(g.entries(), g.actuated_rows());
            prop_assert_eq!(&sel, g.g2());
        }

        #[test]
        fn normalization_reaches_canonical_form(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.5f64..3.0) {
            let g = dmatrix![a; b; c];
            let norm = normalize_input_matrix(&g).unwrap();
            let tgs = &norm.transform * &g * &norm.input_scaling;
            prop_assert!((tgs - norm.normalized.entries()).amax() <= 1e-12);
            prop_assert!(norm.transform.clone().try_inverse().is_some());
            prop_assert!((norm.left_annihilator() * &g).amax() <= 1e-12);
        }
    }
}
