//! One-pass certification of the structural, equilibrium, storage and
//! thermal assumptions, with witnesses for every failed item.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::Error;
use crate::model::{self, InputMatrix, PlantModel, VectorField, EQUILIBRIUM_TOLERANCE};
use crate::ph::{verify_ph_assumptions, PhModel};
use crate::sampling::BoxSampler;
use crate::storage::{check_assumption3, Assumption3Report, ItemCheck, SeparableStorage, CHECK_TOLERANCE};
use crate::thermal::{self, CertificateMethod, MonotonicityReport, ThermalModel};
use crate::{Matrix, Vector};

/// What is being certified. Thermal targets are in temperature coordinates.
pub enum Subject<'a> {
    Thermal(&'a ThermalModel),
    PortHamiltonian(&'a PhModel),
    /// A raw input matrix, so that a `G` without the zero-row structure can
    /// still be reported on. Storage checks run only when `storage` is given.
    Custom {
        g: &'a Matrix,
        field: Arc<dyn VectorField>,
        storage: Option<&'a SeparableStorage>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralCheck {
    pub zero_rows: usize,
    pub expected_zero_rows: usize,
    pub g2_invertible: bool,
    pub passed: bool,
}

impl StructuralCheck {
    pub fn of(g: &Matrix) -> Self {
        let zero_rows = (0..g.nrows()).filter(|&i| g.row(i).iter().all(|&v| v == 0.0)).count();
        let expected_zero_rows = g.nrows().saturating_sub(g.ncols());
        let g2_invertible = zero_rows == expected_zero_rows && InputMatrix::new(g.clone()).is_ok();
        Self {
            zero_rows,
            expected_zero_rows,
            g2_invertible,
            passed: zero_rows == expected_zero_rows && g2_invertible,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCheck {
    /// `‖G⊥ f(x*)‖`.
    pub residual: f64,
    pub tolerance: f64,
    pub u_star: Option<Vector>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalStabilityCheck {
    pub p: Option<Vector>,
    /// `-λ_max(P A1 + A1ᵀ P)`; `-inf` when no certificate was found.
    pub margin: f64,
    pub method: Option<CertificateMethod>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalCheck {
    pub diagonal: DiagonalStabilityCheck,
    pub monotonicity: Option<MonotonicityReport>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhItems {
    pub item_i: ItemCheck,
    pub item_ii: ItemCheck,
    pub skew_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub assumption1: StructuralCheck,
    pub assumption2: Option<EquilibriumCheck>,
    pub assumption3: Option<Assumption3Report>,
    pub assumption4: Option<ThermalCheck>,
    pub ph: Option<PhItems>,
    pub seed: u64,
    pub samples: usize,
    /// Checker errors that prevented an item from running.
    pub notes: Vec<String>,
    pub overall: bool,
}

impl CertificationReport {
    /// Names of the failed items, e.g. `assumption3.iv`.
    pub fn failed_items(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.assumption1.passed {
            out.push("assumption1");
        }
        match &self.assumption2 {
            Some(a) if !a.passed => out.push("assumption2"),
            None => out.push("assumption2"),
            _ => {}
        }
        if let Some(a) = &self.assumption3 {
            for (name, item) in [
                ("assumption3.i", &a.item_i),
                ("assumption3.ii", &a.item_ii),
                ("assumption3.iii", &a.item_iii),
                ("assumption3.iv", &a.item_iv),
            ] {
                if !item.passed {
                    out.push(name);
                }
            }
        }
        if let Some(t) = &self.assumption4 {
            if !t.diagonal.passed {
                out.push("assumption4.diagonal");
            }
            if t.monotonicity.as_ref().is_some_and(|m| !m.passed) {
                out.push("assumption4.monotonicity");
            }
        }
        if let Some(p) = &self.ph {
            if !p.item_i.passed {
                out.push("ph.i");
            }
            if !p.item_ii.passed {
                out.push("ph.ii");
            }
        }
        out
    }

    /// `SUMMARY overall=... failed=...` line for scripts.
    pub fn summary_line(&self) -> String {
        let failed = self.failed_items();
        let verdict = |ok: Option<bool>| match ok {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "n/a",
        };
        format!(
            "SUMMARY overall={} a1={} a2={} a3={} a4={} ph={} seed={} samples={} failed={}",
            if self.overall { "pass" } else { "fail" },
            verdict(Some(self.assumption1.passed)),
            verdict(self.assumption2.as_ref().map(|a| a.passed)),
            verdict(self.assumption3.as_ref().map(|a| a.passed())),
            verdict(self.assumption4.as_ref().map(|a| a.passed)),
            verdict(self.ph.as_ref().map(|p| p.item_i.passed && p.item_ii.passed)),
            self.seed,
            self.samples,
            if failed.is_empty() { String::from("none") } else { failed.join(",") },
        )
    }

    fn finish(mut self, storage_expected: bool) -> Self {
        let a3_ok = match &self.assumption3 {
            Some(a) => a.passed(),
            None => !storage_expected,
        };
        self.overall = self.assumption1.passed
            && self.assumption2.as_ref().is_some_and(|a| a.passed)
            && a3_ok
            && self.assumption4.as_ref().is_none_or(|a| a.passed)
            && self.ph.as_ref().is_none_or(|p| p.item_i.passed && p.item_ii.passed);
        self
    }
}

/// `-λ_max(P A + Aᵀ P)` for a linear plant `f(x) = A x` with quadratic
/// storage `xᵀ P x`. A nonnegative margin gives the monotonicity item of
/// the storage assumption without sampling.
pub fn linear_convergence_margin(p: &Matrix, a: &Matrix) -> Result<f64, Error> {
    if !a.is_square() {
        return Err(Error::InvalidConfig("A must be square"));
    }
    crate::error::check_len("P rows", a.nrows(), p.nrows())?;
    crate::error::check_len("P columns", a.nrows(), p.ncols())?;
    Ok(-crate::linalg::max_symmetric_eigenvalue(&(p * a + a.transpose() * p)))
}

/// Runs every applicable check. Checker errors are recorded in `notes`
/// and fail the affected item; nothing is returned as an `Err`.
pub fn certify(subject: Subject<'_>, x_star: &Vector, sampler: &BoxSampler) -> CertificationReport {
    match subject {
        Subject::Thermal(m) => certify_thermal(m, x_star, sampler),
        Subject::PortHamiltonian(m) => certify_ph(m, x_star, sampler),
        Subject::Custom { g, field, storage } => certify_custom(g, field, storage, x_star, sampler),
    }
}

fn blank(assumption1: StructuralCheck, sampler: &BoxSampler) -> CertificationReport {
    CertificationReport {
        assumption1,
        assumption2: None,
        assumption3: None,
        assumption4: None,
        ph: None,
        seed: sampler.seed(),
        samples: sampler.count(),
        notes: Vec::new(),
        overall: false,
    }
}

fn equilibrium(plant: &PlantModel, x_star: &Vector, notes: &mut Vec<String>) -> Option<EquilibriumCheck> {
    match model::assignable_residual(plant, x_star) {
        Ok(r) => {
            let residual = r.norm();
            let passed = residual <= EQUILIBRIUM_TOLERANCE;
            let u_star = if passed {
                model::solve_ustar(plant, x_star, EQUILIBRIUM_TOLERANCE).ok()
            } else {
                None
            };
            Some(EquilibriumCheck {
                residual,
                tolerance: EQUILIBRIUM_TOLERANCE,
                u_star,
                passed,
            })
        }
        Err(e) => {
            notes.push(format!("assumption2: {e}"));
            None
        }
    }
}

fn storage_check(
    storage: Result<SeparableStorage, Error>,
    plant: &PlantModel,
    sampler: &BoxSampler,
    notes: &mut Vec<String>,
) -> Option<Assumption3Report> {
    match storage.and_then(|s| check_assumption3(&s, plant, sampler, CHECK_TOLERANCE)) {
        Ok(r) => Some(r),
        Err(e) => {
            notes.push(format!("assumption3: {e}"));
            None
        }
    }
}

fn certify_thermal(model: &ThermalModel, t_star: &Vector, sampler: &BoxSampler) -> CertificationReport {
    let mut report = blank(StructuralCheck::of(model.input().entries()), sampler);
    let mut notes = Vec::new();
    report.assumption2 = equilibrium(&model.temperature_plant(), t_star, &mut notes);

    let (diagonal, p) = match thermal::diagonal_stability_solve(model.a1()) {
        Ok(c) => (
            DiagonalStabilityCheck {
                p: Some(c.p.clone()),
                margin: c.margin,
                method: Some(c.method),
                passed: c.margin > 0.0,
            },
            Some(c.p),
        ),
        Err(e) => {
            notes.push(format!("assumption4: {e}"));
            (
                DiagonalStabilityCheck {
                    p: None,
                    margin: f64::NEG_INFINITY,
                    method: None,
                    passed: false,
                },
                None,
            )
        }
    };
    let monotonicity = p.as_ref().and_then(|p| {
        thermal::monotonicity_check(model.a2(), p, sampler, CHECK_TOLERANCE)
            .map_err(|e| notes.push(format!("assumption4: {e}")))
            .ok()
    });
    let passed = diagonal.passed && monotonicity.as_ref().is_some_and(|m| m.passed);
    report.assumption4 = Some(ThermalCheck {
        diagonal,
        monotonicity,
        passed,
    });

    if let Some(p) = p {
        if t_star.len() == model.n() && sampler.dim() == model.n() {
            let shifted = BoxSampler::new(
                sampler.lower() - model.t_bar(),
                sampler.upper() - model.t_bar(),
                sampler.count(),
                sampler.seed(),
            );
            let x_star = t_star - model.t_bar();
            report.assumption3 = match shifted {
                Ok(s) => storage_check(
                    thermal::storage_from_certificate(model, &p, x_star),
                    &model.shifted_plant(),
                    &s,
                    &mut notes,
                ),
                Err(e) => {
                    notes.push(format!("assumption3: {e}"));
                    None
                }
            };
        } else {
            notes.push(String::from("assumption3: target or sampler dimension mismatch"));
        }
    }
    report.notes = notes;
    report.finish(true)
}

fn certify_ph(model: &PhModel, x_star: &Vector, sampler: &BoxSampler) -> CertificationReport {
    let mut report = blank(StructuralCheck::of(model.input().entries()), sampler);
    let mut notes = Vec::new();
    report.assumption2 = equilibrium(&model.plant(), x_star, &mut notes);
    match verify_ph_assumptions(model, x_star, sampler, CHECK_TOLERANCE) {
        Ok(r) => {
            report.ph = Some(PhItems {
                item_i: r.item_i,
                item_ii: r.item_ii,
                skew_residual: r.skew_residual,
            });
            report.assumption3 = Some(r.assumption3);
        }
        Err(e) => notes.push(format!("assumption3: {e}")),
    }
    report.notes = notes;
    report.finish(true)
}

fn certify_custom(
    g: &Matrix,
    field: Arc<dyn VectorField>,
    storage: Option<&SeparableStorage>,
    x_star: &Vector,
    sampler: &BoxSampler,
) -> CertificationReport {
    let mut report = blank(StructuralCheck::of(g), sampler);
    if !report.assumption1.passed {
        return report.finish(storage.is_some());
    }
    let mut notes = Vec::new();
    let plant = InputMatrix::new(g.clone()).and_then(|input| PlantModel::new(field, input));
    match plant {
        Ok(plant) => {
            report.assumption2 = equilibrium(&plant, x_star, &mut notes);
            if let Some(s) = storage {
                report.assumption3 = storage_check(s.with_target(x_star.clone()), &plant, sampler, &mut notes);
            }
        }
        Err(e) => notes.push(format!("plant: {e}")),
    }
    report.notes = notes;
    report.finish(storage.is_some())
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.9e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_item(f: &mut fmt::Formatter<'_>, name: &str, item: &ItemCheck) -> fmt::Result {
    write!(
        f,
        "  {name}: {} worst={:.6e}",
        if item.passed { "pass" } else { "FAIL" },
        item.worst
    )?;
    match &item.witness {
        Some(w) if !item.passed => writeln!(f, " witness={}", fmt_vec(w)),
        _ => writeln!(f),
    }
}

impl fmt::Display for CertificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a1 = &self.assumption1;
        writeln!(f, "[assumption1] {}", if a1.passed { "pass" } else { "FAIL" })?;
        writeln!(f, "  zero_rows={} expected={}", a1.zero_rows, a1.expected_zero_rows)?;
        writeln!(f, "  g2_invertible={}", a1.g2_invertible)?;

        match &self.assumption2 {
            Some(a) => {
                writeln!(f, "[assumption2] {}", if a.passed { "pass" } else { "FAIL" })?;
                writeln!(f, "  residual={:.6e} tolerance={:.1e}", a.residual, a.tolerance)?;
                if let Some(u) = &a.u_star {
                    writeln!(f, "  u_star={}", fmt_vec(u))?;
                }
            }
            None => writeln!(f, "[assumption2] not run")?,
        }

        match &self.assumption3 {
            Some(a) => {
                writeln!(f, "[assumption3] {}", if a.passed() { "pass" } else { "FAIL" })?;
                fmt_item(f, "i", &a.item_i)?;
                fmt_item(f, "ii", &a.item_ii)?;
                fmt_item(f, "iii", &a.item_iii)?;
                fmt_item(f, "iv", &a.item_iv)?;
                writeln!(f, "  min_storage={:.6e}", a.positivity.worst)?;
            }
            None => writeln!(f, "[assumption3] not run")?,
        }

        if let Some(t) = &self.assumption4 {
            writeln!(f, "[assumption4] {}", if t.passed { "pass" } else { "FAIL" })?;
            let d = &t.diagonal;
            writeln!(
                f,
                "  diagonal: {} margin={:.6e} method={}",
                if d.passed { "pass" } else { "FAIL" },
                d.margin,
                match d.method {
                    Some(CertificateMethod::Metzler) => "metzler",
                    Some(CertificateMethod::ProjectedSubgradient) => "subgradient",
                    None => "none",
                }
            )?;
            if let Some(p) = &d.p {
                writeln!(f, "  p={}", fmt_vec(p))?;
            }
            match &t.monotonicity {
                Some(m) => {
                    write!(
                        f,
                        "  monotonicity: {} margin={:.6e} analytic={}",
                        if m.passed { "pass" } else { "FAIL" },
                        m.margin + 0.0,
                        m.analytic
                    )?;
                    match &m.witness {
                        Some(w) if !m.passed => writeln!(f, " witness={}", fmt_vec(w))?,
                        _ => writeln!(f)?,
                    }
                }
                None => writeln!(f, "  monotonicity: not run")?,
            }
        }

        if let Some(p) = &self.ph {
            let ok = p.item_i.passed && p.item_ii.passed;
            writeln!(f, "[port_hamiltonian] {}", if ok { "pass" } else { "FAIL" })?;
            fmt_item(f, "i", &p.item_i)?;
            fmt_item(f, "ii", &p.item_ii)?;
            writeln!(f, "  skew_residual={:.6e}", p.skew_residual)?;
        }

        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        writeln!(f, "{}", self.summary_line())
    }
}
