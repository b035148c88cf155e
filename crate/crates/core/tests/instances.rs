use nalgebra::{dvector, DVector};
use pipbc_core::controller::{matched_ideal_gains, IdealPiPbc, PiLaw, RobustGains};
use pipbc_core::instances;
use pipbc_core::model::{complete_assignable, solve_ustar};
use pipbc_core::sampling::BoxSampler;
use pipbc_core::sim::{simulate_closed_loop, IntegratorConfig, Oracle};
use pipbc_core::storage::SeparableStorage;
use pipbc_core::thermal::{build_thermal_controller, diagonal_stability_solve, temperature_storage, ThermalModel};
use pipbc_core::Vector;
use proptest::prelude::*;

fn fd_gradient(h: &SeparableStorage, x: &Vector) -> Vector {
    DVector::from_fn(x.len(), |i, _| {
        let step = 1e-6 * x[i].abs().max(1.0);
        let mut a = x.clone();
        let mut b = x.clone();
        a[i] += step;
        b[i] -= step;
        (h.value(&a) - h.value(&b)) / (2.0 * step)
    })
}

fn thermal_storage(m: &ThermalModel, t: &Vector) -> SeparableStorage {
    let cert = diagonal_stability_solve(m.a1()).unwrap();
    temperature_storage(m, &cert.p, t.clone()).unwrap()
}

#[test]
fn gradients_match_finite_differences() {
    let (tp1, t1) = instances::tp1_with_target();
    let (tp2, t2) = instances::tp2_with_target();
    let cases = [
        (thermal_storage(&tp1, &t1), tp1.default_box(Some(&t1))),
        (thermal_storage(&tp2, &t2), tp2.default_box(Some(&t2))),
        (instances::ph1().hamiltonian().clone(), (dvector![-1.0, -2.0], dvector![5.0, 2.0])),
    ];
    for (h, (lo, hi)) in cases {
        for x in BoxSampler::new(lo, hi, 100, 3).unwrap().points().unwrap() {
            let g = h.gradient(&x);
            let rel = (&g - fd_gradient(&h, &x)).norm() / g.norm();
            assert!(rel <= 1e-5, "{x} {rel}");
        }
    }
}

#[test]
fn pinned_equilibria() {
    for (m, t) in [instances::tp1_with_target(), instances::tp2_with_target()] {
        assert!(m.equilibrium_residual() <= 1e-10);
        let u = m.u_star(&t).unwrap();
        assert!(m.temperature_plant().rhs(&t, &u).norm() <= 1e-8);
        assert!(u.iter().all(|&v| v > 0.0), "heater power {u}");
    }
    let ph = instances::ph1();
    let plant = ph.plant();
    let x = complete_assignable(&plant, &Vector::from_row_slice(&instances::PH1_TARGET), &Vector::zeros(1), 1e-12)
        .unwrap();
    let u = solve_ustar(&plant, &x, 1e-8).unwrap();
    assert!(plant.rhs(&x, &u).norm() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn w_never_increases_on_tp1(
        gp in -2.0f64..2.0,
        gi in -2.0f64..2.0,
        t0 in proptest::collection::vec(0.0f64..2.0, 2),
        z0 in -5.0f64..5.0,
    ) {
        let (m, t) = instances::tp1_with_target();
        let (gp, gi) = (dvector![10f64.powf(gp)], dvector![10f64.powf(gi)]);
        let law = build_thermal_controller(&m, &t, gp.clone(), gi.clone()).unwrap();
        let gains = RobustGains::new(gp, gi, m.input().g2().clone()).unwrap();
        let oracle = Oracle::for_robust(thermal_storage(&m, &t), m.u_star(&t).unwrap(), &gains).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 2.0).unwrap().with_record_every(usize::MAX);
        let tr = simulate_closed_loop(&m.temperature_plant(), &law, &DVector::from_vec(t0), &dvector![z0], &cfg, Some(&oracle))
            .unwrap();
        prop_assert!(tr.audit.unwrap().max_w_increase <= 1e-9);
    }

    #[test]
    fn robust_and_matched_ideal_agree_on_tp2(
        gp in proptest::collection::vec(-2.0f64..2.0, 2),
        gi in proptest::collection::vec(-2.0f64..2.0, 2),
        x in proptest::collection::vec(0.1f64..2.5, 2),
        z in proptest::collection::vec(-5.0f64..5.0, 2),
    ) {
        let (m, t) = instances::tp2_with_target();
        let gp = DVector::from_iterator(2, gp.into_iter().map(|v| 10f64.powf(v)));
        let gi = DVector::from_iterator(2, gi.into_iter().map(|v| 10f64.powf(v)));
        let robust = build_thermal_controller(&m, &t, gp.clone(), gi.clone()).unwrap();
        let storage = thermal_storage(&m, &t);
        let gains = RobustGains::new(gp, gi, m.input().g2().clone()).unwrap();
        let ideal = IdealPiPbc::new(matched_ideal_gains(&gains, storage.weights()).unwrap(), storage, gains.g2().clone())
            .unwrap();
        let (x, z) = (DVector::from_vec(x), DVector::from_vec(z));
        let a = robust.step(&x, &z);
        let b = ideal.step(&x, &z);
        let scale = (&a.u - &z).norm().max(a.u.norm());
        prop_assert!((&a.u - &b.u).norm() <= 1e-11 * scale);
        prop_assert!((&a.z_dot - &b.z_dot).norm() <= 1e-11 * a.z_dot.norm());
    }
}
