use std::f64::consts::PI;

use proptest::prelude::*;
use radnls::dynamics::*;
use radnls::radial_grid::{make_grid, GridSpec, RadialField};
use radnls::Complex64;

fn gaussian(r_max: f64, n: usize, amp: f64) -> RadialField {
    let g = make_grid(GridSpec::new(r_max, n, 0.005)).unwrap();
    RadialField::from_real_phi(g, move |r| amp * (-0.5 * r * r).exp())
}

fn max_diff(a: &RadialField, b: &RadialField) -> f64 {
    a.u.iter().zip(&b.u).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn nonlinearity_examples() {
    let g = make_grid(GridSpec::new(8.0, 64, 0.01)).unwrap();
    let one = RadialField::from_real_phi(g.clone(), |_| 1.0);
    let sat = eval_nonlinearity(&NonlinearitySpec::saturated(1.0, 3.0, 1.0), &one, 0.0).unwrap();
    for (a, b) in sat.u.iter().zip(&one.u).take(63) {
        assert!((a + b * 0.5).norm() < 1e-14);
    }

    let f = RadialField::from_real_phi(g.clone(), |r| (-r).exp() * 1.3);
    let pw = eval_nonlinearity(&NonlinearitySpec::power(1.0, 2.0), &f, 0.0).unwrap();
    for (j, v) in pw.u.iter().enumerate() {
        let phi = f.u[j] / g.r[j];
        assert!(v.im.abs() < 1e-15);
        assert!((v / g.r[j] - phi * phi.norm_sqr()).norm() < 1e-13);
    }

    let v = NonlinearitySpec::free().with_potential(PotentialTerm {
        q: 3.0,
        amplitude: 1.0,
        profile: TimeProfile::Constant,
    });
    assert!((v.factor(0.7, 1.0, 3.0) - 0.125).abs() < 1e-15);
}

#[test]
fn parameter_gates() {
    assert!(NonlinearitySpec::power(1.0, 1.2).validate().is_err());
    assert!(NonlinearitySpec::power(1.0, 4.0).validate().is_err());
    assert!(NonlinearitySpec::power(-1.0, 2.0).validate().is_err());
    assert!(NonlinearitySpec::saturated(1.0, 1.0, 1.0).validate().is_err());
    assert!(NonlinearitySpec::saturated(1.0, 5.0, 4.5).validate().is_err());
    let bad_v = NonlinearitySpec::free().with_potential(PotentialTerm {
        q: 1.0,
        amplitude: 1.0,
        profile: TimeProfile::Constant,
    });
    assert!(bad_v.validate().is_err());
    let many = NonlinearitySpec {
        a: 1.0,
        p: 5.0,
        b: 1.0,
        m: 1.0,
        ..NonlinearitySpec::free()
    };
    assert_eq!(many.violations().len(), 2);
}

#[test]
fn antiderivative_matches_quadrature() {
    let spec = NonlinearitySpec {
        a: 0.7,
        p: 2.5,
        b: 1.1,
        m: 3.5,
        n: 1.2,
        ..NonlinearitySpec::free()
    };
    for &s in &[0.1, 0.9, 2.5] {
        // trapezoid in σ with many points
        let k = 200_000;
        let top = s * s;
        let mut acc = 0.0;
        for i in 0..=k {
            let sig = top * i as f64 / k as f64;
            let w = if i == 0 || i == k { 0.5 } else { 1.0 };
            acc += w * spec.factor(sig.sqrt(), 1.0, 0.0);
        }
        acc *= top / k as f64;
        let g = spec.antiderivative(s, 1.0, 0.0);
        assert!((g - acc).abs() < 1e-7 * acc.abs().max(1.0), "s={s}: {g} vs {acc}");
    }
}

#[test]
fn zero_spec_step_is_free_propagator() {
    let f = gaussian(40.0, 1024, 1.0);
    let a = step(&f, &NonlinearitySpec::free(), 0.01).unwrap();
    let b = free_evolve(&f, 0.01);
    assert!(max_diff(&a, &b) <= 1e-13);
}

#[test]
fn free_evolution_basics() {
    let f = gaussian(40.0, 1024, 1.0);
    assert_eq!(max_diff(&free_evolve(&f, 0.0), &f), 0.0);
    let m0 = f.mass();
    let ft = free_evolve(&f, 3.7);
    assert!((ft.mass() - m0).abs() < 1e-12 * m0);
    let back = free_evolve(&ft, -3.7);
    assert!(max_diff(&back, &f) < 1e-12);
}

#[test]
fn pseudo_conformal_invariant() {
    let g = make_grid(GridSpec::new(200.0, 4096, 0.005)).unwrap();
    let f = RadialField::from_real_phi(g, |r| PI.powf(-0.75) * (-0.5 * r * r).exp());
    let q0 = pseudo_conformal(&f, 0.0);
    for i in 1..=10 {
        let t = i as f64;
        let q = pseudo_conformal(&free_evolve(&f, t), t);
        assert!((q - q0).abs() < 1e-6 * q0, "t={t}: {q} vs {q0}");
    }
}

#[test]
fn mass_conserved_by_defocusing_run() {
    let f = gaussian(40.0, 1024, 1.5);
    let s = Stepper::new(f.grid.clone(), NonlinearitySpec::power(1.0, 2.0), 0.005).unwrap();
    let mut u = f.u.clone();
    let m0 = f.mass();
    let mut worst_step: f64 = 0.0;
    let mut prev = m0;
    for i in 0..1000 {
        s.advance(&mut u, i as f64 * 0.005).unwrap();
        let m = f.with_u(u.clone()).mass();
        worst_step = worst_step.max((m - prev).abs() / m0);
        prev = m;
    }
    assert!((prev - m0).abs() / m0 <= 1e-10);
    assert!(worst_step <= 1e-12);
}

fn energy_drift(dt: f64) -> f64 {
    let spec = NonlinearitySpec::power(1.0, 2.0);
    let f = gaussian(30.0, 1024, 1.5);
    let cfg = RunConfig::new(GridSpec::new(30.0, 1024, dt), spec.clone(), 1.0, 1_000_000);
    let run = simulate(&f, &cfg).unwrap();
    let e0 = energy(&spec, run.initial(), 0.0);
    (energy(&spec, run.last(), run.t_max()) - e0).abs() / e0.abs()
}

#[test]
fn energy_drift_is_second_order() {
    let d1 = energy_drift(0.02);
    let d2 = energy_drift(0.01);
    let ratio = d1 / d2;
    assert!(ratio > 3.0 && ratio < 5.0, "drifts {d1:.3e} {d2:.3e} ratio {ratio}");
}

#[test]
fn energy_of_saturated_spec_is_finite_and_conserved_at_small_dt() {
    let spec = NonlinearitySpec::saturated(1.0, 3.5, 1.2);
    let f = gaussian(30.0, 1024, 0.8);
    let cfg = RunConfig::new(GridSpec::new(30.0, 1024, 0.0025), spec.clone(), 0.5, 100);
    let run = simulate(&f, &cfg).unwrap();
    let e0 = energy(&spec, run.initial(), 0.0);
    let e1 = energy(&spec, run.last(), 0.5);
    assert!((e1 - e0).abs() < 1e-4 * e0.abs().max(1.0));
}

#[test]
fn velocity_cones() {
    let g = make_grid(GridSpec::new(200.0, 4096, 0.005)).unwrap();
    let raw = RadialField::from_real_phi(g, |r| (-r * r / 8.0).exp());
    let f0 = band_limit(&raw, 1.0, 2.0).unwrap();
    let rows = velocity_bound_scan(&f0, (1.0, 2.0), 0.5, 5.0, &[0.0, 10.0, 20.0]).unwrap();
    assert_eq!(rows[0].interior, 0.0);
    let last = rows[2];
    assert!(last.interior <= 1e-3, "interior {}", last.interior);
    assert!(last.exterior <= 1e-6, "exterior {}", last.exterior);
    assert!(velocity_bound_scan(&f0, (1.0, 2.0), 0.5, 5.0, &[50.0]).is_err());
    assert!(velocity_bound_scan(&raw, (1.0, 2.0), 0.5, 5.0, &[1.0]).is_err());
}

#[test]
fn nan_aborts() {
    let g = make_grid(GridSpec::new(10.0, 64, 0.01)).unwrap();
    let mut f = RadialField::zeros(g);
    f.u[3] = Complex64::new(1e200, 0.0);
    let r = step(&f, &NonlinearitySpec::power(1.0, 3.5), 0.01);
    assert!(r.is_err());
}

#[test]
fn trajectory_export_and_bookkeeping() {
    let f = gaussian(20.0, 256, 1.0);
    let cfg = RunConfig::new(GridSpec::new(20.0, 256, 0.01), NonlinearitySpec::power(1.0, 2.0), 0.5, 10);
    let run = simulate(&f, &cfg).unwrap();
    assert_eq!(run.snapshots.len(), 6);
    assert!(run.times().windows(2).all(|w| w[1] > w[0]));
    assert!(run.mass_drift() < 1e-12);
    let dir = tempfile::tempdir().unwrap();
    run.export(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let m: TrajectoryManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(m.files.len(), 6);
    let back = RadialField::read_csv(&dir.path().join(&m.files[5])).unwrap();
    assert!(max_diff(&back, run.last()) < 1e-12);
    assert_eq!(run.thinned(2).snapshots.len(), 3);
}

#[test]
fn config_validation_lists_all_problems() {
    let mut cfg = RunConfig::new(GridSpec::new(20.0, 256, 0.01), NonlinearitySpec::power(1.0, 5.0), 0.505, 0);
    cfg.h1_cap = 0.5;
    let v = cfg.violations();
    assert_eq!(v.len(), 4, "{v:?}");
}

#[test]
fn sobolev_ratio_and_l6_are_finite() {
    let f = gaussian(40.0, 1024, 1.0);
    let r = radial_sobolev_ratio(&f).unwrap();
    assert!(r > 0.0 && r < 1.0);
    assert!(l6_norm(&f) > 0.0);
    let z = RadialField::zeros(f.grid.clone());
    assert_eq!(radial_sobolev_ratio(&z).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kick_preserves_modulus(amp in 0.1f64..3.0, p in 1.4f64..3.9, dt in 1e-3f64..0.05) {
        let f = gaussian(20.0, 256, amp);
        let a = step(&f, &NonlinearitySpec::power(1.0, p), dt).unwrap();
        let m0 = f.mass();
        prop_assert!((a.mass() - m0).abs() <= 1e-12 * m0);
    }

    #[test]
    fn free_propagator_is_a_group(t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let f = gaussian(30.0, 512, 1.0);
        let a = free_evolve(&free_evolve(&f, t1), t2);
        let b = free_evolve(&f, t1 + t2);
        prop_assert!(max_diff(&a, &b) < 1e-12);
    }
}
