use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use radnls::cutoffs_weights::ArgMap;
use radnls::dynamics::*;
use radnls::propagation::*;
use radnls::quad::gl16;
use radnls::radial_grid::{inner, make_grid, GridSpec, RadialField};
use radnls::{Cutoff, VectorFieldKind};

fn unit_gaussian(r_max: f64, n: usize, amp: f64) -> RadialField {
    let g = make_grid(GridSpec::new(r_max, n, 0.01)).unwrap();
    RadialField::from_real_phi(g, move |r| amp * PI.powf(-0.75) * (-0.5 * r * r).exp())
}

/// Free unit Gaussian sampled every half unit on `[0, 80]`.
fn free_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        let times: Vec<f64> = (0..=160).map(|i| 0.5 * i as f64).collect();
        free_trajectory(&unit_gaussian(800.0, 8192, 1.0), &times).unwrap()
    })
}

fn defocusing_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| {
        let gs = GridSpec::new(800.0, 8192, 0.01);
        let cfg = RunConfig::new(gs, NonlinearitySpec::power(1.0, 2.0), 80.0, 50);
        simulate(&unit_gaussian(800.0, 8192, 2.0), &cfg).unwrap()
    })
}

/// Wide, slow free Gaussian on `[0, 50]`.
fn slow_run(step: f64, t_end: f64) -> Trajectory {
    let g = make_grid(GridSpec::new(400.0, 4096, 0.01)).unwrap();
    let f0 = RadialField::from_real_phi(g, |r| (-r * r / 32.0).exp());
    let k = (t_end / step).round() as usize;
    let times: Vec<f64> = (0..=k).map(|i| step * i as f64).collect();
    free_trajectory(&f0, &times).unwrap()
}

fn zero_run() -> Trajectory {
    let g = make_grid(GridSpec::new(100.0, 1024, 0.01)).unwrap();
    let snaps = (0..=40)
        .map(|i| {
            let mut z = RadialField::zeros(g.clone());
            z.time_tag = i as f64;
            z
        })
        .collect();
    Trajectory::from_snapshots(NonlinearitySpec::free(), 0.01, snaps).unwrap()
}

/// A fixed localized profile repeated at `t = 1..80`.
fn stationary_run() -> Trajectory {
    let f = unit_gaussian(200.0, 2048, 1.0);
    let snaps = (1..=80)
        .map(|i| {
            let mut s = f.clone();
            s.time_tag = i as f64;
            s
        })
        .collect();
    Trajectory::from_snapshots(NonlinearitySpec::free(), 0.01, snaps).unwrap()
}

/// `∫|k| |ψ̂₀(k)|² d³k` for `ψ₀ = π^{-3/4} e^{-r²/2}`, by Gauss–Legendre on `[0, 12]`.
fn momentum_oracle() -> f64 {
    let rule = gl16();
    let panels = 48;
    let h = 12.0 / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
            let k = h * (p as f64 + 0.5 * (xi + 1.0));
            let psi2 = PI.powf(-1.5) * (-k * k).exp();
            acc += 0.5 * h * wi * 4.0 * PI * k * k * k * psi2;
        }
    }
    acc
}

#[test]
fn identity_observable_gives_mass() {
    let f = unit_gaussian(40.0, 1024, 1.3);
    let v = expectation(&ObservableSpec::identity(), &f, 0.0).unwrap();
    assert!((v - f.mass()).abs() < 1e-13);
}

#[test]
fn exterior_cutoff_misses_compact_profile() {
    let f = unit_gaussian(40.0, 1024, 1.0);
    let obs = ObservableSpec::new(
        "F",
        vec![Factor::Space {
            cutoff: Cutoff::rising(1.0),
            alpha: 0.6,
            log: 0.0,
        }],
    );
    // t^α = 80 > 2·(numerical support ≈ 12)
    let t = 80f64.powf(1.0 / 0.6);
    assert!(expectation(&obs, &f, t).unwrap().abs() <= 1e-8);
    assert!(expectation(&obs, &f, 0.0).is_err());
}

#[test]
fn symmetrized_sandwich_is_real() {
    let f = free_evolve(&unit_gaussian(400.0, 4096, 1.0), 20.0);
    let obs = ObservableSpec::gamma_sandwich(0.6, Cutoff::rising(1.0));
    let xf = obs.apply(&f, 20.0).unwrap();
    let z = inner(&xf, &f).unwrap();
    assert!(z.im.abs() <= 1e-10 * z.re.abs(), "{z}");
}

#[test]
fn gamma_limit_matches_momentum_quadrature() {
    let oracle = momentum_oracle();
    assert!((oracle - 2.0 / PI.sqrt()).abs() < 1e-12);
    let gl = gamma_limit_estimate(free_run(), 0.6, Cutoff::rising(1.0)).unwrap();
    let rel = (gl.gamma_hat - oracle).abs() / oracle;
    assert!(rel <= 0.03, "Γ̂={} oracle={oracle}", gl.gamma_hat);
    assert!(gl.non_negative);
    assert!(gl.convergence.tail_oscillation < 1e-3);
    assert!(gl.convergence.decay_rate.unwrap() < 0.0);
}

#[test]
fn gamma_limit_of_localized_profile_vanishes() {
    let gl = gamma_limit_estimate(&stationary_run(), 0.6, Cutoff::rising(1.0)).unwrap();
    assert!(gl.gamma_hat.abs() <= 1e-2);
    assert!(gl.non_negative);
}

#[test]
fn gamma_limit_verdicts_survive_cutoff_rescaling() {
    let still = stationary_run();
    for c in [0.5, 1.0, 2.0] {
        let moving = gamma_limit_estimate(free_run(), 0.6, Cutoff::rising(c)).unwrap();
        assert!(moving.non_negative && moving.gamma_hat > 0.5, "c={c}");
        let local = gamma_limit_estimate(&still, 0.6, Cutoff::rising(c)).unwrap();
        assert!(local.non_negative && local.gamma_hat.abs() < 1e-2, "c={c}");
    }
}

#[test]
fn gamma_limit_preconditions() {
    let run = free_run();
    assert!(gamma_limit_estimate(run, 0.3, Cutoff::rising(1.0)).is_err());
    assert!(gamma_limit_estimate(run, 1.0, Cutoff::rising(1.0)).is_err());
    let short = free_trajectory(&unit_gaussian(40.0, 512, 1.0), &[1.0, 2.0, 5.0]).unwrap();
    assert!(gamma_limit_estimate(&short, 0.6, Cutoff::rising(1.0)).is_err());
}

#[test]
fn defocusing_gamma_limit_is_non_negative() {
    let gl = gamma_limit_estimate(defocusing_run(), 0.6, Cutoff::rising(1.0)).unwrap();
    assert!(gl.non_negative);
    assert!(gl.gamma_hat > 0.0);
}

#[test]
fn pe_converges_on_free_wave() {
    let r = propagation_integral(free_run(), Preset::Pe { alpha: 0.6 }, DESK_T0).unwrap();
    assert!(r.verdict.converged);
    assert!(r.verdict.tail_ratio <= 0.7, "{:?}", r.verdict);
    assert!(r.scaled);
    assert_eq!(r.times.len(), r.running_integral.len());
}

#[test]
fn pe_family_converges_on_free_and_defocusing_runs() {
    let presets = [
        Preset::Pe { alpha: 0.6 },
        Preset::Pe2 { alpha: 0.6, delta: 0.2 },
        Preset::Pe4v2 {
            alpha: 0.6,
            beta: 0.2,
            c0: 0.5,
        },
    ];
    for run in [free_run(), defocusing_run()] {
        for p in presets {
            let r = propagation_integral(run, p, DESK_T0).unwrap();
            assert!(r.verdict.tail_ratio < 0.8, "{}: {:?}", p.name(), r.verdict);
        }
    }
}

#[test]
fn incoming_integrand_vanishes_on_outgoing_wave() {
    let run = free_run();
    let pe3 = propagation_integral(run, Preset::Pe3 { alpha: 0.6, delta: 0.2 }, 20.0).unwrap();
    let f1 = Factor::Space {
        cutoff: Cutoff::rising(1.0),
        alpha: 0.6,
        log: 0.0,
    };
    let f2 = Factor::GammaCutoff {
        cutoff: Cutoff::rising(0.2),
        beta: 0.0,
        log: 0.0,
    };
    let with_gamma = ObservableSpec::new("F1γF2F1", vec![f1.clone(), Factor::Gamma, f2.clone(), f1.clone()]);
    let plain = ObservableSpec::new("F1F2F1", vec![f1.clone(), f2, f1]);
    for (k, &t) in pe3.times.iter().enumerate() {
        if t < 40.0 || k % 10 != 0 {
            continue;
        }
        let s = run.at(t);
        let out = t.powf(-0.6) * (expectation(&with_gamma, s, t).unwrap().abs() + expectation(&plain, s, t).unwrap());
        assert!(pe3.integrand[k] <= 1e-3 * out, "t={t}: {} vs {out}", pe3.integrand[k]);
    }
}

#[test]
fn integrals_of_zero_field_vanish() {
    let run = zero_run();
    for p in [
        Preset::Pe { alpha: 0.6 },
        Preset::Pe5 { alpha: 0.7, c1: 0.1 },
        Preset::PeBoundary { alpha: 0.7 },
        Preset::Bab { a: 1.0, b: -1.0, c: 0.5 },
        Preset::PeR2 {
            alpha: 0.6,
            beta: 0.3,
            m: 4.0,
        },
    ] {
        let r = propagation_integral(&run, p, 5.0).unwrap();
        assert!(r.running_integral.iter().all(|v| *v == 0.0), "{}", p.name());
        assert_eq!(r.verdict.tail_ratio, 0.0);
    }
}

#[test]
fn every_preset_evaluates_on_a_free_wave() {
    let run = free_run();
    for p in [
        Preset::Pe3 { alpha: 0.6, delta: 0.2 },
        Preset::Pe5 { alpha: 0.7, c1: 0.1 },
        Preset::PeBoundary { alpha: 0.7 },
        Preset::Bab { a: 1.0, b: -1.0, c: 0.5 },
        Preset::PeR2 {
            alpha: 0.6,
            beta: 0.3,
            m: 4.0,
        },
    ] {
        let r = propagation_integral(run, p, DESK_T0).unwrap();
        assert!(r.integrand.iter().all(|v| v.is_finite()), "{}", p.name());
        assert!(r.verdict.converged, "{}: {:?}", p.name(), r.verdict);
    }
}

#[test]
fn preset_gates_cite_the_failing_condition() {
    let bad = [
        Preset::Pe { alpha: 0.3 },
        Preset::Pe2 { alpha: 0.6, delta: 0.0 },
        Preset::Pe5 { alpha: 0.7, c1: 0.2 },
        Preset::PeBoundary { alpha: 0.5 },
        Preset::Bab { a: 1.0, b: -1.0, c: 0.2 },
        Preset::Bab { a: 0.2, b: 0.0, c: 1.0 },
        Preset::PeR2 {
            alpha: 0.6,
            beta: 0.5,
            m: 4.0,
        },
    ];
    for p in bad {
        let e = p.validate().unwrap_err().to_string();
        assert!(e.contains(p.name()), "{e}");
    }
    let e = Preset::Pe4v2 {
        alpha: 0.3,
        beta: 0.1,
        c0: 0.5,
    }
    .validate()
    .unwrap_err()
    .to_string();
    assert!(e.contains("case 3"), "{e}");
    assert_eq!(Preset::pe4_case(0.7, 0.1, 1.0), Some(1));
    assert_eq!(Preset::pe4_case(0.4, 0.2, 1.0), Some(2));
    assert_eq!(Preset::pe4_case(0.6, 0.4, 0.35), Some(3));
    assert_eq!(Preset::pe4_case(0.6, 0.4, 0.25), Some(2));
    assert_eq!(Preset::pe4_case(0.6, 0.1, 0.0), None);
    assert!(propagation_integral(&zero_run(), Preset::Bab { a: 1.0, b: -1.0, c: 0.5 }, 1.0).is_err());
}

#[test]
fn boundary_term_count() {
    for alpha in [0.55, 0.7, 0.95] {
        let j = Preset::boundary_terms(alpha);
        assert!(0.75f64.powi(j as i32) < alpha / 8.0);
        assert!(0.75f64.powi(j as i32 - 1) >= alpha / 8.0);
    }
    let r = propagation_integral(free_run(), Preset::PeBoundary { alpha: 0.7 }, DESK_T0).unwrap();
    assert_eq!(r.boundary_terms, Some(Preset::boundary_terms(0.7)));
}

#[test]
fn pe_integral_is_stride_independent() {
    let run = free_run();
    let a = propagation_integral(run, Preset::Pe { alpha: 0.6 }, DESK_T0).unwrap();
    let b = propagation_integral(&run.thinned(2), Preset::Pe { alpha: 0.6 }, DESK_T0).unwrap();
    let (ia, ib) = (*a.running_integral.last().unwrap(), *b.running_integral.last().unwrap());
    assert!((ia - ib).abs() <= 0.02 * ia.abs(), "{ia} vs {ib}");
}

#[test]
fn boundary_series_decays_and_integral_grows_slowly() {
    let c = boundary_limit_check(free_run(), 0.6, Cutoff::rising(1.0), DESK_T0).unwrap();
    let k = c.times.iter().position(|&t| t >= 50.0).unwrap();
    assert!(c.series[k..].iter().all(|v| v.abs() <= 1e-2));
    assert!(c.tail_magnitude <= 1e-2);
    assert!(c.growth_exponent.unwrap() <= 0.7, "{:?}", c.growth_exponent);
    assert!(c.fitted_constant.is_finite());
    let z = boundary_limit_check(&stationary_run(), 0.6, Cutoff::rising(1.0), DESK_T0).unwrap();
    assert!(z.series.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn exterior_morawetz_balances_on_free_wave() {
    let run = slow_run(0.25, 50.0);
    let m = exterior_morawetz(&run, DESK_M, &[10.0, 40.0]).unwrap();
    assert!(m.scaled);
    assert!(!m.boundary_flag);
    let w = &m.windows[0];
    assert!(w.residual <= 0.05, "{w:?}");
    assert_eq!(w.interaction, 0.0);
    let z = exterior_morawetz(&zero_run(), DESK_M, &[10.0, 30.0]).unwrap();
    assert_eq!(z.windows[0].lhs, 0.0);
    assert_eq!(z.windows[0].rhs, 0.0);
    assert!(exterior_morawetz(&run, DESK_M, &[40.0, 10.0]).is_err());
}

#[test]
fn morawetz_interaction_decays_in_m() {
    let gs = GridSpec::new(400.0, 4096, 0.01);
    let f0 = RadialField::from_real_phi(make_grid(gs).unwrap(), |r| (-r * r / 32.0).exp());
    let run = simulate(&f0, &RunConfig::new(gs, NonlinearitySpec::saturated(1.0, 3.5, 1.2), 40.0, 10)).unwrap();
    let mut prev = f64::INFINITY;
    for m in [10.0, 20.0, 40.0] {
        let w = exterior_morawetz(&run, m, &[10.0, 40.0]).unwrap();
        let i = w.windows[0].interaction.abs();
        assert!(i < prev, "M={m}: {i} vs {prev}");
        prev = i;
    }
}

#[test]
fn dilation_growth_decays_in_m() {
    let run = slow_run(5.0, 10.0);
    let s = dilation_bound_sweep(&run, &[8.0, 16.0, 32.0]).unwrap();
    assert!(s.growth.windows(2).all(|w| w[1] < w[0]), "{:?}", s.growth);
    assert!(s.slope.unwrap() < 0.0);
}

#[test]
fn outgoing_kinetic_part_rises_toward_kinetic_energy() {
    let run = slow_run(2.5, 50.0);
    let d = dilation_bound_series(&run, 8.0, 8f64.sqrt()).unwrap();
    let ke = run.initial().kinetic();
    assert!(d.p_projected.windows(2).all(|w| w[1] >= w[0] - 1e-9 * ke));
    let last = *d.p_projected.last().unwrap();
    assert!(last <= ke * (1.0 + 1e-6) && last >= 0.6 * ke, "{last} vs {ke}");
    let z = dilation_bound_series(&zero_run(), 8.0, 8f64.sqrt()).unwrap();
    assert!(z.a_projected.iter().chain(&z.p_projected).all(|v| *v == 0.0));
}

#[test]
fn local_smoothing_is_linear_and_quadratic() {
    let run = slow_run(0.1, 4.0);
    let kind = VectorFieldKind::SqrtSmoothed { theta: 1.5 };
    let a = local_smoothing_functional(&run, kind, (0.0, 4.0)).unwrap();
    assert!(a.value > 0.0 && a.value.is_finite());
    assert!(a.linear_fit.unwrap().r2 >= 0.95);
    let doubled = Trajectory::from_snapshots(
        NonlinearitySpec::free(),
        run.dt,
        run.snapshots.iter().map(|s| s.scale_re(2.0)).collect(),
    )
    .unwrap();
    let b = local_smoothing_functional(&doubled, kind, (0.0, 4.0)).unwrap();
    assert!((b.value - 4.0 * a.value).abs() < 1e-10 * b.value);
    let z = local_smoothing_functional(&zero_run(), kind, (0.0, 10.0)).unwrap();
    assert_eq!(z.value, 0.0);
}

#[test]
fn virial_identity_free_and_defocusing() {
    let free = virial_series(&slow_run(0.25, 10.0)).unwrap();
    assert!(free.relative_rms <= 1e-3);
    let k0 = free.rhs[0];
    assert!(free.rhs.iter().all(|v| (v - k0).abs() < 1e-9 * k0));
    let defoc = virial_series(defocusing_run()).unwrap();
    assert!(defoc.relative_rms <= 1e-2, "{}", defoc.relative_rms);
    let z = virial_series(&zero_run()).unwrap();
    assert!(z.derivative.iter().chain(&z.rhs).all(|v| *v == 0.0));
}

#[test]
fn virial_refuses_time_dependent_potential() {
    let spec = NonlinearitySpec::free().with_potential(PotentialTerm {
        q: 3.0,
        amplitude: 1.0,
        profile: TimeProfile::Cosine { omega: 1.0 },
    });
    let f = unit_gaussian(40.0, 512, 1.0);
    let cfg = RunConfig::new(GridSpec::new(40.0, 512, 0.01), spec, 0.2, 5);
    let run = simulate(&f, &cfg).unwrap();
    assert!(virial_series(&run).is_err());
}

#[test]
fn radial_delta_gamma_form_vanishes() {
    let g = make_grid(GridSpec::new(200.0, 4096, 0.01)).unwrap();
    let f = RadialField::from_real_phi(g, |r| (-(r - 30.0) * (r - 30.0) / 20.0).exp());
    for s in [4.0, 8.0] {
        let (form, scale) = delta_gamma_function_form(&f, s, &Cutoff::rising(0.5), 1.0).unwrap();
        assert!(form <= 1e-6 * scale, "s={s}: {form} vs {scale}");
    }
}

#[test]
fn observable_spec_round_trips_through_json() {
    let obs = ObservableSpec::new(
        "mixed",
        vec![
            Factor::Space {
                cutoff: Cutoff::rising(1.0),
                alpha: 0.6,
                log: 0.0,
            },
            Factor::GammaCutoff {
                cutoff: Cutoff::rising(0.3).with_arg(ArgMap::Negate),
                beta: 0.2,
                log: 0.0,
            },
            Factor::Momentum { power: 1.5 },
        ],
    );
    let s = serde_json::to_string(&obs).unwrap();
    let back: ObservableSpec = serde_json::from_str(&s).unwrap();
    assert_eq!(back, obs);
    let p: Preset = serde_json::from_str(r#"{"preset":"PE-4V2","alpha":0.6,"beta":0.2,"c0":0.5}"#).unwrap();
    assert_eq!(p.name(), "PE-4V2");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn expectation_is_quadratic(c in 0.1f64..4.0, t in 5.0f64..30.0) {
        let f = free_evolve(&unit_gaussian(200.0, 2048, 1.0), t);
        let obs = ObservableSpec::gamma_sandwich(0.6, Cutoff::rising(1.0));
        let a = expectation(&obs, &f, t).unwrap();
        let b = expectation(&obs, &f.scale_re(c), t).unwrap();
        prop_assert!((b - c * c * a).abs() <= 1e-10 * b.abs().max(1e-300));
    }

    #[test]
    fn momentum_expectation_is_non_negative(p in 0.5f64..2.0, w in 1.0f64..8.0) {
        let g = make_grid(GridSpec::new(100.0, 1024, 0.01)).unwrap();
        let f = RadialField::from_real_phi(g, move |r| (-r * r / w).exp() * (1.0 + r).powf(-p));
        let obs = ObservableSpec::new("p", vec![Factor::Momentum { power: p }]);
        prop_assert!(expectation(&obs, &f, 0.0).unwrap() >= 0.0);
    }
}
