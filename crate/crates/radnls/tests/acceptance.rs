use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use radnls::channels::extract_free_channel;
use radnls::cli::{identity_suite, mellin_suite, run, Command, ExperimentConfig};
use radnls::cutoffs_weights::{eval_smooth_bracket_variant, eval_weight_derivs};
use radnls::dynamics::*;
use radnls::op_functions::{flow_z, standard_flow};
use radnls::operators::{commutator_support_check, exterior_identity_residual};
use radnls::propagation::*;
use radnls::quad::gl16;
use radnls::radial_grid::{make_grid, GridSpec, RadialField};
use radnls::{Cutoff, SmoothWeight};

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn line(id: u32, pass: bool, detail: String) -> Line {
    Line { id, pass, detail }
}

fn bump(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |r: f64| {
        if r <= lo || r >= hi {
            0.0
        } else {
            let x = (r - lo) / (hi - lo);
            (-1.0 / (x * (1.0 - x))).exp()
        }
    }
}

fn unit_gaussian(r_max: f64, n: usize, amp: f64) -> RadialField {
    let g = make_grid(GridSpec::new(r_max, n, 0.01)).unwrap();
    RadialField::from_real_phi(g, move |r| amp * PI.powf(-0.75) * (-0.5 * r * r).exp())
}

/// `∫|k||ψ̂₀(k)|² d³k` for the unit Gaussian, by composite Gauss–Legendre.
fn momentum_oracle() -> f64 {
    let rule = gl16();
    let panels = 48;
    let h = 12.0 / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
            let k = h * (p as f64 + 0.5 * (xi + 1.0));
            acc += 0.5 * h * wi * 4.0 * PI * k.powi(3) * PI.powf(-1.5) * (-k * k).exp();
        }
    }
    acc
}

fn criterion_1() -> Line {
    let start = Instant::now();
    let s = identity_suite(20_240, 100).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = s.cases.len() == 100 && s.symmetrization_worst <= 1e-10 && s.expansion_violations == 0 && secs < 10.0;
    line(
        1,
        pass,
        format!(
            "operator identities: worst symmetrization residual {:.2e} (tol 1e-10), expansion bound violations {}/100, min slack {:.3e}, {secs:.2} s (limit 10 s)",
            s.symmetrization_worst, s.expansion_violations, s.min_slack
        ),
    )
}

fn criterion_2() -> Line {
    let fm = standard_flow();
    let mut closed = 0.0f64;
    for &r in &[2.0, 2.5, 4.0, 10.0] {
        for &a in &[0.0, 0.5, 3.0, 12.0] {
            closed = closed.max((flow_z(&fm, a, r) - (a + r)).abs());
        }
    }
    for &r in &[0.1, 0.5, 1.0] {
        for &a in &[-5.0, 0.0, 7.0] {
            closed = closed.max((flow_z(&fm, a, r) - r).abs());
        }
    }
    let dg = eval_weight_derivs(&SmoothWeight::standard(), 4.0).unwrap().delta_g;
    let d2g = eval_smooth_bracket_variant(0.0f64).delta2_g;
    let pass = closed <= 1e-10 && (dg - 0.5).abs() <= 1e-15 && (d2g + 15.0).abs() <= 1e-13;
    line(
        2,
        pass,
        format!("flow closed forms max error {closed:.2e} (tol 1e-10); Δg(4) = {dg}; Δ²g(0) = {d2g}"),
    )
}

fn criterion_3() -> Line {
    let w = SmoothWeight::standard();
    let g = make_grid(GridSpec::new(200.0, 4096, 0.01)).unwrap();
    let f = RadialField::from_real_phi(g, bump(10.0, 30.0));
    let ext = exterior_identity_residual(&f, &w).unwrap().residual;
    let g = make_grid(GridSpec::new(40.0, 4096, 0.01)).unwrap();
    let out = RadialField::from_real_phi(g, bump(5.0, 10.0));
    let out = out.scale_re(1.0 / out.mass().sqrt());
    let sup = commutator_support_check(&out, &w).unwrap();
    line(
        3,
        ext <= 1e-6 && sup <= 1e-8,
        format!("exterior identity residual {ext:.2e} (tol 1e-6); commutator support {sup:.2e} (tol 1e-8)"),
    )
}

fn criterion_4(free_secs: f64) -> Line {
    let f = unit_gaussian(200.0, 4096, 1.0);
    let stepper = Stepper::new(f.grid.clone(), NonlinearitySpec::free(), 0.005).unwrap();
    let mut u = f.u.clone();
    let m0 = f.mass();
    let (mut prev, mut per_step) = (m0, 0.0f64);
    for i in 0..2000 {
        stepper.advance(&mut u, i as f64 * 0.005).unwrap();
        let m = f.with_u(u.clone()).mass();
        per_step = per_step.max((m - prev).abs() / m0);
        prev = m;
    }
    let q0 = pseudo_conformal(&f, 0.0);
    let pc = (1..=20)
        .map(|i| {
            let t = 0.5 * i as f64;
            (pseudo_conformal(&free_evolve(&f, t), t) - q0).abs() / q0
        })
        .fold(0.0, f64::max);
    let g = make_grid(GridSpec::new(200.0, 4096, 0.005)).unwrap();
    let band = band_limit(&RadialField::from_real_phi(g, |r| (-r * r / 8.0).exp()), 1.0, 2.0).unwrap();
    let interior = velocity_bound_scan(&band, (1.0, 2.0), 0.5, 5.0, &[20.0]).unwrap()[0].interior;
    let pass = per_step <= 1e-10 && pc <= 1e-6 && interior <= 1e-3 && free_secs < 60.0;
    line(
        4,
        pass,
        format!(
            "free wave: mass drift {per_step:.2e}/step (tol 1e-10); pseudo-conformal drift {pc:.2e} on [0,10] (tol 1e-6); interior cone mass {interior:.2e} at t=20 (tol 1e-3); free run {free_secs:.1} s (limit 60 s)"
        ),
    )
}

fn criterion_5(free: &Trajectory, corpus: &[(&str, &Trajectory)]) -> Line {
    let oracle = momentum_oracle();
    let gl = gamma_limit_estimate(free, 0.6, Cutoff::rising(1.0)).unwrap();
    let rel = (gl.gamma_hat - oracle).abs() / oracle;
    let mut bad = Vec::new();
    for (name, r) in corpus {
        let g = gamma_limit_estimate(r, 0.6, Cutoff::rising(1.0)).unwrap();
        if !g.non_negative {
            bad.push(*name);
        }
    }
    line(
        5,
        rel <= 0.03 && bad.is_empty(),
        format!(
            "Γ̂ = {:.5} vs (ψ₀,|p|ψ₀) = {oracle:.5}, relative error {rel:.2e} (tol 3e-2) at T=80; non-negative on {}/{} runs",
            gl.gamma_hat,
            corpus.len() - bad.len(),
            corpus.len()
        ),
    )
}

fn criterion_6(free: &Trajectory, defocusing: &Trajectory) -> Line {
    let presets = [
        Preset::Pe { alpha: 0.6 },
        Preset::Pe2 { alpha: 0.6, delta: 0.2 },
        Preset::Pe4v2 {
            alpha: 0.6,
            beta: 0.2,
            c0: 0.5,
        },
    ];
    let mut worst = 0.0f64;
    for r in [free, defocusing] {
        for p in presets {
            worst = worst.max(propagation_integral(r, p, DESK_T0).unwrap().verdict.tail_ratio);
        }
    }
    let pe3 = propagation_integral(free, Preset::Pe3 { alpha: 0.6, delta: 0.2 }, 20.0).unwrap();
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
    let mut ratio = 0.0f64;
    for (k, &t) in pe3.times.iter().enumerate() {
        if t < 40.0 || k % 10 != 0 {
            continue;
        }
        let s = free.at(t);
        let out = t.powf(-0.6) * (expectation(&with_gamma, s, t).unwrap().abs() + expectation(&plain, s, t).unwrap());
        ratio = ratio.max(pe3.integrand[k] / out);
    }
    line(
        6,
        worst < 0.8 && ratio <= 1e-3,
        format!(
            "PE, PE-2, PE-4V2 worst tail-increment ratio {worst:.3} (tol < 0.8); PE-3 incoming/outgoing {ratio:.2e} for t ≥ 40 (tol 1e-3)"
        ),
    )
}

fn criterion_7(defocusing: &Trajectory) -> Line {
    let samples = [10.0, 20.0, 40.0, 80.0];
    let a = extract_free_channel(defocusing, 0.75, Cutoff::rising(1.0), &samples, 0.1).unwrap();
    let b = extract_free_channel(defocusing, 0.75, Cutoff::rising(2.0), &samples, 0.1).unwrap();
    let n0 = defocusing.initial().mass().sqrt();
    let gaps = a.consecutive_gaps();
    let late = a.gap(40.0, 80.0).unwrap().l2 / n0;
    let l2_down = gaps.windows(2).all(|w| w[1].l2 < w[0].l2);
    let h1_down = gaps.windows(2).all(|w| w[1].h1_surrogate < w[0].h1_surrogate);
    let dist = a.omega.sub(&b.omega).mass().sqrt() / n0;
    let tol = a.tail_bound(defocusing) + b.tail_bound(defocusing);
    line(
        7,
        late <= 0.1 && l2_down && h1_down && dist <= tol,
        format!(
            "channel: ‖ω(40)−ω(80)‖ = {:.2}% of ‖φ₀‖ (tol 10%); L² gaps decreasing {l2_down}; H¹ gaps decreasing {h1_down}; F-independence {dist:.3} vs combined tolerance {tol:.3}",
            100.0 * late
        ),
    )
}

fn criterion_8() -> Line {
    let g = make_grid(GridSpec::new(400.0, 4096, 0.01)).unwrap();
    let f0 = RadialField::from_real_phi(g, |r| (-r * r / 32.0).exp());
    let times: Vec<f64> = (0..=200).map(|i| 0.25 * i as f64).collect();
    let run = free_trajectory(&f0, &times).unwrap();
    let rep = exterior_morawetz(&run, DESK_M, &[10.0, 40.0]).unwrap();
    let res = rep.windows[0].residual;
    line(
        8,
        res <= 0.05,
        format!("exterior Morawetz two-sided residual {res:.2e} (tol 5e-2), M={DESK_M}, window [10,40], free run"),
    )
}

fn criterion_9() -> Line {
    let s = mellin_suite().unwrap();
    let down = s.leakage.windows(2).all(|w| w[1].1 < w[0].1);
    let leak: Vec<String> = s.leakage.iter().map(|(k, l)| format!("{k}:{l:.1e}")).collect();
    line(
        9,
        s.round_trip <= 1e-6 && s.eigen_error <= 1e-2 && down,
        format!(
            "Mellin round trip {:.2e} (tol 1e-6); dilation eigenrelation {:.2e} (tol 1e-2); leakage by M/N {} decreasing {down}",
            s.round_trip,
            s.eigen_error,
            leak.join(" ")
        ),
    )
}

fn criterion_10() -> Line {
    let tmp = tempfile::TempDir::new().unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut differing = Vec::new();
    let names = ["example1", "example2", "example3", "example4"];
    for name in names {
        let cfg = ExperimentConfig::preset(name).unwrap();
        let a = run(Command::Simulate, &cfg, &tmp.path().join(format!("{name}-a"))).unwrap();
        let b = single
            .install(|| run(Command::Simulate, &cfg, &tmp.path().join(format!("{name}-b"))))
            .unwrap();
        let same = a.manifest == b.manifest
            && a.manifest.files.iter().all(|f| {
                fs::read(a.dir.join(&f.path)).unwrap() == fs::read(b.dir.join(&f.path)).unwrap()
            });
        if !same {
            differing.push(name);
        }
    }
    line(
        10,
        differing.is_empty(),
        format!(
            "determinism: {}/{} presets byte-identical across reruns (default pool vs one thread)",
            names.len() - differing.len(),
            names.len()
        ),
    )
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let times: Vec<f64> = (0..=160).map(|i| 0.5 * i as f64).collect();
    let free = free_trajectory(&unit_gaussian(800.0, 8192, 1.0), &times).unwrap();
    let free_secs = start.elapsed().as_secs_f64();
    let gs = GridSpec::new(800.0, 8192, 0.01);
    let defocusing = simulate(
        &unit_gaussian(800.0, 8192, 2.0),
        &RunConfig::new(gs, NonlinearitySpec::power(1.0, 2.0), 80.0, 50),
    )
    .unwrap();
    let g = make_grid(GridSpec::new(400.0, 4096, 0.01)).unwrap();
    let slow = free_trajectory(
        &RadialField::from_real_phi(g, |r| (-r * r / 32.0).exp()),
        &(0..=100).map(|i| 0.5 * i as f64).collect::<Vec<_>>(),
    )
    .unwrap();
    let band = {
        let g = make_grid(GridSpec::new(400.0, 4096, 0.01)).unwrap();
        let f = band_limit(&RadialField::from_real_phi(g, |r| (-r * r / 8.0).exp()), 1.0, 2.0).unwrap();
        free_trajectory(&f, &(0..=80).map(|i| 0.5 * i as f64).collect::<Vec<_>>()).unwrap()
    };
    let corpus = [
        ("free gaussian", &free),
        ("defocusing p=2", &defocusing),
        ("slow free gaussian", &slow),
        ("band [1,2]", &band),
    ];

    let lines = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(free_secs),
        criterion_5(&free, &corpus),
        criterion_6(&free, &defocusing),
        criterion_7(&defocusing),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    for l in &lines {
        println!("criterion {:>2}: {}: {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
