use std::fs;
use std::sync::OnceLock;

use radnls::cli::*;
use radnls::Error;
use tempfile::TempDir;

fn example1() -> &'static (TempDir, RunOutcome) {
    static RUN: OnceLock<(TempDir, RunOutcome)> = OnceLock::new();
    RUN.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let cfg = ExperimentConfig::preset("example1").unwrap();
        let out = run(Command::Simulate, &cfg, &tmp.path().join("ex1")).unwrap();
        (tmp, out)
    })
}

#[test]
fn presets_parse_and_validate() {
    for name in preset_names() {
        let cfg = ExperimentConfig::preset(name).unwrap();
        assert_eq!(cfg.name, name);
        assert!(cfg.violations().is_empty(), "{name}: {:?}", cfg.violations());
        let again = ExperimentConfig::from_toml(&cfg.canonical(), std::path::Path::new(name)).unwrap();
        assert_eq!(again, cfg);
    }
    assert!(matches!(ExperimentConfig::preset("example9"), Err(Error::Invalid(_))));
}

#[test]
fn preset_parameters_follow_the_special_cases() {
    let e1 = ExperimentConfig::preset("example1").unwrap();
    assert!(e1.spec.focusing && e1.spec.p == 2.0);
    let e2 = ExperimentConfig::preset("example2").unwrap();
    assert!(e2.spec.focusing && e2.spec.p > 4.0 / 3.0 && e2.spec.p < 4.0);
    let e3 = ExperimentConfig::preset("example3").unwrap();
    assert!(e3.spec.m > 10.0 / 3.0 && e3.spec.n > 1.0 && e3.spec.n < 4.0 / 3.0);
    let e4 = ExperimentConfig::preset("example4").unwrap();
    let q = e4.spec.potential.unwrap().q;
    let floor = (1.0 / e4.spec.p).max(1.0 / q).max(1.0 / 3.0);
    for o in &e4.observables {
        if let ObservableEntry::GammaLimit { alpha, .. } = o {
            assert!(*alpha > floor);
        }
    }
}

#[test]
fn example1_emits_gamma_limit_verdict() {
    let (_, out) = example1();
    let v: RunVerdict = serde_json::from_str(&fs::read_to_string(out.dir.join(VERDICT)).unwrap()).unwrap();
    assert_eq!(v.t_end, 50.0);
    assert_eq!(v.gamma_limit.len(), 1);
    let g = &v.gamma_limit[0];
    assert!(g.gamma_hat.is_finite() && g.non_negative, "{g:?}");
    assert!(v.mass_drift < 1e-9);
    let c = v.channel.unwrap();
    assert!(c.cauchy_gaps.windows(2).all(|w| w[1].2 < w[0].2), "{:?}", c.cauchy_gaps);
}

#[test]
fn report_summarizes_run() {
    let (_, out) = example1();
    let text = report(&out.dir).unwrap();
    for needle in ["Γ_hat", "mass drift", "Cauchy gap", "PE"] {
        assert!(text.contains(needle), "{needle} missing from\n{text}");
    }
}

#[test]
fn manifest_records_hash_and_version() {
    let (_, out) = example1();
    let cfg = ExperimentConfig::preset("example1").unwrap();
    assert_eq!(out.manifest.config_sha256.as_deref(), Some(cfg.hash().as_str()));
    assert_eq!(out.manifest.version, radnls::VERSION);
    let listed: Vec<&str> = out.manifest.files.iter().map(|f| f.path.as_str()).collect();
    for f in ["conservation.csv", "verdict.json", "PE.csv", "channel/omega.csv"] {
        assert!(listed.contains(&f), "{listed:?}");
    }
}

#[test]
fn csv_headers_carry_units() {
    let (_, out) = example1();
    for f in &out.manifest.files {
        if f.path.ends_with(".csv") && !f.path.starts_with("channel/") {
            let text = fs::read_to_string(out.dir.join(&f.path)).unwrap();
            let head = text.lines().next().unwrap();
            for col in head.split(',').skip(1) {
                assert!(col.contains('['), "{}: column {col:?} has no unit", f.path);
            }
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (_, first) = example1();
    let tmp = TempDir::new().unwrap();
    let cfg = ExperimentConfig::preset("example1").unwrap();
    let second = run(Command::Simulate, &cfg, tmp.path()).unwrap();
    assert_eq!(first.manifest, second.manifest);
    for f in &first.manifest.files {
        let a = fs::read(first.dir.join(&f.path)).unwrap();
        let b = fs::read(second.dir.join(&f.path)).unwrap();
        assert!(a == b, "{} differs", f.path);
    }
}

#[test]
fn seed_changes_the_data() {
    let cfg = ExperimentConfig::preset("example1").unwrap();
    let a = cfg.initial.build(cfg.grid, 1).unwrap();
    let b = cfg.initial.build(cfg.grid, 2).unwrap();
    let c = cfg.initial.build(cfg.grid, 1).unwrap();
    assert_eq!(a.u, c.u);
    assert_ne!(a.u, b.u);
}

#[test]
fn invalid_alpha_refused_citing_theorem_range() {
    let mut cfg = ExperimentConfig::preset("example1").unwrap();
    cfg.observables.push(ObservableEntry::Propagation {
        estimate: radnls::propagation::Preset::Pe { alpha: 0.2 },
        t0: 5.0,
    });
    cfg.grid.n = 1000;
    let tmp = TempDir::new().unwrap();
    let err = run(Command::Simulate, &cfg, tmp.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("α=0.2") && msg.contains("γ-limit theorem"), "{msg}");
    assert!(msg.contains("power of two"), "every gate is listed: {msg}");
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn channels_needs_a_channel_block() {
    let mut cfg = ExperimentConfig::preset("example1").unwrap();
    cfg.channel = None;
    let tmp = TempDir::new().unwrap();
    assert!(matches!(run(Command::Channels, &cfg, tmp.path()), Err(Error::Invalid(_))));
}

#[test]
fn report_errors() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(report(tmp.path()).unwrap_err().exit_code(), 4);
    assert_eq!(report(&tmp.path().join("missing")).unwrap_err().exit_code(), 4);

    let (_, out) = example1();
    let copy = tmp.path().join("copy");
    fs::create_dir_all(copy.join("channel")).unwrap();
    for f in out.manifest.files.iter().map(|f| f.path.clone()).chain([MANIFEST.to_string()]) {
        fs::copy(out.dir.join(&f), copy.join(&f)).unwrap();
    }
    assert!(report(&copy).is_ok());
    let csv = copy.join("conservation.csv");
    let text = fs::read_to_string(&csv).unwrap().replacen("e0,", "x0,", 1);
    fs::write(&csv, text).unwrap();
    let err = report(&copy).unwrap_err();
    assert!(matches!(err, Error::Format { .. }));
    assert!(err.to_string().contains("conservation.csv"), "{err}");
}

#[test]
fn freewave_keeps_free_invariants() {
    let mut cfg = ExperimentConfig::preset("example1").unwrap();
    cfg.t_end = 10.0;
    cfg.observables.clear();
    cfg.channel = None;
    let tmp = TempDir::new().unwrap();
    let out = run(Command::Freewave, &cfg, tmp.path()).unwrap();
    let v: RunVerdict = serde_json::from_str(&fs::read_to_string(out.dir.join(VERDICT)).unwrap()).unwrap();
    assert!(v.mass_drift < 1e-12);
    assert!(v.pseudo_conformal_drift.unwrap() < 1e-5, "{v:?}");
}

#[test]
fn identity_suite_passes() {
    let s = identity_suite(7, 20).unwrap();
    assert_eq!(s.cases.len(), 20);
    assert!(s.symmetrization_worst <= 1e-10);
    assert_eq!(s.expansion_violations, 0);
    assert!(s.cases.iter().all(|c| (8..=16).contains(&c.dim)));
    assert_eq!(identity_suite(7, 20).unwrap(), s);
}

#[test]
fn mellin_suite_passes() {
    let s = mellin_suite().unwrap();
    assert!(s.round_trip <= 1e-6 && s.unitarity <= 1e-6, "{s:?}");
    assert!(s.eigen_error <= 1e-2);
    assert!(s.leakage.windows(2).all(|w| w[1].1 < w[0].1), "{:?}", s.leakage);
}

#[test]
fn config_file_round_trip_and_errors() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("c.toml");
    let cfg = ExperimentConfig::preset("example2").unwrap();
    fs::write(&p, cfg.canonical()).unwrap();
    assert_eq!(ExperimentConfig::load(&p).unwrap(), cfg);
    fs::write(&p, "name = \"x\"\nbogus = 1\n").unwrap();
    assert_eq!(ExperimentConfig::load(&p).unwrap_err().exit_code(), 4);
    assert_eq!(ExperimentConfig::load(&tmp.path().join("none.toml")).unwrap_err().exit_code(), 4);
}
