use std::fs;
use std::process::Command;

fn radnls() -> Command {
    Command::new(env!("CARGO_BIN_EXE_radnls"))
}

fn tmp(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("radnls-bin-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

#[test]
fn identities_exit_zero() {
    let out = tmp("id");
    let o = radnls()
        .args(["identities", "--cases", "10", "--seed", "3", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("identity cases: 10"));
    assert!(out.join("MANIFEST.json").is_file());
    fs::remove_dir_all(out).unwrap();
}

#[test]
fn validation_failure_exits_2() {
    let dir = tmp("bad");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.toml");
    fs::write(
        &cfg,
        "name = \"bad\"\nt_end = 10.0\n[grid]\nr_max = 50.0\nn = 512\n[initial]\nkind = \"gaussian\"\namplitude = 1.0\n\
         [[observables]]\nkind = \"gamma_limit\"\nalpha = 0.2\n",
    )
    .unwrap();
    let o = radnls().arg("simulate").arg("--config").arg(&cfg).arg("--out").arg(dir.join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("γ-limit theorem"));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn missing_inputs_exit_4() {
    let o = radnls().args(["simulate", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
    let o = radnls().args(["report", "/nonexistent/dir"]).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn no_config_is_a_validation_error() {
    let o = radnls().arg("simulate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("example1"));
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tmp("nan");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("wall.toml");
    fs::write(
        &cfg,
        "name = \"wall\"\nt_end = 20.0\nabort_on_boundary = true\n[grid]\nr_max = 20.0\nn = 512\ndt = 0.01\n\
         [initial]\nkind = \"gaussian\"\namplitude = 1.0\n",
    )
    .unwrap();
    let o = radnls().arg("simulate").arg("--config").arg(&cfg).arg("--out").arg(dir.join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn sweep_writes_one_directory_per_run() {
    let dir = tmp("sweep");
    fs::create_dir_all(&dir).unwrap();
    for name in ["a", "b"] {
        fs::write(
            dir.join(format!("{name}.toml")),
            format!(
                "name = \"{name}\"\nt_end = 1.0\nstride = 10\n[grid]\nr_max = 40.0\nn = 512\ndt = 0.01\n\
                 [initial]\nkind = \"gaussian\"\namplitude = 1.0\n"
            ),
        )
        .unwrap();
    }
    let out = dir.join("out");
    let o = radnls()
        .arg("simulate")
        .arg("--config")
        .arg(dir.join("a.toml"))
        .arg("--config")
        .arg(dir.join("b.toml"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["a", "b"] {
        let o = radnls().arg("report").arg(out.join(name)).output().unwrap();
        assert!(o.status.success());
        assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("run {name} (simulate)")));
    }
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn mellin_and_report() {
    let out = tmp("mellin");
    let o = radnls().args(["mellin", "--out"]).arg(&out).output().unwrap();
    assert!(o.status.success());
    let o = radnls().arg("report").arg(&out).output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("Mellin round trip"));
    fs::remove_dir_all(out).unwrap();
}
