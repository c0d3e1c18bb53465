use std::process::Command;

fn natconv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_natconv"))
}

#[test]
fn mms_prints_a_rates_table() {
    let out = natconv().args(["mms", "--m", "2,4", "--t-final", "0.5"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().next().unwrap().contains("grad_u_l2_l2"));
}

#[test]
fn cavity_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "scenario = cavity\nra = 1000\nm = 4\nk_star = 1\nsteady_tol = none\nt_final = 0.003\n").unwrap();
    let out = natconv()
        .args(["cavity", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Nu_avg"));
    assert!(dir.path().join("average.vtk").exists());
    assert!(dir.path().join("step_log.csv").exists());
}

#[test]
fn rejects_unsupported_ensemble_size() {
    let out = natconv().args(["cavity", "--j", "3"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("two-member"));
}
