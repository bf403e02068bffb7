use std::path::Path;
use std::process::{Command, Output};

fn twolevel(args: &[&str], out: &Path) -> Output {
    let o = Command::new(env!("CARGO_BIN_EXE_twolevel"))
        .args(args)
        .arg("--output")
        .arg(out)
        .output()
        .expect("spawn twolevel");
    assert!(o.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn header(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines().next().unwrap_or_default().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const RECORDS: &str = "case_id,dim,m,h_ratio,kappa_ratio,theta,rho_measured,rho_predicted,iterations,converged,time_s";

#[test]
fn solve_writes_solution_and_report() {
    let dir = tempfile::tempdir().unwrap();
    twolevel(&["solve", "--h-ratio", "2", "--kappa-minus", "0.25"], dir.path());
    assert_eq!(header(&dir.path().join("solution_plus.csv")), "dof,x,y,value");
    assert_eq!(header(&dir.path().join("solution_minus.csv")), "dof,x,y,value");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    let iterations = report["iterations"].as_u64().unwrap() as usize;
    assert_eq!(report["residual_history"].as_array().unwrap().len(), iterations);
    assert_eq!(header(&dir.path().join("records.csv")), RECORDS);
    assert_eq!(header(&dir.path().join("fits.csv")), "case_id,a0,a1,b0,b1,b2,C_tilde");
    assert_eq!(manifest(dir.path())["command"], "solve");
    assert!(!dir.path().join("matrices").exists());
    assert!(!dir.path().join("meshes").exists());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(
        &cfg,
        "m = 2\nh_plus = 0.00625\nh_minus = [0.003125]\nkappa_minus = [0.5, 0.25, 0.125]\ntheta = [1.0]\n\n[dd]\ntol = 1e-9\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    twolevel(&["sweep-kappa", "--config", cfg.to_str().unwrap(), "--kappa-minus", "0.5,0.25,1/8,1/16"], &out);
    let m = manifest(&out);
    assert_eq!(m["config"]["m"], 2);
    assert_eq!(m["config"]["dd"]["tol"], 1e-9);
    assert_eq!(m["config"]["kappa_minus"].as_array().unwrap().len(), 4);
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    let mut lines = records.lines();
    assert_eq!(lines.next().unwrap(), RECORDS);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with("d2-m2-r2,2,2,2")));
    let fits = std::fs::read_to_string(out.join("fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "kappa_minsu = [0.5]\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_twolevel"))
        .args(["solve", "--config", cfg.to_str().unwrap(), "--output"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn export_and_dump_are_flag_gated() {
    let dir = tempfile::tempdir().unwrap();
    twolevel(&["solve", "--h-ratio", "2", "--export-matrices", "--dump-mesh"], dir.path());
    for name in ["K_plus", "K_minus", "S", "D"] {
        let path = dir.path().join("matrices").join(format!("{name}.mtx"));
        assert!(header(&path).starts_with("%%MatrixMarket matrix coordinate real"), "{name}");
    }
    let meshes: Vec<_> = std::fs::read_dir(dir.path().join("meshes")).unwrap().collect();
    assert_eq!(meshes.len(), 2);
}

#[test]
fn spectrum_and_relaxation_tables() {
    let dir = tempfile::tempdir().unwrap();
    twolevel(&["spectrum", "--h-ratio", "2", "--kappa-minus", "0.5,2", "--theta", "1,0.5"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "kappa_ratio,theta,rho,rayleigh,power_iterations");
    assert_eq!(text.lines().count(), 5);

    let dir = tempfile::tempdir().unwrap();
    twolevel(&["relax-study", "--presets", "--h-ratio", "2", "--kappa-minus", "4", "--theta", "1"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("relaxation.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 1, "{text}");
}

#[test]
fn sweep_mesh_tabulates_three_ratios() {
    let dir = tempfile::tempdir().unwrap();
    twolevel(&["sweep-mesh", "--h-ratio", "2,4,8", "--kappa-minus", "0.5,0.25,0.125"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("mesh_ratio.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "h_ratio,C_tilde");
    assert_eq!(text.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(dir.path().join("fits.csv")).unwrap().lines().count(), 4);

    let o = Command::new(env!("CARGO_BIN_EXE_twolevel"))
        .args(["sweep-mesh", "--h-ratio", "2,4", "--output"])
        .arg(dir.path().join("two"))
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn nonlinear_sweep_with_user_curves() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "T,kappa\n293.15,1.0\n1293.15,1.5\n").unwrap();
    std::fs::write(&b, "T,kappa\n293.15,0.3\n1293.15,0.5\n").unwrap();
    let out = dir.path().join("out");
    twolevel(
        &[
            "nonlinear",
            "--h-ratio",
            "2",
            "--curve-a",
            a.to_str().unwrap(),
            "--curve-b",
            b.to_str().unwrap(),
            "--sweep-kappa-plus-b",
            "0.2:0.4:3",
        ],
        &out,
    );
    let text = std::fs::read_to_string(out.join("nonlinear.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "kappa_plus_b,converged,picard_iterations,total_inner_iterations,time_s,l2_difference"
    );
    let kpb: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(kpb.len(), 3);
    for (got, want) in kpb.iter().zip([0.2, 0.3, 0.4]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(manifest(&out)["config"]["nonlinear"]["sweep_kappa_plus_b"].as_array().unwrap().len(), 3);
}

#[test]
fn malformed_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["nonlinear", "--sweep-kappa-plus-b", "0.1:0.8"][..],
        &["nonlinear", "--sweep-kappa-plus-b", "0.1:0.8:0"][..],
        &["solve", "--h-plus", "1/x"][..],
        &["solve", "--theta", "1.5"][..],
    ] {
        let o = Command::new(env!("CARGO_BIN_EXE_twolevel"))
            .args(args)
            .arg("--output")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(!o.status.success(), "{args:?} should fail");
    }
}
