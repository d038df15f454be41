use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cogur(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogur"))
        .args(args)
        .env("COGUR_OUT", out)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_kernel_reports_exponential_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogur(&["check-kernel", "-c", &config("linear.toml")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("kernels.json")).unwrap()).unwrap();
    assert_eq!(report["kernel_omega"]["admissible"], true);
    assert_eq!(report["kernel_gamma"]["admissible"], true);
}

#[test]
fn failing_balance_is_rejected_and_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogur(&["run", "-c", &config("bad_balance.toml")], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("balance condition fails"), "{}", stderr(&o));
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogur(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(64));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(cogur(&["run"], dir.path()).status.code(), Some(64));
    assert_eq!(cogur(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(cogur(&["--version"], dir.path()).status.code(), Some(0));
}

#[test]
fn blow_up_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("linear.toml"))
        .unwrap()
        .replace("dt = 0.01", "dt = 0.1")
        .replace("amplitude = 2.0, width", "amplitude = 20.0, width")
        + "\n[nonlinearity]\nf = { family = \"polynomial\", coeffs = [0.0, 0.0, 0.0, -5.0] }\n";
    let path = dir.path().join("blow.toml");
    std::fs::write(&path, text).unwrap();
    let p = path.to_string_lossy();
    assert_eq!(cogur(&["run", "-c", &p], dir.path()).status.code(), Some(1));
    let o = cogur(&["run", "--force", "-c", &p], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("reduce dt"));
}

#[test]
fn misspelled_keys_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("linear.toml"))
        .unwrap()
        .replace("refine = 32", "refnie = 32")
        .replace("t_end = 10.0", "t_end = 10.0\nshceme = \"imex-bdf2\"");
    let path = dir.path().join("typo.toml");
    std::fs::write(&path, text).unwrap();
    let o = cogur(&["run", "-c", &path.to_string_lossy()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for key in ["geometry.refnie", "discretization.shceme", "geometry.refine"] {
        assert!(err.contains(key), "{key} missing from: {err}");
    }
}

#[test]
fn missing_config_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogur(&["run", "-c", "/nonexistent/cfg.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_writes_documented_columns_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogur(&["run", "--coefficients", "-c", &config("linear.toml")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    let expected: Vec<String> = ["t", "energy_X2", "energy_M1", "dissipation", "V1_norm"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=8).map(|i| format!("a_{i}")))
        .collect();
    assert_eq!(header, expected.join(","));
    assert_eq!(csv.lines().count(), 1002);

    // Energy column decreases, dissipation stays at or below zero.
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    for w in rows.windows(2) {
        assert!(w[1][1] + w[1][2] < w[0][1] + w[0][2]);
    }
    assert!(rows.iter().all(|r| r[3] <= 0.0));

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let names: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "trajectory.csv",
            "monitor.json",
            "energy.svg",
            "energy_x2.svg",
            "energy_m1.svg",
            "dissipation.svg",
            "v1_norm.svg"
        ]
    );
    let monitor: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("monitor.json")).unwrap()).unwrap();
    assert_eq!(monitor["verdict"], "pass");
}

#[test]
fn dissipation_plot_stays_below_zero_axis() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        cogur(&["run", "-c", &config("linear.toml")], dir.path()).status.code(),
        Some(0)
    );
    let svg = std::fs::read_to_string(dir.path().join("dissipation.svg")).unwrap();
    // All values are negative, so the top of the y range is at most zero.
    let top = svg
        .lines()
        .filter(|l| l.contains("text-anchor=\"end\"") && l.contains("y=\"44.000\""))
        .map(|l| {
            l.rsplit_once("\">")
                .unwrap()
                .1
                .trim_end_matches("</text>")
                .parse::<f64>()
                .unwrap()
        })
        .next()
        .unwrap();
    assert!(top <= 0.0, "{top}");
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert_eq!(
            cogur(&["run", "-c", &config("disk.toml")], dir.path()).status.code(),
            Some(0)
        );
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    for f in [
        "trajectory.csv",
        "strong.csv",
        "energy.svg",
        "m2_proxy.svg",
        "manifest.json",
    ] {
        assert_eq!(read(&a, f), read(&b, f), "{f} differs");
    }
}

#[test]
fn limit_distances_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogur(&["limit", "-c", &config("limit.toml")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("limit.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("epsilon,final_distance"));
    let d: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(d.len(), 3);
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn eig_and_bvp_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        cogur(&["eig", "-c", &config("eig.toml")], dir.path()).status.code(),
        Some(0)
    );
    let eig = std::fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    assert_eq!(eig.lines().next(), Some("index,lambda,residual"));
    // αω = βν here, so the lowest eigenvalue is αω.
    let first: f64 = eig.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((first - 0.5).abs() < 1e-10);

    assert_eq!(
        cogur(&["bvp", "-c", &config("bvp.toml")], dir.path()).status.code(),
        Some(0)
    );
    let bvp = std::fs::read_to_string(dir.path().join("bvp.csv")).unwrap();
    assert_eq!(bvp.lines().next(), Some("node,x,y,u"));
    // Manufactured solution u = x.
    let worst = bvp
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
            (v[2] - v[0]).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn check_nonlinearity_passes_balanced_pair() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogur(&["check-nonlinearity", "-c", &config("balance.toml")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["balance"]["pass"], true);
    assert_eq!(
        cogur(&["check-nonlinearity", "-c", &config("bad_balance.toml")], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn study_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let o = cogur(&["study", "-c", &config("study.toml")], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("level,width,error,order"));
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("convergence.json")).unwrap()).unwrap();
    let order = r["observed_order"].as_f64().unwrap();
    assert!((order - 2.0).abs() < 0.3, "{order}");
}
