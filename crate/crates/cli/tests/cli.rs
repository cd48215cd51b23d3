use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blowup-lab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_cfg(dir: &TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const CUBIC: &str = "n = 3\nh = \"0\"\nf = \"s^3\"\nr0 = 1.0\ns0 = 0.5\n";

#[test]
fn check_examples() {
    let out = TempDir::new().unwrap();
    let exists = config("exists.cfg");
    let o = run(out.path(), &["check", exists.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["verdict"], "ExistsRadial");
    let stored: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.path().join("exists-check/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(stored, json(&o));

    let o = run(
        out.path(),
        &["check", config("osserman2d.cfg").to_str().unwrap()],
    );
    assert_eq!(code(&o), 3);
    assert_eq!(json(&o)["verdict"], "NoSolutionExpected");
    assert_eq!(json(&o)["growth"]["kind"], "divergent");
}

#[test]
fn inconclusive_check_exits_4() {
    let dir = TempDir::new().unwrap();
    // finite criterion, but linear growth is not superlinear
    let cfg = write_cfg(&dir, "linear.cfg", &CUBIC.replace("s^3", "r^(-3)*s"));
    let o = run(dir.path(), &["check", &cfg]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&o)["verdict"], "Inconclusive");
}

#[test]
fn solve_minimal_writes_lifted_table() {
    let out = TempDir::new().unwrap();
    let cfg = config("exists.cfg");
    let o = run(
        out.path(),
        &[
            "solve",
            cfg.to_str().unwrap(),
            "--anchor",
            "-1:1.5",
            "--mode",
            "minimal",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&o);
    assert_eq!(
        summary["trajectory"]["classification"]["kind"],
        "blow_up_at"
    );
    let csv = fs::read_to_string(out.path().join("exists-solve/solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,z,zprime,r,u"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first[0], -1.0);
    assert_eq!(first[1], 1.5);
    assert!((first[3] - 1.0).abs() < 1e-12);
    assert_eq!(first[1], first[4]);
}

#[test]
fn solve_shoot_hits_target() {
    let out = TempDir::new().unwrap();
    let cfg = config("exists.cfg");
    let o = run(
        out.path(),
        &[
            "solve",
            cfg.to_str().unwrap(),
            "--anchor",
            "-1:1.5",
            "--mode",
            "shoot",
            "--rho",
            "-0.5",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rho = json(&o)["achieved_rho"].as_f64().unwrap();
    assert!((rho + 0.5).abs() < 1e-6, "{rho}");
    let resolved = fs::read_to_string(out.path().join("exists-solve/config.resolved")).unwrap();
    assert!(resolved.contains("mode = \"shoot\""));
    assert!(resolved.contains("rho = -0.5"));
}

#[test]
fn transform_table() {
    let out = TempDir::new().unwrap();
    let cfg = config("exists.cfg");
    let o = run(
        out.path(),
        &["transform", cfg.to_str().unwrap(), "--r-grid", "1:4:4"],
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.path().join("exists-transform/transform.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert!((row[1] + 1.0 / row[0]).abs() < 1e-9);
        assert!((row[2] - row[0].powi(-2)).abs() < 1e-12);
    }
    assert!(csv.starts_with("r,t,p_prime\n"));
}

#[test]
fn oracle_compares_with_profile() {
    let out = TempDir::new().unwrap();
    let cfg = config("exists.cfg");
    let o = run(
        out.path(),
        &["oracle", cfg.to_str().unwrap(), "--grid", "64:1"],
    );
    assert_eq!(code(&o), 0);
    let profile = out.path().join("exists-oracle/profile.csv");
    let copy = out.path().join("reference.csv");
    fs::copy(&profile, &copy).unwrap();
    let o = run(
        out.path(),
        &[
            "oracle",
            cfg.to_str().unwrap(),
            "--grid",
            "64:1",
            "--compare",
            copy.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&o), 0);
    let dev = json(&o)["comparison_deviation"].as_f64().unwrap();
    assert!(dev < 1e-12, "{dev}");
    let field = fs::read_to_string(out.path().join("exists-oracle/field.csv")).unwrap();
    assert!(field.starts_with("r,theta,u\n"));
    assert_eq!(field.lines().count(), 66);
}

#[test]
fn report_reads_run_dir() {
    let out = TempDir::new().unwrap();
    let cfg = config("exists.cfg");
    assert_eq!(code(&run(out.path(), &["check", cfg.to_str().unwrap()])), 0);
    let dir = out.path().join("exists-check");
    let o = run(out.path(), &["report", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["summary"]["verdict"], "ExistsRadial");
    assert_eq!(r["config"]["n"], 3);
    assert_eq!(r["tables"][0]["file"], "existence.csv");
    let o = run(
        out.path(),
        &["report", out.path().join("missing").to_str().unwrap()],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_1() {
    let out = TempDir::new().unwrap();
    let cfg = config("exists.cfg");
    let cfg = cfg.to_str().unwrap();
    for args in [
        vec![],
        vec!["frobnicate", cfg],
        vec!["solve", cfg, "--anchor", "nope"],
        vec!["solve", cfg, "--mode", "sideways"],
        vec!["oracle", cfg, "--grid", "8"],
    ] {
        assert_eq!(code(&run(out.path(), &args)), 1, "{args:?}");
    }
    let dir = TempDir::new().unwrap();
    let bare = write_cfg(&dir, "bare.cfg", CUBIC);
    assert_eq!(code(&run(out.path(), &["solve", &bare])), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_blowup-lab"))
        .args(["--out", out.path().to_str().unwrap(), "check", cfg])
        .env("BLOWUP_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        format!("{CUBIC}colour = \"red\"\n"),
        CUBIC.replace("s^3", "s^"),
        CUBIC.replace("\"0\"", "\"q\""),
        format!("{CUBIC}ode_tol = 0.0\n"),
        CUBIC.replace("n = 3\n", ""),
        "n = = 3".into(),
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write_cfg(&dir, &format!("bad{i}.cfg"), body);
        let o = run(dir.path(), &["check", &cfg]);
        assert_eq!(
            code(&o),
            2,
            "{body}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let missing = dir.path().join("absent.cfg");
    assert_eq!(
        code(&run(dir.path(), &["check", missing.to_str().unwrap()])),
        2
    );
    let cfg = config("exists.cfg");
    let o = run(
        dir.path(),
        &[
            "oracle",
            cfg.to_str().unwrap(),
            "--compare",
            "/nonexistent/profile.csv",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn violated_growth_exits_3() {
    let out = TempDir::new().unwrap();
    let cfg = config("osserman2d.cfg");
    let o = run(
        out.path(),
        &["solve", cfg.to_str().unwrap(), "--anchor", "-1:1"],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn divergent_criterion_check_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "cubic.cfg", CUBIC);
    let o = run(dir.path(), &["check", &cfg]);
    assert_eq!(code(&o), 3);
    assert_eq!(json(&o)["growth"]["kind"], "finite");
    assert_eq!(json(&o)["verdict"], "NoSolutionExpected");
}

#[test]
fn numerical_failure_exits_4() {
    // no bounded trajectory: the minimal large solution does not exist
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "cubic.cfg", CUBIC);
    let o = run(dir.path(), &["solve", &cfg, "--anchor", "-1:1"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bracket"));
}
