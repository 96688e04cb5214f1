use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_reset-verdict"));
    c.env_remove("RESET_VERDICT_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn read_csv(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn write_system(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const GFORE_LOOP: &str = r#"{
  "label": "toy",
  "plant": {"num": [1.0], "den": [1.0, 1.0]},
  "linear_controller": {"num": [2.0], "den": [1.0]},
  "reset": {"kind": "gfore", "omega_r": 1.0, "gamma": 0.5}
}"#;

#[test]
fn analyze_demo_c1_is_stable() {
    let o = run(&["analyze", "--demo", "C1", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["verdict"], "UBIBS_STABLE");
    assert_eq!(v["type_i"]["holds"], true);
    assert_eq!(v["label"], "C1");
}

#[test]
fn analyze_markdown_by_default() {
    let o = run(&["analyze", "--demo", "c3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("# C3: UBIBS_STABLE"));
}

#[test]
fn emit_angles_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let o = run(&["analyze", "--demo", "C1", "--emit-angles", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = read_csv(&path);
    assert_eq!(header, "omega,theta_deg");
    assert!(rows.len() >= 4000);
    let mut last = 0.0;
    for r in &rows {
        let w: f64 = r[0].parse().unwrap();
        assert!(w > last);
        last = w;
        let th: f64 = r[1].parse().expect("every sample has an angle");
        assert!((-90.0..270.0).contains(&th));
    }
}

#[test]
fn output_is_deterministic() {
    let a = run(&["analyze", "--demo", "C2", "--json"]);
    let b = run(&["analyze", "--demo", "C2", "--json"]);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    // six significant digits at most
    let v: Value = serde_json::from_str(&text).unwrap();
    let m = v["sets"]["m_set"][0].as_f64().unwrap();
    assert_eq!(format!("{m:.5e}").parse::<f64>().unwrap(), m);
}

#[test]
fn malformed_json_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_system(
        dir.path(),
        "bad.json",
        r#"{"plant": {"num": [1.0], "den": [1.0, "x"]}, "linear_controller": {"num": [1.0], "den": [1.0]},
            "reset": {"kind": "gfore", "omega_r": 1.0, "gamma": 0.5}}"#,
    );
    let o = run(&["analyze", "--input", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("plant.den"), "{}", stderr(&o));

    let p = write_system(
        dir.path(),
        "kind.json",
        &GFORE_LOOP.replace("gfore", "clegg"),
    );
    let o = run(&["analyze", "--input", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("reset.kind"), "{}", stderr(&o));
}

#[test]
fn semantic_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let biproper = GFORE_LOOP.replace(r#""num": [1.0], "den": [1.0, 1.0]"#, r#""num": [1.0, 1.0], "den": [1.0, 1.0]"#);
    let p = write_system(dir.path(), "biproper.json", &biproper);
    let o = run(&["analyze", "--input", &p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("plant"), "{}", stderr(&o));

    let o = run(&["analyze", "--demo", "C1", "--gamma", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["analyze", "--input", "/nonexistent/file.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["analyze", "--demo", "C9"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["analyze", "--demo", "C1", "--wmin", "10", "--wmax", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn input_file_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_system(dir.path(), "toy.json", GFORE_LOOP);
    let o = run(&["analyze", "--input", &p, "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["label"], "toy");
}

#[test]
fn hypothesis_failure_exit_4_and_empty_scan() {
    let dir = tempfile::tempdir().unwrap();
    // 0.5/(s-1) in unity feedback stays unstable
    let sys = r#"{
      "plant": {"num": [0.5], "den": [-1.0, 1.0]},
      "linear_controller": {"num": [1.0], "den": [1.0]},
      "reset": {"kind": "gfore", "omega_r": 10.0, "gamma": 0.0}
    }"#;
    let p = write_system(dir.path(), "unstable.json", sys);
    let o = run(&["analyze", "--input", &p, "--json"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json(&o)["verdict"], "HYPOTHESIS_FAILED");

    let o = run(&["hbeta-scan", "--input", &p, "--json", "--res", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"));
    assert_eq!(json(&o)["feasible_points"].as_array().unwrap().len(), 0);
}

#[test]
fn hbeta_scan_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("c1");
    let o = run(&["hbeta-scan", "--demo", "C1", "--res", "40", "--out", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("c1.json")).unwrap()).unwrap();
    let min = v["ratio_interval"]["min"].as_f64().unwrap();
    let max = v["ratio_interval"]["max"].as_f64().unwrap();
    assert!(min > 0.0 && max > min);
    let (header, rows) = read_csv(&dir.path().join("c1.csv"));
    assert_eq!(header, "beta,rho_prime,feasible");
    assert_eq!(rows.len(), 40 * 40);
    assert!(rows.iter().any(|r| r[2] == "1"));
}

#[test]
fn hbeta_scan_c1_interval() {
    let o = run(&["hbeta-scan", "--demo", "C1", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let min = v["ratio_interval"]["min"].as_f64().unwrap();
    let max = v["ratio_interval"]["max"].as_f64().unwrap();
    assert!((min - 0.702639).abs() < 1e-5, "{min}");
    assert!((max - 2.91579).abs() < 1e-4, "{max}");
}

#[test]
fn simulate_step_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let o = run(&["simulate", "--demo", "C3", "--step", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = read_csv(&path);
    assert_eq!(header, "t,y,e,u_r,x_r,reset");
    assert!(rows.len() > 2000);
    let last_y: f64 = rows.last().unwrap()[1].parse().unwrap();
    assert!((last_y - 1.0).abs() < 0.02);
    assert!(rows.iter().any(|r| r[5] == "1"));
}

#[test]
fn simulate_short_horizon_logs_resets() {
    let o = run(&["simulate", "--demo", "C1", "--step", "--horizon", "0.1", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let resets = v["resets"].as_array().unwrap();
    assert!(!resets.is_empty());
    for r in resets {
        assert!(r["e"].as_f64().unwrap().abs() < 1e-8);
    }
    let y: Vec<f64> = v["y"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(y.iter().all(|v| v.abs() < 10.0));
}

#[test]
fn gamma_one_matches_linear_mode() {
    let a = run(&["simulate", "--demo", "C1", "--gamma", "1", "--step", "--horizon", "0.05", "--csv"]);
    let b = run(&["simulate", "--demo", "C1", "--linear", "--step", "--horizon", "0.05", "--csv"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    let parse = |o: &Output| -> Vec<(f64, f64)> {
        stdout(o)
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].parse().unwrap(), f[1].parse().unwrap())
            })
            .collect()
    };
    let (ya, yb) = (parse(&a), parse(&b));
    // with γ = 1 every reset is an identity jump, so only the samples differ
    let at = |tr: &[(f64, f64)], t: f64| {
        tr.iter()
            .min_by(|p, q| (p.0 - t).abs().total_cmp(&(q.0 - t).abs()))
            .unwrap()
            .1
    };
    for &(t, y) in yb.iter().step_by(37) {
        assert!((at(&ya, t) - y).abs() < 1e-6, "t = {t}");
    }
}

#[test]
fn simulate_sine_and_ramp() {
    for args in [&["--sine", "50"][..], &["--ramp"][..]] {
        let mut all = vec!["simulate", "--demo", "C2", "--horizon", "0.05", "--md"];
        all.extend_from_slice(args);
        let o = run(&all);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("resets"));
    }
    let o = run(&["simulate", "--demo", "C2", "--step", "--ramp"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn demo_report_json() {
    let o = run(&["demo", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r["system"], format!("C{}", i + 1));
        assert_eq!(r["report"]["type_i"]["holds"], true);
        assert_eq!(r["cross_check"]["status"], "consistent");
    }
    let m = &rows[0]["report"]["sets"]["m_set"];
    assert!((m[0].as_f64().unwrap() / 279.2 - 1.0).abs() < 0.01);
    assert!((m[1].as_f64().unwrap() / 6945.0 - 1.0).abs() < 0.01);
    let c2_notes: Vec<&str> = rows[1]["notes"].as_array().unwrap().iter().map(|n| n.as_str().unwrap()).collect();
    assert!(c2_notes.iter().any(|n| n.contains("unreadable")), "{c2_notes:?}");
}

#[test]
fn demo_markdown_and_csv() {
    let o = run(&["demo"]);
    assert_eq!(o.status.code(), Some(0));
    let md = stdout(&o);
    assert!(md.contains("| type | (I) | (I) | (I) | (I) | (I) |"));
    assert!(md.contains("unreadable"));

    let o = run(&["demo", "--csv"]);
    let text = stdout(&o);
    assert!(text.starts_with("system,m_min,m_max"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn thread_cap_env() {
    let o = bin().args(["demo", "--json"]).env("RESET_VERDICT_THREADS", "1").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let free = run(&["demo", "--json"]);
    assert_eq!(o.stdout, free.stdout);
    let o = bin().args(["demo"]).env("RESET_VERDICT_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_source_is_usage_error() {
    let o = run(&["analyze"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["analyze", "--demo", "C1", "--input", "x.json"]);
    assert_eq!(o.status.code(), Some(2));
}
