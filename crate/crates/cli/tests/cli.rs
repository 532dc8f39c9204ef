use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fk"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn write_box(path: &Path, lx: i64, ly: i64) {
    let mut text = String::from("d=2\n");
    for x in 0..lx {
        for y in 0..ly {
            text.push_str(&format!("{x} {y}\n"));
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn bulk_row_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = fk(dir.path(), &["bulk", "--d", "1", "--n", "0.5", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let e: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((e - 0.363380).abs() < 1e-6, "{row}");
    assert_eq!(read(dir.path().join("run/bulk.csv")), stdout(&o));

    let manifest: Value = serde_json::from_str(&read(dir.path().join("run/manifest.json"))).unwrap();
    assert_eq!(manifest["version"], "v0.1.0");
    assert_eq!(manifest["artifacts"], serde_json::json!(["bulk.csv"]));
    assert_eq!(manifest["config"]["quadrature_points"], 4096);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn bulk_free_energy_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = fk(dir.path(), &["bulk", "--d", "2", "--beta", "1,4", "--mu", "2", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(dir.path().join("run/free_energy.csv"));
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("beta,mu,f\n1,2,"));
}

#[test]
fn theorem1_on_a_box_emits_reports() {
    let dir = tempfile::tempdir().unwrap();
    write_box(&dir.path().join("box10x10.dom"), 10, 10);
    let o = fk(
        dir.path(),
        &["bounds", "--check", "theorem1", "--domain", "box10x10.dom", "--N", "1", "--out", "run"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reports: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(reports.len(), 2);
    for r in &reports {
        let keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["inputs", "lhs", "name", "pass", "rhs", "slack", "tol"]);
        assert_eq!(r["pass"], true);
        assert_eq!(r["inputs"]["N"], 1);
        assert_eq!(r["inputs"]["U"], "inf");
    }
    let summary = read(dir.path().join("run/summary.csv"));
    assert!(summary.starts_with("name,lhs,rhs,slack,tol,pass\ntheorem1_upper,"));
}

#[test]
fn failing_check_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let chain: String = std::iter::once("d=1\n".to_string())
        .chain((0..10).map(|x| format!("{x}\n")))
        .collect();
    std::fs::write(dir.path().join("chain.dom"), chain).unwrap();
    // The bulk energy lower bound does not hold in one dimension near full filling.
    let o = fk(
        dir.path(),
        &["bounds", "--check", "appendix", "--domain", "chain.dom", "--N", "8", "--out", "run"],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("appendix_c"), "{}", stderr(&o));
    assert!(dir.path().join("run/manifest.json").is_file());
}

#[test]
fn finite_u_checks_on_a_torus() {
    let dir = tempfile::tempdir().unwrap();
    write_box(&dir.path().join("b.dom"), 3, 4);
    let o = fk(
        dir.path(),
        &[
            "bounds", "--check", "all", "--domain", "b.dom", "--torus", "6x6", "--N", "3", "--U", "20", "--beta",
            "1", "--mu", "2", "--out", "run",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let names: Vec<String> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["name"].as_str().unwrap().to_string())
        .collect();
    for n in ["prop41", "theorem2_upper", "decorrelation", "majorization", "appendix_g"] {
        assert!(names.iter().any(|x| x == n), "{n} missing from {names:?}");
    }
}

#[test]
fn too_many_holes_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fk(dir.path(), &["enumerate", "--torus", "4x4", "--holes", "20"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--holes"), "{}", stderr(&o));
    assert!(!dir.path().join("fk-out").exists());
}

#[test]
fn missing_and_unknown_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = fk(dir.path(), &["bulk", "--n", "0.5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--d"));
    let o = fk(dir.path(), &["bulk", "--d", "1", "--n", "0.5", "--bogus", "1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--bogus"));
}

#[test]
fn config_file_is_merged_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"subcommand": "bulk", "seed": 3, "parameters": {"d": 1, "n": [0.25]}}"#,
    )
    .unwrap();
    let o = fk(dir.path(), &["--config", "cfg.json", "bulk", "--n", "0.5", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("\n0.5,"));
    let manifest: Value = serde_json::from_str(&read(dir.path().join("run/manifest.json"))).unwrap();
    assert_eq!(manifest["config"]["seed"], 3);
    assert_eq!(manifest["config"]["parameters"]["d"], 1);

    std::fs::write(dir.path().join("bad.json"), r#"{"parameters": {"d": 1, "n": [0.5], "colour": 2}}"#).unwrap();
    let o = fk(dir.path(), &["--config", "bad.json", "bulk"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    std::fs::write(dir.path().join("top.json"), r#"{"sede": 1}"#).unwrap();
    assert_eq!(code(&fk(dir.path(), &["--config", "top.json", "bulk", "--d", "1", "--n", "0.5"])), 2);

    let o = fk(dir.path(), &["--config", "cfg.json", "enumerate", "--torus", "2x2", "--holes", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn anneal_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "anneal", "--torus", "4x4", "--holes", "6", "--electrons", "2", "--schedule", "1,4", "--steps", "60",
            "--chains", "2", "--seed", "11", "--uniform-samples", "50", "--out", out,
        ]
    };
    assert_eq!(code(&fk(dir.path(), &args("a"))), 0);
    assert_eq!(code(&fk(dir.path(), &args("b"))), 0);
    for name in [
        "trajectory_chain0.csv",
        "trajectory_chain1.csv",
        "observables.json",
        "final.dom",
        "final_chain1.dom",
    ] {
        assert_eq!(read(dir.path().join("a").join(name)), read(dir.path().join("b").join(name)), "{name}");
    }
    let traj = read(dir.path().join("a/trajectory_chain0.csv"));
    assert!(traj.starts_with("step,beta_s,energy,boundary_size,accepted\n"));
    assert_eq!(traj.lines().count(), 121);
    let ma: Value = serde_json::from_str(&read(dir.path().join("a/manifest.json"))).unwrap();
    let mb: Value = serde_json::from_str(&read(dir.path().join("b/manifest.json"))).unwrap();
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["config"]["parameters"]["U"], "inf");
}

#[test]
fn enumerate_with_energies_finds_contiguous_ground_states() {
    let dir = tempfile::tempdir().unwrap();
    let o = fk(
        dir.path(),
        &["enumerate", "--torus", "8", "--holes", "4", "--electrons", "2", "--out", "run"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&read(dir.path().join("run/summary.json"))).unwrap();
    assert_eq!(summary["configurations"], 70);
    assert_eq!(summary["ground_set"].as_array().unwrap().len(), 8);
    assert_eq!(read(dir.path().join("run/configurations.csv")).lines().count(), 71);
}

#[test]
fn spectrum_of_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.dom"), "d=1\n0\n1\n2\n").unwrap();
    let o = fk(dir.path(), &["spectrum", "--domain", "c.dom", "--vectors", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let vals: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let pi = std::f64::consts::PI;
    for (j, v) in vals.iter().enumerate() {
        assert!((v - (2.0 - 2.0 * ((j + 1) as f64 * pi / 4.0).cos())).abs() < 1e-12);
    }
    assert!(dir.path().join("run/eigenvectors.csv").is_file());

    let o = fk(dir.path(), &["spectrum", "--domain", "c.dom", "--U", "10"]);
    assert_eq!(code(&o), 2);
    let o = fk(dir.path(), &["spectrum", "--domain", "c.dom", "--U", "10", "--torus", "6", "--out", "s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 7);
}

fn manifest_dir(dir: &Path, reports: &[(&str, bool)]) {
    std::fs::create_dir_all(dir).unwrap();
    let mut jsonl = String::new();
    for (name, pass) in reports {
        let slack = if *pass { 1.0 } else { -1.0 };
        jsonl.push_str(&format!(
            r#"{{"name":"{name}","lhs":{slack},"rhs":0.0,"slack":{slack},"tol":0.0,"inputs":{{"domain_hash":null,"N":null,"beta":null,"mu":null,"U":null}},"pass":{pass}}}"#
        ));
        jsonl.push('\n');
    }
    std::fs::write(dir.join("reports.jsonl"), jsonl).unwrap();
    std::fs::write(
        dir.join("manifest.json"),
        r#"{"version":"v0.1.0","subcommand":"bounds","config":{},"config_hash":"x","artifacts":["reports.jsonl"]}"#,
    )
    .unwrap();
}

#[test]
fn report_on_empty_dir_has_no_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("runs")).unwrap();
    let o = fk(dir.path(), &["report", "runs"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(dir.path().join("runs/report/report.csv"));
    assert_eq!(csv, "criterion,checks,passed,failed,status,failing\n");
    assert!(dir.path().join("runs/report/manifest.json").is_file());
}

#[test]
fn report_statuses_and_idempotence() {
    let dir = tempfile::tempdir().unwrap();
    manifest_dir(&dir.path().join("runs/one"), &[("majorization", true)]);
    let o = fk(dir.path(), &["report", "runs"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = read(dir.path().join("runs/report/report.csv"));
    assert_eq!(csv.lines().collect::<Vec<_>>(), ["criterion,checks,passed,failed,status,failing", "13,1,1,0,PASS,"]);

    let first = read(dir.path().join("runs/report/report.md"));
    assert_eq!(code(&fk(dir.path(), &["report", "runs"])), 0);
    assert_eq!(read(dir.path().join("runs/report/report.md")), first);

    manifest_dir(&dir.path().join("runs/two"), &[("prop41", false)]);
    let o = fk(dir.path(), &["report", "runs"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("prop41"));
    assert!(read(dir.path().join("runs/report/report.csv")).contains("6,1,0,1,FAIL,prop41"));
}

#[test]
fn report_refuses_unmanifested_and_lists_missing() {
    let dir = tempfile::tempdir().unwrap();
    manifest_dir(&dir.path().join("runs/ok"), &[("theorem1_upper", true)]);
    std::fs::create_dir_all(dir.path().join("runs/stray")).unwrap();
    std::fs::write(dir.path().join("runs/stray/reports.jsonl"), "garbage\n").unwrap();
    std::fs::create_dir_all(dir.path().join("runs/gone")).unwrap();
    std::fs::write(
        dir.path().join("runs/gone/manifest.json"),
        r#"{"version":"v0.1.0","subcommand":"bounds","config":{},"config_hash":"x","artifacts":["reports.jsonl"]}"#,
    )
    .unwrap();
    let o = fk(dir.path(), &["report", "runs"]);
    assert_eq!(code(&o), 2);
    let md = read(dir.path().join("runs/report/report.md"));
    assert!(md.contains("stray/reports.jsonl"), "{md}");
    assert!(md.contains("gone/reports.jsonl"), "{md}");
    assert!(md.contains("| 3 | 1 | 1 | 0 | PASS |"), "{md}");
}

#[test]
fn report_reads_anneal_observables() {
    let dir = tempfile::tempdir().unwrap();
    let o = fk(
        dir.path(),
        &[
            "anneal", "--torus", "4x4", "--holes", "4", "--electrons", "1", "--steps", "20", "--chains", "1",
            "--uniform-samples", "20", "--out", "runs/a",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = fk(dir.path(), &["report", "runs"]);
    assert!(code(&o) <= 1, "{}", stderr(&o));
    assert!(read(dir.path().join("runs/report/report.csv")).contains("\n12,1,"));
}
