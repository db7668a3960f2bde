//! End-to-end tests driving the compiled binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use lv_attract::schema::{parse_spec, spec_hash};
use lv_attract::spectral::build_hopf_fixture;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lv-attract"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn analyze_reports_the_expected_criteria() {
    let cases = [
        ("example_5_1_uncontrolled.toml", "Cor4.2-uncontrolled", "0.6666666666666666"),
        ("example_5_1_controlled_alpha_0.25.toml", "Thm3.2", "0.5694444444444445"),
        ("example_5_2_uncontrolled.toml", "Cor4.2-uncontrolled", "0.6625"),
        ("example_5_2_controlled_alpha_0.2.toml", "Thm4.4-predator-prey", "0.5882352941176471"),
    ];
    for (file, tag, x1) in cases {
        let out = bin().arg("analyze").arg(fixture(file)).output().unwrap();
        assert!(out.status.success(), "{file}: {}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains(&format!("criterion: {tag}")), "{file}:\n{text}");
        assert!(text.contains(x1), "{file} lacks attractor value {x1}:\n{text}");
    }
}

#[test]
fn analyze_json_mode_is_machine_readable() {
    let out = bin()
        .arg("analyze")
        .arg(fixture("example_5_2_controlled_alpha_0.2.toml"))
        .arg("--json")
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["verdict"]["criterion"], "Thm4.4-predator-prey");
    assert_eq!(report["n"], 2);
    let x = report["verdict"]["prediction"]["attractor"]["x"].as_array().unwrap();
    assert!((x[0].as_f64().unwrap() - 10.0 / 17.0).abs() < 1e-12);
    assert!((x[1].as_f64().unwrap()).abs() < 1e-12);
    assert!(report["matrices"]["m0"].is_array());
    assert!(report["hash"].as_str().unwrap().len() == 64);
}

#[test]
fn malformed_spec_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[species.1]\nb = \"high\"\nmu = 1.0\n").unwrap();
    let out = bin().arg("analyze").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn simulate_converges_to_the_analyzed_attractor() {
    let out = bin()
        .arg("simulate")
        .arg(fixture("example_5_1_controlled_alpha_0.25.toml"))
        .args(["--seed", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("converged to (0.5694444444444445, 0.02777777777777776)"), "{text}");
}

#[test]
fn simulate_detects_the_hopf_dichotomy() {
    let below = bin()
        .arg("simulate")
        .arg(fixture("hopf_b_1_c_2_tau_1.2.toml"))
        .args(["--seed", "7"])
        .output()
        .unwrap();
    assert!(below.status.success());
    assert!(stdout(&below).starts_with("converged"), "{}", stdout(&below));

    let dir = tempfile::tempdir().unwrap();
    let spec19 = dir.path().join("hopf19.toml");
    let built = bin()
        .arg("fixture")
        .arg("hopf")
        .args(["--tau", "1.9", "--out"])
        .arg(&spec19)
        .output()
        .unwrap();
    assert!(built.status.success());
    let above = bin()
        .arg("simulate")
        .arg(&spec19)
        .args(["--seed", "7"])
        .output()
        .unwrap();
    assert!(above.status.success());
    assert!(
        stdout(&above).starts_with("sustained oscillation"),
        "{}",
        stdout(&above)
    );
}

#[test]
fn csv_output_is_deterministic_and_plot_script_matches() {
    let dir = tempfile::tempdir().unwrap();
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    let plot = dir.path().join("a.gp");
    for (csv, with_plot) in [(&csv_a, true), (&csv_b, false)] {
        let mut cmd = bin();
        cmd.arg("simulate")
            .arg(fixture("example_5_2_uncontrolled.toml"))
            .args(["--seed", "4", "--T", "60", "--window", "20"])
            .arg("--csv")
            .arg(csv);
        if with_plot {
            cmd.arg("--plot").arg(&plot);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(&csv_a).unwrap();
    let b = std::fs::read(&csv_b).unwrap();
    assert_eq!(a, b, "same spec, seed and flags must give identical bytes");
    let header = String::from_utf8_lossy(&a);
    assert!(header.starts_with("t,x1,x2,u1,u2\n"));
    let script = std::fs::read_to_string(&plot).unwrap();
    assert!(script.contains("'a.csv' using 1:2"));
    assert!(script.contains("using 1:5"));
}

#[test]
fn plot_without_csv_is_a_flag_error() {
    let out = bin()
        .arg("simulate")
        .arg(fixture("example_5_1_uncontrolled.toml"))
        .args(["--plot", "/tmp/nope.gp"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hopf_table_and_regime_error() {
    let out = bin().args(["hopf", "--b", "1", "--c", "2", "--n", "2"]).output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "n,tau_n,omega,spacing");
    assert_eq!(rows.len(), 4);
    let tau0: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    let tau1: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    let tau2: f64 = rows[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!((tau0 - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert!((tau1 - tau0 - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    assert!((tau2 - tau1 - 2.0 * std::f64::consts::PI).abs() < 1e-12);

    let out = bin().args(["hopf", "--b", "1", "--c", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn emitted_hopf_fixture_reparses_hash_equal() {
    let out = bin().args(["fixture", "hopf", "--tau", "1.2"]).output().unwrap();
    assert!(out.status.success());
    let parsed = parse_spec(&stdout(&out)).unwrap();
    let reference = build_hopf_fixture(1.0, 2.0, 1.2).unwrap();
    assert_eq!(spec_hash(&parsed), spec_hash(&reference));
}

#[test]
fn positivity_fault_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stiff.toml");
    std::fs::write(&path, "[species.1]\nb = -10.0\nmu = 1.0\n").unwrap();
    let out = bin()
        .arg("simulate")
        .arg(&path)
        .args(["--h", "0.5", "--T", "20", "--window", "5", "--target", "none"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("fell to"));
}

#[test]
fn sweep_writes_runs_and_locked_index() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = bin()
        .arg("sweep")
        .arg(fixture("example_5_2_controlled_alpha_0.2.toml"))
        .args(["--seeds", "3", "--T", "200"])
        .arg("--out")
        .arg(&out_dir)
        .env("LV_ATTRACT_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("3 converged"), "{}", stdout(&out));
    for seed in 1..=3 {
        assert!(out_dir.join(format!("run_{seed:04}.csv")).exists());
    }
    let index = std::fs::read_to_string(out_dir.join("runs.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = index
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 3);
    for record in &records {
        assert_eq!(record["command"], "sweep");
        assert_eq!(record["verdict"], "Thm4.4-predator-prey");
        assert_eq!(record["outcome"], "converged");
        assert_eq!(record["spec_hash"].as_str().unwrap().len(), 64);
    }
}
