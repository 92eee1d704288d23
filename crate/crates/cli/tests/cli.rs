use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn reference() -> Value {
    serde_json::from_str(&fs::read_to_string(golden("reference.json")).unwrap()).unwrap()
}

fn nessfdr(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nessfdr"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NESSFDR_WORKERS")
        .output()
        .unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    nessfdr(&args, out)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn golden_heat_current_matches_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("heat-current", &golden("golden_ness.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(tmp.path().join("heat_current.json"));
    let j = s["report"]["heat_current_j"].as_f64().unwrap();
    let r = reference();
    let six = r["heat_current_j_6sig"].as_f64().unwrap();
    assert!((j / six - 1.0).abs() < 1e-5, "{j} vs {six}");
    assert!((j - r["heat_current_j"].as_f64().unwrap()).abs() < 1e-8);
    let (header, rows) = csv_rows(tmp.path().join("heat_current.csv"));
    assert_eq!(header[0], "heat_current_j");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), j);
}

#[test]
fn equal_temperatures_give_zero_current() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("heat-current", &golden("equilibrium.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(tmp.path().join("heat_current.json"));
    let j = s["report"]["heat_current_j"].as_f64().unwrap();
    let scale = s["report"]["power_scale"].as_f64().unwrap();
    assert!(j.abs() < 1e-8 * scale, "{j}");
}

#[test]
fn exhausted_budget_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden("golden_ness.toml")).unwrap().replace(
        "tol_rel = 1e-10",
        "tol_rel = 1e-10\nmax_evals = 2000",
    );
    let cfg = write_config(tmp.path(), "tight.toml", &text);
    let o = run("heat-current", &cfg, tmp.path(), &["--tol-abs", "1e-300", "--tol-rel", "1e-300"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("did not converge"), "{}", stderr(&o));
}

#[test]
fn golden_fdr_check_matches_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("fdr-check", &golden("golden_ness.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(tmp.path().join("fdr_check.json"));
    assert_eq!(s["passed"], Value::Bool(true));
    assert_eq!(s["equilibrium"], Value::Bool(false));
    assert!(s["max_residual"].as_f64().unwrap() < 1e-9);
    assert!(s["bias_max"].as_f64().unwrap() > 0.1);

    let (header, rows) = csv_rows(tmp.path().join("fdr_check.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let r = reference();
    for (k, want) in r["fdr_samples"].as_object().unwrap() {
        let k: f64 = k.parse().unwrap();
        let row = rows.iter().find(|row| row[0].parse::<f64>().unwrap() == k).unwrap();
        for name in ["bias_norm", "hadamard_norm"] {
            let got: f64 = row[col(name)].parse().unwrap();
            let want = want[name].as_f64().unwrap();
            assert!((got / want - 1.0).abs() < 1e-12, "{name} at {k}: {got} vs {want}");
        }
    }
    let raw = fs::read(tmp.path().join("fdr_check.csv")).unwrap();
    assert!(!raw.contains(&b'\r'));
}

#[test]
fn equilibrium_fdr_check_has_no_bias() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("fdr-check", &golden("equilibrium.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(tmp.path().join("fdr_check.json"));
    assert_eq!(s["equilibrium"], Value::Bool(true));
    assert!(s["bias_max"].as_f64().unwrap() < 1e-12);
}

#[test]
fn unstable_chain_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden("golden_ness.toml"))
        .unwrap()
        .replace("sigma = 0.3 ", "sigma = 1.5 ");
    let cfg = write_config(tmp.path(), "unstable.toml", &text);
    let o = run("fdr-check", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("stability violation"), "{}", stderr(&o));
    assert!(!tmp.path().join("fdr_check.json").exists());
}

#[test]
fn parse_errors_carry_location() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden("golden_ness.toml"))
        .unwrap()
        .replace("gamma = 0.05         # damping rate", "gama = 0.05");
    let cfg = write_config(tmp.path(), "typo.toml", &text);
    let o = run("heat-current", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("typo.toml") && err.contains("line") && err.contains("gama"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(nessfdr(&["heat-current"], tmp.path()).status.code(), Some(1));
    assert_eq!(nessfdr(&["warp", "--config", "x.toml"], tmp.path()).status.code(), Some(1));
    let missing = tmp.path().join("missing.toml");
    assert_eq!(run("relax", &missing, tmp.path(), &[]).status.code(), Some(1));
}

#[test]
fn sigma_sweep_starts_at_zero_current() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("sweep", &golden("sweep_sigma.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(tmp.path().join("sweep.csv"));
    assert_eq!(header[..6], ["index", "parameter", "value", "status", "exit_code", "j"]);
    let values: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(values, vec![0.0, 0.1, 0.2, 0.3]);
    let j: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(j[0].abs() < 1e-12, "{}", j[0]);
    assert!(j[1..].iter().all(|x| *x > 0.0));
    let bias: f64 = rows[0][7].parse().unwrap();
    assert_eq!(bias, 0.0);
}

#[test]
fn delta_t_sweep_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("sweep", &golden("sweep_delta_t.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(tmp.path().join("sweep.json"));
    let j: Vec<f64> = s["rows"].as_array().unwrap().iter().map(|r| r["j"].as_f64().unwrap()).collect();
    assert!(j[0].abs() < 1e-10, "{j:?}");
    assert!(j.windows(2).all(|w| w[1].abs() >= w[0].abs()), "{j:?}");
}

#[test]
fn unknown_sweep_parameter_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden("sweep_sigma.toml"))
        .unwrap()
        .replace("parameter = \"sigma\"", "parameter = \"beta\"");
    let cfg = write_config(tmp.path(), "bad.toml", &text);
    let o = run("sweep", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown parameter"), "{}", stderr(&o));
}

#[test]
fn failing_sweep_point_is_recorded_in_place() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden("sweep_sigma.toml"))
        .unwrap()
        .replace("values = [0.0, 0.1, 0.2, 0.3]", "values = [0.1, 2.0, 0.2]");
    let cfg = write_config(tmp.path(), "partial.toml", &text);
    let o = run("sweep", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let (_, rows) = csv_rows(tmp.path().join("sweep.csv"));
    let status: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(status, ["ok", "error", "ok"]);
    assert!(rows[1][10].contains("stability"));
    assert!(rows[1][5].is_empty());
}

#[test]
fn single_bath_relaxation_settles() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("relax", &golden("single_bath.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(tmp.path().join("relax.json"));
    assert!(s["final_trace_p_h_relative"].as_f64().unwrap().abs() < 1e-4);
    let rate = s["decay_rate_fit"].as_f64().unwrap();
    assert!((rate / 0.2 - 1.0).abs() < 0.25, "{rate}");
    assert!(s["final_current"].is_null());
    let (header, rows) = csv_rows(tmp.path().join("relax_trace.csv"));
    assert_eq!(header, ["time", "quantity", "row", "col", "value"]);
    assert_eq!(rows.last().unwrap()[1], "energy_total");
    assert_eq!(rows.last().unwrap()[0].parse::<f64>().unwrap(), s["final_time"].as_f64().unwrap());
}

#[test]
fn coarse_step_exits_two_with_hint() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(golden("single_bath.toml"))
        .unwrap()
        .replace("record_every = 50", "record_every = 50\ndt = 0.2\nt_max = 10.0");
    let cfg = write_config(tmp.path(), "coarse.toml", &text);
    let o = run("relax", &cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("too coarse") && err.contains("hint: set `dt ="), "{err}");
}

#[test]
fn format_selects_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = golden("golden_ness.toml");
    let csv_dir = tmp.path().join("csv");
    run("fdr-check", &cfg, &csv_dir, &["--format", "csv"]);
    assert!(csv_dir.join("fdr_check.csv").exists());
    assert!(!csv_dir.join("fdr_check.json").exists());
    assert!(csv_dir.join("fdr_check.timing.json").exists());

    let json_dir = tmp.path().join("json");
    run("fdr-check", &cfg, &json_dir, &["--format", "json"]);
    assert!(!json_dir.join("fdr_check.csv").exists());
    let s = json(json_dir.join("fdr_check.json"));
    assert_eq!(s["rows"].as_array().unwrap().len(), 18);
    assert_eq!(s["config"]["output"]["format"], "json");
}

#[test]
fn workers_variable_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = golden("golden_ness.toml");
    let bin = env!("CARGO_BIN_EXE_nessfdr");
    let with = |v: &str| {
        Command::new(bin)
            .args(["heat-current", "--config", cfg.to_str().unwrap(), "--out"])
            .arg(tmp.path())
            .env("NESSFDR_WORKERS", v)
            .output()
            .unwrap()
    };
    assert_eq!(with("0").status.code(), Some(1));
    assert_eq!(with("many").status.code(), Some(1));
    assert_eq!(with("2").status.code(), Some(0));
    assert_eq!(json(tmp.path().join("heat_current.timing.json"))["workers"], 2);
}

#[test]
fn reruns_are_byte_identical_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let cfg = golden("golden_ness.toml");
    for dir in [&a, &b] {
        assert_eq!(run("heat-current", &cfg, dir, &[]).status.code(), Some(0));
    }
    let first = fs::read(a.join("heat_current.json")).unwrap();
    let second = fs::read(b.join("heat_current.json")).unwrap();
    let strip = |bytes: &[u8], dir: &Path| {
        String::from_utf8(bytes.to_vec()).unwrap().replace(dir.to_str().unwrap(), "<out>")
    };
    assert_eq!(strip(&first, &a), strip(&second, &b));

    let o = run("heat-current", &a.join("heat_current.json"), &c, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let j = |d: &Path| json(d.join("heat_current.json"))["report"]["heat_current_j"].to_string();
    assert_eq!(j(&a), j(&c));
}
