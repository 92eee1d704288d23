//! Acceptance suite. Each test prints one verdict line and fails on FAIL.
//! Run with `cargo test -p nessfdr-cli --test acceptance -- --nocapture`
//! to see the lines.

use std::fs;
use std::path::{Path, PathBuf};

use nessfdr::fdr::{commutator_term, thermal_matrix, COMMUTATOR_TOL};
use nessfdr::greens::{im_identity_residual, retarded_matrix, CMatrix};
use nessfdr::transport;
use nessfdr_cli::config::{BathSection, ChainSection, OutputSection, RunConfig, SweepSection};
use nessfdr_cli::{execute, Command, Format};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

// Pinned tolerances.
const EQUILIBRIUM_FDR_TOL: f64 = 1e-10;
const IDENTITY_TOL: f64 = 1e-10;
const DECOMPOSITION_TOL: f64 = 1e-9;
const BIAS_NULL_TOL: f64 = 1e-12;
const SINGLE_BATH_TOL: f64 = 1e-8;
const CONSERVATION_TOL: f64 = 1e-8;
const TRIANGLE_FACTOR: f64 = 2.0;
const GOLDEN_REL_TOL: f64 = 1e-6;
const TIME_FREQUENCY_TOL: f64 = 0.01;
const TRANSIENT_FLOOR: f64 = 1e-4;
const DECAY_RATE_TOL: f64 = 0.25;

const CONFIGS: usize = 20;
const KAPPA_SAMPLES: usize = 200;

fn verdict(n: u32, title: &str, ok: bool, detail: String) {
    println!("criterion {n} ({title}): {} | {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn load(name: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::load(&golden_dir().join(name)).unwrap();
    c.output.dir = out.to_str().unwrap().to_string();
    c
}

fn reference() -> Value {
    serde_json::from_str(&fs::read_to_string(golden_dir().join("reference.json")).unwrap()).unwrap()
}

fn bath(temperature: f64, gamma: f64, cutoff: Option<f64>) -> BathSection {
    BathSection {
        temperature,
        gamma: Some(gamma),
        coupling_e: None,
        cutoff,
    }
}

fn config(omega: Vec<f64>, sigma: f64, baths: Vec<BathSection>, out: &Path) -> RunConfig {
    RunConfig {
        chain: ChainSection { mass: 1.0, omega, sigma },
        baths,
        quadrature: Default::default(),
        fdr: Default::default(),
        timedomain: Default::default(),
        output: OutputSection {
            dir: out.to_str().unwrap().to_string(),
            format: Format::Json,
        },
        sweep: None,
        seed: 0,
    }
}

/// Draws from the randomized family: γ ∈ [0.01, 0.5], ω ∈ [0.5, 2], β ∈ [0.1, 10].
fn draw_bath(rng: &mut ChaCha8Rng, cutoff: Option<f64>) -> BathSection {
    let beta: f64 = rng.gen_range(0.1..10.0);
    bath(1.0 / beta, rng.gen_range(0.01..0.5), cutoff)
}

fn draw_single(rng: &mut ChaCha8Rng, out: &Path) -> RunConfig {
    let omega = rng.gen_range(0.5..2.0);
    let b = draw_bath(rng, None);
    config(vec![omega], 0.0, vec![b], out)
}

fn draw_pair(rng: &mut ChaCha8Rng, out: &Path) -> RunConfig {
    let w: [f64; 2] = [rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
    let sigma = rng.gen_range(0.0..0.9) * w[0] * w[1];
    let cutoff = if rng.gen_bool(0.5) { Some(rng.gen_range(5.0..50.0)) } else { None };
    let baths = vec![draw_bath(rng, cutoff), draw_bath(rng, cutoff)];
    config(w.to_vec(), sigma, baths, out)
}

/// `KAPPA_SAMPLES` frequencies: half drawn in `(0, 8 max ω)`, then mirrored.
fn kappa_list(rng: &mut ChaCha8Rng, cfg: &RunConfig) -> Vec<f64> {
    let top = cfg.chain.omega.iter().cloned().fold(0.0, f64::max) * 2.0;
    (0..KAPPA_SAMPLES / 2).map(|_| rng.gen_range(1e-3..4.0 * top)).collect()
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing `{key}`"))
}

#[test]
fn criterion_1_equilibrium_fdr() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for _ in 0..CONFIGS {
        let mut cfg = draw_single(&mut rng, tmp.path());
        cfg.fdr.kappa = Some(kappa_list(&mut rng, &cfg));
        let out = execute(Command::FdrCheck, &cfg).unwrap();
        samples += out.summary["samples"].as_u64().unwrap();
        worst = worst.max(num(&out.summary, "max_residual"));
    }
    verdict(
        1,
        "equilibrium FDR, single oscillator",
        worst < EQUILIBRIUM_FDR_TOL && samples == (CONFIGS * KAPPA_SAMPLES) as u64,
        format!("{CONFIGS} configs x {KAPPA_SAMPLES} kappa, worst residual {worst:e} < {EQUILIBRIUM_FDR_TOL:e}"),
    );
}

#[test]
fn criterion_2_structural_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for pair in [false, true] {
        for _ in 0..CONFIGS {
            let cfg = if pair { draw_pair(&mut rng, tmp.path()) } else { draw_single(&mut rng, tmp.path()) };
            let m = cfg.resolve().unwrap();
            for k in kappa_list(&mut rng, &cfg) {
                for kappa in [k, -k] {
                    worst = worst.max(im_identity_residual(kappa, &m.sys, &m.baths).unwrap());
                }
            }
        }
    }
    verdict(
        2,
        "Im G_R structural identity",
        worst < IDENTITY_TOL,
        format!("{} configs (N = 1, 2) x {KAPPA_SAMPLES} kappa, worst residual {worst:e} < {IDENTITY_TOL:e}", 2 * CONFIGS),
    );
}

#[test]
fn criterion_3_ness_decomposition() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut worst_null: f64 = 0.0;
    for i in 0..CONFIGS {
        let mut cfg = draw_pair(&mut rng, tmp.path());
        match i % 3 {
            1 => cfg.baths[1].temperature = cfg.baths[0].temperature,
            2 => cfg.chain.sigma = 0.0,
            _ => {}
        }
        cfg.fdr.kappa = Some(kappa_list(&mut rng, &cfg));
        let out = execute(Command::FdrCheck, &cfg).unwrap();
        worst = worst.max(num(&out.summary, "max_residual"));
        if i % 3 != 0 {
            assert_eq!(out.summary["equilibrium"], Value::Bool(true));
            worst_null = worst_null.max(num(&out.summary, "bias_max_relative"));
        }
    }
    let golden = execute(Command::FdrCheck, &{
        let mut c = load("golden_ness.toml", tmp.path());
        c.fdr.kappa = None;
        c
    })
    .unwrap();
    let profile: Vec<f64> = golden.summary["bias_profile"]["norm"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let golden_min = profile.iter().cloned().fold(f64::INFINITY, f64::min);
    worst = worst.max(num(&golden.summary, "max_residual"));
    verdict(
        3,
        "NESS FDR decomposition",
        worst < DECOMPOSITION_TOL && worst_null < BIAS_NULL_TOL && golden_min > 0.0 && profile.len() == 400,
        format!(
            "worst residual {worst:e} < {DECOMPOSITION_TOL:e}; equilibrium bias {worst_null:e} < {BIAS_NULL_TOL:e}; \
             golden bias min over {} kappa {golden_min:e} > 0",
            profile.len()
        ),
    );
}

fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn criterion_4_commutator_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let cfg = draw_pair(&mut rng, tmp.path());
        let m = cfg.resolve().unwrap();
        let k = rng.gen_range(1e-3..6.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let g = retarded_matrix(k, &m.sys, &m.baths).unwrap();
        let f = thermal_matrix(k, &m.baths).unwrap().f_matrix.map(|x| Complex64::new(x, 0.0));
        let direct = &g * &f - &f * &g;
        let df = f[(0, 0)] - f[(1, 1)];
        let j = CMatrix::from_row_slice(2, 2, &[0.0.into(), 1.0.into(), (-1.0).into(), 0.0.into()]);
        let closed = j * (-df * g[(0, 1)]);
        worst = worst.max(fro(&(&direct - &closed)) / (fro(&g) * fro(&f)));
        commutator_term(k, &m.sys, &m.baths).unwrap();
    }
    verdict(
        4,
        "commutator closed form",
        worst < COMMUTATOR_TOL,
        format!("100 random samples, worst relative gap {worst:e} < {COMMUTATOR_TOL:e}"),
    );
}

#[test]
fn criterion_5_single_bath_balance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let mut cfg = draw_single(&mut rng, tmp.path());
        if i == 0 {
            cfg.baths[0].gamma = Some(0.5);
        }
        let out = execute(Command::HeatCurrent, &cfg).unwrap();
        let p_h = num(&out.summary["single_bath"], "p_h");
        let (gamma, omega, temp) = (cfg.baths[0].gamma.unwrap(), cfg.chain.omega[0], cfg.baths[0].temperature);
        worst = worst.max(p_h.abs() / (gamma * omega * omega * temp));
    }
    verdict(
        5,
        "single-bath power balance",
        worst < SINGLE_BATH_TOL,
        format!("10 configs incl. gamma = 0.5, worst |P_H| / (gamma w^2 T) = {worst:e} < {SINGLE_BATH_TOL:e}"),
    );
}

#[test]
fn criterion_6_conservation_and_sign() {
    let tmp = tempfile::tempdir().unwrap();
    let sigmas = [0.0, 0.1, 0.2, 0.3, 0.45];
    let deltas = [-0.5, -0.25, 0.0, 0.25, 0.5];
    let mut failures = Vec::new();
    let mut worst_defect: f64 = 0.0;
    for sigma in sigmas {
        let mut cfg = config(
            vec![1.0, 1.2],
            sigma,
            vec![bath(1.0, 0.05, None), bath(1.0, 0.08, None)],
            tmp.path(),
        );
        cfg.fdr.points = 20;
        cfg.sweep = Some(SweepSection {
            parameter: "delta_T".into(),
            values: Some(deltas.to_vec()),
            start: None,
            stop: None,
            count: None,
            scale: nessfdr_cli::config::Scale::Linear,
        });
        let out = execute(Command::Sweep, &cfg).unwrap();
        assert_eq!(out.code, 0, "{:?}", out.summary["rows"]);
        for (row, dt) in out.summary["rows"].as_array().unwrap().iter().zip(deltas) {
            let point = nessfdr_cli::sweep::apply(&cfg, "delta_T", dt).unwrap();
            let m = point.resolve().unwrap();
            let scale = transport::power_scale(&m.sys, &m.baths);
            let (j, defect) = (num(row, "j"), num(row, "conservation_defect"));
            worst_defect = worst_defect.max(defect / scale);
            let null = sigma == 0.0 || dt == 0.0;
            let ok = defect < CONSERVATION_TOL * scale
                && if null { j.abs() < CONSERVATION_TOL * scale } else { j.signum() == dt.signum() && j.abs() > CONSERVATION_TOL * scale };
            if !ok {
                failures.push(format!("sigma {sigma}, dT {dt}: J {j:e}, defect {defect:e}"));
            }
        }
    }
    verdict(
        6,
        "NESS conservation and sign",
        failures.is_empty(),
        format!("5x5 (sigma, dT) grid, worst defect {worst_defect:e} scale; failures {failures:?}"),
    );
}

#[test]
fn criterion_7_oracle_triangle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("golden_ness.toml", tmp.path());
    let out = execute(Command::HeatCurrent, &cfg).unwrap();
    let r = &out.summary["report"];
    let (j, jb, jt) = (num(r, "heat_current_j"), num(r, "j_bracket"), num(r, "j_transmission"));
    let bound = TRIANGLE_FACTOR * cfg.quadrature.tol_abs;
    let gaps = [(j - jb).abs(), (j - jt).abs(), (jb - jt).abs()];
    let reference = reference();
    let oracle = num(&reference, "heat_current_j");
    let six = num(&reference, "heat_current_j_6sig");
    let rounded: f64 = format!("{j:.5e}").parse().unwrap();
    let ok = gaps.iter().all(|g| *g <= bound) && (j / oracle - 1.0).abs() < GOLDEN_REL_TOL && rounded == six;
    verdict(
        7,
        "oracle triangle",
        ok,
        format!(
            "J = {j:.17e}; pairwise gaps {:.1e} {:.1e} {:.1e} <= {bound:e}; oracle {oracle:.17e} (rel {:.1e}); 6 digits {rounded} vs golden {six}",
            gaps[0], gaps[1], gaps[2], (j / oracle - 1.0).abs()
        ),
    );
}

#[test]
fn criterion_8_time_frequency_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = load("golden_ness.toml", &tmp.path().join("pair"));
    let relax = execute(Command::Relax, &cfg).unwrap();
    let heat = execute(Command::HeatCurrent, &cfg).unwrap();
    let s = &relax.summary;
    let late = num(s, "final_current");
    let freq = num(&heat.summary["report"], "heat_current_j");
    let gap = (late - freq).abs() / freq.abs();
    let t_late = num(s, "final_time");
    let expected_t = nessfdr::timedomain::LATE_TIME_FACTOR / 0.05;

    let single = execute(Command::Relax, &load("single_bath.toml", &tmp.path().join("single"))).unwrap();
    let ss = &single.summary;
    let floor = num(ss, "final_trace_p_h_relative").abs();
    let rate = num(ss, "decay_rate_fit");
    let rate_gap = (rate / num(ss, "reference_decay_rate") - 1.0).abs();
    verdict(
        8,
        "time/frequency agreement",
        gap < TIME_FREQUENCY_TOL
            && (t_late - expected_t).abs() < 1e-9 * expected_t
            && floor < TRANSIENT_FLOOR
            && rate_gap < DECAY_RATE_TOL,
        format!(
            "late J(t = {t_late}) {late:.6e} vs {freq:.6e} (rel {gap:.2e} < {TIME_FREQUENCY_TOL}); \
             single bath |tr P_H| {floor:.1e} scale < {TRANSIENT_FLOOR:e}, rate {rate:.4} (rel {rate_gap:.2e} < {DECAY_RATE_TOL})"
        ),
    );
}

#[test]
fn criterion_9_determinism_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    for (name, cmd) in [
        ("golden_ness.toml", Command::HeatCurrent),
        ("golden_ness.toml", Command::FdrCheck),
        ("equilibrium.toml", Command::HeatCurrent),
        ("sweep_sigma.toml", Command::Sweep),
    ] {
        let cfg = load(name, &tmp.path().join(name));
        let path = tmp.path().join(name).join(format!("{}.json", cmd.stem()));
        execute(cmd, &cfg).unwrap();
        let first = fs::read(&path).unwrap();
        execute(cmd, &cfg).unwrap();
        if fs::read(&path).unwrap() != first {
            mismatches.push(format!("{name} {}", cmd.name()));
        }
    }
    let dir = tmp.path().join("golden_ness.toml");
    let summary_path = dir.join("heat_current.json");
    let original: Value = serde_json::from_slice(&fs::read(&summary_path).unwrap()).unwrap();
    let embedded = RunConfig::load(&summary_path).unwrap();
    let mut again = embedded.clone();
    again.output.dir = tmp.path().join("rerun").to_str().unwrap().to_string();
    let rerun = execute(Command::HeatCurrent, &again).unwrap();
    let a = original["report"]["heat_current_j"].to_string();
    let b = rerun.summary["report"]["heat_current_j"].to_string();
    let config_same = serde_json::to_value(&embedded).unwrap() == original["config"];
    verdict(
        9,
        "determinism and round-trip",
        mismatches.is_empty() && a == b && config_same,
        format!("byte mismatches {mismatches:?}; J {a} vs re-run from embedded config {b}"),
    );
}
