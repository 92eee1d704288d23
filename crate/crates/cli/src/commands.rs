//! The four subcommands. Each returns its exit code, a JSON summary and the
//! CSV tables it produced; [`execute`] writes them out.

use std::path::PathBuf;
use std::time::Instant;

use nessfdr::fdr::{commutator_term, equilibrium_fdr_residual, fdr_decompose};
use nessfdr::greens::{im_identity_residual, noise_matrix};
use nessfdr::timedomain::{self, envelope_decay_rate, transient_powers, RelaxationTrace};
use nessfdr::transport::{self, heat_current, single_bath_balance, TransportReport};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{Model, RunConfig};
use crate::output::{self, float, opt_float, Table, Timing};
use crate::sweep::{self, SweepRow};
use crate::{Failure, EXIT_INVARIANT, EXIT_OK};

/// Relative decomposition residual allowed at each sample.
pub const FDR_RESIDUAL_TOL: f64 = 1e-9;
/// Single-oscillator FDR residual allowed at each sample.
pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-10;
/// Bias norm, relative to `‖G_H‖`, below which it counts as zero.
pub const BIAS_NULL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FdrCheck,
    HeatCurrent,
    Sweep,
    Relax,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FdrCheck => "fdr-check",
            Command::HeatCurrent => "heat-current",
            Command::Sweep => "sweep",
            Command::Relax => "relax",
        }
    }

    /// File stem of everything the command writes.
    pub fn stem(self) -> &'static str {
        match self {
            Command::FdrCheck => "fdr_check",
            Command::HeatCurrent => "heat_current",
            Command::Sweep => "sweep",
            Command::Relax => "relax",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub command: Command,
    pub code: i32,
    pub headline: String,
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

struct Outcome {
    code: i32,
    headline: String,
    summary: Value,
    tables: Vec<(String, Table)>,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::usage(format!("serialising summary: {e}")))
}

/// Validates `cfg`, runs `cmd` and writes its outputs under `cfg.output.dir`.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<RunOutput, Failure> {
    let start = Instant::now();
    let outcome = match cmd {
        Command::FdrCheck => fdr_check(cfg)?,
        Command::HeatCurrent => heat(cfg)?,
        Command::Sweep => run_sweep(cfg)?,
        Command::Relax => relax(cfg)?,
    };
    let dir = PathBuf::from(&cfg.output.dir);
    let mut files = Vec::new();
    if cfg.output.format.json() {
        let bytes = output::json_bytes(&outcome.summary)?;
        files.push(output::write(&dir, &format!("{}.json", cmd.stem()), &bytes)?);
    }
    if cfg.output.format.csv() {
        for (name, table) in &outcome.tables {
            files.push(output::write(&dir, name, &table.to_bytes())?);
        }
    }
    let timing = Timing {
        command: cmd.name().to_string(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        workers: rayon::current_num_threads(),
    };
    files.push(output::write(
        &dir,
        &format!("{}.timing.json", cmd.stem()),
        &output::json_bytes(&timing)?,
    )?);
    Ok(RunOutput {
        command: cmd,
        code: outcome.code,
        headline: outcome.headline,
        summary: outcome.summary,
        files,
    })
}

fn rows_if_json_only<T>(cfg: &RunConfig, rows: T) -> Option<T> {
    (!cfg.output.format.csv()).then_some(rows)
}

// ---------------------------------------------------------------- fdr-check

#[derive(Debug, Clone, Serialize)]
struct FdrRow {
    kappa: f64,
    residual: f64,
    identity_residual: f64,
    bias_norm: f64,
    bias_relative: f64,
    hadamard_norm: f64,
}

#[derive(Debug, Serialize)]
struct Profile {
    kappa: Vec<f64>,
    norm: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct FdrTolerances {
    residual: f64,
    identity: f64,
    bias_null: f64,
}

#[derive(Debug, Serialize)]
struct FdrSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    equilibrium: bool,
    samples: usize,
    max_residual: f64,
    max_residual_kappa: f64,
    max_identity_residual: f64,
    bias_max: f64,
    bias_max_kappa: f64,
    bias_max_relative: f64,
    bias_profile: Profile,
    tolerances: FdrTolerances,
    passed: bool,
    failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<FdrRow>>,
}

fn fdr_row(kappa: f64, m: &Model) -> nessfdr::Result<FdrRow> {
    let identity_residual = im_identity_residual(kappa, &m.sys, &m.baths)?;
    if m.sys.dim() == 1 {
        return Ok(FdrRow {
            kappa,
            residual: equilibrium_fdr_residual(kappa, &m.sys, &m.baths[0])?,
            identity_residual,
            bias_norm: 0.0,
            bias_relative: 0.0,
            hadamard_norm: noise_matrix(kappa, &m.sys, &m.baths)?.norm(),
        });
    }
    let d = fdr_decompose(kappa, &m.sys, &m.baths)?;
    let h = d.direct_hadamard.norm();
    let b = d.bias.norm();
    Ok(FdrRow {
        kappa,
        residual: d.residual,
        identity_residual,
        bias_norm: b,
        bias_relative: if h > 0.0 { b / h } else { b },
        hadamard_norm: h,
    })
}

/// True when a single temperature describes the noise: one oscillator,
/// no inter-oscillator coupling, or equal bath temperatures.
pub fn is_equilibrium(cfg: &RunConfig) -> bool {
    cfg.baths.len() == 1
        || cfg.chain.sigma == 0.0
        || cfg.baths.windows(2).all(|w| w[0].temperature == w[1].temperature)
}

fn argmax(rows: &[FdrRow], key: impl Fn(&FdrRow) -> f64) -> (f64, f64) {
    rows.iter()
        .map(|r| (key(r), r.kappa))
        .fold((0.0, f64::NAN), |best, x| if x.0 > best.0 || best.1.is_nan() { x } else { best })
}

fn fdr_check(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let m = cfg.resolve()?;
    let positive = m.fdr_grid(&cfg.fdr);
    let kappas: Vec<f64> = positive.iter().rev().map(|k| -k).chain(positive.iter().copied()).collect();
    let rows = kappas
        .par_iter()
        .map(|k| fdr_row(*k, &m))
        .collect::<nessfdr::Result<Vec<_>>>()
        .map_err(|e| Failure::from_engine(e, false))?;

    let equilibrium = is_equilibrium(cfg);
    let residual_tol = if m.sys.dim() == 1 { EQUILIBRIUM_RESIDUAL_TOL } else { FDR_RESIDUAL_TOL };
    let (max_residual, max_residual_kappa) = argmax(&rows, |r| r.residual);
    let (max_identity, _) = argmax(&rows, |r| r.identity_residual);
    let (bias_max, bias_max_kappa) = argmax(&rows, |r| r.bias_norm);
    let (bias_max_relative, _) = argmax(&rows, |r| r.bias_relative);

    let mut failures = Vec::new();
    if !(max_residual <= residual_tol) {
        failures.push(format!(
            "FDR residual {max_residual:e} at kappa = {max_residual_kappa} exceeds {residual_tol:e}"
        ));
    }
    if !(max_identity <= IDENTITY_TOL) {
        failures.push(format!("Im G_R identity residual {max_identity:e} exceeds {IDENTITY_TOL:e}"));
    }
    if equilibrium && !(bias_max_relative <= BIAS_NULL_TOL) {
        failures.push(format!(
            "bias term {bias_max_relative:e} (relative) should vanish in equilibrium"
        ));
    }
    let passed = failures.is_empty();
    let headline = format!(
        "{} samples: max residual {max_residual:e}, max bias {bias_max:e} at kappa = {bias_max_kappa}{}",
        rows.len(),
        if passed { String::new() } else { format!("; FAILED: {}", failures.join("; ")) }
    );

    let mut table = Table::new(&[
        "kappa",
        "residual",
        "identity_residual",
        "bias_norm",
        "bias_relative",
        "hadamard_norm",
    ]);
    for r in &rows {
        table.push(
            [r.kappa, r.residual, r.identity_residual, r.bias_norm, r.bias_relative, r.hadamard_norm]
                .map(float)
                .to_vec(),
        );
    }
    let summary = FdrSummary {
        command: Command::FdrCheck.name(),
        config: cfg,
        equilibrium,
        samples: rows.len(),
        max_residual,
        max_residual_kappa,
        max_identity_residual: max_identity,
        bias_max,
        bias_max_kappa,
        bias_max_relative,
        bias_profile: Profile {
            kappa: rows.iter().map(|r| r.kappa).collect(),
            norm: rows.iter().map(|r| r.bias_norm).collect(),
        },
        tolerances: FdrTolerances {
            residual: residual_tol,
            identity: IDENTITY_TOL,
            bias_null: BIAS_NULL_TOL,
        },
        passed,
        failures,
        rows: rows_if_json_only(cfg, rows.clone()),
    };
    Ok(Outcome {
        code: if passed { EXIT_OK } else { EXIT_INVARIANT },
        headline,
        summary: to_value(&summary)?,
        tables: vec![("fdr_check.csv".into(), table)],
    })
}

// ------------------------------------------------------------- heat-current

#[derive(Debug, Serialize)]
struct SingleBath {
    p_h: f64,
    power_scale: f64,
    relative: f64,
}

#[derive(Debug, Serialize)]
struct HeatSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<TransportReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_bath: Option<SingleBath>,
}

fn heat(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let m = cfg.resolve()?;
    if m.sys.dim() == 1 {
        let p_h = single_bath_balance(&m.sys, &m.baths[0], &m.opts).map_err(|e| Failure::from_engine(e, true))?;
        let scale = transport::power_scale(&m.sys, &m.baths);
        let single = SingleBath {
            p_h,
            power_scale: scale,
            relative: if scale > 0.0 { p_h / scale } else { p_h },
        };
        let mut table = Table::new(&["p_h", "power_scale", "relative"]);
        table.push([single.p_h, single.power_scale, single.relative].map(float).to_vec());
        let summary = HeatSummary {
            command: Command::HeatCurrent.name(),
            config: cfg,
            report: None,
            single_bath: Some(single),
        };
        return Ok(Outcome {
            code: EXIT_OK,
            headline: format!("single bath: P_H = {p_h:e} (scale {scale:e})"),
            summary: to_value(&summary)?,
            tables: vec![("heat_current.csv".into(), table)],
        });
    }
    let r = heat_current(&m.sys, &m.baths, &m.opts).map_err(|e| Failure::from_engine(e, true))?;
    let mut table = Table::new(&[
        "heat_current_j",
        "j_bracket",
        "j_transmission",
        "j_error",
        "conservation_defect",
        "tolerance",
        "power_scale",
        "net_11",
        "net_12",
        "net_21",
        "net_22",
        "panels",
        "evaluations",
        "converged",
    ]);
    let mut row: Vec<String> = [
        r.heat_current_j,
        r.j_bracket,
        r.j_transmission,
        r.j_error,
        r.conservation_defect,
        r.tolerance,
        r.power_scale,
        r.net[0][0],
        r.net[0][1],
        r.net[1][0],
        r.net[1][1],
    ]
    .map(float)
    .to_vec();
    row.push(r.grid_meta.panels.to_string());
    row.push(r.grid_meta.evaluations.to_string());
    row.push(r.grid_meta.converged.to_string());
    table.push(row);
    let headline = format!("J = {} (error {:e})", float(r.heat_current_j), r.j_error);
    let summary = HeatSummary {
        command: Command::HeatCurrent.name(),
        config: cfg,
        report: Some(r),
        single_bath: None,
    };
    Ok(Outcome {
        code: EXIT_OK,
        headline,
        summary: to_value(&summary)?,
        tables: vec![("heat_current.csv".into(), table)],
    })
}

// -------------------------------------------------------------------- sweep

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    parameter: &'a str,
    values: Vec<f64>,
    failed: usize,
    rows: Vec<SweepRow>,
}

fn sweep_point(base: &RunConfig, parameter: &str, index: usize, value: f64) -> SweepRow {
    let run = || -> Result<SweepRow, Failure> {
        let cfg = sweep::apply(base, parameter, value)?;
        let m = cfg.resolve()?;
        if m.sys.dim() != 2 {
            return Err(Failure::usage("sweep needs a two-oscillator chain"));
        }
        let r = heat_current(&m.sys, &m.baths, &m.opts).map_err(|e| Failure::from_engine(e, true))?;
        let mut peak = (0.0, f64::NAN);
        for k in m.fdr_grid(&cfg.fdr) {
            let b = commutator_term(k, &m.sys, &m.baths)
                .map_err(|e| Failure::from_engine(e, false))?
                .norm();
            if b > peak.0 || peak.1.is_nan() {
                peak = (b, k);
            }
        }
        Ok(SweepRow {
            index,
            value,
            status: "ok".into(),
            exit_code: EXIT_OK,
            j: Some(r.heat_current_j),
            j_error: Some(r.j_error),
            bias_norm_peak: Some(peak.0),
            bias_peak_kappa: Some(peak.1),
            conservation_defect: Some(r.conservation_defect),
            message: None,
        })
    };
    run().unwrap_or_else(|f| SweepRow::failed(index, value, f))
}

fn run_sweep(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::usage("sweep: the config has no [sweep] table"))?;
    cfg.resolve()?;
    let values = sweep::sweep_values(spec)?;
    let parameter = spec.parameter.as_str();
    // Indexed parallel collect keeps sweep order.
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, v)| sweep_point(cfg, parameter, i, *v))
        .collect();

    let mut table = Table::new(&[
        "index",
        "parameter",
        "value",
        "status",
        "exit_code",
        "j",
        "j_error",
        "bias_norm_peak",
        "bias_peak_kappa",
        "conservation_defect",
        "message",
    ]);
    for r in &rows {
        table.push(vec![
            r.index.to_string(),
            parameter.to_string(),
            float(r.value),
            r.status.clone(),
            r.exit_code.to_string(),
            opt_float(r.j),
            opt_float(r.j_error),
            opt_float(r.bias_norm_peak),
            opt_float(r.bias_peak_kappa),
            opt_float(r.conservation_defect),
            r.message.clone().unwrap_or_default(),
        ]);
    }
    let failed = rows.iter().filter(|r| r.exit_code != EXIT_OK).count();
    let code = rows.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK);
    let summary = SweepSummary {
        command: Command::Sweep.name(),
        config: cfg,
        parameter,
        values,
        failed,
        rows,
    };
    Ok(Outcome {
        code,
        headline: format!("{} points over `{parameter}`, {failed} failed", summary.rows.len()),
        summary: to_value(&summary)?,
        tables: vec![("sweep.csv".into(), table)],
    })
}

// -------------------------------------------------------------------- relax

#[derive(Debug, Serialize)]
struct ThinTrace {
    times: Vec<f64>,
    p_xi: Vec<Vec<Vec<f64>>>,
    p_gamma: Vec<Vec<Vec<f64>>>,
    p_h: Vec<Vec<Vec<f64>>>,
    energy: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct RelaxSummary<'a> {
    command: &'static str,
    config: &'a RunConfig,
    t_max: f64,
    dt: f64,
    steps: usize,
    final_time: f64,
    late_time: Option<f64>,
    noise_cutoffs: Vec<f64>,
    power_scale: f64,
    max_energy_defect: f64,
    final_p_xi: Vec<Vec<f64>>,
    final_p_gamma: Vec<Vec<f64>>,
    final_p_h: Vec<Vec<f64>>,
    final_trace_p_h: f64,
    final_trace_p_h_relative: f64,
    /// Late-time `P_H[1][1]`, the current out of bath 1 (two baths only).
    final_current: Option<f64>,
    frequency_domain_current: Option<f64>,
    relative_agreement: Option<f64>,
    hybrid_reference_current: Option<f64>,
    decay_fit_window: [f64; 2],
    decay_rate_fit: Option<f64>,
    /// `2 · min γ`.
    reference_decay_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<ThinTrace>,
}

fn kept_indices(len: usize, every: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(every).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

fn trace_table(tr: &RelaxationTrace, keep: &[usize]) -> Table {
    let mut t = Table::new(&["time", "quantity", "row", "col", "value"]);
    let n = tr.oscillator_energy_t.first().map_or(0, |e| e.len());
    for &s in keep {
        let time = float(tr.times[s]);
        for (name, mats) in [("p_xi", &tr.p_xi_t), ("p_gamma", &tr.p_gamma_t), ("p_h", &tr.p_h_t)] {
            for i in 0..n {
                for j in 0..n {
                    t.push(vec![
                        time.clone(),
                        name.into(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        float(mats[s][i][j]),
                    ]);
                }
            }
        }
        for i in 0..n {
            t.push(vec![
                time.clone(),
                "energy".into(),
                (i + 1).to_string(),
                (i + 1).to_string(),
                float(tr.oscillator_energy_t[s][i]),
            ]);
        }
        t.push(vec![time, "energy_total".into(), String::new(), String::new(), float(tr.energy_t[s])]);
    }
    t
}

fn relax(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let m = cfg.resolve()?;
    let td = &cfg.timedomain;
    let late = m.late_time();
    let t_max = td.t_max.or(late).expect("validated: t_max or damping present");
    let cutoffs = timedomain::noise_cutoffs(&m.sys, &m.baths);
    let dt = td.dt.unwrap_or_else(|| timedomain::max_time_step(&m.sys, &cutoffs));
    let state = m.initial_state(td);
    let tr = transient_powers(t_max, dt, &m.sys, &m.baths, &state).map_err(|e| Failure::from_engine(e, false))?;

    let last = tr.times.len() - 1;
    let tr_p_h = tr.trace_p_h();
    let final_trace = tr_p_h[last];
    let (final_current, freq) = if m.sys.dim() == 2 {
        let r = heat_current(&m.sys, &m.baths, &m.opts).map_err(|e| Failure::from_engine(e, true))?;
        (Some(tr.final_current()), Some(r.heat_current_j))
    } else {
        (None, None)
    };
    let relative_agreement = match (final_current, freq) {
        (Some(a), Some(b)) if b != 0.0 => Some((a - b).abs() / b.abs()),
        _ => None,
    };
    let gmin = m.sys.min_damping();
    let window = match gmin {
        Some(g) => [1.0 / g, (10.0 / g).min(tr.times[last])],
        None => [0.0, tr.times[last]],
    };
    let decay_rate_fit = envelope_decay_rate(&tr.times, &tr_p_h, window[0], window[1]);
    let keep = kept_indices(tr.times.len(), td.record_every);
    let thin = |v: &Vec<Vec<Vec<f64>>>| keep.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
    let trace = rows_if_json_only(cfg, ()).map(|_| ThinTrace {
        times: keep.iter().map(|&i| tr.times[i]).collect(),
        p_xi: thin(&tr.p_xi_t),
        p_gamma: thin(&tr.p_gamma_t),
        p_h: thin(&tr.p_h_t),
        energy: keep.iter().map(|&i| tr.energy_t[i]).collect(),
    });
    let headline = match (final_current, freq) {
        (Some(a), Some(b)) => format!(
            "t = {}: late current {} vs frequency domain {} (relative gap {:e})",
            tr.times[last],
            float(a),
            float(b),
            relative_agreement.unwrap_or(f64::NAN)
        ),
        _ => format!(
            "t = {}: tr P_H = {final_trace:e}, decay rate {}",
            tr.times[last],
            decay_rate_fit.map_or("n/a".into(), |r| r.to_string())
        ),
    };
    let table = trace_table(&tr, &keep);
    let summary = RelaxSummary {
        command: Command::Relax.name(),
        config: cfg,
        t_max,
        dt,
        steps: last,
        final_time: tr.times[last],
        late_time: late,
        noise_cutoffs: tr.noise_cutoffs.clone(),
        power_scale: tr.power_scale,
        max_energy_defect: tr.max_energy_defect,
        final_p_xi: tr.p_xi_t[last].clone(),
        final_p_gamma: tr.p_gamma_t[last].clone(),
        final_p_h: tr.p_h_t[last].clone(),
        final_trace_p_h: final_trace,
        final_trace_p_h_relative: if tr.power_scale > 0.0 { final_trace / tr.power_scale } else { final_trace },
        final_current,
        frequency_domain_current: freq,
        relative_agreement,
        hybrid_reference_current: tr.hybrid_reference_current,
        decay_fit_window: window,
        decay_rate_fit,
        reference_decay_rate: gmin.map(|g| 2.0 * g),
        trace,
    };
    Ok(Outcome {
        code: EXIT_OK,
        headline,
        summary: to_value(&summary)?,
        tables: vec![("relax_trace.csv".into(), table)],
    })
}
