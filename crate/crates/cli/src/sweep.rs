//! One-parameter sweeps over a base configuration.

use serde::Serialize;

use crate::config::{RunConfig, Scale, SweepSection};
use crate::Failure;

pub const PARAMETERS: [&str; 5] = ["sigma", "delta_T", "gamma1", "gamma2", "lambda"];

pub fn check_parameter(name: &str) -> Result<(), Failure> {
    if PARAMETERS.contains(&name) {
        Ok(())
    } else {
        Err(Failure::usage(format!(
            "sweep.parameter: unknown parameter `{name}`; expected one of {}",
            PARAMETERS.join(", ")
        )))
    }
}

/// The sweep points in order.
pub fn sweep_values(s: &SweepSection) -> Result<Vec<f64>, Failure> {
    check_parameter(&s.parameter)?;
    let values = match (&s.values, s.start, s.stop, s.count) {
        (Some(v), _, _, _) => v.clone(),
        (None, Some(a), Some(b), Some(n)) => range(a, b, n, s.scale)?,
        _ => {
            return Err(Failure::usage(
                "sweep: give `values` or all of `start`, `stop` and `count`",
            ))
        }
    };
    if values.is_empty() {
        return Err(Failure::usage("sweep.values: no sweep points"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Failure::usage(format!("sweep.values: must be finite, got {v}")));
    }
    Ok(values)
}

fn range(a: f64, b: f64, n: usize, scale: Scale) -> Result<Vec<f64>, Failure> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Failure::usage("sweep.start/stop: must be finite"));
    }
    if n == 0 {
        return Err(Failure::usage("sweep.count: must be >= 1"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let t = |j: usize| j as f64 / (n - 1) as f64;
    Ok(match scale {
        Scale::Linear => (0..n).map(|j| if j == n - 1 { b } else { a + (b - a) * t(j) }).collect(),
        Scale::Log => {
            if !(a > 0.0 && b > 0.0) {
                return Err(Failure::usage("sweep.start/stop: a log range needs positive endpoints"));
            }
            let (la, lb) = (a.ln(), b.ln());
            (0..n)
                .map(|j| match j {
                    0 => a,
                    _ if j == n - 1 => b,
                    _ => (la + (lb - la) * t(j)).exp(),
                })
                .collect()
        }
    })
}

/// `base` with the swept parameter set to `value`. `delta_T` raises the
/// first bath's temperature above the second's: `T₁ = T₂ + value`.
pub fn apply(base: &RunConfig, parameter: &str, value: f64) -> Result<RunConfig, Failure> {
    check_parameter(parameter)?;
    let mut c = base.clone();
    c.sweep = None;
    let need_pair = |c: &RunConfig| {
        if c.baths.len() == 2 {
            Ok(())
        } else {
            Err(Failure::usage(format!("sweep over `{parameter}` needs two baths")))
        }
    };
    match parameter {
        "sigma" => c.chain.sigma = value,
        "delta_T" => {
            need_pair(&c)?;
            c.baths[0].temperature = c.baths[1].temperature + value;
        }
        "gamma1" | "gamma2" => {
            let i = if parameter == "gamma1" { 0 } else { 1 };
            if i >= c.baths.len() {
                return Err(Failure::usage(format!("sweep over `{parameter}` needs two baths")));
            }
            c.baths[i].gamma = Some(value);
            c.baths[i].coupling_e = None;
        }
        "lambda" => {
            for b in &mut c.baths {
                b.cutoff = Some(value);
            }
        }
        _ => unreachable!(),
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub status: String,
    pub exit_code: i32,
    pub j: Option<f64>,
    pub j_error: Option<f64>,
    /// Largest `‖bias‖_F` over the `fdr` frequency samples.
    pub bias_norm_peak: Option<f64>,
    pub bias_peak_kappa: Option<f64>,
    pub conservation_defect: Option<f64>,
    pub message: Option<String>,
}

impl SweepRow {
    pub fn failed(index: usize, value: f64, f: Failure) -> Self {
        SweepRow {
            index,
            value,
            status: "error".into(),
            exit_code: f.code,
            j: None,
            j_error: None,
            bias_norm_peak: None,
            bias_peak_kappa: None,
            conservation_defect: None,
            message: Some(f.message),
        }
    }
}
