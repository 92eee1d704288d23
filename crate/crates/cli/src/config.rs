//! Run configuration: parsing, defaults, validation and resolution into
//! engine inputs.
//!
//! Units are those of the engine (`ħ = k_B = 1`): frequencies, damping rates,
//! cutoffs and temperatures share one energy unit, `sigma` is a frequency²
//! and times are inverse frequencies.

use std::path::Path;

use nessfdr::quadrature::QuadratureOptions;
use nessfdr::timedomain::{self, InitialState};
use nessfdr::{build_matrices, BathSpec, ChainParams, SystemMatrices};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chain: ChainSection,
    #[serde(rename = "bath")]
    pub baths: Vec<BathSection>,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub fdr: FdrSection,
    #[serde(default)]
    pub timedomain: TimeSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Reserved for stochastic modes; carried through to the outputs.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    #[serde(default = "one")]
    pub mass: f64,
    /// Renormalised frequencies, one per oscillator (one or two entries).
    pub omega: Vec<f64>,
    /// Nearest-neighbour coupling, entered in the frequency matrix.
    #[serde(default)]
    pub sigma: f64,
}

/// One bath. Exactly one of `gamma` (damping rate) or `coupling_e` is given;
/// `temperature = 0` is the zero-temperature bath and a missing `cutoff`
/// is the strict Ohmic limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_tol_abs")]
    pub tol_abs: f64,
    #[serde(default = "default_tol_rel")]
    pub tol_rel: f64,
    /// Integrand evaluation budget.
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
}

/// Frequency samples for `fdr-check`. Either an explicit list of positive
/// frequencies or `points` evenly spaced values in `(0, kappa_max]`; each
/// sample is mirrored to `-κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdrSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
    /// Defaults to four times the highest normal mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Ground,
    Thermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Defaults to `20 / min γ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Defaults to the largest admissible step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_initial")]
    pub initial_state: InitialKind,
    /// Temperature of the decoupled thermal initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_p: Option<Vec<f64>>,
    /// Keep every n-th step in the emitted trace (the last step is always kept).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_format")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// Sweep over one parameter. `values` wins over a `start`/`stop`/`count` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default = "default_scale")]
    pub scale: Scale,
}

fn one() -> f64 {
    1.0
}
fn default_tol_abs() -> f64 {
    QuadratureOptions::default().tol_abs
}
fn default_tol_rel() -> f64 {
    QuadratureOptions::default().tol_rel
}
fn default_max_evals() -> usize {
    QuadratureOptions::default().max_evals
}
fn default_points() -> usize {
    200
}
fn default_initial() -> InitialKind {
    InitialKind::Ground
}
fn default_record_every() -> usize {
    10
}
fn default_dir() -> String {
    "out".to_string()
}
fn default_format() -> Format {
    Format::Both
}
fn default_scale() -> Scale {
    Scale::Linear
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection {
            tol_abs: default_tol_abs(),
            tol_rel: default_tol_rel(),
            max_evals: default_max_evals(),
        }
    }
}

impl Default for FdrSection {
    fn default() -> Self {
        FdrSection {
            kappa: None,
            kappa_max: None,
            points: default_points(),
        }
    }
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            t_max: None,
            dt: None,
            initial_state: default_initial(),
            initial_temperature: None,
            mean_x: None,
            mean_p: None,
            record_every: default_record_every(),
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            format: default_format(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<String>,
    pub format: Option<Format>,
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
}

impl RunConfig {
    /// Reads TOML, or JSON when the file ends in `.json`. A JSON object with a
    /// `config` member (an emitted summary) is read through that member.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Self::from_json_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
        } else {
            Self::from_toml_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_json_str(text: &str) -> Result<Self, String> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let inner = match value.get("config") {
            Some(c) => c.clone(),
            None => value,
        };
        serde_json::from_value(inner).map_err(|e| format!("in config: {e}"))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        if let Some(t) = o.tol_abs {
            self.quadrature.tol_abs = t;
        }
        if let Some(t) = o.tol_rel {
            self.quadrature.tol_rel = t;
        }
    }

    pub fn quadrature_options(&self) -> QuadratureOptions {
        QuadratureOptions {
            tol_abs: self.quadrature.tol_abs,
            tol_rel: self.quadrature.tol_rel,
            max_evals: self.quadrature.max_evals,
        }
    }

    /// Checks every field and builds the engine inputs.
    pub fn resolve(&self) -> Result<Model, Failure> {
        let n = self.chain.omega.len();
        if n != 1 && n != 2 {
            return Err(Failure::usage(format!("chain.omega: expected 1 or 2 frequencies, got {n}")));
        }
        if self.baths.len() != n {
            return Err(Failure::usage(format!(
                "bath: expected {n} [[bath]] tables (one per oscillator), got {}",
                self.baths.len()
            )));
        }
        let mass = self.chain.mass;
        let baths = self
            .baths
            .iter()
            .enumerate()
            .map(|(i, b)| b.to_spec(mass, i + 1))
            .collect::<Result<Vec<_>, Failure>>()?;
        let sys = if n == 1 {
            if self.chain.sigma != 0.0 {
                return Err(Failure::usage("chain.sigma: a single oscillator has no coupling; omit it"));
            }
            SystemMatrices::single(mass, self.chain.omega[0], &baths[0])
        } else {
            let params = ChainParams::pair(
                mass,
                [self.chain.omega[0], self.chain.omega[1]],
                self.chain.sigma,
                baths[0],
                baths[1],
            );
            build_matrices(&params)
        }
        .map_err(|e| Failure::from_engine(e, false))?;

        let opts = self.quadrature_options();
        opts.validate().map_err(|e| Failure::from_engine(e, false).context("quadrature"))?;
        self.check_fdr()?;
        self.check_time(&sys)?;
        if self.timedomain.record_every == 0 {
            return Err(Failure::usage("timedomain.record_every: must be >= 1"));
        }
        if self.output.dir.is_empty() {
            return Err(Failure::usage("output.dir: must not be empty"));
        }
        if let Some(sweep) = &self.sweep {
            crate::sweep::sweep_values(sweep)?;
        }
        Ok(Model { sys, baths, opts })
    }

    fn check_fdr(&self) -> Result<(), Failure> {
        let f = &self.fdr;
        if let Some(list) = &f.kappa {
            if list.is_empty() {
                return Err(Failure::usage("fdr.kappa: list is empty"));
            }
            if let Some(k) = list.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
                return Err(Failure::usage(format!("fdr.kappa: entries must be finite and > 0, got {k}")));
            }
        } else if f.points == 0 {
            return Err(Failure::usage("fdr.points: must be >= 1"));
        }
        if let Some(k) = f.kappa_max {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Failure::usage(format!("fdr.kappa_max: must be finite and > 0, got {k}")));
            }
        }
        Ok(())
    }

    fn check_time(&self, sys: &SystemMatrices) -> Result<(), Failure> {
        let t = &self.timedomain;
        let n = sys.dim();
        for (name, v) in [("t_max", t.t_max), ("dt", t.dt)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Failure::usage(format!("timedomain.{name}: must be finite and > 0, got {v}")));
                }
            }
        }
        if let Some(temp) = t.initial_temperature {
            if !(temp >= 0.0 && temp.is_finite()) {
                return Err(Failure::usage(format!(
                    "timedomain.initial_temperature: must be finite and >= 0, got {temp}"
                )));
            }
        }
        if t.initial_state == InitialKind::Thermal && t.initial_temperature.is_none() {
            return Err(Failure::usage(
                "timedomain.initial_temperature: required when initial_state = \"thermal\"",
            ));
        }
        for (name, v) in [("mean_x", &t.mean_x), ("mean_p", &t.mean_p)] {
            if let Some(v) = v {
                if v.len() != n || v.iter().any(|x| !x.is_finite()) {
                    return Err(Failure::usage(format!("timedomain.{name}: expected {n} finite values")));
                }
            }
        }
        if t.t_max.is_none() && sys.min_damping().is_none() {
            return Err(Failure::usage("timedomain.t_max: required when no oscillator is damped"));
        }
        Ok(())
    }
}

impl BathSection {
    fn to_spec(&self, mass: f64, label: usize) -> Result<BathSpec, Failure> {
        let ctx = |field: &str| format!("bath[{}].{field}", label - 1);
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Failure::usage(format!(
                "{}: must be finite and >= 0, got {}",
                ctx("temperature"),
                self.temperature
            )));
        }
        let beta = if self.temperature == 0.0 { f64::INFINITY } else { 1.0 / self.temperature };
        let cutoff = match self.cutoff {
            None => f64::INFINITY,
            Some(c) if c > 0.0 && c.is_finite() => c,
            Some(c) => return Err(Failure::usage(format!("{}: must be finite and > 0, got {c}", ctx("cutoff")))),
        };
        let built = match (self.gamma, self.coupling_e) {
            (Some(g), None) => BathSpec::from_damping(g, mass, beta, cutoff, label),
            (None, Some(e)) => BathSpec::new(beta, e, cutoff, label),
            _ => {
                return Err(Failure::usage(format!(
                    "{}: give exactly one of `gamma` or `coupling_e`",
                    ctx("gamma")
                )))
            }
        };
        built.map_err(|e| Failure::from_engine(e, false).context(&format!("bath[{}]", label - 1)))
    }
}

/// Validated engine inputs.
#[derive(Debug, Clone)]
pub struct Model {
    pub sys: SystemMatrices,
    pub baths: Vec<BathSpec>,
    pub opts: QuadratureOptions,
}

impl Model {
    pub fn initial_state(&self, t: &TimeSection) -> InitialState {
        let mut state = match t.initial_state {
            InitialKind::Ground => InitialState::ground_state(&self.sys),
            InitialKind::Thermal => {
                let temp = t.initial_temperature.unwrap_or(0.0);
                if temp == 0.0 {
                    InitialState::ground_state(&self.sys)
                } else {
                    InitialState::thermal(&self.sys, 1.0 / temp)
                }
            }
        };
        if let Some(x) = &t.mean_x {
            state.mean_x = x.clone();
        }
        if let Some(p) = &t.mean_p {
            state.mean_p = p.clone();
        }
        state
    }

    pub fn late_time(&self) -> Option<f64> {
        self.sys.min_damping().map(|g| timedomain::LATE_TIME_FACTOR / g)
    }

    /// Positive frequency samples for `fdr-check`.
    pub fn fdr_grid(&self, f: &FdrSection) -> Vec<f64> {
        if let Some(list) = &f.kappa {
            return list.clone();
        }
        let top = self.sys.normal_modes().into_iter().fold(0.0, f64::max);
        let kmax = f.kappa_max.unwrap_or(4.0 * top);
        (1..=f.points).map(|j| kmax * j as f64 / f.points as f64).collect()
    }
}
