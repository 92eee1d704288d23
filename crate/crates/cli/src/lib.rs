//! Config-driven runs of the `nessfdr` engine: FDR checks, steady heat
//! currents, parameter sweeps and transient relaxation, each writing
//! plot-ready CSV and a deterministic JSON summary.

// `!(x <= tol)` is used on purpose so that NaN fails a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use std::fmt;

pub use commands::{execute, Command, RunOutput};
pub use config::{Format, Overrides, RunConfig};

/// Exit codes shared by every subcommand.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Worker-pool size variable.
pub const WORKERS_ENV: &str = "NESSFDR_WORKERS";

/// A run-stopping error and the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVARIANT,
            message: message.into(),
        }
    }

    /// `triangle` marks a caller for which a consistency failure is the
    /// cross-check between quadrature routes rather than a physics invariant.
    pub fn from_engine(err: nessfdr::Error, triangle: bool) -> Self {
        use nessfdr::Error as E;
        let code = match &err {
            E::InvalidParameter { .. }
            | E::StabilityViolation(_)
            | E::UnsupportedDimension { .. }
            | E::UnsupportedMode(_)
            | E::Domain(_) => EXIT_USAGE,
            E::NonConvergence { .. } => EXIT_NUMERICAL,
            E::ConsistencyFailure(_) if triangle => EXIT_NUMERICAL,
            E::ConsistencyFailure(_) | E::SingularMatrix { .. } | E::Divergent(_) | E::StepTooCoarse { .. } => {
                EXIT_INVARIANT
            }
        };
        let mut message = err.to_string();
        if let E::StepTooCoarse { suggested_dt, .. } = err {
            message.push_str(&format!("\nhint: set `dt = {suggested_dt:e}` (or smaller) under [timedomain]"));
        }
        if let E::NonConvergence { .. } = err {
            message.push_str("\nhint: loosen tol_abs/tol_rel or raise quadrature.max_evals");
        }
        Failure { code, message }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

/// Sizes the global worker pool from `NESSFDR_WORKERS`, defaulting to the
/// available parallelism. Returns the pool size.
pub fn configure_workers() -> Result<usize, Failure> {
    let requested = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Failure::usage(format!("{WORKERS_ENV}: expected a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = requested {
        builder = builder.num_threads(n);
    }
    // A pool may already exist (tests, embedding); keep it.
    let _ = builder.build_global();
    Ok(rayon::current_num_threads())
}
