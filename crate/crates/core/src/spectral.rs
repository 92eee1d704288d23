//! Free-bath kernels for an Ohmic scalar-field environment.
//!
//! Each private bath is characterised by an inverse temperature, a bilinear
//! coupling strength `e` and an optional Drude cutoff `Λ`. In units with
//! `ħ = k_B = 1` the dissipative part of the bath's retarded kernel is
//!
//! ```text
//! Im G_R0(κ) = κ / 4π · D(κ),        D(κ) = Λ² / (Λ² + κ²)
//! ```
//!
//! and the thermal noise kernel follows from it through the factor
//! `coth(βκ/2)`. The real (frequency-shifting) part of the self-energy is
//! absorbed into the renormalized oscillator frequencies and never appears.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `|βκ|` the thermal factor switches to its Laurent series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// One private bath.
///
/// `beta = f64::INFINITY` encodes zero temperature and
/// `cutoff = f64::INFINITY` the strict Ohmic limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub beta: f64,
    pub coupling_e: f64,
    pub cutoff: f64,
    pub label: usize,
}

impl BathSpec {
    pub fn new(beta: f64, coupling_e: f64, cutoff: f64, label: usize) -> Result<Self> {
        let bath = BathSpec {
            beta,
            coupling_e,
            cutoff,
            label,
        };
        bath.validate()?;
        Ok(bath)
    }

    /// Builds a bath from the damping rate it induces on an oscillator of
    /// mass `mass`, inverting `γ = e² / (8π m)`.
    pub fn from_damping(gamma: f64, mass: f64, beta: f64, cutoff: f64, label: usize) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid("mass", format!("must be finite and > 0, got {mass}")));
        }
        Self::new(beta, (8.0 * PI * mass * gamma).sqrt(), cutoff, label)
    }

    /// A bath with zero coupling, used for interior oscillators.
    pub fn null(label: usize) -> Self {
        BathSpec {
            beta: f64::INFINITY,
            coupling_e: 0.0,
            cutoff: f64::INFINITY,
            label,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(Error::invalid(
                "beta",
                format!("bath {}: must be > 0 or +inf, got {}", self.label, self.beta),
            ));
        }
        if self.cutoff.is_nan() || self.cutoff <= 0.0 {
            return Err(Error::invalid(
                "cutoff",
                format!("bath {}: must be > 0 or +inf, got {}", self.label, self.cutoff),
            ));
        }
        if !self.coupling_e.is_finite() {
            return Err(Error::invalid(
                "coupling_e",
                format!("bath {}: must be finite, got {}", self.label, self.coupling_e),
            ));
        }
        Ok(())
    }

    /// Damping rate `γ = e² / (8π m)` induced on an oscillator of mass `mass`.
    pub fn damping(&self, mass: f64) -> f64 {
        self.coupling_e * self.coupling_e / (8.0 * PI * mass)
    }

    pub fn temperature(&self) -> f64 {
        if self.beta.is_infinite() {
            0.0
        } else {
            1.0 / self.beta
        }
    }

    pub fn is_strict_ohmic(&self) -> bool {
        self.cutoff.is_infinite()
    }

    pub fn is_coupled(&self) -> bool {
        self.coupling_e != 0.0
    }
}

/// Drude profile `Λ² / (Λ² + κ²)`; identically one in the strict Ohmic limit.
pub fn cutoff_profile(kappa: f64, cutoff: f64) -> f64 {
    if cutoff.is_infinite() {
        1.0
    } else {
        let r = kappa / cutoff;
        1.0 / (1.0 + r * r)
    }
}

/// Dissipative part of the free bath's retarded kernel.
pub fn im_retarded_free(kappa: f64, bath: &BathSpec) -> f64 {
    kappa / (4.0 * PI) * cutoff_profile(kappa, bath.cutoff)
}

/// `coth(βκ/2)`. Odd in `κ`, with a pole at `κ = 0`.
pub fn thermal_factor(kappa: f64, beta: f64) -> Result<f64> {
    if kappa == 0.0 {
        return Err(Error::Domain("thermal factor has a pole at kappa = 0".into()));
    }
    if beta.is_infinite() {
        return Ok(kappa.signum());
    }
    let x = beta * kappa;
    if x.abs() < SERIES_THRESHOLD {
        Ok(2.0 / x + x / 6.0)
    } else {
        Ok(1.0 / (0.5 * x).tanh())
    }
}

/// `κ · coth(βκ/2)`, finite and even, equal to `2/β` at the origin.
pub(crate) fn kappa_coth(kappa: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        return kappa.abs();
    }
    let x = beta * kappa;
    if x.abs() < SERIES_THRESHOLD {
        2.0 / beta + beta * kappa * kappa / 6.0
    } else {
        kappa / (0.5 * x).tanh()
    }
}

/// Thermal noise kernel `coth(βκ/2) · Im G_R0(κ)` of the free bath, regular at
/// `κ = 0`.
pub fn hadamard_free(kappa: f64, bath: &BathSpec) -> f64 {
    kappa_coth(kappa, bath.beta) / (4.0 * PI) * cutoff_profile(kappa, bath.cutoff)
}
