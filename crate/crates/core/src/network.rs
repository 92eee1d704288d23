//! Parameter matrices of the oscillator chain.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::BathSpec;

/// Physical parameters of a chain of `N >= 2` equal-mass oscillators.
///
/// `sigma[i]` couples oscillator `i` to `i + 1` and enters the frequency
/// matrix directly as an off-diagonal entry (units of frequency²). `baths`
/// carries one entry per oscillator; interior oscillators use
/// [`BathSpec::null`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub mass: f64,
    pub omega_r: Vec<f64>,
    pub sigma: Vec<f64>,
    pub baths: Vec<BathSpec>,
}

impl ChainParams {
    /// The two-oscillator chain, each end attached to its own bath.
    pub fn pair(mass: f64, omega_r: [f64; 2], sigma: f64, bath1: BathSpec, bath2: BathSpec) -> Self {
        ChainParams {
            mass,
            omega_r: omega_r.to_vec(),
            sigma: vec![sigma],
            baths: vec![bath1, bath2],
        }
    }

    pub fn len(&self) -> usize {
        self.omega_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_r.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.omega_r.len();
        if n < 2 {
            return Err(Error::invalid("omega_r", format!("a chain needs at least 2 oscillators, got {n}")));
        }
        if self.sigma.len() != n - 1 {
            return Err(Error::invalid(
                "sigma",
                format!("expected {} nearest-neighbour couplings, got {}", n - 1, self.sigma.len()),
            ));
        }
        if self.baths.len() != n {
            return Err(Error::invalid("baths", format!("expected {n} baths, got {}", self.baths.len())));
        }
        validate_oscillator(self.mass, &self.omega_r)?;
        if let Some(s) = self.sigma.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be finite, got {s}")));
        }
        for bath in &self.baths {
            bath.validate()?;
        }
        Ok(())
    }
}

fn validate_oscillator(mass: f64, omega_r: &[f64]) -> Result<()> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid("mass", format!("must be finite and > 0, got {mass}")));
    }
    if let Some(w) = omega_r.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::invalid("omega_r", format!("frequencies must be finite and > 0, got {w}")));
    }
    Ok(())
}

/// `Ω²` (real symmetric), the coupling matrix `C = diag(e_i)` and the
/// damping matrix `Γ = diag(e_i² / 8πm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub mass: f64,
    pub omega2: DMatrix<f64>,
    pub coupling_c: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn dim(&self) -> usize {
        self.omega2.nrows()
    }

    /// One oscillator against one bath.
    pub fn single(mass: f64, omega_r: f64, bath: &BathSpec) -> Result<Self> {
        validate_oscillator(mass, &[omega_r])?;
        bath.validate()?;
        Ok(SystemMatrices {
            mass,
            omega2: DMatrix::from_element(1, 1, omega_r * omega_r),
            coupling_c: DMatrix::from_element(1, 1, bath.coupling_e),
            gamma: DMatrix::from_element(1, 1, bath.damping(mass)),
        })
    }

    /// Normal-mode frequencies `sqrt(eig(Ω²))`, ascending.
    pub fn normal_modes(&self) -> Vec<f64> {
        let mut modes: Vec<f64> = SymmetricEigen::new(self.omega2.clone())
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .collect();
        modes.sort_by(f64::total_cmp);
        modes
    }

    pub fn max_damping(&self) -> f64 {
        self.gamma.diagonal().iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest nonzero damping rate, if any oscillator is damped.
    pub fn min_damping(&self) -> Option<f64> {
        self.gamma
            .diagonal()
            .iter()
            .cloned()
            .filter(|g| *g > 0.0)
            .min_by(f64::total_cmp)
    }

    pub fn max_frequency(&self) -> f64 {
        self.omega2.diagonal().iter().map(|w2| w2.sqrt()).fold(0.0, f64::max)
    }
}

pub fn build_matrices(params: &ChainParams) -> Result<SystemMatrices> {
    params.validate()?;
    let n = params.len();
    let mut omega2 = DMatrix::from_diagonal(&params.omega_r.iter().map(|w| w * w).collect::<Vec<_>>().into());
    for (i, s) in params.sigma.iter().enumerate() {
        omega2[(i, i + 1)] = *s;
        omega2[(i + 1, i)] = *s;
    }

    if n == 2 {
        let det = omega2[(0, 0)] * omega2[(1, 1)] - omega2[(0, 1)] * omega2[(0, 1)];
        if det <= 0.0 {
            return Err(Error::StabilityViolation(format!(
                "omega_1^2 * omega_2^2 = {} must exceed sigma^2 = {}",
                omega2[(0, 0)] * omega2[(1, 1)],
                omega2[(0, 1)] * omega2[(0, 1)]
            )));
        }
    } else if omega2.clone().cholesky().is_none() {
        return Err(Error::StabilityViolation("frequency matrix is not positive definite".into()));
    }

    let e: Vec<f64> = params.baths.iter().map(|b| b.coupling_e).collect();
    let g: Vec<f64> = params.baths.iter().map(|b| b.damping(params.mass)).collect();
    Ok(SystemMatrices {
        mass: params.mass,
        omega2,
        coupling_c: DMatrix::from_diagonal(&e.into()),
        gamma: DMatrix::from_diagonal(&g.into()),
    })
}
