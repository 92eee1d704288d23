//! Fluctuation–dissipation structure of the noise kernel.
//!
//! With distinct bath temperatures the noise kernel of the chain is not
//! `coth · Im G_R` for any single temperature. Writing `F = diag(coth(β_i κ/2))`
//! it decomposes exactly as
//!
//! ```text
//! G_H = F · Im G_R  +  [G_R, F] · G_R⁻¹ · Im G_R
//! ```
//!
//! and for two oscillators the commutator collapses to
//! `[G_R, F] = −(F₁ − F₂) · [G_R]₁₂ · J` with `J = [[0, 1], [−1, 0]]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::greens::{self, frobenius, im_part, CMatrix};
use crate::network::SystemMatrices;
use crate::spectral::{thermal_factor, BathSpec};

/// Agreement required between the direct and closed-form commutators,
/// relative to `‖G_R‖ · ‖F‖`.
pub const COMMUTATOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalMatrix {
    pub kappa: f64,
    pub f_matrix: DMatrix<f64>,
    /// Elementwise principal square root; imaginary for `κ < 0`.
    pub f_sqrt: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrDecomposition {
    pub kappa: f64,
    pub conventional: CMatrix,
    pub bias: CMatrix,
    pub direct_hadamard: CMatrix,
    /// `‖conventional + bias − direct‖_F / ‖direct‖_F`.
    pub residual: f64,
}

pub fn thermal_matrix(kappa: f64, baths: &[BathSpec]) -> Result<ThermalMatrix> {
    let f = baths
        .iter()
        .map(|b| thermal_factor(kappa, b.beta))
        .collect::<Result<Vec<_>>>()?;
    let f_matrix = DMatrix::from_diagonal(&f.clone().into());
    let roots: Vec<Complex64> = f.iter().map(|x| Complex64::new(*x, 0.0).sqrt()).collect();
    let f_sqrt = CMatrix::from_diagonal(&roots.into());
    Ok(ThermalMatrix {
        kappa,
        f_matrix,
        f_sqrt,
    })
}

/// `[G, F]` for diagonal `F`: entry `(i, j)` is `G_ij (F_j − F_i)`.
fn commutator_direct(g: &CMatrix, f: &[f64]) -> CMatrix {
    let fm = CMatrix::from_diagonal(&f.iter().map(|x| Complex64::new(*x, 0.0)).collect::<Vec<_>>().into());
    g * &fm - &fm * g
}

fn j_matrix() -> CMatrix {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[zero, one, -one, zero])
}

fn commutator_closed_form(g: &CMatrix, f: &[f64]) -> CMatrix {
    j_matrix() * (-(f[0] - f[1]) * g[(0, 1)])
}

fn require_pair(sys: &SystemMatrices) -> Result<()> {
    if sys.dim() != 2 {
        return Err(Error::UnsupportedDimension { n: sys.dim() });
    }
    Ok(())
}

fn bias_from(g: &CMatrix, f: &[f64], kappa: f64) -> Result<CMatrix> {
    let direct = commutator_direct(g, f);
    let closed = commutator_closed_form(g, f);
    let scale = frobenius(g) * f.iter().map(|x| x * x).sum::<f64>().sqrt();
    let gap = frobenius(&(&direct - &closed));
    if gap > COMMUTATOR_TOL * scale {
        return Err(Error::ConsistencyFailure(format!(
            "commutator closed form disagrees at kappa = {kappa}: {gap:e} vs scale {scale:e}"
        )));
    }
    let inv = greens::invert(g, kappa)?;
    let img = im_part(g).map(|x| Complex64::new(x, 0.0));
    Ok(direct * inv * img)
}

/// The bias term `[G_R, F] · G_R⁻¹ · Im G_R` of a two-oscillator chain.
pub fn commutator_term(kappa: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> Result<CMatrix> {
    require_pair(sys)?;
    let thermal = thermal_matrix(kappa, baths)?;
    let g = greens::retarded_matrix(kappa, sys, baths)?;
    bias_from(&g, thermal.f_matrix.diagonal().as_slice(), kappa)
}

pub fn fdr_decompose(kappa: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> Result<FdrDecomposition> {
    require_pair(sys)?;
    let thermal = thermal_matrix(kappa, baths)?;
    let f = thermal.f_matrix.diagonal();
    let g = greens::retarded_matrix(kappa, sys, baths)?;
    let img = im_part(&g);
    let conventional = (&thermal.f_matrix * &img).map(|x| Complex64::new(x, 0.0));
    let bias = bias_from(&g, f.as_slice(), kappa)?;
    let direct_hadamard = greens::noise_matrix(kappa, sys, baths)?;
    let diff = frobenius(&(&conventional + &bias - &direct_hadamard));
    let scale = frobenius(&direct_hadamard);
    Ok(FdrDecomposition {
        kappa,
        conventional,
        bias,
        direct_hadamard,
        residual: if scale > 0.0 { diff / scale } else { diff },
    })
}

/// Relative gap between `G_H` and `coth(βκ/2) · Im G_R` for one oscillator
/// against one bath.
pub fn equilibrium_fdr_residual(kappa: f64, sys: &SystemMatrices, bath: &BathSpec) -> Result<f64> {
    if sys.dim() != 1 {
        return Err(Error::UnsupportedDimension { n: sys.dim() });
    }
    let coth = thermal_factor(kappa, bath.beta)?;
    let baths = [*bath];
    let g = greens::retarded_matrix(kappa, sys, &baths)?;
    let h = greens::noise_matrix(kappa, sys, &baths)?[(0, 0)];
    let fdr = coth * g[(0, 0)].im;
    let diff = (h - Complex64::new(fdr, 0.0)).norm();
    let scale = h.norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}
