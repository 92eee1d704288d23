//! Retarded and noise (Hadamard) kernels of the coupled oscillators in the
//! frequency domain.
//!
//! The dressed kernel is `K(κ) = Ω² − κ² I − 2iκ Γ D(κ)` with `D` the per-bath
//! Drude profile, and the retarded matrix is `G_R = K⁻¹ / m`. The late-time
//! noise kernel is `G_H = G_R · C G_H0 C · G_R†`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::SystemMatrices;
use crate::spectral::{cutoff_profile, hadamard_free, im_retarded_free, BathSpec};

pub type CMatrix = DMatrix<Complex64>;

/// Kernels at one frequency. `hadamard` is only filled when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub kappa: f64,
    pub retarded: CMatrix,
    pub hadamard: Option<CMatrix>,
}

pub(crate) fn check_baths(sys: &SystemMatrices, baths: &[BathSpec]) -> Result<()> {
    if baths.len() != sys.dim() {
        return Err(Error::invalid(
            "baths",
            format!("expected {} baths, got {}", sys.dim(), baths.len()),
        ));
    }
    for (i, b) in baths.iter().enumerate() {
        b.validate()?;
        let c = sys.coupling_c[(i, i)];
        if (c - b.coupling_e).abs() > 1e-12 * c.abs().max(b.coupling_e.abs()) {
            return Err(Error::invalid(
                "baths",
                format!("bath {i} has coupling {} but the system matrices were built with {c}", b.coupling_e),
            ));
        }
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("kappa", format!("must be finite, got {kappa}")))
    }
}

/// `Ω² − κ² I − 2iκ Γ D(κ)`.
pub fn dressed_kernel(kappa: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> CMatrix {
    let n = sys.dim();
    let mut k = sys.omega2.map(|x| Complex64::new(x, 0.0));
    for i in 0..n {
        let damping = sys.gamma[(i, i)] * cutoff_profile(kappa, baths[i].cutoff);
        k[(i, i)] -= Complex64::new(kappa * kappa, 2.0 * kappa * damping);
    }
    k
}

pub(crate) fn invert(k: &CMatrix, kappa: f64) -> Result<CMatrix> {
    let singular = Error::SingularMatrix { kappa };
    let inv = match k.nrows() {
        1 => {
            let d = k[(0, 0)];
            if d == Complex64::new(0.0, 0.0) {
                return Err(singular);
            }
            CMatrix::from_element(1, 1, d.inv())
        }
        2 => {
            let det = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
            if det == Complex64::new(0.0, 0.0) {
                return Err(singular);
            }
            CMatrix::from_row_slice(2, 2, &[k[(1, 1)], -k[(0, 1)], -k[(1, 0)], k[(0, 0)]]) / det
        }
        _ => k.clone().lu().try_inverse().ok_or(singular)?,
    };
    if inv.iter().any(|z| !z.is_finite()) {
        return Err(Error::SingularMatrix { kappa });
    }
    Ok(inv)
}

fn retarded_unchecked(kappa: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> Result<CMatrix> {
    let inv = invert(&dressed_kernel(kappa, sys, baths), kappa)?;
    Ok(inv / Complex64::new(sys.mass, 0.0))
}

/// `C G_H0 C`: diagonal, real, even in `κ`.
pub(crate) fn bath_noise_diag(kappa: f64, baths: &[BathSpec]) -> Vec<f64> {
    baths
        .iter()
        .map(|b| b.coupling_e * b.coupling_e * hadamard_free(kappa, b))
        .collect()
}

/// `C Im G_R0 C`: diagonal, real, odd in `κ`.
pub(crate) fn bath_dissipation_diag(kappa: f64, baths: &[BathSpec]) -> Vec<f64> {
    baths
        .iter()
        .map(|b| b.coupling_e * b.coupling_e * im_retarded_free(kappa, b))
        .collect()
}

/// `G · diag(d) · G†`.
pub(crate) fn sandwich(g: &CMatrix, d: &[f64]) -> CMatrix {
    let mut gd = g.clone();
    for (j, dj) in d.iter().enumerate() {
        gd.column_mut(j).scale_mut(*dj);
    }
    gd * g.adjoint()
}

pub(crate) fn noise_from_retarded(g: &CMatrix, kappa: f64, baths: &[BathSpec]) -> CMatrix {
    sandwich(g, &bath_noise_diag(kappa, baths))
}

pub fn retarded_matrix(kappa: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> Result<CMatrix> {
    check_kappa(kappa)?;
    check_baths(sys, baths)?;
    retarded_unchecked(kappa, sys, baths)
}

pub fn noise_matrix(kappa: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> Result<CMatrix> {
    let g = retarded_matrix(kappa, sys, baths)?;
    Ok(noise_from_retarded(&g, kappa, baths))
}

pub fn spectral_sample(
    kappa: f64,
    sys: &SystemMatrices,
    baths: &[BathSpec],
    with_hadamard: bool,
) -> Result<SpectralSample> {
    let retarded = retarded_matrix(kappa, sys, baths)?;
    let hadamard = with_hadamard.then(|| noise_from_retarded(&retarded, kappa, baths));
    Ok(SpectralSample {
        kappa,
        retarded,
        hadamard,
    })
}

/// Elementwise imaginary part. For the symmetric `G_R` this is the
/// anti-Hermitian part `(G − G†) / 2i`.
pub fn im_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.im)
}

pub fn re_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub(crate) fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative Frobenius residual of `Im G_R = G_R(κ) · C Im G_R0 C · G_R(−κ)`,
/// with `G_R(−κ)` evaluated independently. Falls back to the absolute
/// residual when `Im G_R` vanishes.
pub fn im_identity_residual(kappa: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> Result<f64> {
    let plus = retarded_matrix(kappa, sys, baths)?;
    let minus = retarded_unchecked(-kappa, sys, baths)?;
    let d = bath_dissipation_diag(kappa, baths);
    let mut rhs = plus.clone();
    for (j, dj) in d.iter().enumerate() {
        rhs.column_mut(j).scale_mut(*dj);
    }
    let rhs = rhs * minus;
    let lhs = im_part(&plus).map(|x| Complex64::new(x, 0.0));
    let residual = frobenius(&(&lhs - rhs));
    let scale = frobenius(&lhs);
    Ok(if scale > 0.0 { residual / scale } else { residual })
}
