//! Steady-state power matrices and the heat current between two baths.
//!
//! All integrands over `κ ∈ (−∞, ∞)` are assembled from their values at `±κ`
//! and integrated over `[κ_min, ∞)`. Three routes to the current are carried
//! on one shared panel set:
//!
//! * the sum `P_ξ + P_γ` of noise-injected and dissipated power,
//! * the factorised form `κ · C Im G_R0 C · [F Im G_R − G_H]`,
//! * the two-terminal transmission form
//!   `J = ∫ dκ/2π · κ (F₁ − F₂) · e₁² Im G_R0,1 · e₂² Im G_R0,2 · |[G_R]₁₂|²`.
//!
//! With a strictly Ohmic bath (`Λ = ∞`) each diagonal entry of `P_ξ` and `P_γ`
//! diverges logarithmically on its own; only the pointwise sum converges, so
//! the separate matrices are then reported as unavailable.

use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{self, im_part, re_part, CMatrix};
use crate::network::SystemMatrices;
use crate::quadrature::{integrate_vec, transport_breakpoints, Domain, GridSummary, QuadratureOptions};
use crate::spectral::{kappa_coth, thermal_factor, BathSpec};

/// Lower integration limit as a fraction of the largest bare frequency.
pub const KAPPA_MIN_FRACTION: f64 = 1e-6;

/// Largest tolerated imaginary remainder of an assembled power integrand,
/// relative to its real part.
const IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatrix {
    pub value: DMatrix<f64>,
    pub error: DMatrix<f64>,
    pub grid: GridSummary,
}

/// Steady-state energy flows of a two-bath chain.
///
/// Positive diagonal entries of `net` mean energy flows from that bath into
/// the chain; `heat_current_j = net[0][0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub p_xi: Option<Vec<Vec<f64>>>,
    pub p_gamma: Option<Vec<Vec<f64>>>,
    pub net: Vec<Vec<f64>>,
    pub net_bracket: Vec<Vec<f64>>,
    pub heat_current_j: f64,
    pub j_bracket: f64,
    pub j_transmission: f64,
    pub j_error: f64,
    pub conservation_defect: f64,
    pub tolerance: f64,
    pub power_scale: f64,
    pub grid_meta: GridSummary,
}

/// `γ · ω_R² · T̄` with the largest damping and bare frequency and the mean
/// temperature of the coupled baths. At zero temperature `T̄` is replaced by
/// the zero-point scale `ω_R / 2`.
pub fn power_scale(sys: &SystemMatrices, baths: &[BathSpec]) -> f64 {
    let coupled: Vec<&BathSpec> = baths.iter().filter(|b| b.is_coupled()).collect();
    let w = sys.max_frequency();
    let t_mean = if coupled.is_empty() {
        0.0
    } else {
        coupled.iter().map(|b| b.temperature()).sum::<f64>() / coupled.len() as f64
    };
    let t = if t_mean > 0.0 { t_mean } else { 0.5 * w };
    sys.max_damping() * w * w * t
}

fn kappa_min(sys: &SystemMatrices) -> f64 {
    KAPPA_MIN_FRACTION * sys.max_frequency()
}

fn diverges(baths: &[BathSpec]) -> bool {
    baths.iter().any(|b| b.is_coupled() && b.is_strict_ohmic())
}

fn divergent_error(what: &str) -> Error {
    Error::Divergent(format!(
        "{what} has logarithmically divergent diagonal entries for a strictly Ohmic bath; \
         give every coupled bath a finite cutoff or use the net power"
    ))
}

/// Folded power integrands at one positive frequency.
struct PowerPoint {
    xi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    bracket: DMatrix<f64>,
    transmission: f64,
    imag_excess: f64,
}

fn scale_rows(m: &CMatrix, d: &[f64]) -> CMatrix {
    let mut out = m.clone();
    for (i, di) in d.iter().enumerate() {
        out.row_mut(i).scale_mut(*di);
    }
    out
}

fn power_point(kappa: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> Result<PowerPoint> {
    let n = sys.dim();
    let i = Complex64::new(0.0, 1.0);
    let g_plus = greens::retarded_matrix(kappa, sys, baths)?;
    let g_minus = greens::retarded_matrix(-kappa, sys, baths)?;
    let a = greens::bath_noise_diag(kappa, baths);
    let b_plus = greens::bath_dissipation_diag(kappa, baths);
    let b_minus = greens::bath_dissipation_diag(-kappa, baths);
    let h_plus = greens::noise_from_retarded(&g_plus, kappa, baths);
    let h_minus = greens::noise_from_retarded(&g_minus, -kappa, baths);

    // iκ · C G_H0 C · G_R†, and iκ · C (i Im G_R0) C · G_H, at +κ and −κ.
    let xi_c = scale_rows(&g_plus.adjoint(), &a) * (i * kappa) + scale_rows(&g_minus.adjoint(), &a) * (i * -kappa);
    let gamma_c = scale_rows(&h_plus, &b_plus) * (i * i * kappa) + scale_rows(&h_minus, &b_minus) * (i * i * -kappa);

    let norm = 1.0 / (2.0 * PI);
    let xi = re_part(&xi_c) * norm;
    let gamma = re_part(&gamma_c) * norm;
    let imag = im_part(&xi_c).abs().max().max(im_part(&gamma_c).abs().max()) * norm;
    let real = xi.abs().max().max(gamma.abs().max());
    let imag_excess = if real > 0.0 { imag / real } else { imag };

    let f: Vec<f64> = baths
        .iter()
        .map(|bath| thermal_factor(kappa, bath.beta))
        .collect::<Result<_>>()?;
    let f_img = DMatrix::from_fn(n, n, |r, c| f[r] * g_plus[(r, c)].im);
    let bracket_rows = (f_img - re_part(&h_plus)) * (kappa / PI);
    let bracket = DMatrix::from_fn(n, n, |r, c| b_plus[r] * bracket_rows[(r, c)]);

    let transmission = if n == 2 {
        let dk = kappa_coth(kappa, baths[0].beta) - kappa_coth(kappa, baths[1].beta);
        b_plus[0] * b_plus[1] * dk * g_plus[(0, 1)].norm_sqr() / PI
    } else {
        0.0
    };

    Ok(PowerPoint {
        xi,
        gamma,
        bracket,
        transmission,
        imag_excess,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    /// ξ, γ, bracket, transmission.
    Split,
    /// ξ + γ, bracket, transmission.
    Summed,
    /// ξ only.
    XiOnly,
    /// γ only.
    GammaOnly,
}

impl Layout {
    fn blocks(self) -> usize {
        match self {
            Layout::Split => 3,
            Layout::Summed => 2,
            Layout::XiOnly | Layout::GammaOnly => 1,
        }
    }
}

struct Integrated {
    blocks: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    transmission: (f64, f64),
    grid: GridSummary,
}

fn integrate_powers(
    sys: &SystemMatrices,
    baths: &[BathSpec],
    opts: &QuadratureOptions,
    layout: Layout,
) -> Result<Integrated> {
    greens::check_baths(sys, baths)?;
    let n = sys.dim();
    let nn = n * n;
    let with_trans = matches!(layout, Layout::Split | Layout::Summed);
    let dim = layout.blocks() * nn + usize::from(with_trans);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let worst_imag = Cell::new(0.0f64);
    let kmin = kappa_min(sys);
    let hints = transport_breakpoints(sys, baths, kmin);

    let integrand = |kappa: f64, out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        if failure.borrow().is_some() {
            return;
        }
        let p = match power_point(kappa, sys, baths) {
            Ok(p) => p,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                return;
            }
        };
        worst_imag.set(worst_imag.get().max(p.imag_excess));
        let mut put = |block: usize, m: &DMatrix<f64>| {
            for r in 0..n {
                for c in 0..n {
                    out[block * nn + r * n + c] = m[(r, c)];
                }
            }
        };
        match layout {
            Layout::Split => {
                put(0, &p.xi);
                put(1, &p.gamma);
                put(2, &p.bracket);
            }
            Layout::Summed => {
                put(0, &(&p.xi + &p.gamma));
                put(1, &p.bracket);
            }
            Layout::XiOnly => put(0, &p.xi),
            Layout::GammaOnly => put(0, &p.gamma),
        }
        if with_trans {
            out[dim - 1] = p.transmission;
        }
    };

    let result = integrate_vec(integrand, dim, Domain::SemiInfinite(kmin), &hints, opts);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let result = result?;
    if worst_imag.get() > IMAG_TOL {
        return Err(Error::ConsistencyFailure(format!(
            "imaginary part of the assembled power integrand does not cancel (relative {:e})",
            worst_imag.get()
        )));
    }
    let block = |k: usize, src: &[f64]| DMatrix::from_row_slice(n, n, &src[k * nn..(k + 1) * nn]);
    let blocks = (0..layout.blocks())
        .map(|k| (block(k, &result.values), block(k, &result.errors)))
        .collect();
    let transmission = if with_trans {
        (result.values[dim - 1], result.errors[dim - 1])
    } else {
        (0.0, 0.0)
    };
    Ok(Integrated {
        blocks,
        transmission,
        grid: result.grid.summary(),
    })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().cloned().collect()).collect()
}

/// Power delivered to the chain by the bath noise, late-time limit.
pub fn p_xi_infinity(sys: &SystemMatrices, baths: &[BathSpec], opts: &QuadratureOptions) -> Result<PowerMatrix> {
    if diverges(baths) {
        return Err(divergent_error("P_xi"));
    }
    let r = integrate_powers(sys, baths, opts, Layout::XiOnly)?;
    let (value, error) = r.blocks.into_iter().next().expect("one block");
    Ok(PowerMatrix { value, error, grid: r.grid })
}

/// Power drained from the chain by dissipation, late-time limit.
pub fn p_gamma_infinity(sys: &SystemMatrices, baths: &[BathSpec], opts: &QuadratureOptions) -> Result<PowerMatrix> {
    if diverges(baths) {
        return Err(divergent_error("P_gamma"));
    }
    let r = integrate_powers(sys, baths, opts, Layout::GammaOnly)?;
    let (value, error) = r.blocks.into_iter().next().expect("one block");
    Ok(PowerMatrix { value, error, grid: r.grid })
}

/// Net power matrix and heat current of a two-oscillator chain, cross-checked
/// three ways.
pub fn heat_current(sys: &SystemMatrices, baths: &[BathSpec], opts: &QuadratureOptions) -> Result<TransportReport> {
    if sys.dim() != 2 {
        return Err(Error::UnsupportedDimension { n: sys.dim() });
    }
    let split = !diverges(baths);
    let r = integrate_powers(sys, baths, opts, if split { Layout::Split } else { Layout::Summed })?;
    let (p_xi, p_gamma, net, net_err, bracket) = if split {
        let (xi, xi_err) = &r.blocks[0];
        let (ga, ga_err) = &r.blocks[1];
        (
            Some(rows(xi)),
            Some(rows(ga)),
            xi + ga,
            xi_err + ga_err,
            r.blocks[2].0.clone(),
        )
    } else {
        (None, None, r.blocks[0].0.clone(), r.blocks[0].1.clone(), r.blocks[1].0.clone())
    };

    let j = net[(0, 0)];
    let tolerance = opts.target(j);
    let (j_trans, _) = r.transmission;
    let j_bracket = bracket[(0, 0)];
    for (name, other) in [("bracket", j_bracket), ("transmission", j_trans)] {
        if (j - other).abs() > 2.0 * tolerance {
            return Err(Error::ConsistencyFailure(format!(
                "heat current from P_xi + P_gamma ({j:e}) and the {name} form ({other:e}) differ by more than 2 x {tolerance:e}"
            )));
        }
    }
    Ok(TransportReport {
        p_xi,
        p_gamma,
        net: rows(&net),
        net_bracket: rows(&bracket),
        heat_current_j: j,
        j_bracket,
        j_transmission: j_trans,
        j_error: net_err[(0, 0)],
        conservation_defect: net.trace().abs(),
        tolerance,
        power_scale: power_scale(sys, baths),
        grid_meta: r.grid,
    })
}

/// Late-time net power `P_H(∞)` exchanged between one oscillator and its bath.
pub fn single_bath_balance(sys: &SystemMatrices, bath: &BathSpec, opts: &QuadratureOptions) -> Result<f64> {
    if sys.dim() != 1 {
        return Err(Error::UnsupportedDimension { n: sys.dim() });
    }
    let baths = [*bath];
    greens::check_baths(sys, &baths)?;
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |kappa: f64, out: &mut [f64]| {
        let value = (|| -> Result<f64> {
            let g = greens::retarded_matrix(kappa, sys, &baths)?;
            let h = greens::noise_matrix(kappa, sys, &baths)?;
            let coth = thermal_factor(kappa, bath.beta)?;
            let b = greens::bath_dissipation_diag(kappa, &baths)[0];
            Ok(kappa / PI * b * (coth * g[(0, 0)].im - h[(0, 0)].re))
        })();
        out[0] = value.unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            0.0
        });
    };
    let kmin = kappa_min(sys);
    let hints = transport_breakpoints(sys, &baths, kmin);
    let r = integrate_vec(integrand, 1, Domain::SemiInfinite(kmin), &hints, opts);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(r?.values[0])
}
