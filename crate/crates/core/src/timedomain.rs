//! Real-time relaxation of the chain from a Gaussian initial state.
//!
//! Friction is local (strict Ohmic), so the state `y = (x, v)` obeys
//! `dy = A y dt + B φ dt` with the companion matrix
//! `A = [[0, I], [−Ω², −2Γ]]` and `B = [0; C/m]`. Bath noise `φ` is Gaussian
//! with the free Hadamard kernel `K(τ)` of a Drude-regulated bath; when a bath
//! has no cutoff the noise is regulated at `50 · max ω` (a hybrid model whose
//! mismatch with the strictly Ohmic steady state is reported in the trace).
//!
//! With `M(t) = ∫₀ᵗ Φ(τ) B K(τ) dτ`, `Φ(τ) = exp(Aτ)`, the second moments
//! `S = ⟨y yᵀ⟩` satisfy `dS/dt = A S + S Aᵀ + B Mᵀ + M Bᵀ`, which is stepped
//! exactly for the homogeneous part and with Simpson's rule for the source.
//! The noise power is `P_ξ = (M_v C)ᵀ` and the friction power
//! `P_γ = −2mΓ ⟨v vᵀ⟩`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::check_baths;
use crate::network::SystemMatrices;
use crate::quadrature::{integrate, integrate_vec, Domain, QuadratureOptions};
use crate::spectral::{cutoff_profile, BathSpec};
use crate::special::ei_e1_difference;
use crate::transport::power_scale;

/// Noise cutoff used for strictly Ohmic baths, in units of the largest bare frequency.
pub const DEFAULT_NOISE_CUTOFF_FACTOR: f64 = 50.0;

/// `t_late = LATE_TIME_FACTOR / min γ`.
pub const LATE_TIME_FACTOR: f64 = 20.0;

/// Time-step bounds: `dt ≤ min(MAX_DT_OMEGA / max ω, MAX_DT_CUTOFF / Λ)`.
pub const MAX_DT_OMEGA: f64 = 0.05;
pub const MAX_DT_CUTOFF: f64 = 0.5;

/// Below `2πτ/β` of this size the thermal kernel is split into its vacuum
/// part (closed form) and a smooth thermal remainder (quadrature); above it
/// the Matsubara series converges geometrically.
const MATSUBARA_SWITCH: f64 = 0.5;

// 8-point Gauss–Legendre on [−1, 1].
const GL_X: [f64; 4] = [
    0.183434642495649804939476142360184,
    0.525532409916328985817739049189,
    0.796666477413626739591553936475830,
    0.960289856497536231683560868569473,
];
const GL_W: [f64; 4] = [
    0.362683783378361982965150449277196,
    0.313706645877887287337962201986601,
    0.222381034453374470544355994426241,
    0.101228536290376259152531354309962,
];

fn require_strict_ohmic(baths: &[BathSpec]) -> Result<()> {
    if let Some(b) = baths.iter().find(|b| b.is_coupled() && !b.is_strict_ohmic()) {
        return Err(Error::UnsupportedMode(format!(
            "time-domain propagation uses local friction; bath {} has finite cutoff {}",
            b.label, b.cutoff
        )));
    }
    Ok(())
}

fn companion(sys: &SystemMatrices) -> DMatrix<f64> {
    let n = sys.dim();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-&sys.omega2));
    a.view_mut((n, n), (n, n)).copy_from(&(&sys.gamma * -2.0));
    a
}

/// `G_R(t)` of the locally damped chain: solves `Ẍ + 2ΓẊ + Ω²X = 0` with
/// `X(0) = 0`, `Ẋ(0) = I/m`.
pub fn retarded_time(t: f64, sys: &SystemMatrices, baths: &[BathSpec]) -> Result<DMatrix<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must be finite and >= 0, got {t}")));
    }
    check_baths(sys, baths)?;
    require_strict_ohmic(baths)?;
    let n = sys.dim();
    let phi = (companion(sys) * t).exp();
    Ok(phi.view((0, n), (n, n)) / sys.mass)
}

/// Free-bath Hadamard kernel in time,
/// `K(τ) = (1/π) ∫₀^∞ cos(κτ) coth(βκ/2) Im G_R0(κ) dκ`, for a finite cutoff.
///
/// `K` is even and logarithmically singular at `τ = 0`, where it is
/// rejected.
pub fn hadamard_free_time(tau: f64, bath: &BathSpec) -> Result<f64> {
    bath.validate()?;
    if bath.is_strict_ohmic() {
        return Err(Error::UnsupportedMode(
            "the strictly Ohmic noise kernel is a distribution in time; give the bath a finite cutoff".into(),
        ));
    }
    if !tau.is_finite() {
        return Err(Error::invalid("tau", format!("must be finite, got {tau}")));
    }
    let tau = tau.abs();
    if tau == 0.0 {
        return Err(Error::Domain("the noise kernel diverges logarithmically at tau = 0".into()));
    }
    Ok(kernel(tau, bath.beta, bath.cutoff))
}

fn vacuum_kernel(tau: f64, lam: f64) -> f64 {
    -lam * lam / (8.0 * PI * PI) * ei_e1_difference(lam * tau)
}

fn kernel(tau: f64, beta: f64, lam: f64) -> f64 {
    if beta.is_infinite() {
        return vacuum_kernel(tau, lam);
    }
    if 2.0 * PI * tau / beta >= MATSUBARA_SWITCH {
        matsubara_kernel(tau, beta, lam)
    } else {
        vacuum_kernel(tau, lam) + thermal_remainder(tau, beta, lam)
    }
}

/// `(1/4π²) ∫₀^∞ cos(κτ) · 2κ/(e^{βκ} − 1) · D(κ) dκ`.
fn thermal_remainder(tau: f64, beta: f64, lam: f64) -> f64 {
    let f = |k: f64| (k * tau).cos() * 2.0 * k / (beta * k).exp_m1() * cutoff_profile(k, lam);
    let scale = 1.0 / (beta * beta);
    let opts = QuadratureOptions {
        tol_abs: 1e-15 * scale,
        tol_rel: 1e-13,
        max_evals: 200_000,
    };
    let hints = [1.0 / beta, 5.0 / beta, 20.0 / beta, lam];
    match integrate(f, Domain::SemiInfinite(0.0), &hints, &opts) {
        Ok(r) => r.value / (4.0 * PI * PI),
        Err(Error::NonConvergence { estimate, .. }) => estimate / (4.0 * PI * PI),
        Err(_) => f64::NAN,
    }
}

/// Matsubara representation
/// `K = (Λ²/8π) cot(βΛ/2) e^{−Λτ} + (Λ²/2πβ) Σ_{n≥1} ν_n e^{−ν_n τ} / (ν_n² − Λ²)`,
/// `ν_n = 2πn/β`, with the pole of the cotangent and the nearest Matsubara
/// term combined analytically.
fn matsubara_kernel(tau: f64, beta: f64, lam: f64) -> f64 {
    if 2.0 * PI * tau / beta > 745.0 && lam * tau > 745.0 {
        return 0.0;
    }
    let x = beta * lam / (2.0 * PI);
    let k = x.round() as usize;
    let pref = lam * lam / (2.0 * PI * beta);
    let e_lam = (-lam * tau).exp();
    let mut sum = if k == 0 {
        lam * lam / (8.0 * PI) * e_lam / (0.5 * beta * lam).tan()
    } else {
        let nu_k = 2.0 * PI * k as f64 / beta;
        let delta = lam - nu_k;
        let y = 0.5 * beta * delta;
        let regular = if y.abs() < 1e-3 {
            -y / 3.0 - y * y * y / 45.0
        } else {
            1.0 / y.tan() - 1.0 / y
        };
        let e_nu = (-nu_k * tau).exp();
        let pair = if delta == 0.0 {
            -tau * e_nu
        } else {
            e_nu * (-delta * tau).exp_m1() / delta
        };
        lam * lam / (8.0 * PI) * regular * e_lam
            + lam * lam / (4.0 * PI * beta) * pair
            + lam * lam / (4.0 * PI * beta * (nu_k + lam)) * e_nu
    };
    let first = (-2.0 * PI * tau / beta).exp();
    for n in 1..100_000usize {
        if n == k {
            continue;
        }
        let nu = 2.0 * PI * n as f64 / beta;
        let decay = (-nu * tau).exp();
        sum += pref * nu * decay / (nu * nu - lam * lam);
        if n > k && (decay == 0.0 || decay < 1e-18 * first.max(e_lam)) {
            break;
        }
    }
    sum
}

/// Gaussian initial state of the oscillators, ordered `(x₁…x_N, p₁…p_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub mean_x: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl InitialState {
    /// Ground state of each oscillator taken on its own, at `ω_i = sqrt(Ω²_ii)`.
    pub fn ground_state(sys: &SystemMatrices) -> Self {
        let n = sys.dim();
        let m = sys.mass;
        let mut cov = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            let w = sys.omega2[(i, i)].sqrt();
            cov[i][i] = 1.0 / (2.0 * m * w);
            cov[n + i][n + i] = 0.5 * m * w;
        }
        InitialState {
            mean_x: vec![0.0; n],
            mean_p: vec![0.0; n],
            cov,
        }
    }

    /// Thermal state of each oscillator taken on its own at inverse temperature `beta`.
    pub fn thermal(sys: &SystemMatrices, beta: f64) -> Self {
        let mut s = Self::ground_state(sys);
        let n = sys.dim();
        for i in 0..n {
            let w = sys.omega2[(i, i)].sqrt();
            let c = if beta.is_infinite() { 1.0 } else { 1.0 / (0.5 * beta * w).tanh() };
            s.cov[i][i] *= c;
            s.cov[n + i][n + i] *= c;
        }
        s
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let n = self.cov.len();
        DMatrix::from_fn(n, n, |i, j| self.cov[i].get(j).copied().unwrap_or(f64::NAN))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.mean_x.len() != n || self.mean_p.len() != n {
            return Err(Error::invalid("initial_state", format!("means must have length {n}")));
        }
        if self.cov.len() != 2 * n || self.cov.iter().any(|r| r.len() != 2 * n) {
            return Err(Error::invalid("initial_state", format!("cov must be {0}x{0}", 2 * n)));
        }
        let cov = self.cov_matrix();
        if cov.iter().chain(&self.mean_x).chain(&self.mean_p).any(|x| !x.is_finite()) {
            return Err(Error::invalid("initial_state", "entries must be finite"));
        }
        let norm = cov.norm().max(1e-300);
        if (&cov - cov.transpose()).norm() > 1e-12 * norm {
            return Err(Error::invalid("initial_state", "cov must be symmetric"));
        }
        // cov + iΣ/2 ⪰ 0 via the real embedding [[R, −I], [I, R]] of R + iI.
        let m = 2 * n;
        let mut emb = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                let re = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                let sigma = if i < n && j == i + n {
                    1.0
                } else if i >= n && j + n == i {
                    -1.0
                } else {
                    0.0
                };
                let im = 0.5 * sigma;
                emb[(i, j)] = re;
                emb[(i + m, j + m)] = re;
                emb[(i, j + m)] = -im;
                emb[(i + m, j)] = im;
            }
        }
        let min = SymmetricEigen::new(emb).eigenvalues.min();
        if min < -1e-10 * norm.max(1.0) {
            return Err(Error::invalid(
                "initial_state",
                format!("covariance violates the uncertainty bound (smallest eigenvalue {min:e})"),
            ));
        }
        Ok(())
    }
}

/// Time series of powers and energies. Matrices are row-major `N×N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationTrace {
    pub times: Vec<f64>,
    pub p_xi_t: Vec<Vec<Vec<f64>>>,
    pub p_gamma_t: Vec<Vec<Vec<f64>>>,
    pub p_h_t: Vec<Vec<Vec<f64>>>,
    /// Total mechanical energy `(m/2) tr⟨vvᵀ⟩ + (m/2) tr(Ω²⟨xxᵀ⟩)`.
    pub energy_t: Vec<f64>,
    /// `(m/2)⟨v_i²⟩ + (m/2) Ω²_ii ⟨x_i²⟩` per oscillator.
    pub oscillator_energy_t: Vec<Vec<f64>>,
    pub dt: f64,
    /// Cutoff of the noise kernel actually used for each bath.
    pub noise_cutoffs: Vec<f64>,
    /// Largest `|dE/dt − tr P_H|` over checked times, in units of `power_scale`;
    /// `dE/dt` is a Richardson-extrapolated centred difference.
    pub max_energy_defect: f64,
    pub power_scale: f64,
    /// `LATE_TIME_FACTOR / min γ`, when some oscillator is damped.
    pub late_time: Option<f64>,
    /// Frequency-domain steady current of the same hybrid model (two baths only).
    pub hybrid_reference_current: Option<f64>,
}

impl RelaxationTrace {
    /// `P_H[0][0]` at the last recorded time.
    pub fn final_current(&self) -> f64 {
        self.p_h_t.last().map(|m| m[0][0]).unwrap_or(0.0)
    }

    pub fn trace_p_h(&self) -> Vec<f64> {
        self.p_h_t
            .iter()
            .map(|m| (0..m.len()).map(|i| m[i][i]).sum())
            .collect()
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().cloned().collect()).collect()
}

/// Largest admissible step for the given chain and noise cutoffs.
pub fn max_time_step(sys: &SystemMatrices, noise_cutoffs: &[f64]) -> f64 {
    let lam = noise_cutoffs.iter().cloned().fold(0.0, f64::max);
    let mut dt = MAX_DT_OMEGA / sys.max_frequency();
    if lam > 0.0 {
        dt = dt.min(MAX_DT_CUTOFF / lam);
    }
    dt
}

/// Noise cutoffs of the hybrid model: each bath's own cutoff, or
/// `DEFAULT_NOISE_CUTOFF_FACTOR · max ω` when it has none.
pub fn noise_cutoffs(sys: &SystemMatrices, baths: &[BathSpec]) -> Vec<f64> {
    let fallback = DEFAULT_NOISE_CUTOFF_FACTOR * sys.max_frequency();
    baths
        .iter()
        .map(|b| {
            if !b.is_coupled() {
                0.0
            } else if b.is_strict_ohmic() {
                fallback
            } else {
                b.cutoff
            }
        })
        .collect()
}

/// Steady current of the hybrid model: local friction in `G_R`, Drude-regulated noise.
fn hybrid_current(sys: &SystemMatrices, baths: &[BathSpec], cutoffs: &[f64]) -> Result<f64> {
    let strict: Vec<BathSpec> = baths.iter().map(|b| BathSpec { cutoff: f64::INFINITY, ..*b }).collect();
    let kmin = crate::transport::KAPPA_MIN_FRACTION * sys.max_frequency();
    let hints = crate::quadrature::transport_breakpoints(sys, &strict, kmin);
    let f = |k: f64| -> f64 {
        let Ok(g) = crate::greens::retarded_matrix(k, sys, &strict) else {
            return f64::NAN;
        };
        let b = crate::greens::bath_dissipation_diag(k, &strict);
        let w: Vec<f64> = (0..2)
            .map(|i| crate::spectral::kappa_coth(k, baths[i].beta) * cutoff_profile(k, cutoffs[i]))
            .collect();
        b[0] * b[1] * (w[0] - w[1]) * g[(0, 1)].norm_sqr() / PI
    };
    let mut hints = hints;
    hints.extend(cutoffs.iter().filter(|c| **c > 0.0));
    Ok(integrate(f, Domain::SemiInfinite(kmin), &hints, &QuadratureOptions::default())?.value)
}

/// Propagates second moments from `state` and records powers every step.
pub fn transient_powers(
    t_max: f64,
    dt: f64,
    sys: &SystemMatrices,
    baths: &[BathSpec],
    state: &InitialState,
) -> Result<RelaxationTrace> {
    check_baths(sys, baths)?;
    let n = sys.dim();
    state.validate(n)?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max", format!("must be finite and > 0, got {t_max}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    let cutoffs = noise_cutoffs(sys, baths);
    let dt_max = max_time_step(sys, &cutoffs);
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::StepTooCoarse {
            reason: format!("dt = {dt} does not resolve the oscillators and the noise cutoff"),
            suggested_dt: dt_max,
        });
    }
    let steps = (t_max / dt - 1e-9).ceil().max(1.0) as usize;
    let h = dt;
    let half = 0.5 * h;
    let m = sys.mass;

    let a = companion(sys);
    let mut b = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        b[(n + i, i)] = sys.coupling_c[(i, i)] / m;
    }
    let phi_h = (&a * h).exp();
    let phi_half = (&a * half).exp();

    let coupled: Vec<bool> = baths.iter().map(|bath| bath.is_coupled()).collect();
    let k_diag = |tau: f64| -> Vec<f64> {
        (0..n)
            .map(|i| if coupled[i] { kernel(tau, baths[i].beta, cutoffs[i]) } else { 0.0 })
            .collect()
    };

    // Gauss nodes on [0, h/2] and the matching Φ(s_j) B.
    let mut nodes = Vec::with_capacity(8);
    for (x, w) in GL_X.iter().zip(GL_W) {
        for s in [-1.0, 1.0] {
            let u = 0.25 * h * (1.0 + s * x);
            nodes.push((u, 0.25 * h * w, (&a * u).exp() * &b));
        }
    }

    // M on the half-step grid.
    let mut m_grid: Vec<DMatrix<f64>> = Vec::with_capacity(2 * steps + 1);
    m_grid.push(DMatrix::zeros(2 * n, n));
    {
        // First panel contains the logarithmic singularity of K at τ = 0.
        let ab = a.clone();
        let bb = b.clone();
        let e_max = (0..n).map(|i| sys.coupling_c[(i, i)].abs()).fold(0.0, f64::max);
        let lam_max = cutoffs.iter().cloned().fold(0.0, f64::max);
        let opts = QuadratureOptions {
            tol_abs: 1e-14 * (e_max / m) * lam_max * lam_max * half + 1e-300,
            tol_rel: 1e-12,
            max_evals: 500_000,
        };
        let first = integrate_vec(
            |tau, out: &mut [f64]| {
                let pb = (&ab * tau).exp() * &bb;
                let k = k_diag(tau);
                for r in 0..2 * n {
                    for c in 0..n {
                        out[r * n + c] = pb[(r, c)] * k[c];
                    }
                }
            },
            2 * n * n,
            Domain::Finite(0.0, half),
            &[],
            &opts,
        );
        let values = match first {
            Ok(v) => v.values,
            Err(Error::NonConvergence { .. }) if e_max == 0.0 => vec![0.0; 2 * n * n],
            Err(e) => return Err(e),
        };
        m_grid.push(DMatrix::from_row_slice(2 * n, n, &values));
    }
    let mut phi_tau = phi_half.clone();
    for k in 1..2 * steps {
        let tau0 = k as f64 * half;
        let mut inner = DMatrix::zeros(2 * n, n);
        for (u, w, pb) in &nodes {
            let kd = k_diag(tau0 + u);
            for c in 0..n {
                if kd[c] != 0.0 {
                    inner.column_mut(c).axpy(w * kd[c], &pb.column(c), 1.0);
                }
            }
        }
        let next = &m_grid[k] + &phi_tau * inner;
        m_grid.push(next);
        phi_tau = &phi_tau * &phi_half;
    }

    // Initial second moments in (x, v).
    let mut s = state.cov_matrix();
    for i in 0..2 * n {
        for j in 0..2 * n {
            let scale = if i >= n { 1.0 / m } else { 1.0 } * if j >= n { 1.0 / m } else { 1.0 };
            s[(i, j)] *= scale;
        }
    }
    let mut mean = DMatrix::zeros(2 * n, 1);
    for i in 0..n {
        mean[(i, 0)] = state.mean_x[i];
        mean[(n + i, 0)] = state.mean_p[i] / m;
    }
    s += &mean * mean.transpose();

    let source = |mk: &DMatrix<f64>| -> DMatrix<f64> {
        let q = &b * mk.transpose();
        &q + q.transpose()
    };

    let mut trace = RelaxationTrace {
        times: Vec::with_capacity(steps + 1),
        p_xi_t: Vec::with_capacity(steps + 1),
        p_gamma_t: Vec::with_capacity(steps + 1),
        p_h_t: Vec::with_capacity(steps + 1),
        energy_t: Vec::with_capacity(steps + 1),
        oscillator_energy_t: Vec::with_capacity(steps + 1),
        dt: h,
        noise_cutoffs: cutoffs.clone(),
        max_energy_defect: 0.0,
        power_scale: power_scale(sys, baths),
        late_time: sys.min_damping().map(|g| LATE_TIME_FACTOR / g),
        hybrid_reference_current: None,
    };

    let record = |trace: &mut RelaxationTrace, step: usize, s: &DMatrix<f64>| {
        let mk = &m_grid[2 * step];
        let mv = mk.rows(n, n).into_owned();
        let p_xi = (mv * &sys.coupling_c).transpose();
        let svv = s.view((n, n), (n, n)).into_owned();
        let sxx = s.view((0, 0), (n, n)).into_owned();
        let p_gamma = &sys.gamma * &svv * (-2.0 * m);
        let p_h = &p_xi + &p_gamma;
        let energy = 0.5 * m * svv.trace() + 0.5 * m * (&sys.omega2 * &sxx).trace();
        let per: Vec<f64> = (0..n)
            .map(|i| 0.5 * m * svv[(i, i)] + 0.5 * m * sys.omega2[(i, i)] * sxx[(i, i)])
            .collect();
        trace.times.push(step as f64 * h);
        trace.p_xi_t.push(rows(&p_xi));
        trace.p_gamma_t.push(rows(&p_gamma));
        trace.p_h_t.push(rows(&p_h));
        trace.energy_t.push(energy);
        trace.oscillator_energy_t.push(per);
    };

    record(&mut trace, 0, &s);
    let phi_h_t = phi_h.transpose();
    let phi_half_t = phi_half.transpose();
    for step in 0..steps {
        let q0 = source(&m_grid[2 * step]);
        let q1 = source(&m_grid[2 * step + 1]);
        let q2 = source(&m_grid[2 * step + 2]);
        let simpson = (&phi_h * q0 * &phi_h_t + (&phi_half * q1 * &phi_half_t) * 4.0 + q2) * (h / 6.0);
        s = &phi_h * &s * &phi_h_t + simpson;
        s = 0.5 * (&s + s.transpose());
        record(&mut trace, step + 1, &s);
    }

    check_energy(&mut trace, &cutoffs)?;
    if n == 2 && baths.iter().all(|bath| bath.is_coupled()) {
        trace.hybrid_reference_current = Some(hybrid_current(sys, baths, &cutoffs)?);
    }
    Ok(trace)
}

/// Compares the Richardson-extrapolated centred difference of the energy
/// with `tr P_H` at interior times; the gap between step sizes `h` and `2h`
/// serves as the discretisation estimate.
fn check_energy(trace: &mut RelaxationTrace, cutoffs: &[f64]) -> Result<()> {
    let e = &trace.energy_t;
    let h = trace.dt;
    let tr = trace.trace_p_h();
    let lam = cutoffs.iter().cloned().fold(0.0, f64::max);
    // Skip the initial layer where the noise kernel's singular part is still resolving.
    let skip = ((10.0 / lam.max(1e-300)) / h).ceil().max(4.0) as usize;
    let floor = 1e-9 * trace.power_scale.max(1e-300);
    let mut worst: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for i in skip.max(2)..e.len().saturating_sub(2) {
        let d1 = (e[i + 1] - e[i - 1]) / (2.0 * h);
        let d2 = (e[i + 2] - e[i - 2]) / (4.0 * h);
        let estimate = (d2 - d1).abs() / 3.0;
        let richardson = d1 + (d1 - d2) / 3.0;
        let gap = (richardson - tr[i]).abs();
        worst = worst.max(gap);
        worst_ratio = worst_ratio.max(gap / (10.0 * estimate + floor));
    }
    trace.max_energy_defect = worst / trace.power_scale.max(1e-300);
    if worst_ratio > 1.0 {
        return Err(Error::StepTooCoarse {
            reason: format!(
                "energy balance dE/dt = tr P_H violated beyond 10x the discretisation estimate \
                 (worst gap {worst:e})"
            ),
            suggested_dt: 0.5 * h,
        });
    }
    Ok(())
}

/// Exponential decay rate of the envelope of `values` over `[t_from, t_to]`,
/// fitted by least squares to the logarithm of the local maxima of `|values|`.
pub fn envelope_decay_rate(times: &[f64], values: &[f64], t_from: f64, t_to: f64) -> Option<f64> {
    let mut pts = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (t, v) = (times[i], values[i].abs());
        if t < t_from || t > t_to || v == 0.0 {
            continue;
        }
        if v >= values[i - 1].abs() && v > values[i + 1].abs() {
            pts.push((t, v.ln()));
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let len = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Some(-sxy / sxx)
}
