//! Adaptive Gauss–Kronrod integration over frequency.
//!
//! Panels are refined by bisection, worst first, until every component of a
//! (possibly vector-valued) integrand meets `max(tol_abs, tol_rel · |value|)`.
//! All components share one panel set, so linear combinations of components
//! (a trace, an antisymmetric pair) are integrated with the same rule.
//!
//! Semi-infinite domains are split at a finite knot `K`; the tail `[K, ∞)` is
//! integrated in the variable `u = K/κ`, which turns algebraic decay of order
//! `κ⁻²` or faster into a bounded integrand on `(0, 1]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::SystemMatrices;
use crate::spectral::BathSpec;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Evaluation budget of the integrand.
    pub max_evals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            tol_abs: 1e-8,
            tol_rel: 1e-10,
            max_evals: 1_000_000,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_abs > 0.0) {
            return Err(Error::invalid("tol_abs", format!("must be > 0, got {}", self.tol_abs)));
        }
        if !(self.tol_rel > 0.0) {
            return Err(Error::invalid("tol_rel", format!("must be > 0, got {}", self.tol_rel)));
        }
        if self.max_evals < 15 {
            return Err(Error::invalid("max_evals", "must allow at least one panel (15 evaluations)"));
        }
        Ok(())
    }

    /// Acceptable absolute error for a component of magnitude `value`.
    pub fn target(&self, value: f64) -> f64 {
        self.tol_abs.max(self.tol_rel * value.abs())
    }
}

/// Integration domain in frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite(f64, f64),
    SemiInfinite(f64),
}

/// One accepted panel. `b` is `+∞` for the mapped tail panel that touches infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub estimate: f64,
    pub error: f64,
}

/// Panel layout and convergence record of one integration.
///
/// For vector integrands `total` and `total_error` are the largest
/// component magnitudes; per-component values live in [`VectorIntegral`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub panels: Vec<Panel>,
    pub total: f64,
    pub total_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Compact form of [`FrequencyGrid`] for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub panels: usize,
    pub evaluations: usize,
    pub total_error: f64,
    pub converged: bool,
}

impl FrequencyGrid {
    pub fn summary(&self) -> GridSummary {
        GridSummary {
            panels: self.panels.len(),
            evaluations: self.evaluations,
            total_error: self.total_error,
            converged: self.converged,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub grid: FrequencyGrid,
}

#[derive(Debug, Clone)]
pub struct VectorIntegral {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub grid: FrequencyGrid,
}

#[derive(Debug, Clone)]
struct Work {
    lo: f64,
    hi: f64,
    mapped: bool,
    values: Vec<f64>,
    errors: Vec<f64>,
    priority: f64,
}

impl PartialEq for Work {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Work {}
impl PartialOrd for Work {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Work {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.mapped.cmp(&self.mapped))
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

struct Rule<'f, F> {
    f: &'f F,
    dim: usize,
    knot: f64,
    fc: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
}

impl<'f, F: Fn(f64, &mut [f64])> Rule<'f, F> {
    fn eval(&mut self, x: f64, mapped: bool, out: usize) {
        let buf = match out {
            0 => &mut self.fc,
            1 => &mut self.f1,
            _ => &mut self.f2,
        };
        if mapped {
            let k = self.knot / x;
            (self.f)(k, buf);
            let jac = self.knot / (x * x);
            buf.iter_mut().for_each(|v| *v *= jac);
        } else {
            (self.f)(x, buf);
        }
    }

    /// Applies the 15-point Kronrod / 7-point Gauss pair on `[lo, hi]`.
    fn apply(&mut self, lo: f64, hi: f64, mapped: bool) -> (Vec<f64>, Vec<f64>) {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut kron = vec![0.0; self.dim];
        let mut gauss = vec![0.0; self.dim];
        self.eval(center, mapped, 0);
        for d in 0..self.dim {
            kron[d] = WGK[7] * self.fc[d];
            gauss[d] = WG[3] * self.fc[d];
        }
        for j in 0..7 {
            let dx = half * XGK[j];
            self.eval(center - dx, mapped, 1);
            self.eval(center + dx, mapped, 2);
            for d in 0..self.dim {
                let s = self.f1[d] + self.f2[d];
                kron[d] += WGK[j] * s;
                if j % 2 == 1 {
                    gauss[d] += WG[j / 2] * s;
                }
            }
        }
        let values: Vec<f64> = kron.iter().map(|k| k * half).collect();
        let errors: Vec<f64> = kron
            .iter()
            .zip(&gauss)
            .map(|(k, g)| ((k - g) * half).abs())
            .collect();
        (values, errors)
    }
}

fn to_kappa(lo: f64, hi: f64, mapped: bool, knot: f64) -> (f64, f64) {
    if mapped {
        let b = if lo == 0.0 { f64::INFINITY } else { knot / lo };
        (knot / hi, b)
    } else {
        (lo, hi)
    }
}

/// Integrates a vector-valued `f(κ, out)` with `out.len() == dim`.
pub fn integrate_vec<F>(
    f: F,
    dim: usize,
    domain: Domain,
    breakpoints: &[f64],
    opts: &QuadratureOptions,
) -> Result<VectorIntegral>
where
    F: Fn(f64, &mut [f64]),
{
    opts.validate()?;
    let (a, b_finite) = match domain {
        Domain::Finite(a, b) => {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::invalid("domain", format!("need finite a < b, got [{a}, {b}]")));
            }
            (a, Some(b))
        }
        Domain::SemiInfinite(a) => {
            if !a.is_finite() {
                return Err(Error::invalid("domain", format!("lower limit must be finite, got {a}")));
            }
            (a, None)
        }
    };

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .cloned()
        .filter(|x| x.is_finite() && *x > a && b_finite.is_none_or(|b| *x < b))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let knot = match b_finite {
        Some(b) => b,
        None => {
            let top = cuts.last().cloned().unwrap_or(a).max(a.abs()).max(1e-300);
            if a > 0.0 {
                (4.0 * top).max(2.0 * a)
            } else {
                4.0 * top.max(1.0)
            }
        }
    };
    let mut edges = vec![a];
    edges.extend(cuts.into_iter().filter(|x| *x < knot));
    edges.push(knot);

    let mut rule = Rule {
        f: &f,
        dim,
        knot,
        fc: vec![0.0; dim],
        f1: vec![0.0; dim],
        f2: vec![0.0; dim],
    };
    let mut evaluations = 0usize;
    let mut initial: Vec<(f64, f64, bool)> = edges.windows(2).map(|w| (w[0], w[1], false)).collect();
    if b_finite.is_none() {
        initial.push((0.0, 1.0, true));
    }

    let mut first = Vec::with_capacity(initial.len());
    for (lo, hi, mapped) in initial {
        let (v, e) = rule.apply(lo, hi, mapped);
        evaluations += 15;
        first.push(Work {
            lo,
            hi,
            mapped,
            values: v,
            errors: e,
            priority: 0.0,
        });
    }

    let mut totals = vec![0.0; dim];
    let mut errs = vec![0.0; dim];
    for w in &first {
        for d in 0..dim {
            totals[d] += w.values[d];
            errs[d] += w.errors[d];
        }
    }
    // Priorities are normalised by per-component targets fixed after the first pass.
    let scale: Vec<f64> = totals.iter().map(|t| opts.target(*t)).collect();
    let priority = |e: &[f64]| e.iter().zip(&scale).map(|(e, s)| e / s).fold(0.0, f64::max);

    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Work> = Vec::new();
    for mut w in first {
        w.priority = priority(&w.errors);
        heap.push(w);
    }

    let converged_now = |totals: &[f64], errs: &[f64]| {
        totals
            .iter()
            .zip(errs)
            .all(|(t, e)| *e <= opts.target(*t))
    };

    let mut converged = converged_now(&totals, &errs);
    while !converged {
        if evaluations + 30 > opts.max_evals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) || (worst.hi - worst.lo) <= 1e-13 * worst.lo.abs().max(worst.hi.abs()) {
            // Panel cannot be split further in floating point.
            frozen.push(worst);
            continue;
        }
        let (lv, le) = rule.apply(worst.lo, mid, worst.mapped);
        let (rv, re) = rule.apply(mid, worst.hi, worst.mapped);
        evaluations += 30;
        for d in 0..dim {
            totals[d] += lv[d] + rv[d] - worst.values[d];
            errs[d] += le[d] + re[d] - worst.errors[d];
        }
        let left = Work {
            lo: worst.lo,
            hi: mid,
            mapped: worst.mapped,
            priority: priority(&le),
            values: lv,
            errors: le,
        };
        let right = Work {
            lo: mid,
            hi: worst.hi,
            mapped: worst.mapped,
            priority: priority(&re),
            values: rv,
            errors: re,
        };
        heap.push(left);
        heap.push(right);
        converged = converged_now(&totals, &errs);
    }

    let mut all: Vec<Work> = heap.into_vec();
    all.extend(frozen);
    let as_kappa = |w: &Work| to_kappa(w.lo, w.hi, w.mapped, knot);
    all.sort_by(|x, y| as_kappa(x).0.total_cmp(&as_kappa(y).0));

    let mut values = vec![0.0; dim];
    let mut errors = vec![0.0; dim];
    let mut panels = Vec::with_capacity(all.len());
    for w in &all {
        for d in 0..dim {
            values[d] += w.values[d];
            errors[d] += w.errors[d];
        }
        let (pa, pb) = as_kappa(w);
        panels.push(Panel {
            a: pa,
            b: pb,
            estimate: w.values.iter().fold(0.0, |m, v| if v.abs() > m.abs() { *v } else { m }),
            error: w.errors.iter().cloned().fold(0.0, f64::max),
        });
    }
    let converged = converged_now(&values, &errors);
    let grid = FrequencyGrid {
        panels,
        total: values.iter().fold(0.0, |m, v| if v.abs() > m.abs() { *v } else { m }),
        total_error: errors.iter().cloned().fold(0.0, f64::max),
        evaluations,
        converged,
    };
    if !converged {
        let (worst, _) = values
            .iter()
            .zip(&errors)
            .enumerate()
            .map(|(i, (v, e))| (i, e / opts.target(*v)))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        return Err(Error::NonConvergence {
            estimate: values[worst],
            error: errors[worst],
            requested: opts.target(values[worst]),
            evaluations,
        });
    }
    Ok(VectorIntegral { values, errors, grid })
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(f: F, domain: Domain, breakpoints: &[f64], opts: &QuadratureOptions) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    let r = integrate_vec(|x, out: &mut [f64]| out[0] = f(x), 1, domain, breakpoints, opts)?;
    Ok(Integral {
        value: r.values[0],
        error: r.errors[0],
        grid: r.grid,
    })
}

/// Normal-mode frequencies of the undamped chain; every transport integrand
/// peaks near these.
pub fn resonance_hints(sys: &SystemMatrices) -> Vec<f64> {
    sys.normal_modes()
}

/// Panel boundaries for heat-transport integrands: each normal mode and a
/// few damping widths either side, plus any finite bath cutoffs.
pub fn transport_breakpoints(sys: &SystemMatrices, baths: &[BathSpec], kappa_min: f64) -> Vec<f64> {
    let width = sys.max_damping().max(1e-3 * sys.max_frequency());
    let mut pts = Vec::new();
    for w in resonance_hints(sys) {
        for k in [-8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0] {
            pts.push(w + k * width);
        }
    }
    pts.extend(baths.iter().filter(|b| b.is_coupled() && !b.is_strict_ohmic()).map(|b| b.cutoff));
    pts.retain(|p| *p > kappa_min);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_matrices, ChainParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn lorentzian(gamma: f64) -> impl Fn(f64) -> f64 {
        move |k: f64| 2.0 * gamma * k * k / (((k * k - 1.0).powi(2) + 4.0 * gamma * gamma * k * k) * PI)
    }

    #[test]
    fn kronrod_rule_is_exact_for_polynomials() {
        let opts = QuadratureOptions::default();
        for p in 0..=22 {
            let r = integrate(|x: f64| x.powi(p), Domain::Finite(0.0, 1.0), &[], &opts).unwrap();
            assert_relative_eq!(r.value, 1.0 / (p as f64 + 1.0), max_relative = 1e-14);
        }
    }

    #[test]
    fn lorentzian_half_line() {
        let opts = QuadratureOptions {
            tol_abs: 1e-11,
            tol_rel: 1e-11,
            ..Default::default()
        };
        let r = integrate(lorentzian(0.05), Domain::SemiInfinite(0.0), &[1.0], &opts).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10, "{}", r.value);
        assert!(r.grid.converged);
    }

    #[test]
    fn zero_integrand() {
        let r = integrate(|_| 0.0, Domain::SemiInfinite(0.0), &[], &QuadratureOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.error, 0.0);
    }

    #[test]
    fn exponential_on_half_line() {
        let opts = QuadratureOptions {
            tol_abs: 1e-12,
            ..Default::default()
        };
        let r = integrate(|k: f64| (-k).exp(), Domain::SemiInfinite(0.0), &[], &opts).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn panels_tile_domain() {
        let r = integrate(lorentzian(0.01), Domain::SemiInfinite(1e-6), &[0.9, 1.0, 1.1], &QuadratureOptions::default())
            .unwrap();
        let p = &r.grid.panels;
        assert_eq!(p[0].a, 1e-6);
        for w in p.windows(2) {
            assert!(w[0].b <= w[1].a * (1.0 + 1e-15) && w[0].b >= w[1].a * (1.0 - 1e-15), "{:?}", w);
        }
        assert!(p.last().unwrap().b.is_infinite());
        let fin = integrate(lorentzian(0.01), Domain::Finite(0.0, 3.0), &[1.0], &QuadratureOptions::default()).unwrap();
        assert_eq!(fin.grid.panels.last().unwrap().b, 3.0);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let opts = QuadratureOptions {
            tol_abs: 1e-300,
            tol_rel: 1e-300,
            max_evals: 2_000,
        };
        match integrate(lorentzian(0.05), Domain::SemiInfinite(0.0), &[1.0], &opts) {
            Err(Error::NonConvergence { estimate, evaluations, .. }) => {
                assert!((estimate - 0.5).abs() < 1e-6);
                assert!(evaluations <= 2_000);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn sharp_resonance_with_hints_stays_cheap() {
        let opts = QuadratureOptions {
            tol_abs: 1e-9,
            tol_rel: 1e-9,
            ..Default::default()
        };
        let evals = |g: f64| {
            let hints = [1.0 - 8.0 * g, 1.0 - 2.0 * g, 1.0 - 0.5 * g, 1.0, 1.0 + 0.5 * g, 1.0 + 2.0 * g, 1.0 + 8.0 * g];
            let r = integrate(lorentzian(g), Domain::SemiInfinite(1e-6), &hints, &opts).unwrap();
            assert!((r.value - 0.5).abs() < 1e-8);
            r.grid.evaluations
        };
        let wide = evals(0.1);
        let sharp = evals(1e-3);
        assert!(sharp < 10 * wide, "sharp {sharp} vs wide {wide}");
    }

    #[test]
    fn vector_components_share_panels() {
        let opts = QuadratureOptions::default();
        let r = integrate_vec(
            |k, out: &mut [f64]| {
                out[0] = (-k).exp();
                out[1] = -(-k).exp();
            },
            2,
            Domain::SemiInfinite(0.0),
            &[],
            &opts,
        )
        .unwrap();
        assert_eq!(r.values[0], -r.values[1]);
    }

    #[test]
    fn resonance_hints_examples() {
        let bath = BathSpec::new(1.0, 0.5, f64::INFINITY, 1).unwrap();
        let hints = |w: [f64; 2], s: f64| {
            let sys = build_matrices(&ChainParams::pair(1.0, w, s, bath, bath)).unwrap();
            resonance_hints(&sys)
        };
        let h = hints([1.0, 1.0], 0.0);
        assert_relative_eq!(h[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(h[1], 1.0, max_relative = 1e-15);
        let h = hints([1.0, 1.0], 0.3);
        assert_relative_eq!(h[0], 0.83666002653407552, max_relative = 1e-14);
        assert_relative_eq!(h[1], 1.1401754250991380, max_relative = 1e-14);
        let h = hints([1.0, 2.0], 0.0);
        assert_relative_eq!(h[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(h[1], 2.0, max_relative = 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn halving_tolerance_stays_within_previous_error(
            g in 0.02f64..0.5, w0 in 0.5f64..2.0, tol in 1e-9f64..1e-5,
        ) {
            let f = move |k: f64| 2.0 * g * k * k / (((k * k - w0 * w0).powi(2) + 4.0 * g * g * k * k) * PI);
            let coarse_opts = QuadratureOptions { tol_abs: tol, tol_rel: tol, ..Default::default() };
            let fine_opts = QuadratureOptions { tol_abs: tol / 2.0, tol_rel: tol / 2.0, ..Default::default() };
            let coarse = integrate(f, Domain::SemiInfinite(0.0), &[w0], &coarse_opts).unwrap();
            let fine = integrate(f, Domain::SemiInfinite(0.0), &[w0], &fine_opts).unwrap();
            prop_assert!((coarse.value - fine.value).abs() <= coarse.error + 1e-15);
        }
    }
}
