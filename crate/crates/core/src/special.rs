//! Exponential integrals for positive real arguments.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^x · E₁(x)` for `x > 0`.
pub fn scaled_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        // E₁(x) = −γ − ln x − Σ (−x)^k / (k · k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return x.exp() * (-EULER_GAMMA - x.ln() - sum);
    }
    // Modified Lentz evaluation of the continued fraction
    // E₁(x) = e^{−x} / (x + 1 − 1 / (x + 3 − 4 / (x + 5 − …))).
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `e^{−x} · Ei(x)` for `0 < x ≤ 700`.
pub fn scaled_ei(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 40.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add < 1e-17 * sum {
                break;
            }
        }
        return (-x).exp() * (EULER_GAMMA + x.ln() + sum);
    }
    // Asymptotic series, truncated at its smallest term.
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..(x as usize) {
        let next = term * k as f64 / x;
        if next > term || next < 1e-17 {
            break;
        }
        term = next;
        sum += term;
    }
    sum / x
}

/// `e^{−x} Ei(x) − e^{x} E₁(x)` for `x > 0`; even-order terms cancel, so
/// large arguments use the odd part of the asymptotic series directly.
pub fn ei_e1_difference(x: f64) -> f64 {
    if x < 40.0 {
        return scaled_ei(x) - scaled_e1(x);
    }
    // 2 Σ_{k odd} k! / x^{k+1}
    let inv2 = 1.0 / (x * x);
    let mut term = inv2;
    let mut sum = term;
    let mut k = 1.0;
    while k < x {
        let next = term * (k + 1.0) * (k + 2.0) * inv2;
        if next > term || next < 1e-18 * sum {
            break;
        }
        term = next;
        sum += term;
        k += 2.0;
    }
    2.0 * sum
}
