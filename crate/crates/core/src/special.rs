//! Regularized incomplete beta function and bracketed root finding.

use statrs::function::gamma::ln_gamma;

/// Convergence tolerance of the continued fraction.
const CF_TOL: f64 = 1e-12;
const CF_MAX_ITER: usize = 500;
/// Lentz guard against division by zero.
const TINY: f64 = 1e-300;

/// `I_x(a, b)` for `a, b > 0` and `x` in `[0, 1]`.
///
/// Continued fraction (modified Lentz) with the symmetry switch
/// `I_x(a, b) = 1 - I_{1-x}(b, a)` for `x > (a + 1) / (a + b + 2)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0, "beta shapes must be positive: a={a}, b={b}");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - beta_reg_cf(b, a, 1.0 - x)
    } else {
        beta_reg_cf(a, b, x)
    }
}

fn beta_reg_cf(a: f64, b: f64, x: f64) -> f64 {
    let ln_front = a * x.ln() + b * (-x).ln_1p() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let front = ln_front.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_TOL {
            break;
        }
    }
    (front * h).clamp(0.0, 1.0)
}

/// Outcome of a bracketed bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub root: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Bisects a nondecreasing `f` on `[lo, hi]` for `f(x) = target`, stopping
/// once the bracket is narrower than `tol` or after `max_iter` halvings.
pub fn bisect_increasing<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Bisection {
    for i in 0..max_iter {
        if hi - lo < tol {
            return Bisection {
                root: 0.5 * (lo + hi),
                iterations: i,
                converged: true,
            };
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Bisection {
        root: 0.5 * (lo + hi),
        iterations: max_iter,
        converged: hi - lo < tol,
    }
}
