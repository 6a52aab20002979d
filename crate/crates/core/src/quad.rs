//! One-dimensional quadrature used for normalising constants, weight
//! integrals and the closed-form references.
//!
//! Three rules are provided: fixed Gauss–Legendre, adaptive Gauss–Legendre
//! bisection for smooth integrands, and tanh–sinh for integrands with
//! algebraic endpoint singularities such as `|x|^{-1/2}`.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Fixed-order Gauss–Legendre on `[a, b]`.
pub fn gauss_fixed<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    x.iter().zip(&w).map(|(xi, wi)| wi * f(c + d * xi)).sum::<f64>() * d
}

fn gl20_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gl20();
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    x.iter().zip(w).map(|(xi, wi)| wi * f(c + d * xi)).sum::<f64>() * d
}

/// Adaptive bisection with a 20-point Gauss–Legendre panel.
///
/// `tol` is an absolute tolerance on the whole interval.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gl20_panel(&f, a, b);
    adaptive_step(&f, a, b, whole, tol, 0)
}

fn adaptive_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = gl20_panel(f, a, m);
    let right = gl20_panel(f, m, b);
    let refined = left + right;
    if depth >= 48 || (refined - whole).abs() <= tol.max(1e-15 * refined.abs()) {
        return refined;
    }
    adaptive_step(f, a, m, left, 0.5 * tol, depth + 1) + adaptive_step(f, m, b, right, 0.5 * tol, depth + 1)
}

/// Tanh–sinh (double exponential) quadrature on a finite interval.
///
/// The integrand is never evaluated at the endpoints, so integrable
/// algebraic singularities there are handled without special treatment.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let len = b - a;
    // Node pair at abscissa tau: offsets from each end and the common weight.
    let pair = |tau: f64| -> Option<(f64, f64)> {
        let u = FRAC_PI_2 * tau.sinh();
        let offset = len / (1.0 + (2.0 * u).exp());
        let cosh_u = u.cosh();
        let weight = len * 0.5 * FRAC_PI_2 * tau.cosh() / (cosh_u * cosh_u);
        if offset <= 0.0 || !weight.is_finite() || weight == 0.0 {
            None
        } else {
            Some((offset, weight))
        }
    };
    let eval_pair = |tau: f64| -> f64 {
        match pair(tau) {
            Some((off, w)) => {
                let lo = a + off;
                let hi = b - off;
                let mut s = 0.0;
                if lo > a && lo < b {
                    s += w * f(lo);
                }
                if hi > a && hi < b {
                    s += w * f(hi);
                }
                s
            }
            None => 0.0,
        }
    };
    let tau_max = 4.0;
    let mut step = 0.5;
    let mut sum = {
        let (_, w0) = pair(0.0).expect("centre node");
        w0 * f(a + 0.5 * len)
    };
    let mut k = 1;
    while k as f64 * step <= tau_max {
        sum += eval_pair(k as f64 * step);
        k += 1;
    }
    let mut estimate = sum * step;
    for _ in 0..10 {
        step *= 0.5;
        let mut k = 1;
        while k as f64 * step <= tau_max {
            sum += eval_pair(k as f64 * step);
            k += 2;
        }
        let next = sum * step;
        if (next - estimate).abs() <= tol.max(1e-15 * next.abs()) {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `∫_a^∞ f` through the map `x = a + s / (1 - s)`, `s ∈ (0, 1)`.
pub fn semi_infinite<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    tanh_sinh(
        |s| {
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            let jac = 1.0 / (one_minus * one_minus);
            let v = f(x) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}
