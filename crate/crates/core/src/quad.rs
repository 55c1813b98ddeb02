//! Numerical integration helpers: Gauss-Legendre rules, cumulative
//! integration on uniform grids, and grid-based self-convolution.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Nodes are roots of the Legendre polynomial P_n, found by Newton iteration
/// from the Chebyshev initial guess; weights are 2 / ((1-x^2) P_n'(x)^2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least 2 nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with an n-point Gauss-Legendre rule.
pub fn gl_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let scale = 0.5 * (b - a);
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        total += w * f(mid + scale * x);
    }
    total * scale
}

/// Cumulative integral of sampled values on a uniform grid with spacing `h`.
///
/// Entry k of the result is the integral from x_0 to x_k. Each panel uses
/// the interpolatory cubic rule over a four-point stencil (one-sided at
/// the ends), so the global error is O(h^4). Requires at least 4 points.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "cumulative_integral needs at least 4 points");
    let f = values;
    let mut out = vec![0.0; n];
    out[1] = h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
    for k in 1..n - 2 {
        let panel = h / 24.0 * (-f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]);
        out[k + 1] = out[k] + panel;
    }
    let k = n - 2;
    let panel = h / 24.0 * (f[k - 2] - 5.0 * f[k - 1] + 19.0 * f[k] + 9.0 * f[k + 1]);
    out[k + 1] = out[k] + panel;
    out
}

/// Uniform grid over [lo, hi] with target spacing `step`.
///
/// The actual spacing divides the interval exactly; returns (points, h).
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<(Vec<f64>, f64)> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo && step > 0.0) {
        return Err(Error::InvalidGrid);
    }
    let panels = (((hi - lo) / step).ceil() as usize).max(4);
    let h = (hi - lo) / panels as f64;
    let points = (0..=panels).map(|k| lo + h * k as f64).collect();
    Ok((points, h))
}

/// Self-convolution (f * f)(y) evaluated by composite quadrature over
/// x in [lo, hi] with `panels` subdivisions (rounded up to even).
pub fn self_convolution_at<F: Fn(f64) -> f64>(f: &F, y: f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (hi - lo) / panels as f64;
    // Composite Simpson.
    let mut total = 0.0;
    for k in 0..=panels {
        let x = lo + h * k as f64;
        let coeff = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += coeff * f(x) * f(y - x);
    }
    total * h / 3.0
}
