//! Composite Gauss–Legendre quadrature on boxes, with a resolution-doubling check.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ORDER: usize = 16;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tensor composite rule with `panels` subintervals per axis.
pub fn integrate_box<F: Fn(&[f64]) -> C64>(f: &F, lo: &[f64], hi: &[f64], panels: usize) -> C64 {
    integrate_box_with_mass(f, lo, hi, panels, ORDER).0
}

/// Tensor composite rule with an explicit per-panel order.
pub fn integrate_box_rule<F: Fn(&[f64]) -> C64>(f: &F, lo: &[f64], hi: &[f64], panels: usize, order: usize) -> C64 {
    integrate_box_with_mass(f, lo, hi, panels, order).0
}

/// The integral together with the integral of `|f|`.
fn integrate_box_with_mass<F: Fn(&[f64]) -> C64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    panels: usize,
    order: usize,
) -> (C64, f64) {
    let d = lo.len();
    let (nodes, weights) = gauss_legendre(order);
    // 1D abscissae and weights per axis.
    let axes: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|i| {
            let h = (hi[i] - lo[i]) / panels as f64;
            (0..panels)
                .flat_map(|p| {
                    let a = lo[i] + p as f64 * h;
                    nodes.iter().zip(&weights).map(move |(x, w)| (a + 0.5 * h * (x + 1.0), 0.5 * h * w))
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut total = C64::new(0.0, 0.0);
    let mut mass = 0.0;
    let len = axes[0].len();
    loop {
        let mut w = 1.0;
        for i in 0..d {
            let (xi, wi) = axes[i][idx[i]];
            x[i] = xi;
            w *= wi;
        }
        let v = f(&x);
        total += v * w;
        mass += v.norm() * w;
        let mut i = d;
        loop {
            if i == 0 {
                return (total, mass);
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < len {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// Integrates with `p` and `2p` panels until two resolutions agree to `rel_tol`,
/// measured against `∫|f|` so that cancelling integrands are judged fairly.
pub fn integrate_box_checked<F: Fn(&[f64]) -> C64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    rel_tol: f64,
    max_panels: usize,
) -> Result<C64> {
    let mut panels = 2;
    let (mut prev, _) = integrate_box_with_mass(f, lo, hi, panels, ORDER);
    let mut residual = f64::INFINITY;
    while panels * 2 <= max_panels {
        panels *= 2;
        let (next, mass) = integrate_box_with_mass(f, lo, hi, panels, ORDER);
        residual = (next - prev).norm();
        if residual <= rel_tol * mass {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerics { message: format!("quadrature did not settle with {panels} panels"), residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_box_integral() {
        let f = |x: &[f64]| C64::new((-std::f64::consts::PI * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0);
        let v = integrate_box_checked(&f, &[-8.0, -8.0], &[8.0, 8.0], 1e-12, 64).unwrap();
        assert!((v.re - 1.0).abs() < 1e-13);
        let spiky = |x: &[f64]| C64::new(1.0 / (x[0].abs() + 1e-9), 0.0);
        assert!(matches!(integrate_box_checked(&spiky, &[-1.0], &[1.0], 1e-12, 8), Err(Error::Numerics { .. })));
    }
}
