//! Gauss-Legendre rules and composite rules on geometrically graded panels.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Panels [0, start], [start, start r], ... up to `end`.
pub fn geometric_panels(start: f64, ratio: f64, end: f64) -> Result<Vec<(f64, f64)>> {
    if !(start > 0.0 && ratio > 1.0 && end > start) {
        return Err(Error::Param(format!("bad panel spec start = {start}, ratio = {ratio}, end = {end}")));
    }
    let mut out = vec![(0.0, start)];
    let mut a = start;
    while a < end {
        let b = (a * ratio).min(end);
        out.push((a, b));
        a = b;
    }
    Ok(out)
}

/// Splits every panel in two.
pub fn bisect_panels(panels: &[(f64, f64)]) -> Vec<(f64, f64)> {
    panels
        .iter()
        .flat_map(|&(a, b)| {
            let m = 0.5 * (a + b);
            [(a, m), (m, b)]
        })
        .collect()
}

/// Composite rule of the given order over the panels.
pub fn composite(panels: &[(f64, f64)], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(panels.len() * order);
    let mut weights = Vec::with_capacity(panels.len() * order);
    for &(a, b) in panels {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(c + h * xi);
            weights.push(h * wi);
        }
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // int x^30 over [-1, 1] = 2/31
        let p: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((p - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn composite_exponential() {
        let panels = geometric_panels(1e-3, 2.0, 40.0).unwrap();
        let (x, w) = composite(&panels, 16);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * (-x).exp()).sum();
        assert!((v - (1.0 - (-40f64).exp())).abs() < 1e-14);
    }
}
