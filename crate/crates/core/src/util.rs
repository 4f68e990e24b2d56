//! Small vector helpers and special functions shared across modules.

use statrs::function::gamma::{gamma, ln_gamma};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Area of the unit sphere in R^n.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Ratio Γ(a)/Γ(b) computed through log-gamma.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    (ln_gamma(a) - ln_gamma(b)).exp()
}

/// Least-squares slope of log|y| against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && y.abs() > 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    linear_fit(&pts).0
}

/// Ordinary least-squares line through `pts`, returned as (slope, intercept).
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Geometrically spaced points from `a` to `b` inclusive.
pub fn geomspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|i| (la + (lb - la) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area(3) - 4.0 * pi).abs() < 1e-12);
        assert!((sphere_area(5) - 8.0 * pi * pi / 3.0).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = geomspace(1.0, 100.0, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 1.5).abs() < 1e-12);
    }
}
