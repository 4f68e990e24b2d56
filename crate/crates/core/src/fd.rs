//! Finite-difference stencils on scalar fields over R^n.

use crate::MAX_DIM;

/// Second-order centered Laplacian with step `h`.
pub fn laplacian2<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let mut y = [0.0; MAX_DIM];
    y[..n].copy_from_slice(x);
    let f0 = f(x);
    let mut acc = 0.0;
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = f(&y[..n]);
        y[i] = x[i] - h;
        let fm = f(&y[..n]);
        y[i] = x[i];
        acc += fp + fm - 2.0 * f0;
    }
    acc / (h * h)
}

/// Fourth-order centered Laplacian with step `h`.
pub fn laplacian4<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let mut y = [0.0; MAX_DIM];
    y[..n].copy_from_slice(x);
    let f0 = f(x);
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = [0.0; 4];
        for (slot, off) in s.iter_mut().zip([-2.0, -1.0, 1.0, 2.0]) {
            y[i] = x[i] + off * h;
            *slot = f(&y[..n]);
        }
        y[i] = x[i];
        acc += (-s[0] + 16.0 * s[1] - 30.0 * f0 + 16.0 * s[2] - s[3]) / 12.0;
    }
    acc / (h * h)
}

/// Fourth-order centered first derivative of a scalar function.
pub fn derivative4<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> f64 {
    (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
}

/// Second-order centered first derivative of a scalar function.
pub fn derivative2<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> f64 {
    (f(t + h) - f(t - h)) / (2.0 * h)
}

/// Fourth-order gradient of a scalar field.
pub fn gradient4<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, x: &[f64], h: f64, out: &mut [f64]) {
    let n = x.len();
    let mut y = [0.0; MAX_DIM];
    y[..n].copy_from_slice(x);
    for i in 0..n {
        let mut s = [0.0; 4];
        for (slot, off) in s.iter_mut().zip([-2.0, -1.0, 1.0, 2.0]) {
            y[i] = x[i] + off * h;
            *slot = f(&y[..n]);
        }
        y[i] = x[i];
        out[i] = (s[0] - 8.0 * s[1] + 8.0 * s[2] - s[3]) / (12.0 * h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_laplacian() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let x = [0.3, -0.2, 0.5, 1.0, 2.0];
        assert!((laplacian2(&f, &x, 1e-3) - 10.0).abs() < 1e-6);
        assert!((laplacian4(&f, &x, 1e-2) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_of_cubic() {
        let d = derivative4(|t| t * t * t, 2.0, 0.1);
        assert!((d - 12.0).abs() < 1e-12);
    }
}
