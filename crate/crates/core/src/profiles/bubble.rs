use serde::{Deserialize, Serialize};

use super::Profile;
use crate::error::{check_dim, Result};
use crate::util::norm_sq;

/// Normalization making the bubble an exact solution of ΔU + U^p = 0.
pub fn bubble_alpha(n: usize) -> f64 {
    let nf = n as f64;
    (nf * (nf - 2.0)).powf((nf - 2.0) / 4.0)
}

/// Critical exponent (n+2)/(n-2).
pub fn critical_exponent(n: usize) -> f64 {
    (n as f64 + 2.0) / (n as f64 - 2.0)
}

/// The positive radial bubble U(x) = α (1+|x|²)^{-(n-2)/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleProfile {
    pub n: usize,
    pub alpha_n: f64,
    pub p: f64,
}

impl BubbleProfile {
    pub fn new(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self { n, alpha_n: bubble_alpha(n), p: critical_exponent(n) })
    }

    /// Half of n - 2, the scaling weight of the profile.
    pub fn weight(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }

    /// Value as a function of |x|².
    pub fn radial(&self, r2: f64) -> f64 {
        self.alpha_n * (1.0 + r2).powf(-self.weight())
    }

    /// Bubble of scale `scale` centred at `center` (same dimension).
    pub fn scaled_value(&self, x: &[f64], center: &[f64], scale: f64) -> f64 {
        let d2 = crate::util::dist_sq(x, center);
        self.alpha_n * scale.powf(self.weight()) * (scale * scale + d2).powf(-self.weight())
    }
}

impl Profile for BubbleProfile {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.radial(norm_sq(x))
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let s = 1.0 + norm_sq(x);
        let u = self.alpha_n * s.powf(-self.weight());
        let c = -(self.n as f64 - 2.0) * u / s;
        for (g, xi) in grad.iter_mut().zip(x) {
            *g = c * xi;
        }
        u
    }

    fn bubble(&self) -> &BubbleProfile {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::laplacian4;

    #[test]
    fn value_at_origin_n5() {
        let u = BubbleProfile::new(5).unwrap();
        assert!((u.value(&[0.0; 5]) - 15f64.powf(0.75)).abs() < 1e-12);
        let x = [1.0, 0.0, 0.0, 0.0, 0.0];
        assert!((u.value(&x) - 15f64.powf(0.75) * 2f64.powf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn far_field_limit() {
        let u = BubbleProfile::new(6).unwrap();
        let r = 1e4;
        let v = u.value(&[r, 0.0, 0.0, 0.0, 0.0, 0.0]) * r.powi(4);
        assert!((v / u.alpha_n - 1.0).abs() < 1e-7);
    }

    #[test]
    fn solves_yamabe_equation() {
        for n in 5..=7 {
            let u = BubbleProfile::new(n).unwrap();
            let x: Vec<f64> = (0..n).map(|i| 0.3 - 0.17 * i as f64).collect();
            let f = |y: &[f64]| u.value(y);
            let res = laplacian4(&f, &x, 1e-2) + u.value(&x).powf(u.p);
            assert!(res.abs() < 1e-6 * u.value(&x).powf(u.p), "n={n}: {res}");
        }
    }

    #[test]
    fn rejects_low_dimension() {
        assert!(BubbleProfile::new(4).is_err());
    }
}
