use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{BubbleProfile, FarField, Profile};
use crate::error::{check_dim, Error, Result};
use crate::util::dist_sq;
use crate::MAX_DIM;

/// Options for the satellite-scale fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerOptions {
    /// Search bracket for κ in ζ = κ k^{-2}.
    pub kappa_range: (f64, f64),
    pub golden_iterations: usize,
}

impl Default for TowerOptions {
    fn default() -> Self {
        Self { kappa_range: (1e-3, 1e2), golden_iterations: 80 }
    }
}

/// Central bubble minus `k` equal satellites of scale ζ on the circle of
/// radius √(1-ζ²) in the (x₁,x₂)-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerProfile {
    pub base: BubbleProfile,
    pub k: usize,
    pub zeta_k: f64,
    /// κ with ζ = κ k^{-2}.
    pub kappa: f64,
    pub centers: Vec<Vec<f64>>,
    pub far_field: Option<FarField>,
}

impl TowerProfile {
    /// Tower with an explicit satellite scale.
    pub fn with_zeta(n: usize, k: usize, zeta: f64) -> Result<Self> {
        check_dim(n)?;
        if k < 2 {
            return Err(Error::Invalid(format!("tower needs k >= 2 satellites, got {k}")));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::DegenerateScale(zeta));
        }
        let radius = (1.0 - zeta * zeta).sqrt();
        let centers = (0..k)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / k as f64;
                let mut c = vec![0.0; n];
                c[0] = radius * th.cos();
                c[1] = radius * th.sin();
                c
            })
            .collect();
        Ok(Self {
            base: BubbleProfile::new(n)?,
            k,
            zeta_k: zeta,
            kappa: zeta * (k * k) as f64,
            centers,
            far_field: None,
        })
    }

    /// Tower with κ chosen to minimise the equation residual near a satellite.
    pub fn fitted(n: usize, k: usize, opts: &TowerOptions) -> Result<Self> {
        let kk = (k * k) as f64;
        let objective = |log_kappa: f64| -> f64 {
            match Self::with_zeta(n, k, log_kappa.exp() / kk) {
                Ok(t) => t.satellite_residual(),
                Err(_) => f64::INFINITY,
            }
        };
        let (mut a, mut b) = (opts.kappa_range.0.ln(), opts.kappa_range.1.ln());
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (objective(c), objective(d));
        for _ in 0..opts.golden_iterations {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = objective(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = objective(d);
            }
        }
        Self::with_zeta(n, k, (0.5 * (a + b)).exp() / kk)
    }

    pub fn n(&self) -> usize {
        self.base.n
    }

    /// Attach fitted far-field constants.
    pub fn with_far_field(mut self, ff: FarField) -> Self {
        self.far_field = Some(ff);
        self
    }

    /// Equation residual |Q|^{p-1}Q + ΔQ, using ΔU = -U^p for each bubble.
    pub fn equation_residual(&self, x: &[f64]) -> f64 {
        let p = self.base.p;
        let q = self.value(x);
        let mut lap = -self.base.value(x).powf(p);
        for c in &self.centers {
            lap += self.base.scaled_value(x, c, self.zeta_k).powf(p);
        }
        q.abs().powf(p - 1.0) * q + lap
    }

    /// RMS of the equation residual around the first satellite, normalised by
    /// the satellite potential times the central bubble's value there.
    pub fn satellite_residual(&self) -> f64 {
        let n = self.n();
        let c = &self.centers[0];
        let p = self.base.p;
        let u_c = self.base.value(c);
        let mut acc = 0.0;
        let mut count = 0.0;
        let mut x = [0.0; MAX_DIM];
        for &s in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            for dir in 0..6 {
                x[..n].copy_from_slice(c);
                let ang = dir as f64 * PI / 3.0;
                let r = s * self.zeta_k;
                if dir < 4 {
                    x[0] += r * (ang).cos();
                    x[1] += r * (ang).sin();
                } else {
                    x[2] += if dir == 4 { r } else { -r };
                }
                let sat = self.base.scaled_value(&x[..n], c, self.zeta_k);
                let scale = p * sat.powf(p - 1.0) * u_c;
                let res = self.equation_residual(&x[..n]) / scale;
                acc += res * res;
                count += 1.0;
            }
        }
        (acc / count).sqrt()
    }

    /// Rotation of a point by 2π/k in the (x₁,x₂)-plane.
    pub fn rotate_sector(&self, x: &[f64], out: &mut [f64]) {
        let th = 2.0 * PI / self.k as f64;
        out.copy_from_slice(x);
        out[0] = th.cos() * x[0] - th.sin() * x[1];
        out[1] = th.sin() * x[0] + th.cos() * x[1];
    }
}

impl Profile for TowerProfile {
    fn dim(&self) -> usize {
        self.base.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let w = self.base.weight();
        let z2 = self.zeta_k * self.zeta_k;
        let amp = self.base.alpha_n * self.zeta_k.powf(w);
        let sat: f64 = self.centers.iter().map(|c| (z2 + dist_sq(x, c)).powf(-w)).sum();
        self.base.value(x) - amp * sat
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.base.n;
        let w = self.base.weight();
        let z2 = self.zeta_k * self.zeta_k;
        let amp = self.base.alpha_n * self.zeta_k.powf(w);
        let mut q = self.base.value_grad(x, grad);
        for c in &self.centers {
            let s = z2 + dist_sq(x, c);
            let v = amp * s.powf(-w);
            q -= v;
            let f = 2.0 * w * v / s;
            for i in 0..n {
                grad[i] += f * (x[i] - c[i]);
            }
        }
        q
    }

    fn bubble(&self) -> &BubbleProfile {
        &self.base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tower8() -> TowerProfile {
        TowerProfile::fitted(5, 8, &TowerOptions::default()).unwrap()
    }

    #[test]
    fn zeta_scales_like_inverse_square() {
        let t16 = TowerProfile::fitted(5, 16, &TowerOptions::default()).unwrap();
        let t32 = TowerProfile::fitted(5, 32, &TowerOptions::default()).unwrap();
        let ratio = t16.zeta_k / t32.zeta_k;
        assert!(ratio > 3.0 && ratio < 5.0, "zeta ratio {ratio}");
        assert!(t32.satellite_residual() < t16.satellite_residual());
    }

    #[test]
    fn satellite_peak_is_negative() {
        let t = tower8();
        let q = t.value(&t.centers[0]);
        let peak = t.base.alpha_n * t.zeta_k.powf(-t.base.weight());
        assert!(q < 0.0 && (q + peak).abs() < 0.05 * peak);
    }

    #[test]
    fn positive_near_origin() {
        let t = tower8();
        assert!(t.value(&[0.0; 5]) > 0.0);
        assert!(t.value(&[0.3, 0.2, 0.0, 0.1, 0.0]) > 0.0);
    }

    #[test]
    fn gradient_matches_fd() {
        let t = tower8();
        let x = [0.4, -0.7, 0.2, 0.1, -0.3];
        let mut g = [0.0; 5];
        t.value_grad(&x, &mut g);
        let mut gf = [0.0; 5];
        crate::fd::gradient4(&|y: &[f64]| t.value(y), &x, 1e-4, &mut gf);
        for i in 0..5 {
            assert!((g[i] - gf[i]).abs() < 1e-7 * (1.0 + g[i].abs()), "{i}: {} {}", g[i], gf[i]);
        }
    }

    #[test]
    fn degenerate_scale_rejected() {
        assert!(matches!(TowerProfile::with_zeta(5, 8, 0.0), Err(Error::DegenerateScale(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetries_hold(x in proptest::collection::vec(-3.0f64..3.0, 5)) {
            let t = TowerProfile::with_zeta(5, 8, 0.02).unwrap();
            let q = t.value(&x);
            let scale = q.abs().max(1.0);
            let mut y = vec![0.0; 5];
            t.rotate_sector(&x, &mut y);
            prop_assert!((t.value(&y) - q).abs() <= 1e-12 * scale);
            for j in 1..5 {
                let mut z = x.clone();
                z[j] = -z[j];
                prop_assert!((t.value(&z) - q).abs() <= 1e-12 * scale);
            }
            let r2: f64 = x.iter().map(|v| v * v).sum();
            prop_assume!(r2 > 1e-2);
            let inv: Vec<f64> = x.iter().map(|v| v / r2).collect();
            let kelvin = r2.powf(-1.5) * t.value(&inv);
            prop_assert!((kelvin - q).abs() <= 1e-11 * scale);
        }
    }
}
