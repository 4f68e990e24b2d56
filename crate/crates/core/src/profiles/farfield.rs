use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{KernelBasis, Profile};
use crate::error::{Error, Result};
use crate::util::{geomspace, linear_fit};
use crate::MAX_DIM;

/// Far-field constants of a profile:
/// z₀ ≈ D (2-|y|²)(1+|y|²)^{-n/2}, ∂₁Q ≈ E y₁ (1+|y|²)^{-n/2},
/// |y|^{n-2} Q(y) → α_n (1 + d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct FarField {
    pub D: f64,
    pub E: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub r_min: f64,
    pub r_max: f64,
    /// Number of radii; each radius uses `directions` random directions.
    pub samples: usize,
    pub directions: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { r_min: 20.0, r_max: 200.0, samples: 24, directions: 16, seed: 0x5eed }
    }
}

/// Least-squares fit of the far-field constants over an annulus.
pub fn fit_farfield_constants<P: Profile + ?Sized>(profile: &P, opts: &FitOptions) -> Result<FarField> {
    if opts.r_max < 1.5 * opts.r_min || opts.samples < 4 || opts.directions == 0 {
        return Err(Error::IllConditioned(format!(
            "annulus [{}, {}] with {} radii is too narrow",
            opts.r_min, opts.r_max, opts.samples
        )));
    }
    let n = profile.dim();
    let alpha = profile.bubble().alpha_n;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dirs: Vec<Vec<f64>> = (0..opts.directions)
        .map(|_| loop {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = crate::util::norm(&v);
            v.iter_mut().for_each(|c| *c /= norm);
            // Keep a visible x₁ component so the gradient fit is well posed.
            if v[0].abs() > 0.3 {
                break v;
            }
        })
        .collect();
    let kb = KernelBasis::new(profile);
    // Each ratio is regressed on 1/r²; the intercept is the far-field constant.
    let mut d_pts = Vec::with_capacity(opts.samples);
    let mut e_pts = Vec::with_capacity(opts.samples);
    let mut limit_pts = Vec::with_capacity(opts.samples);
    let mut x = [0.0; MAX_DIM];
    let mut g = [0.0; MAX_DIM];
    for r in geomspace(opts.r_min, opts.r_max, opts.samples) {
        let s = 1.0 + r * r;
        let decay = s.powf(-(n as f64) / 2.0);
        let (mut shell, mut d_ratio, mut e_ratio) = (0.0, 0.0, 0.0);
        for w in &dirs {
            for i in 0..n {
                x[i] = r * w[i];
            }
            let q = profile.value_grad(&x[..n], &mut g[..n]);
            let z0 = kb.eval(0, &x[..n])?;
            d_ratio += z0 / ((2.0 - r * r) * decay);
            e_ratio += g[0] / (x[0] * decay);
            shell += q * r.powi(n as i32 - 2);
        }
        let m = dirs.len() as f64;
        let u = 1.0 / (r * r);
        d_pts.push((u, d_ratio / m));
        e_pts.push((u, e_ratio / m));
        limit_pts.push((u, shell / m));
    }
    let intercept = |pts: &[(f64, f64)]| linear_fit(pts).1;
    Ok(FarField {
        D: intercept(&d_pts),
        E: intercept(&e_pts),
        d: intercept(&limit_pts) / alpha - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{BubbleProfile, TowerOptions, TowerProfile};

    #[test]
    fn single_bubble_constants() {
        for n in 5..=7 {
            let u = BubbleProfile::new(n).unwrap();
            let ff = fit_farfield_constants(&u, &FitOptions::default()).unwrap();
            let w = (n as f64 - 2.0) / 2.0;
            assert!((ff.D / (w * u.alpha_n) - 1.0).abs() < 1e-5, "D = {}", ff.D);
            assert!((ff.E / (-(n as f64 - 2.0) * u.alpha_n) - 1.0).abs() < 1e-5, "E = {}", ff.E);
            assert!(ff.d.abs() < 1e-5, "d = {}", ff.d);
        }
    }

    #[test]
    fn narrow_annulus_rejected() {
        let u = BubbleProfile::new(5).unwrap();
        let opts = FitOptions { r_min: 20.0, r_max: 25.0, ..Default::default() };
        assert!(matches!(fit_farfield_constants(&u, &opts), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn tower_defect_decays() {
        let opts = TowerOptions::default();
        let fit = |k| {
            let t = TowerProfile::fitted(5, k, &opts).unwrap();
            fit_farfield_constants(&t, &FitOptions::default()).unwrap()
        };
        let (d8, d16, d32) = (fit(8).d, fit(16).d, fit(32).d);
        assert!(d8 < 0.0 && d16 < 0.0 && d32 < 0.0);
        // |d_k|·k is bounded and decreasing.
        let scaled = [8.0 * d8.abs(), 16.0 * d16.abs(), 32.0 * d32.abs()];
        assert!(scaled[0] < 3.0 && scaled[1] < scaled[0] && scaled[2] < scaled[1], "{scaled:?}");
    }
}
