//! Gram-type pairings of the tower kernels against their far-field corrected
//! counterparts, the tower version of c₁/c₂, and pairings between individual
//! satellite kernels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::cubature::{design_directions, CubatureOptions, Hotspot, Region};
use super::{dilation_far_field, Estimate};
use crate::error::{Error, Result};
use crate::profiles::{kernels_from_jet, FarField, Profile, TowerProfile};
use crate::util::dot;
use crate::MAX_DIM;

/// Pairings a_{ij} = ∫ r_i z_j between corrected rows r_i and kernels z_j.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramMatrix {
    pub n: usize,
    pub k: usize,
    pub entries: Vec<Vec<f64>>,
    /// Entrywise difference between two cubature orders.
    pub errors: Vec<Vec<f64>>,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        3 * self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    /// Block [[a_{c,c}, a_{c,K}], [a_{K,c}, a_{K,K}]] pairing translation c
    /// (1 or 2) with its Kelvin generator K = n+1+c.
    pub fn kelvin_block(&self, c: usize) -> [[f64; 2]; 2] {
        let kk = self.n + 1 + c;
        [[self.get(c, c), self.get(c, kk)], [self.get(kk, c), self.get(kk, kk)]]
    }

    /// |det| of a Kelvin block relative to the product of its diagonal moduli.
    pub fn kelvin_block_conditioning(&self, c: usize) -> f64 {
        let b = self.kelvin_block(c);
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        det.abs() / (b[0][0] * b[1][1]).abs()
    }

    /// Largest entrywise error estimate.
    pub fn max_error(&self) -> f64 {
        self.errors.iter().flatten().fold(0.0, |m, e| m.max(*e))
    }
}

fn satellite_spot(tower: &TowerProfile, index: usize) -> Hotspot {
    let c = &tower.centers[index];
    let r = c[0].hypot(c[1]);
    Hotspot {
        center: [c[0], c[1]],
        radius: 0.5 * r * (PI / tower.k as f64).sin(),
        scale: tower.zeta_k,
    }
}

fn far_field(tower: &TowerProfile) -> Result<FarField> {
    tower
        .far_field
        .ok_or_else(|| Error::Invalid("tower far-field constants must be fitted first".into()))
}

/// Corrected rows r_i built from the kernels z at `x`.
fn corrected_rows(ff: &FarField, x: &[f64], z: &[f64], rows: &mut [f64]) {
    let n = x.len();
    let r2 = dot(x, x);
    let decay = (1.0 + r2).powf(-(n as f64) / 2.0);
    rows[..3 * n].copy_from_slice(&z[..3 * n]);
    rows[0] = z[0] - ff.D * dilation_far_field(n, r2);
    for i in 0..n {
        rows[i + 1] = z[i + 1] - ff.E * x[i] * decay;
    }
    rows[n + 2] = -2.0 * x[0] * rows[0] + r2 * rows[1];
    rows[n + 3] = -2.0 * x[1] * rows[0] + r2 * rows[2];
}

/// Evaluate the tower jet once at (x₁, x₂, ρ) and expand it over the x'
/// design directions, calling `each(x, q, grad)`.
fn for_each_direction<F: FnMut(&[f64], f64, &[f64])>(tower: &TowerProfile, p: &[f64; 3], mut each: F) {
    let n = tower.n();
    let mut y = [0.0; MAX_DIM];
    let mut g = [0.0; MAX_DIM];
    y[..3].copy_from_slice(p);
    let q = tower.value_grad(&y[..n], &mut g[..n]);
    let d_rho = g[2];
    let mut x = [0.0; MAX_DIM];
    let mut gx = [0.0; MAX_DIM];
    x[0] = p[0];
    x[1] = p[1];
    gx[0] = g[0];
    gx[1] = g[1];
    for (m, s) in design_directions(n) {
        x[m] = s * p[2];
        gx[m] = s * d_rho;
        each(&x[..n], q, &gx[..n]);
        x[m] = 0.0;
        gx[m] = 0.0;
    }
}

/// Rotation by `phi` in the (x₁,x₂)-plane acting on kernel indices.
fn index_rotation(n: usize, phi: f64) -> Vec<Vec<f64>> {
    let m = 3 * n;
    let mut t: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let (s, c) = phi.sin_cos();
    let mut pairs = vec![(1, 2), (n + 2, n + 3)];
    pairs.extend((2..n).map(|l| (n + 2 + l, 2 * n + l)));
    for (a, b) in pairs {
        t[a][a] = c;
        t[a][b] = -s;
        t[b][a] = s;
        t[b][b] = c;
    }
    t
}

fn sector_gram(tower: &TowerProfile, ff: &FarField, order: usize, outer: f64) -> Vec<Vec<f64>> {
    let n = tower.n();
    let m = 3 * n;
    let k = tower.k as f64;
    let region = Region { phi: (-PI / k, PI / k), spots: vec![satellite_spot(tower, 0)] };
    let dirs = 2.0 * (n as f64 - 2.0);
    let integrand = |p: &[f64; 3], w: f64, acc: &mut [f64]| {
        let mut z = [0.0; 3 * MAX_DIM];
        let mut r = [0.0; 3 * MAX_DIM];
        let wd = w / dirs;
        for_each_direction(tower, p, |x, q, g| {
            kernels_from_jet(q, g, x, &mut z[..m]);
            corrected_rows(ff, x, &z, &mut r);
            for i in 0..m {
                let ri = wd * r[i];
                if ri != 0.0 {
                    let row = &mut acc[i * m..(i + 1) * m];
                    for (a, zj) in row.iter_mut().zip(&z[..m]) {
                        *a += ri * zj;
                    }
                }
            }
        });
    };
    let flat = region.integrate(n, order, outer, m * m, &integrand);
    // Sum the sector over all k rotations: G = Σ T M Tᵀ.
    let sector: Vec<Vec<f64>> = flat.chunks(m).map(<[f64]>::to_vec).collect();
    let mut full = vec![vec![0.0; m]; m];
    for j in 0..tower.k {
        let t = index_rotation(n, 2.0 * PI * j as f64 / k);
        for a in 0..m {
            for b in 0..m {
                let mut s = 0.0;
                for c in 0..m {
                    if t[a][c] == 0.0 {
                        continue;
                    }
                    for d in 0..m {
                        s += t[a][c] * sector[c][d] * t[b][d];
                    }
                }
                full[a][b] += s;
            }
        }
    }
    full
}

/// Pairings of all kernels against the corrected rows for a fitted tower.
pub fn gram_matrix(tower: &TowerProfile, opts: &CubatureOptions) -> Result<GramMatrix> {
    let ff = far_field(tower)?;
    let hi = sector_gram(tower, &ff, opts.order, opts.outer_radius);
    let lo = sector_gram(tower, &ff, opts.check_order, opts.outer_radius);
    let errors = hi
        .iter()
        .zip(&lo)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect())
        .collect();
    Ok(GramMatrix { n: tower.n(), k: tower.k, entries: hi, errors })
}

/// c₁ = -p∫|Q|^{p-1}z₀ and c₂ = ∫(z₀ - D g)z₀ for a fitted tower.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TowerConstants {
    pub c1: Estimate,
    pub c2: Estimate,
}

pub fn tower_c1_c2(tower: &TowerProfile, opts: &CubatureOptions) -> Result<TowerConstants> {
    let ff = far_field(tower)?;
    let n = tower.n();
    let p = tower.base.p;
    let k = tower.k as f64;
    let region = Region { phi: (-PI / k, PI / k), spots: vec![satellite_spot(tower, 0)] };
    let run = |order: usize| {
        let f = |pt: &[f64; 3], w: f64, acc: &mut [f64]| {
            let mut y = [0.0; MAX_DIM];
            let mut g = [0.0; MAX_DIM];
            y[..3].copy_from_slice(pt);
            let q = tower.value_grad(&y[..n], &mut g[..n]);
            let z0 = (n as f64 - 2.0) / 2.0 * q + dot(&g[..n], &y[..n]);
            let r2 = dot(&y[..n], &y[..n]);
            acc[0] += w * -p * q.abs().powf(p - 1.0) * z0;
            acc[1] += w * (z0 - ff.D * dilation_far_field(n, r2)) * z0;
        };
        let v = region.integrate(n, order, opts.outer_radius, 2, &f);
        [k * v[0], k * v[1]]
    };
    let (hi, lo) = (run(opts.order), run(opts.check_order));
    let est = |i: usize| Estimate { value: hi[i], error: (hi[i] - lo[i]).abs() };
    Ok(TowerConstants { c1: est(0), c2: est(1) })
}

/// Kernel Z_{αl} of an individual bubble of the tower: l = 0 is the central
/// bubble, l ≥ 1 the satellites. α = 0 is the dilation kernel about the
/// bubble's own centre, α = 1, 2 the translations rotated to the satellite's
/// angle (scaled by the orbit radius), α ≥ 3 plain translations.
#[derive(Debug, Clone, Copy)]
struct BubbleKernel {
    center: [f64; 2],
    scale: f64,
    angle: f64,
    factor: f64,
}

impl BubbleKernel {
    fn new(tower: &TowerProfile, l: usize) -> Self {
        if l == 0 {
            return Self { center: [0.0; 2], scale: 1.0, angle: 0.0, factor: 1.0 };
        }
        let c = &tower.centers[l - 1];
        let r = c[0].hypot(c[1]);
        Self { center: [c[0], c[1]], scale: tower.zeta_k, angle: c[1].atan2(c[0]), factor: r }
    }

    fn eval(&self, tower: &TowerProfile, alpha: usize, x: &[f64]) -> f64 {
        let b = &tower.base;
        let w = b.weight();
        let mut d = [0.0; MAX_DIM];
        d[..x.len()].copy_from_slice(x);
        d[0] -= self.center[0];
        d[1] -= self.center[1];
        let d = &d[..x.len()];
        let s = self.scale * self.scale + dot(d, d);
        let u = b.alpha_n * self.scale.powf(w) * s.powf(-w);
        let gcoef = -2.0 * w * u / s;
        let (sa, ca) = self.angle.sin_cos();
        match alpha {
            0 => w * u + gcoef * dot(d, d),
            1 => self.factor * gcoef * (ca * d[0] + sa * d[1]),
            2 => self.factor * gcoef * (-sa * d[0] + ca * d[1]),
            a => gcoef * d[a - 1],
        }
    }
}

/// ∫ Z_{αl} Z_{βj} over R^n for individual tower bubbles (see [`BubbleKernel`]).
pub fn kernel_pair_integral(
    tower: &TowerProfile,
    alpha: usize,
    l: usize,
    beta: usize,
    j: usize,
    opts: &CubatureOptions,
) -> Result<Estimate> {
    let n = tower.n();
    if alpha > n || beta > n {
        return Err(Error::KernelIndex { index: alpha.max(beta), n });
    }
    if l > tower.k || j > tower.k {
        return Err(Error::Invalid(format!("bubble index must be at most k = {}", tower.k)));
    }
    let (ka, kb) = (BubbleKernel::new(tower, l), BubbleKernel::new(tower, j));
    let mut spots: Vec<Hotspot> = [l, j].iter().filter(|&&i| i > 0).map(|&i| satellite_spot(tower, i - 1)).collect();
    if l == j && l > 0 {
        spots.truncate(1);
    }
    let region = Region { phi: (-PI, PI), spots };
    let dirs = 2.0 * (n as f64 - 2.0);
    let f = |p: &[f64; 3], w: f64, acc: &mut [f64]| {
        let mut x = [0.0; MAX_DIM];
        x[0] = p[0];
        x[1] = p[1];
        for (m, s) in design_directions(n) {
            x[m] = s * p[2];
            acc[0] += w / dirs * ka.eval(tower, alpha, &x[..n]) * kb.eval(tower, beta, &x[..n]);
            x[m] = 0.0;
        }
    };
    let hi = region.integrate(n, opts.order, opts.outer_radius, 1, &f)[0];
    let lo = region.integrate(n, opts.check_order, opts.outer_radius, 1, &f)[0];
    Ok(Estimate { value: hi, error: (hi - lo).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{fit_farfield_constants, BubbleProfile, FitOptions, TowerOptions};
    use crate::quadrature::{const_c1, z0_norm_sq, z1_norm_sq, QuadratureSpec};

    fn fitted(n: usize, k: usize) -> TowerProfile {
        let t = TowerProfile::fitted(n, k, &TowerOptions::default()).unwrap();
        let ff = fit_farfield_constants(&t, &FitOptions::default()).unwrap();
        t.with_far_field(ff)
    }

    fn quick() -> CubatureOptions {
        CubatureOptions { order: 8, check_order: 6, ..Default::default() }
    }

    #[test]
    fn tower_c1_approaches_bubble_value() {
        // |c₁(k)/c₁(U) - 1| = O(kζ^{n/2-1}), and c₂ grows with k.
        let b = const_c1(&BubbleProfile::new(5).unwrap(), &QuadratureSpec::default()).unwrap();
        let mut last_c2 = 0.0;
        for k in [16, 32] {
            let t = fitted(5, k);
            let c = tower_c1_c2(&t, &quick()).unwrap();
            let defect = k as f64 * t.zeta_k.powf(1.5);
            assert!(c.c1.value > 0.0 && c.c2.value > last_c2);
            assert!((c.c1.value / b - 1.0).abs() < 6.0 * defect, "k={k}: {} vs {b}", c.c1.value);
            last_c2 = c.c2.value;
        }
    }

    #[test]
    fn gram_structure_small_tower() {
        let t = fitted(5, 8);
        let g = gram_matrix(&t, &quick()).unwrap();
        assert!(g.get(6, 6) > 0.0, "a_(n+1,n+1) = {}", g.get(6, 6));
        for c in [1, 2] {
            assert!(g.kelvin_block_conditioning(c) > 0.1);
        }
        // Rotation by 2π/k maps the pair (z₁, z₂) to itself: a₁₁ = a₂₂.
        assert!((g.get(1, 1) / g.get(2, 2) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn satellite_pairings() {
        let t = fitted(5, 8);
        let opts = quick();
        let b = BubbleProfile::new(5).unwrap();
        let spec = QuadratureSpec::default();
        // Central bubble against itself reproduces the radial norms.
        let z00 = kernel_pair_integral(&t, 0, 0, 0, 0, &opts).unwrap().value;
        let ref0 = z0_norm_sq(&b, &spec).unwrap().value;
        assert!((z00 / ref0 - 1.0).abs() < 1e-6, "{z00} vs {ref0}");
        // Translation kernels are scale invariant; dilation kernels scale by ζ².
        let z11 = kernel_pair_integral(&t, 1, 3, 1, 3, &opts).unwrap().value;
        let ref1 = z1_norm_sq(&b, &spec).unwrap().value;
        let orbit2 = 1.0 - t.zeta_k * t.zeta_k;
        assert!((z11 / (orbit2 * ref1) - 1.0).abs() < 1e-5, "{z11} vs {ref1}");
        let s00 = kernel_pair_integral(&t, 0, 2, 0, 2, &opts).unwrap().value;
        assert!((s00 / (t.zeta_k.powi(2) * ref0) - 1.0).abs() < 1e-5);
        let cross = kernel_pair_integral(&t, 1, 1, 1, 2, &opts).unwrap().value;
        assert!(cross.abs() < 0.2 * ref1, "cross {cross}");
    }
}
