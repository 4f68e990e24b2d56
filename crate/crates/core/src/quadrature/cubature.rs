//! Cubature over R^n for integrands that depend on (x₁, x₂, |x'|) and at most
//! quadratically on the direction of x' = (x₃,…,xₙ).
//!
//! The x' sphere is averaged with the cross-polytope design ±e_l (exact to
//! degree 3). The remaining three variables are integrated with composite
//! Gauss–Legendre rules: a global spherical chart plus small balls around
//! concentrated bubbles, glued by a smooth partition of unity.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PanelRule;
use crate::util::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubatureOptions {
    /// Gauss–Legendre points per panel for the reported value.
    pub order: usize,
    /// Lower order used only for the error estimate.
    pub check_order: usize,
    /// Truncation radius of the global chart.
    pub outer_radius: f64,
}

impl Default for CubatureOptions {
    fn default() -> Self {
        Self { order: 12, check_order: 8, outer_radius: 1.1e12 }
    }
}

/// A concentrated bubble sitting in the (x₁,x₂)-plane.
#[derive(Debug, Clone, Copy)]
pub struct Hotspot {
    pub center: [f64; 2],
    /// Radius of the local ball chart.
    pub radius: f64,
    /// Core scale of the bubble.
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct Region {
    /// Azimuthal range of the global chart.
    pub phi: (f64, f64),
    pub spots: Vec<Hotspot>,
}

/// C^∞ cutoff: 1 for t ≤ 1/2, 0 for t ≥ 1.
fn cutoff(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let u = 2.0 * (1.0 - t);
        let (a, b) = ((-1.0 / u).exp(), (-1.0 / (1.0 - u)).exp());
        a / (a + b)
    }
}

/// Breakpoints on [lo, hi] refined geometrically towards each focus.
fn graded(lo: f64, hi: f64, foci: &[f64], width: f64) -> Vec<f64> {
    let mut b = vec![lo, hi];
    for &f in foci {
        if f > lo && f < hi {
            b.push(f);
        }
        let mut w = width;
        while w < hi - lo {
            for x in [f - w, f + w] {
                if x > lo && x < hi {
                    b.push(x);
                }
            }
            w *= 2.0;
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-12 * (1.0 + c.abs()));
    b
}

fn uniform(lo: f64, hi: f64, max_width: f64) -> Vec<f64> {
    let m = ((hi - lo) / max_width).ceil().max(1.0) as usize;
    (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect()
}

impl Region {
    fn partition(&self, p: &[f64; 3]) -> f64 {
        self.spots
            .iter()
            .map(|s| {
                let d = ((p[0] - s.center[0]).powi(2) + (p[1] - s.center[1]).powi(2) + p[2] * p[2]).sqrt();
                cutoff(d / s.radius)
            })
            .sum()
    }

    /// Integrate `f` over R^n. `f(point, weight, acc)` adds weight × integrand
    /// (averaged over x' directions by the caller) into `acc`.
    pub fn integrate<F>(&self, n: usize, order: usize, outer: f64, len: usize, f: &F) -> Vec<f64>
    where
        F: Fn(&[f64; 3], f64, &mut [f64]) + Sync,
    {
        let shell = sphere_area(n - 2);
        let width = self.spots.iter().map(|s| s.radius / 2.0).fold(f64::INFINITY, f64::min);
        let radii: Vec<f64> = self.spots.iter().map(|s| s.center[0].hypot(s.center[1])).collect();
        let angles: Vec<f64> = self.spots.iter().map(|s| s.center[1].atan2(s.center[0])).collect();
        let (rmin, rmax) = radii.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
        let has_spots = !self.spots.is_empty();

        let mut rb = graded(0.0, 4.0, &radii, width);
        rb.extend(uniform(0.0, 4.0, 0.5));
        rb.sort_by(f64::total_cmp);
        rb.dedup_by(|a, c| (*a - *c).abs() < 0.25 * width.min(0.5));
        let mut x = 8.0;
        while x < outer {
            rb.push(x);
            x *= 2.0;
        }
        rb.push(outer);
        let angular_width = if has_spots { width / rmax.max(1e-3) } else { 1.0 };
        let fine = (
            PanelRule::new(&graded(0.0, FRAC_PI_2, &[FRAC_PI_2], angular_width), order),
            PanelRule::new(&graded(self.phi.0, self.phi.1, &angles, angular_width), order),
        );
        let coarse = (
            PanelRule::new(&uniform(0.0, FRAC_PI_2, PI / 8.0), order),
            PanelRule::new(&uniform(self.phi.0, self.phi.1, PI / 4.0), order),
        );

        let global: Vec<Vec<f64>> = rb
            .par_windows(2)
            .map(|w| {
                let mut acc = vec![0.0; len];
                let near = has_spots && w[1] > rmin - 4.0 * width && w[0] < rmax + 1.0;
                let (psi_rule, phi_rule) = if near { (&fine.0, &fine.1) } else { (&coarse.0, &coarse.1) };
                let r_rule = PanelRule::new(w, order);
                for (r, wr) in r_rule.iter() {
                    let rw = wr * r.powi(n as i32 - 1) * shell;
                    for (psi, wpsi) in psi_rule.iter() {
                        let (sp, cp) = psi.sin_cos();
                        let pw = rw * wpsi * sp * cp.powi(n as i32 - 3);
                        for (phi, wphi) in phi_rule.iter() {
                            let p = [r * sp * phi.cos(), r * sp * phi.sin(), r * cp];
                            let weight = pw * wphi * (1.0 - self.partition(&p));
                            if weight != 0.0 {
                                f(&p, weight, &mut acc);
                            }
                        }
                    }
                }
                acc
            })
            .collect();

        let balls: Vec<Vec<f64>> = self
            .spots
            .par_iter()
            .map(|s| {
                let mut acc = vec![0.0; len];
                let mut sb = graded(0.0, s.radius, &[0.0], s.scale / 4.0);
                sb.push(s.radius / 2.0);
                sb.sort_by(f64::total_cmp);
                sb.dedup_by(|a, c| (*a - *c).abs() < 1e-3 * s.scale);
                let sr = PanelRule::new(&sb, order);
                let br = PanelRule::new(&uniform(0.0, PI, PI / 4.0), order);
                let gr = PanelRule::new(&uniform(0.0, PI, PI / 2.0), order);
                for (rad, ws) in sr.iter() {
                    let sw = ws * rad.powi(n as i32 - 1) * shell;
                    for (beta, wb) in br.iter() {
                        let (sb, cb) = beta.sin_cos();
                        let bw = sw * wb * sb.powi(n as i32 - 2);
                        for (gamma, wg) in gr.iter() {
                            let (sg, cg) = gamma.sin_cos();
                            let p = [s.center[0] + rad * cb, s.center[1] + rad * sb * cg, rad * sb * sg];
                            let weight = bw * wg * sg.powi(n as i32 - 3) * cutoff(rad / s.radius);
                            if weight != 0.0 {
                                f(&p, weight, &mut acc);
                            }
                        }
                    }
                }
                acc
            })
            .collect();

        let mut total = vec![0.0; len];
        for part in global.iter().chain(&balls) {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        total
    }
}

/// Cross-polytope directions ±e_m in x' (zero-based coordinates m ≥ 2).
pub(crate) fn design_directions(n: usize) -> impl Iterator<Item = (usize, f64)> {
    (2..n).flat_map(|m| [(m, 1.0), (m, -1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_region() -> Region {
        Region { phi: (-PI, PI), spots: vec![] }
    }

    #[test]
    fn gaussian_mass() {
        for n in [5, 6] {
            let f = |p: &[f64; 3], w: f64, acc: &mut [f64]| {
                let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                acc[0] += w * (-r2).exp();
            };
            let v = gaussian_region().integrate(n, 10, 64.0, 1, &f)[0];
            let exact = PI.powf(n as f64 / 2.0);
            assert!((v / exact - 1.0).abs() < 1e-10, "n={n}: {v} vs {exact}");
        }
    }

    #[test]
    fn concentrated_bubble_mass() {
        // ∫ ε^{-n}(1+|x-c|²/ε²)^{-n} dx is independent of ε and c.
        let n = 5;
        let eps: f64 = 0.01;
        let c = [0.8, 0.3];
        let bump = |p: &[f64; 3], w: f64, acc: &mut [f64]| {
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + p[2] * p[2];
            acc[0] += w * eps.powi(-(n as i32)) * (1.0 + d2 / (eps * eps)).powi(-(n as i32));
        };
        let region = Region {
            phi: (-PI, PI),
            spots: vec![Hotspot { center: c, radius: 0.1, scale: eps }],
        };
        // |S⁴| ∫ r⁴ (1+r²)^{-5} dr = (8π²/3)·(3π/256)
        let exact = 8.0 * PI * PI / 3.0 * 3.0 * PI / 256.0;
        let v = region.integrate(n, 12, 64.0, 1, &bump)[0];
        assert!((v / exact - 1.0).abs() < 1e-8, "{v} vs {exact}");
    }

    #[test]
    fn design_is_exact_for_quadratics() {
        let n = 7;
        let dirs: Vec<_> = design_directions(n).collect();
        let m = dirs.len() as f64;
        let second: f64 = dirs.iter().map(|(i, s)| if *i == 3 { s * s } else { 0.0 }).sum::<f64>() / m;
        assert!((second - 1.0 / (n as f64 - 2.0)).abs() < 1e-15);
    }
}
