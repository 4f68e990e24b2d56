//! Radial corrector p₀ solving L(p₀) = q₀ with p₀ = O(r⁻²), L = Δ + p|Q|^{p-1}
//! around the positive bubble.

use serde::{Deserialize, Serialize};

use crate::dynamics::BlowupConstants;
use crate::profiles::BubbleProfile;
use crate::{Error, Result};

use super::radial::RadialGrid;

/// Radial data on a graded grid with the linearized operator discretized in
/// finite-volume form and an outer Robin condition p' = -2p/r.
struct RadialOperator {
    grid: RadialGrid,
    potential: Vec<f64>,
    dilation_kernel: Vec<f64>,
}

impl RadialOperator {
    fn new(bubble: &BubbleProfile, outer: f64, intervals: usize) -> Result<Self> {
        let grid = RadialGrid::graded(bubble.n, outer, 1.0, intervals, intervals / 8)?;
        let n = bubble.n as f64;
        let w = (n - 2.0) / 2.0;
        let potential = grid.radii.iter().map(|r| bubble.p * bubble.radial(r * r).powf(bubble.p - 1.0)).collect();
        // z₀ = α(n-2)/2 (1 - r²)/(1 + r²)^{n/2}
        let dilation_kernel =
            grid.radii.iter().map(|r| bubble.alpha_n * w * (1.0 - r * r) * (1.0 + r * r).powf(-n / 2.0)).collect();
        Ok(Self { grid, potential, dilation_kernel })
    }

    fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let prod: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        self.grid.integrate(&prod)
    }

    /// Pairing weighted by p|Q|^{p-1}; finite for O(r⁻²) functions in every n.
    fn weighted(&self, f: &[f64], g: &[f64]) -> f64 {
        let prod: Vec<f64> = f.iter().zip(g).zip(&self.potential).map(|((a, b), w)| a * b * w).collect();
        self.grid.integrate(&prod)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let m = g.len();
        let nf = g.n as f64;
        let r = &g.radii;
        let faces: Vec<f64> = r.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let cond = |i: usize| faces[i].powf(nf - 1.0) / (r[i + 1] - r[i]);
        let vol = |i: usize| {
            let lo = if i == 0 { 0.0 } else { faces[i - 1] };
            let hi = if i + 1 == m { r[m - 1] } else { faces[i] };
            (hi.powf(nf) - lo.powf(nf)) / nf
        };
        let (mut a, mut b, mut c) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..m {
            let v = vol(i);
            let left = if i > 0 { cond(i - 1) } else { 0.0 };
            let right = if i + 1 < m { cond(i) } else { 0.0 };
            a[i] = left / v;
            c[i] = right / v;
            b[i] = -(left + right) / v + self.potential[i];
            if i + 1 == m {
                // Outer face flux R^{n-1}·p'(R) with p' = -2p/R.
                b[i] += -2.0 * r[m - 1].powf(nf - 2.0) / v;
            }
        }
        tridiagonal(&a, &b, &c, rhs)
    }
}

fn tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let m = b.len();
    let (mut cp, mut dp) = (vec![0.0; m], vec![0.0; m]);
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..m {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = dp[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorOptions {
    pub outer_radius: f64,
    pub intervals: usize,
    /// Largest accepted |⟨q₀,z₀⟩|/(‖q₀‖‖z₀‖).
    pub solvability_tol: f64,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self { outer_radius: 1e4, intervals: 6000, solvability_tol: 1e-3 }
    }
}

/// p₀ on the radial grid, normalized by ∫p|Q|^{p-1}p₀z₀ = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corrector {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub source: Vec<f64>,
    /// |⟨q₀,z₀⟩|/(‖q₀‖‖z₀‖) before the solve.
    pub solvability: f64,
    /// Coefficient γ in Φ = γμ₀^{n-2}p₀; equal to 1 once μ = bμ₀.
    pub gamma: f64,
}

impl Corrector {
    /// Linear interpolation in r.
    pub fn value(&self, r: f64) -> f64 {
        let m = self.radii.len();
        if r >= self.radii[m - 1] {
            return self.values[m - 1] * (self.radii[m - 1] / r).powi(2);
        }
        let i = self.radii.partition_point(|&x| x <= r).clamp(1, m - 1) - 1;
        let s = (r - self.radii[i]) / (self.radii[i + 1] - self.radii[i]);
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    /// Log-log slope of |p₀| between r_lo and r_hi.
    pub fn tail_slope(&self, r_lo: f64, r_hi: f64) -> f64 {
        (self.value(r_hi).abs() / self.value(r_lo).abs()).ln() / (r_hi / r_lo).ln()
    }
}

/// Solves L(p) = f for a decaying radial p, projected off z₀ in the
/// p|Q|^{p-1}-weighted pairing.
/// Returns (p, solvability of f).
pub fn solve_radial(
    bubble: &BubbleProfile,
    source: impl Fn(f64) -> f64,
    opts: &CorrectorOptions,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let op = RadialOperator::new(bubble, opts.outer_radius, opts.intervals)?;
    let rhs: Vec<f64> = op.grid.radii.iter().map(|&r| source(r)).collect();
    let z = &op.dilation_kernel;
    let zz = op.inner(z, z);
    let solvability = op.inner(&rhs, z).abs() / (op.inner(&rhs, &rhs).sqrt() * zz.sqrt());
    let mut p = op.solve(&rhs);
    let c = op.weighted(&p, z) / op.weighted(z, z);
    p.iter_mut().zip(z).for_each(|(v, zv)| *v -= c * zv);
    Ok((op.grid.radii.clone(), p, solvability))
}

/// q₀(r) = p|Q|^{p-1}c₂b²/((n-4)cₙ^{n-4}c₁) + b²/((n-4)cₙ^{n-4})·(z₀ - D(2-r²)/(1+r²)^{n/2}).
#[allow(non_snake_case)]
pub fn corrector_source<'a>(bubble: &'a BubbleProfile, constants: &BlowupConstants, D: f64) -> impl Fn(f64) -> f64 + 'a {
    let n = bubble.n as f64;
    let w = (n - 2.0) / 2.0;
    let k = constants.b.powi(2) / ((n - 4.0) * constants.c_n.powf(n - 4.0));
    let ratio = constants.c2 / constants.c1;
    move |r| {
        let r2 = r * r;
        let pot = bubble.p * bubble.radial(r2).powf(bubble.p - 1.0);
        let z0 = bubble.alpha_n * w * (1.0 - r2) * (1.0 + r2).powf(-n / 2.0);
        let tail = D * (2.0 - r2) * (1.0 + r2).powf(-n / 2.0);
        pot * ratio * k + k * (z0 - tail)
    }
}

#[allow(non_snake_case)]
pub fn solve_corrector(
    bubble: &BubbleProfile,
    constants: &BlowupConstants,
    D: f64,
    opts: &CorrectorOptions,
) -> Result<Corrector> {
    let f = corrector_source(bubble, constants, D);
    let (radii, values, solvability) = solve_radial(bubble, &f, opts)?;
    if solvability > opts.solvability_tol {
        return Err(Error::Invalid(format!(
            "corrector source is not orthogonal to z0 (relative projection {solvability:e})"
        )));
    }
    let source = radii.iter().map(|&r| f(r)).collect();
    Ok(Corrector { radii, values, source, solvability, gamma: 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manufactured_error(n: usize, intervals: usize) -> f64 {
        let b = BubbleProfile::new(n).unwrap();
        let nf = n as f64;
        let exact = |r: f64| 1.0 / (1.0 + r * r);
        let lap = |r: f64| {
            let s = 1.0 + r * r;
            (6.0 * r * r - 2.0 - 2.0 * (nf - 1.0) * s) / s.powi(3)
        };
        let src = |r: f64| lap(r) + b.p * b.radial(r * r).powf(b.p - 1.0) * exact(r);
        let opts = CorrectorOptions { intervals, ..Default::default() };
        let (radii, p, _) = solve_radial(&b, src, &opts).unwrap();
        let op = RadialOperator::new(&b, opts.outer_radius, intervals).unwrap();
        let ex: Vec<f64> = radii.iter().map(|&r| exact(r)).collect();
        let c = op.weighted(&ex, &op.dilation_kernel) / op.weighted(&op.dilation_kernel, &op.dilation_kernel);
        radii
            .iter()
            .enumerate()
            .filter(|(_, r)| **r < 50.0)
            .map(|(i, _)| (p[i] - (ex[i] - c * op.dilation_kernel[i])).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_order_in_the_grid() {
        for n in [5usize, 6] {
            let (coarse, fine) = (manufactured_error(n, 3000), manufactured_error(n, 6000));
            assert!((coarse / fine - 4.0).abs() < 0.3, "n={n}: {coarse} {fine}");
        }
    }

    #[test]
    fn actual_source_is_solvable() {
        use crate::quadrature::{const_c1, const_c2, QuadratureSpec};
        for n in [5usize, 6] {
            let b = BubbleProfile::new(n).unwrap();
            let spec = QuadratureSpec::default();
            let d = (n as f64 - 2.0) / 2.0 * b.alpha_n;
            let c1 = const_c1(&b, &spec).unwrap();
            let c2 = const_c2(&b, d, &spec).unwrap().value;
            let constants = BlowupConstants::new(n, c1, c2, 0.0, 1.0, vec![0.0; n]).unwrap();
            let corr = solve_corrector(&b, &constants, d, &CorrectorOptions::default()).unwrap();
            assert!(corr.solvability < 1e-4, "n={n}: {}", corr.solvability);
            // The O(r⁻²) tail of a radial decaying solution of Δp = O(r⁻⁴).
            let slope = corr.tail_slope(100.0, 400.0);
            assert!((slope + 2.0).abs() < 0.1, "n={n}: {slope}");
        }
    }

    #[test]
    fn manufactured_solution() {
        for n in [5usize, 6] {
            let err = manufactured_error(n, CorrectorOptions::default().intervals);
            assert!(err < 1e-4, "n={n}: {err}");
        }
    }
}
