use super::{BubbleProfile, Profile};
use crate::fd::laplacian2;

/// L(φ)(x) = Δφ(x) + p|Q(x)|^{p-1}φ(x) with a centred second-order Laplacian.
pub fn apply_linearized<P, F>(profile: &P, phi: &F, x: &[f64], h: f64) -> f64
where
    P: Profile + ?Sized,
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    laplacian2(phi, x, h) + profile.potential(x) * phi(x)
}

/// Finite sum Σ cᵢ s^{-qᵢ} in the variable s = 1 + |x|².
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RadialSeries {
    terms: Vec<(f64, f64)>,
}

impl RadialSeries {
    pub fn new(terms: Vec<(f64, f64)>) -> Self {
        Self { terms }.simplified()
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn eval(&self, r2: f64) -> f64 {
        let s = 1.0 + r2;
        self.terms.iter().map(|(c, q)| c * s.powf(-q)).sum()
    }

    /// Radial Laplacian in dimension `dim`:
    /// Δ s^{-q} = (4q(q+1) - 2qn) s^{-q-1} - 4q(q+1) s^{-q-2}.
    pub fn laplacian(&self, dim: usize) -> Self {
        let n = dim as f64;
        let terms = self
            .terms
            .iter()
            .flat_map(|&(c, q)| {
                let k = 4.0 * q * (q + 1.0);
                [(c * (k - 2.0 * q * n), q + 1.0), (-c * k, q + 2.0)]
            })
            .collect();
        Self::new(terms)
    }

    /// Multiply by c·s^{-q}.
    pub fn times(&self, c: f64, q: f64) -> Self {
        Self::new(self.terms.iter().map(|&(a, p)| (a * c, p + q)).collect())
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self::new(self.terms.iter().chain(&other.terms).copied().collect())
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, (c, _)| m.max(c.abs()))
    }

    fn simplified(mut self) -> Self {
        self.terms.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(self.terms.len());
        for (c, q) in self.terms {
            match out.last_mut() {
                Some(last) if (last.1 - q).abs() < 1e-12 => last.0 += c,
                _ => out.push((c, q)),
            }
        }
        Self { terms: out }
    }
}

/// Relative size of L(z_α) for α = 0..n computed symbolically in s = 1+|x|²,
/// normalised by the size of the potential term. Exact cancellation gives
/// values at rounding level.
pub fn analytic_kernel_residuals(bubble: &BubbleProfile) -> Vec<f64> {
    let n = bubble.n;
    let nf = n as f64;
    let w = bubble.weight();
    let a = bubble.alpha_n;
    // p U^{p-1} = n(n+2) s^{-2}
    let potential = (nf * (nf + 2.0), 2.0);
    // z₀ = w α (2 - s) s^{-n/2}
    let z0 = RadialSeries::new(vec![(2.0 * w * a, nf / 2.0), (-w * a, nf / 2.0 - 1.0)]);
    // z_i = x_i f(s), f = -(n-2) α s^{-n/2}; Δ(x_i f) = x_i Δ_{n+2} f.
    let fi = RadialSeries::new(vec![(-(nf - 2.0) * a, nf / 2.0)]);
    let residual = |z: &RadialSeries, dim: usize| {
        let pot = z.times(potential.0, potential.1);
        z.laplacian(dim).plus(&pot).max_abs_coefficient() / pot.max_abs_coefficient()
    };
    std::iter::once(residual(&z0, n))
        .chain((0..n).map(|_| residual(&fi, n + 2)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::KernelBasis;

    #[test]
    fn radial_series_matches_bubble() {
        let u = BubbleProfile::new(5).unwrap();
        let s = RadialSeries::new(vec![(u.alpha_n, 1.5)]);
        let lap = s.laplacian(5);
        // ΔU = -U^p
        for r2 in [0.0, 0.5, 3.0] {
            assert!((lap.eval(r2) + u.radial(r2).powf(u.p)).abs() < 1e-10);
        }
    }

    #[test]
    fn kernels_are_annihilated() {
        for n in 5..=8 {
            let u = BubbleProfile::new(n).unwrap();
            for r in analytic_kernel_residuals(&u) {
                assert!(r < 1e-13, "n={n}: {r}");
            }
        }
    }

    #[test]
    fn linearized_on_bubble_at_origin() {
        // L(U)(0) = ΔU(0) + pU(0)^p = (p-1)U(0)^p.
        let u = BubbleProfile::new(5).unwrap();
        let f = |y: &[f64]| u.value(y);
        let l = apply_linearized(&u, &f, &[0.0; 5], 1e-3);
        let expect = (u.p - 1.0) * u.alpha_n.powf(u.p);
        assert!((l - expect).abs() < 1e-4 * expect, "{l} vs {expect}");
    }

    #[test]
    fn fd_kernel_residual_is_second_order() {
        let u = BubbleProfile::new(6).unwrap();
        let kb = KernelBasis::new(&u);
        let x = [0.3, -0.5, 0.2, 0.4, -0.1, 0.6];
        let z = |y: &[f64]| kb.eval(0, y).unwrap();
        let r1 = apply_linearized(&u, &z, &x, 2e-2).abs();
        let r2 = apply_linearized(&u, &z, &x, 1e-2).abs();
        let ratio = r1 / r2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}
