//! Radial simulation of the critical heat equation, the ansatz error near the
//! concentration point, and the weighted norms used to measure both.

mod ansatz;
mod corrector;
mod radial;

pub use ansatz::{pde_residual, sample_points, AnsatzModel, AnsatzSample, AnsatzState, AnsatzSummary};
pub use corrector::{corrector_source, solve_corrector, solve_radial, Corrector, CorrectorOptions};
pub use radial::{
    bessel_first_zero, bessel_j, first_dirichlet_eigenvalue, fit_mu, run_blowup_demo, bisect_threshold, DemoConfig, DemoOutcome,
    DemoRecord, DemoResult, RadialGrid, RadialSolver, StepOutcome, ThresholdRun,
};

use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::{Error, Result};

/// Exponents of the weighted spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub n: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub gamma: f64,
    pub varsigma: f64,
    /// R = t₀^ρ.
    pub rho: f64,
}

impl NormParams {
    pub fn new(n: usize, sigma: f64, alpha: f64, gamma: f64, varsigma: f64, rho: f64) -> Result<Self> {
        check_dim(n)?;
        let nf = n as f64;
        let p = Self {
            n,
            sigma,
            alpha,
            beta: (nf - 2.0) / (2.0 * (nf - 4.0)) + sigma / (nf - 4.0),
            nu: 1.0 + sigma / (nf - 2.0),
            gamma,
            varsigma,
            rho,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.n as f64;
        let checks = [
            (self.sigma > 0.0 && self.sigma < nf - 4.0, "sigma must lie in (0, n-4)"),
            (self.alpha > 2.0 && self.alpha < nf - 2.0, "alpha must lie in (2, n-2)"),
            (self.gamma > 0.0, "gamma must be positive"),
            (self.varsigma > 0.0 && self.varsigma < 1.0, "varsigma must lie in (0, 1)"),
            (self.rho > 0.0 && self.rho < 1.0, "rho must lie in (0, 1)"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Invalid((*msg).into())),
            None => Ok(()),
        }
    }

    pub fn inner_radius(&self, t0: f64) -> f64 {
        t0.powf(self.rho)
    }
}

/// Envelope families. `decay` is the power of |y| in the denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    /// τ^{-ν}/(1+|y|^{decay}) in the inner time variable.
    Inner { nu: f64, decay: f64 },
    /// μ^{-2}t^{-γ}/(1+|y|^{decay}).
    Outer { gamma: f64, decay: f64 },
    /// t^{-β}/(1+|y|^{decay}).
    Far { beta: f64, decay: f64 },
    /// μ₀^{power}/(1+|y|^{decay}), applied to (1+|y|)|∇φ| + |φ|.
    InnerGradient { power: f64, decay: f64 },
    /// μ₀^{δ}, no spatial weight.
    Time { delta: f64 },
}

/// One sampled value of a field with the scales needed by any envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    /// Time variable: t, or τ for [`NormKind::Inner`].
    pub t: f64,
    pub y: f64,
    pub mu: f64,
    pub mu0: f64,
    pub value: f64,
    /// |∇_y φ|, only read by [`NormKind::InnerGradient`].
    pub grad: f64,
}

impl NormKind {
    pub fn envelope(&self, s: &WeightedSample) -> f64 {
        let spatial = |decay: f64| 1.0 / (1.0 + s.y.abs().powf(decay));
        match *self {
            Self::Inner { nu, decay } => s.t.powf(-nu) * spatial(decay),
            Self::Outer { gamma, decay } => s.mu.powi(-2) * s.t.powf(-gamma) * spatial(decay),
            Self::Far { beta, decay } => s.t.powf(-beta) * spatial(decay),
            Self::InnerGradient { power, decay } => s.mu0.powf(power) * spatial(decay),
            Self::Time { delta } => s.mu0.powf(delta),
        }
    }

    fn measured(&self, s: &WeightedSample) -> f64 {
        match self {
            Self::InnerGradient { .. } => (1.0 + s.y.abs()) * s.grad.abs() + s.value.abs(),
            _ => s.value.abs(),
        }
    }

    /// Least M with measured ≤ M·envelope on all samples.
    pub fn norm(&self, samples: &[WeightedSample]) -> f64 {
        samples.iter().map(|s| self.measured(s) / self.envelope(s)).fold(0.0, f64::max)
    }

    /// Norm over |y| ≤ `radius` and over all samples; flagged divergent when
    /// the extension raises the norm by more than 5%.
    pub fn divergence(&self, samples: &[WeightedSample], radius: f64) -> NormGrowth {
        let inner: Vec<WeightedSample> = samples.iter().copied().filter(|s| s.y.abs() <= radius).collect();
        let (a, b) = (self.norm(&inner), self.norm(samples));
        NormGrowth { inner: a, outer: b, divergent: b > 1.05 * a }
    }

    pub fn inner_norm(p: &NormParams) -> Self {
        Self::Inner { nu: p.nu, decay: 2.0 + p.alpha }
    }

    pub fn outer_norm(p: &NormParams) -> Self {
        Self::Outer { gamma: p.gamma, decay: 2.0 + p.varsigma }
    }

    pub fn far_norm(p: &NormParams) -> Self {
        Self::Far { beta: p.beta, decay: p.alpha - 2.0 }
    }

    pub fn inner_gradient_norm(p: &NormParams) -> Self {
        Self::InnerGradient { power: p.n as f64 - 2.0 + p.sigma, decay: p.alpha }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormGrowth {
    pub inner: f64,
    pub outer: f64,
    pub divergent: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples(kind: &NormKind, radii: &[f64], scale: f64) -> Vec<WeightedSample> {
        radii
            .iter()
            .flat_map(|&y| {
                [10.0, 100.0].map(|t| {
                    let mut s = WeightedSample { t, y, mu: 0.01, mu0: 0.1 / t, value: 0.0, grad: 0.0 };
                    s.value = scale * kind.envelope(&s);
                    s
                })
            })
            .collect()
    }

    #[test]
    fn params_ranges() {
        let p = NormParams::new(6, 0.5, 3.0, 0.5, 0.1, 0.05).unwrap();
        assert!((p.beta - (1.0 + 0.25)).abs() < 1e-15);
        assert!((p.nu - (1.0 + 0.125)).abs() < 1e-15);
        assert!(NormParams::new(5, 1.5, 2.5, 0.5, 0.1, 0.05).is_err());
        assert!(NormParams::new(6, 0.5, 4.5, 0.5, 0.1, 0.05).is_err());
    }

    #[test]
    fn envelope_definitions() {
        let p = NormParams::new(6, 0.5, 3.0, 0.5, 0.1, 0.05).unwrap();
        let radii: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
        for kind in [
            NormKind::inner_norm(&p),
            NormKind::outer_norm(&p),
            NormKind::far_norm(&p),
            NormKind::Time { delta: 1.5 },
        ] {
            assert!((kind.norm(&samples(&kind, &radii, 1.0)) - 1.0).abs() < 1e-14);
            assert!((kind.norm(&samples(&kind, &radii, 2.0)) - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn wrong_power_diverges() {
        let right = NormKind::Far { beta: 1.0, decay: 2.0 };
        let wrong = NormKind::Far { beta: 1.0, decay: 3.0 };
        let radii: Vec<f64> = (0..200).map(|i| 0.5 * i as f64).collect();
        let data = samples(&right, &radii, 1.0);
        assert!(!right.divergence(&data, 50.0).divergent);
        let g = wrong.divergence(&data, 50.0);
        assert!(g.divergent && g.outer > 1.5 * g.inner);
    }

    proptest! {
        #[test]
        fn homogeneous_and_monotone(c in 0.1f64..10.0, bump in 0.0f64..1.0) {
            let kind = NormKind::Outer { gamma: 0.7, decay: 2.1 };
            let radii = [0.0, 0.5, 1.0, 3.0, 7.0];
            let base: Vec<WeightedSample> = samples(&kind, &radii, 1.0)
                .into_iter()
                .enumerate()
                .map(|(i, mut s)| { s.value *= 0.5 + 0.1 * i as f64; s })
                .collect();
            let scaled: Vec<WeightedSample> = base.iter().map(|s| WeightedSample { value: c * s.value, ..*s }).collect();
            prop_assert!((kind.norm(&scaled) - c * kind.norm(&base)).abs() <= 1e-12 * c * kind.norm(&base));
            let bigger: Vec<WeightedSample> =
                base.iter().map(|s| WeightedSample { value: s.value * (1.0 + bump), ..*s }).collect();
            prop_assert!(kind.norm(&bigger) >= kind.norm(&base));
        }
    }
}
