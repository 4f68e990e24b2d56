//! Heat flow of the algebraic profiles (1+|y|²)^{-m}, written as Gaussian
//! mixtures so every convolution with the heat kernel is explicit:
//!
//! W_{m,j}(σ,ρ) = Γ(m)^{-1} ∫ λ^{m-1} e^{-λ} (1+σλ)^{-n/2-j} e^{-λρ/(1+σλ)} dλ
//!
//! with σ = 4(t-s)/μ² and ρ = |x-ξ|²/μ². j = 0 is the radial profile, j = 1
//! the odd profile y_i(1+|y|²)^{-m} after dividing out (x-ξ)_i/μ.

use statrs::function::gamma::ln_gamma;

use crate::quadrature::gauss_legendre;

/// λ = e^u; panels are unit intervals in u aligned to the integers.
const U_MAX: i32 = 4;
/// e^{-40} relative cut on the rising side of the integrand.
const RISE_CUT: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct ShellKernel {
    half_dim: f64,
    /// Lower profile power n/2 - 1; the upper one is n/2.
    m_low: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_norm_low: f64,
    log_norm_high: f64,
}

impl ShellKernel {
    pub fn new(n: usize, order: usize) -> Self {
        let half_dim = n as f64 / 2.0;
        let m_low = half_dim - 1.0;
        let (nodes, weights) = gauss_legendre(order);
        Self {
            half_dim,
            m_low,
            nodes,
            weights,
            log_norm_low: -ln_gamma(m_low),
            log_norm_high: -ln_gamma(half_dim),
        }
    }

    /// (W_{n/2,j}, W_{n/2-1,j}) at (σ, ρ), sharing one pass over λ.
    pub fn pair(&self, odd: bool, sigma: f64, rho: f64) -> (f64, f64) {
        let power = self.half_dim + if odd { 1.0 } else { 0.0 };
        let mut peak = self.half_dim.ln();
        if sigma > 0.0 {
            peak = peak.min(-sigma.ln());
        }
        if rho > 0.0 {
            peak = peak.min(-rho.ln());
        }
        let lo = (peak - RISE_CUT / self.m_low - 1.0).floor() as i32;
        let (mut high, mut low) = (0.0, 0.0);
        for k in lo..U_MAX {
            let c = k as f64 + 0.5;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                let u = c + 0.5 * x;
                let lambda = u.exp();
                let s = sigma * lambda;
                let g = (self.m_low * u - lambda - power * s.ln_1p() - lambda * rho / (1.0 + s)).exp();
                low += w * g;
                high += w * g * lambda;
            }
        }
        (0.5 * high * self.log_norm_high.exp(), 0.5 * low * self.log_norm_low.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_reproduces_profile() {
        for n in [5, 6, 7] {
            let k = ShellKernel::new(n, 10);
            let m = n as f64 / 2.0;
            for rho in [0.0, 0.3, 2.0, 50.0] {
                let (hi, lo) = k.pair(false, 0.0, rho);
                assert!((hi / (1.0 + rho).powf(-m) - 1.0).abs() < 1e-12, "n={n} rho={rho}");
                assert!((lo / (1.0 + rho).powf(1.0 - m) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn center_value_closed_form() {
        // n = 5, odd profile, m = 3/2 at ρ = 0 and σ = 1, against a trapezoid sum in λ.
        let k = ShellKernel::new(5, 10);
        let (_, lo) = k.pair(true, 1.0, 0.0);
        let steps = 2_000_000;
        let h = 60.0 / steps as f64;
        let brute: f64 = (1..steps)
            .map(|i| {
                let l = i as f64 * h;
                l.sqrt() * (-l).exp() * (1.0 + l).powf(-3.5)
            })
            .sum::<f64>()
            * h
            / statrs::function::gamma::gamma(1.5);
        assert!((lo / brute - 1.0).abs() < 1e-6, "{lo} vs {brute}");
    }

    #[test]
    fn large_time_scaling() {
        // W_{m,j}(σ,0) ~ σ^{-m} Γ(n/2+j-m)/Γ(n/2+j) for m < n/2 + j.
        let k = ShellKernel::new(6, 10);
        let sigma = 1e12;
        let (_, lo) = k.pair(false, sigma, 0.0);
        let expected = sigma.powf(-2.0) * statrs::function::gamma::gamma(1.0) / statrs::function::gamma::gamma(3.0);
        assert!((lo / expected - 1.0).abs() < 1e-4);
    }
}
