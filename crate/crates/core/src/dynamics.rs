//! Blow-up constants and the reduced ODE system for the modulation
//! parameters (λ, ξ, θ₁₂, a₁, a₂, θ₁ₗ, θ₂ₗ).

use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::quadrature::{geometric_breaks, integrate_breaks, QuadratureSpec};
use crate::util::{geomspace, loglog_slope, norm};
use crate::{Error, Result};

/// Unique positive root of H·b^{n-3} = 2b/(n-2).
pub fn solve_b(h_qq: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    if !(h_qq > 0.0 && h_qq.is_finite()) {
        return Err(Error::NonPositiveH(h_qq));
    }
    let nf = n as f64;
    Ok((2.0 / ((nf - 2.0) * h_qq)).powf(1.0 / (nf - 4.0)))
}

/// |H·b^{n-3} - 2b/(n-2)| relative to 2b/(n-2).
pub fn b_residual(h_qq: f64, b: f64, n: usize) -> f64 {
    let nf = n as f64;
    let rhs = 2.0 * b / (nf - 2.0);
    (h_qq * b.powf(nf - 3.0) - rhs).abs() / rhs
}

/// cₙ = [(2c₁A + c₂)(n-2)/(2(n-4)c₁)]^{1/(n-4)}.
#[allow(non_snake_case)]
pub fn scale_constant(c1: f64, c2: f64, A: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    let nf = n as f64;
    let radicand = (2.0 * c1 * A + c2) * (nf - 2.0) / (2.0 * (nf - 4.0) * c1);
    if !(radicand > 0.0) {
        return Err(Error::Invalid(format!("scale constant radicand {radicand} is not positive")));
    }
    Ok(radicand.powf(1.0 / (nf - 4.0)))
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupConstants {
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub A: f64,
    pub B: f64,
    pub c_n: f64,
    pub b: f64,
    pub h_qq: f64,
    pub grad_h: Vec<f64>,
}

impl BlowupConstants {
    #[allow(non_snake_case)]
    pub fn new(n: usize, c1: f64, c2: f64, A: f64, h_qq: f64, grad_h: Vec<f64>) -> Result<Self> {
        if grad_h.len() != n {
            return Err(Error::Invalid(format!("gradient has {} components, expected {n}", grad_h.len())));
        }
        let b = solve_b(h_qq, n)?;
        let c_n = scale_constant(c1, c2, A, n)?;
        let B = 2.0 * A / ((n as f64 - 4.0) * c_n.powf(n as f64 - 4.0));
        Ok(Self { n, c1, c2, A, B, c_n, b, h_qq, grad_h })
    }

    fn rate(&self) -> f64 {
        1.0 / (self.n as f64 - 4.0)
    }

    /// μ₀(t) = cₙ t^{-1/(n-4)}.
    pub fn mu0(&self, t: f64) -> f64 {
        self.c_n * t.powf(-self.rate())
    }

    pub fn mu0_dot(&self, t: f64) -> f64 {
        -self.rate() * self.mu0(t) / t
    }

    /// Max over `times` of |μ̇₀ + 2c₁/((2c₁A+c₂)(n-2))·μ₀^{n-3}| / |μ̇₀|.
    pub fn mu0_consistency(&self, times: &[f64]) -> f64 {
        let nf = self.n as f64;
        let k = 2.0 * self.c1 / ((2.0 * self.c1 * self.A + self.c2) * (nf - 2.0));
        times
            .iter()
            .map(|&t| {
                let d = self.mu0_dot(t);
                (d + k * self.mu0(t).powf(nf - 3.0)).abs() / d.abs()
            })
            .fold(0.0, f64::max)
    }

    /// ∫_t^∞ μ₀^{n-2}(s) ds = cₙ^{n-2}(n-4)/2 · t^{-2/(n-4)}.
    pub fn mu0_tail(&self, t: f64) -> f64 {
        let nf = self.n as f64;
        self.c_n.powf(nf - 2.0) * (nf - 4.0) / 2.0 * t.powf(-2.0 * self.rate())
    }

    /// ‖h‖_δ = sup μ₀^{-δ}|h| over the sampled times.
    pub fn weighted_norm(&self, times: &[f64], values: &[f64], delta: f64) -> f64 {
        times
            .iter()
            .zip(values)
            .map(|(&t, v)| self.mu0(t).powf(-delta) * v.abs())
            .fold(0.0, f64::max)
    }
}

/// Exponent (n-3)/(n-4) of the λ equation λ̇ + (n-3)/((n-4)t)·λ = h.
fn lambda_exponent(n: usize) -> f64 {
    (n as f64 - 3.0) / (n as f64 - 4.0)
}

fn time_breaks(a: f64, b: f64) -> Vec<f64> {
    let mut out: Vec<f64> = geometric_breaks(0.0, b / a).into_iter().filter(|&x| x > 1.0).map(|x| a * x).collect();
    out.insert(0, a);
    if *out.last().unwrap() < b {
        out.push(b);
    }
    out
}

/// λ(t) = t^{-(n-3)/(n-4)}[d + ∫_{t₀}^t τ^{(n-3)/(n-4)} h(τ) dτ].
pub struct LambdaSolution<F: Fn(f64) -> f64> {
    pub n: usize,
    pub t0: f64,
    pub d: f64,
    pub forcing: F,
}

impl<F: Fn(f64) -> f64> LambdaSolution<F> {
    pub fn new(n: usize, t0: f64, d: f64, forcing: F) -> Result<Self> {
        check_dim(n)?;
        if !(t0 > 0.0) {
            return Err(Error::Invalid(format!("t0 = {t0} must be positive")));
        }
        Ok(Self { n, t0, d, forcing })
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let k = lambda_exponent(self.n);
        if t <= self.t0 {
            return Ok(self.d * self.t0.powf(-k));
        }
        let spec = QuadratureSpec::default().with_rel_tol(1e-12);
        let int = integrate_breaks(|s| s.powf(k) * (self.forcing)(s), &time_breaks(self.t0, t), &spec)?;
        Ok(t.powf(-k) * (self.d + int.value))
    }

    /// λ̇ from the equation itself.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        Ok((self.forcing)(t) - lambda_exponent(self.n) * self.value(t)? / t)
    }
}

/// ξ(t) = q - v∫_t^∞ μ₀^{n-2} - ∫_t^∞ h with drift v = c·b^{n-2}∇H(q,q),
/// the decaying solution of ξ̇ = μ₀^{n-2}v + h.
pub struct XiSolution<'a, F: Fn(f64) -> Vec<f64>> {
    pub constants: &'a BlowupConstants,
    pub q: Vec<f64>,
    pub drift: Vec<f64>,
    pub forcing: F,
}

impl<'a, F: Fn(f64) -> Vec<f64>> XiSolution<'a, F> {
    /// `coupling` is the translation constant c.
    pub fn new(constants: &'a BlowupConstants, q: Vec<f64>, coupling: f64, forcing: F) -> Result<Self> {
        if q.len() != constants.n {
            return Err(Error::Invalid("q has the wrong dimension".into()));
        }
        let scale = coupling * constants.b.powf(constants.n as f64 - 2.0);
        let drift = constants.grad_h.iter().map(|g| scale * g).collect();
        Ok(Self { constants, q, drift, forcing })
    }

    pub fn value(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.constants.n;
        let lead = self.constants.mu0_tail(t);
        let spec = QuadratureSpec::default().with_rel_tol(1e-11);
        let far = t * 1e6;
        let breaks = time_breaks(t, far);
        let mut out: Vec<f64> = self.q.iter().zip(&self.drift).map(|(q, v)| q - v * lead).collect();
        for (l, o) in out.iter_mut().enumerate().take(n) {
            let comp = |s: f64| (self.forcing)(s)[l];
            let head = integrate_breaks(comp, &breaks, &spec)?;
            // Power-law tail beyond the last break, with the local exponent.
            let (h1, h2) = (comp(far), comp(2.0 * far));
            let tail = if h1 != 0.0 && h2 != 0.0 && h1.signum() == h2.signum() {
                let p = (h1 / h2).ln() / 2f64.ln();
                if p <= 1.0 {
                    return Err(Error::Invalid(format!("forcing decays too slowly (exponent {p})")));
                }
                h1 * far / (p - 1.0)
            } else {
                0.0
            };
            *o -= head.value + tail;
        }
        Ok(out)
    }
}

/// Number of unknowns in the reduced system.
pub fn system_size(n: usize) -> usize {
    3 * n
}

/// Right-hand sides Π₀…Π_{3n-1} of the reduced system. `state` holds the
/// physical unknowns in the order λ, ξ₁..ξₙ, θ₁₂, a₁, a₂, θ₁₃..θ₁ₙ, θ₂₃..θ₂ₙ.
pub trait Forcing: Sync {
    fn eval(&self, t: f64, state: &[f64], out: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64]) + Sync> Forcing for F {
    fn eval(&self, t: f64, state: &[f64], out: &mut [f64]) {
        self(t, state, out)
    }
}

/// Leading structure of the forcings:
/// Π₀ = s·μ₀^{n-3+σ}f₀, Π_l = μ₀^{n-2}v_l + s·μ₀^{n-2+σ}f_l for l = 1..n,
/// Π_l = s·μ₀^{n-2+σ}f_l for the rotation and Kelvin rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelForcing {
    pub n: usize,
    pub c_n: f64,
    pub sigma: f64,
    /// Overall size s of the bounded part, playing the role of 1/R^{α-2}.
    pub strength: f64,
    pub drift: Vec<f64>,
    pub profile: Vec<f64>,
}

impl ModelForcing {
    pub fn new(constants: &BlowupConstants, sigma: f64, strength: f64, drift: Vec<f64>) -> Result<Self> {
        let n = constants.n;
        if !(sigma > 0.0 && sigma < n as f64 - 4.0) {
            return Err(Error::Invalid(format!("sigma = {sigma} must lie in (0, n-4)")));
        }
        if drift.len() != n {
            return Err(Error::Invalid("drift has the wrong dimension".into()));
        }
        Ok(Self { n, c_n: constants.c_n, sigma, strength, drift, profile: vec![1.0; system_size(n)] })
    }

    pub fn with_profile(mut self, profile: Vec<f64>) -> Self {
        self.profile = profile;
        self
    }

    fn mu0(&self, t: f64) -> f64 {
        self.c_n * t.powf(-1.0 / (self.n as f64 - 4.0))
    }
}

impl Forcing for ModelForcing {
    fn eval(&self, t: f64, _state: &[f64], out: &mut [f64]) {
        let nf = self.n as f64;
        let mu = self.mu0(t);
        let lead = mu.powf(nf - 2.0);
        let bounded = self.strength * mu.powf(nf - 2.0 + self.sigma);
        out[0] = self.strength * mu.powf(nf - 3.0 + self.sigma) * self.profile[0];
        for (l, o) in out.iter_mut().enumerate().skip(1) {
            let drift = if l <= self.n { lead * self.drift[l - 1] } else { 0.0 };
            *o = drift + bounded * self.profile[l];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// First step as a fraction of t₀.
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-300, initial_step: 1e-3, max_steps: 200_000 }
    }
}

/// Accepted steps of the reduced system with their derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTrajectory {
    pub n: usize,
    pub t0: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
}

/// Weighted norms of a computed trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AchievedNorms {
    pub lambda_dot: f64,
    pub xi_dot: f64,
    pub a_dot: f64,
    pub theta_dot: f64,
    pub lambda: f64,
    pub xi_minus_q: f64,
    pub a: f64,
    pub theta: f64,
}

impl ParamTrajectory {
    pub fn lambda(&self) -> Vec<f64> {
        self.states.iter().map(|s| s[0]).collect()
    }

    pub fn xi(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s[1..=self.n].to_vec()).collect()
    }

    pub fn a(&self) -> Vec<[f64; 2]> {
        self.states.iter().map(|s| [s[self.n + 2], s[self.n + 3]]).collect()
    }

    /// State interpolated by cubic Hermite on the accepted steps.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        let m = self.times.len();
        let t = t.clamp(self.times[0], self.times[m - 1]);
        if m == 1 {
            return self.states[0].clone();
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, m - 1) - 1;
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (0..self.states[i].len())
            .map(|k| {
                (2.0 * s3 - 3.0 * s2 + 1.0) * self.states[i][k]
                    + (s3 - 2.0 * s2 + s) * h * self.rates[i][k]
                    + (-2.0 * s3 + 3.0 * s2) * self.states[i + 1][k]
                    + (s3 - s2) * h * self.rates[i + 1][k]
            })
            .collect()
    }

    pub fn norms(&self, constants: &BlowupConstants, q: &[f64], sigma: f64) -> AchievedNorms {
        let n = self.n as f64;
        let sup = |delta: f64, pick: &dyn Fn(usize) -> f64| {
            (0..self.times.len())
                .map(|i| constants.mu0(self.times[i]).powf(-delta) * pick(i))
                .fold(0.0, f64::max)
        };
        let block = |v: &[f64], lo: usize, hi: usize| norm(&v[lo..hi]);
        let n_us = self.n;
        let theta = |v: &[f64]| (v[n_us + 1].powi(2) + block(v, n_us + 4, 3 * n_us).powi(2)).sqrt();
        AchievedNorms {
            lambda_dot: sup(n - 3.0 + sigma, &|i| self.rates[i][0].abs()),
            xi_dot: sup(n - 3.0 + sigma, &|i| block(&self.rates[i], 1, n_us + 1)),
            a_dot: sup(n - 4.0 + sigma, &|i| block(&self.rates[i], n_us + 2, n_us + 4)),
            theta_dot: sup(n - 4.0 + sigma, &|i| theta(&self.rates[i])),
            lambda: sup(1.0 + sigma, &|i| self.states[i][0].abs()),
            xi_minus_q: sup(1.0 + sigma, &|i| {
                self.states[i][1..=n_us].iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            }),
            a: sup(sigma, &|i| block(&self.states[i], n_us + 2, n_us + 4)),
            theta: sup(sigma, &|i| theta(&self.states[i])),
        }
    }

    /// Log-log slope of |ξ(t) - q| over the accepted steps in [t_lo, t_hi].
    pub fn drift_slope(&self, q: &[f64], t_lo: f64, t_hi: f64) -> f64 {
        let (ts, ds): (Vec<f64>, Vec<f64>) = self
            .times
            .iter()
            .zip(&self.states)
            .filter(|(t, _)| **t >= t_lo && **t <= t_hi)
            .map(|(t, s)| (*t, s[1..=self.n].iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()))
            .unzip();
        loglog_slope(&ts, &ds)
    }

    /// CSV header for [`Self::rows`].
    pub fn header(&self) -> Vec<String> {
        let n = self.n;
        let mut h = vec!["t".to_string(), "lambda".to_string()];
        h.extend((1..=n).map(|l| format!("xi{l}")));
        h.push("theta12".into());
        h.push("a1".into());
        h.push("a2".into());
        h.extend((3..=n).map(|l| format!("theta1{l}")));
        h.extend((3..=n).map(|l| format!("theta2{l}")));
        h
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.times.iter().zip(&self.states).map(|(t, s)| std::iter::once(*t).chain(s.iter().copied()).collect())
    }
}

struct System<'a, F: Forcing + ?Sized> {
    constants: &'a BlowupConstants,
    forcing: &'a F,
    exponent: f64,
}

impl<F: Forcing + ?Sized> System<'_, F> {
    /// Scaled unknowns: the first is t^{(n-3)/(n-4)}λ so its 1/t term drops out.
    fn to_physical(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut s = y.to_vec();
        s[0] *= t.powf(-self.exponent);
        s
    }

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let state = self.to_physical(t, y);
        self.forcing.eval(t, &state, out);
        let n = self.constants.n;
        out[0] *= t.powf(self.exponent);
        let inv_mu = 1.0 / self.constants.mu0(t);
        out.iter_mut().skip(n + 1).for_each(|v| *v *= inv_mu);
    }

    fn physical_rates(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        self.rhs(t, y, &mut g);
        let state = self.to_physical(t, y);
        g[0] = g[0] * t.powf(-self.exponent) - self.exponent * state[0] / t;
        g
    }

    /// One implicit trapezoid step solved by fixed-point iteration.
    fn trapezoid(&self, t: f64, y: &[f64], g0: &[f64], h: f64) -> Option<Vec<f64>> {
        let m = y.len();
        let mut next: Vec<f64> = (0..m).map(|i| y[i] + h * g0[i]).collect();
        let mut g1 = vec![0.0; m];
        for _ in 0..60 {
            self.rhs(t + h, &next, &mut g1);
            let mut change = 0.0f64;
            for i in 0..m {
                let v = y[i] + 0.5 * h * (g0[i] + g1[i]);
                change = change.max((v - next[i]).abs() / (1e-300 + v.abs().max(y[i].abs())));
                next[i] = v;
            }
            if change < 1e-14 {
                return Some(next);
            }
        }
        None
    }
}

/// Adaptive implicit-trapezoid integration of the reduced system from `initial`
/// at t₀ to `t_end`, with step-doubling error control.
pub fn integrate_reduced_system<F: Forcing + ?Sized>(
    constants: &BlowupConstants,
    forcing: &F,
    initial: &[f64],
    t0: f64,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<ParamTrajectory> {
    let n = constants.n;
    if initial.len() != system_size(n) {
        return Err(Error::Invalid(format!("initial state needs {} entries", system_size(n))));
    }
    if !(t0 > 0.0 && t_end > t0) {
        return Err(Error::Invalid(format!("need 0 < t0 < t_end, got {t0}, {t_end}")));
    }
    let sys = System { constants, forcing, exponent: lambda_exponent(n) };
    let mut y = initial.to_vec();
    y[0] *= t0.powf(sys.exponent);
    let mut t = t0;
    let mut h = opts.initial_step * t0;
    let mut traj = ParamTrajectory {
        n,
        t0,
        times: vec![t0],
        states: vec![initial.to_vec()],
        rates: vec![sys.physical_rates(t0, &y)],
    };
    let m = y.len();
    let mut g0 = vec![0.0; m];
    for _ in 0..opts.max_steps {
        if t >= t_end {
            return Ok(traj);
        }
        h = h.min(t_end - t);
        if h < 1e-13 * t {
            return Err(Error::StepSize { t });
        }
        sys.rhs(t, &y, &mut g0);
        let big = sys.trapezoid(t, &y, &g0, h);
        let half = sys.trapezoid(t, &y, &g0, 0.5 * h).and_then(|mid| {
            let mut gm = vec![0.0; m];
            sys.rhs(t + 0.5 * h, &mid, &mut gm);
            sys.trapezoid(t + 0.5 * h, &mid, &gm, 0.5 * h)
        });
        let (Some(big), Some(small)) = (big, half) else {
            h *= 0.25;
            continue;
        };
        let err = (0..m)
            .map(|i| (small[i] - big[i]).abs() / 3.0 / (opts.abs_tol + opts.rel_tol * small[i].abs().max(y[i].abs())))
            .fold(0.0, f64::max);
        if err <= 1.0 {
            t += h;
            y = small;
            traj.times.push(t);
            traj.states.push(sys.to_physical(t, &y));
            traj.rates.push(sys.physical_rates(t, &y));
        }
        let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 4.0) };
        h *= factor;
    }
    Err(Error::StepSize { t })
}

/// Initial state whose ξ decays onto q under the drift, matching [`XiSolution`] with h = 0.
pub fn decaying_initial_state(constants: &BlowupConstants, q: &[f64], drift: &[f64], t0: f64) -> Vec<f64> {
    let mut s = vec![0.0; system_size(constants.n)];
    let lead = constants.mu0_tail(t0);
    for l in 0..constants.n {
        s[1 + l] = q[l] - drift[l] * lead;
    }
    s
}

/// Slope of log|λ| for the unforced closed form, sampled over [t0, t1].
pub fn unforced_lambda_slope(n: usize, t0: f64, t1: f64) -> Result<f64> {
    let sol = LambdaSolution::new(n, t0, 1.0, |_| 0.0)?;
    let ts = geomspace(t0, t1, 20);
    let vs = ts.iter().map(|&t| sol.value(t)).collect::<Result<Vec<_>>>()?;
    Ok(loglog_slope(&ts, &vs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constants(n: usize, grad: Vec<f64>) -> BlowupConstants {
        let alpha = crate::profiles::bubble_alpha(n);
        BlowupConstants::new(n, 900.0, 80.0, 0.0, alpha, grad).unwrap()
    }

    #[test]
    fn b_closed_forms() {
        let alpha5 = 15f64.powf(0.75);
        assert!((solve_b(alpha5, 5).unwrap() - 2.0 / (3.0 * alpha5)).abs() < 1e-15);
        let h = 3.7;
        assert!((solve_b(h, 6).unwrap() - (1.0 / (2.0 * h)).sqrt()).abs() < 1e-15);
        assert!(matches!(solve_b(0.0, 5), Err(Error::NonPositiveH(_))));
        assert!(matches!(solve_b(-1.0, 6), Err(Error::NonPositiveH(_))));
    }

    proptest! {
        #[test]
        fn b_residual_tiny(h in 0.1f64..10.0, n in 5usize..8) {
            let b = solve_b(h, n).unwrap();
            prop_assert!(b_residual(h, b, n) <= 1e-12);
        }
    }

    #[test]
    fn mu0_rates() {
        for n in [5, 6, 7] {
            let c = constants(n, vec![0.0; n]);
            assert!(c.mu0_consistency(&geomspace(1.0, 1e6, 30)) < 1e-12);
            let ts = geomspace(10.0, 1e4, 10);
            let mus: Vec<f64> = ts.iter().map(|&t| c.mu0(t)).collect();
            assert!((loglog_slope(&ts, &mus) + 1.0 / (n as f64 - 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_norm_definition() {
        let c = constants(5, vec![0.0; 5]);
        let ts = geomspace(10.0, 1e4, 50);
        let vals: Vec<f64> = ts.iter().map(|&t| c.mu0(t).powf(1.7)).collect();
        assert!((c.weighted_norm(&ts, &vals, 1.7) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_closed_form() {
        let sol = LambdaSolution::new(5, 10.0, 2.0, |_| 0.0).unwrap();
        for t in [10.0, 30.0, 500.0] {
            assert!((sol.value(t).unwrap() - 2.0 / (t * t)).abs() < 1e-15);
        }
        for n in [5, 6, 7] {
            let slope = unforced_lambda_slope(n, 10.0, 1e4).unwrap();
            assert!((slope + lambda_exponent(n)).abs() < 1e-10);
        }
        // FD check of the ODE with a forcing.
        let c = constants(6, vec![0.0; 6]);
        let sol = LambdaSolution::new(6, 10.0, 0.3, |t| c.mu0(t).powf(3.5)).unwrap();
        for t in [20.0, 200.0, 900.0] {
            let h = 1e-4 * t;
            let fd = (sol.value(t + h).unwrap() - sol.value(t - h).unwrap()) / (2.0 * h);
            let d = sol.derivative(t).unwrap();
            assert!((fd - d).abs() < 1e-6 * fd.abs(), "{fd} {d}");
        }
    }

    #[test]
    fn integrator_matches_lambda_closed_form() {
        let n = 5;
        let c = constants(n, vec![0.0; n]);
        let sigma = 0.5;
        let forcing = ModelForcing::new(&c, sigma, 1.0, vec![0.0; n]).unwrap();
        let t0 = 10.0;
        let traj =
            integrate_reduced_system(&c, &forcing, &vec![0.0; system_size(n)], t0, 1e3 * t0, &Default::default())
                .unwrap();
        let exact = LambdaSolution::new(n, t0, 0.0, |t| c.mu0(t).powf(n as f64 - 3.0 + sigma)).unwrap();
        let mut worst = 0.0f64;
        for (t, s) in traj.times.iter().zip(&traj.states).skip(1) {
            let e = exact.value(*t).unwrap();
            worst = worst.max((s[0] - e).abs() / e.abs());
        }
        assert!(worst < 1e-6, "{worst}");
        // Bounded weighted quantity t^{(1+σ)/(n-4)}λ.
        let sup = traj.times.iter().zip(traj.lambda()).map(|(t, l)| t.powf(1.0 + sigma) * l.abs()).fold(0.0, f64::max);
        assert!(sup.is_finite() && sup < 1.0);
    }

    #[test]
    fn homogeneous_system_is_frozen() {
        let n = 6;
        let mut q = vec![0.0; n];
        q[1] = 0.3;
        let c = constants(n, vec![0.0; n]);
        let zero = |_: f64, _: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        let mut init = vec![0.0; system_size(n)];
        init[1..=n].copy_from_slice(&q);
        let traj = integrate_reduced_system(&c, &zero, &init, 5.0, 500.0, &Default::default()).unwrap();
        assert!(traj.states.iter().all(|s| s == &init));
    }

    #[test]
    fn drift_rate_and_closed_form() {
        let n = 5;
        let grad = vec![3.0, -1.0, 0.0, 0.0, 0.0];
        let c = constants(n, grad);
        let q = vec![0.2, 0.1, 0.0, 0.0, 0.0];
        let coupling = 0.7;
        let drift: Vec<f64> = c.grad_h.iter().map(|g| coupling * c.b.powi(3) * g).collect();
        let strength = norm(&drift);
        let forcing = ModelForcing::new(&c, 0.5, strength, drift.clone()).unwrap();
        let t0 = 10.0;
        let sigma = 0.5;
        let sol = XiSolution::new(&c, q.clone(), coupling, |t| {
            let mut out = vec![0.0; system_size(n)];
            forcing.eval(t, &[], &mut out);
            (1..=n).map(|l| out[l] - c.mu0(t).powi(3) * drift[l - 1]).collect()
        })
        .unwrap();
        let mut init = vec![0.0; system_size(n)];
        init[1..=n].copy_from_slice(&sol.value(t0).unwrap());
        let traj = integrate_reduced_system(&c, &forcing, &init, t0, 1e3 * t0, &Default::default()).unwrap();
        let slope = traj.drift_slope(&q, 10.0 * t0, 1e3 * t0);
        assert!((slope + 2.0).abs() < 0.05, "{slope}");
        for t in [100.0, 1000.0] {
            let num = traj.state_at(t);
            let exact = sol.value(t).unwrap();
            let dist = norm(&exact.iter().zip(&q).map(|(a, b)| a - b).collect::<Vec<_>>());
            let err = (1..=n).map(|l| (num[l] - exact[l - 1]).abs()).fold(0.0, f64::max);
            // ξ itself is O(|q|), so round-off sets an absolute floor.
            assert!(err < 1e-6 * dist + 1e-13 * norm(&q), "t = {t}: {err} vs {dist}");
            // |ξ - q| ≲ t^{-2/(n-4)} + t^{-(1+σ)/(n-4)}
            assert!(dist < 10.0 * (t.powf(-2.0) + t.powf(-(1.0 + sigma))));
        }
    }

    #[test]
    fn centered_ball_has_no_drift() {
        let n = 5;
        let c = constants(n, vec![0.0; n]);
        let sol = XiSolution::new(&c, vec![0.0; n], 1.0, |_| vec![0.0; 5]).unwrap();
        assert!(sol.value(50.0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn norms_scale_with_forcing_strength() {
        let n = 5;
        let c = constants(n, vec![0.0; n]);
        let run = |s: f64| {
            let f = ModelForcing::new(&c, 0.5, s, vec![0.0; n]).unwrap();
            integrate_reduced_system(&c, &f, &vec![0.0; system_size(n)], 10.0, 1e4, &Default::default())
                .unwrap()
                .norms(&c, &[0.0; 5], 0.5)
        };
        let (a, b) = (run(1.0), run(0.5));
        for (x, y) in [(a.lambda, b.lambda), (a.xi_dot, b.xi_dot), (a.a, b.a), (a.theta_dot, b.theta_dot)] {
            assert!((y / x - 0.5).abs() < 0.1, "{x} {y}");
        }
    }
}
