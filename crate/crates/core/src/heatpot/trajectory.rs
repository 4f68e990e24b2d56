//! Parameter histories (μ, ξ, ȧ) feeding the heat potentials.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub trait Trajectory: Send + Sync {
    fn dim(&self) -> usize;
    /// Initial time t₀.
    fn start(&self) -> f64;
    fn mu(&self, t: f64) -> f64;
    fn mu_dot(&self, t: f64) -> f64;
    fn xi(&self, t: f64, out: &mut [f64]);
    fn xi_dot(&self, t: f64, out: &mut [f64]);
    fn a_dot(&self, t: f64) -> [f64; 2];
}

/// μ = scale·t^{-exponent}, ξ = center + drift·(t/t₀)^{-drift_exponent},
/// ȧ = kelvin_rate·(t/t₀)^{-kelvin_exponent}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawTrajectory {
    pub t0: f64,
    pub mu_scale: f64,
    pub mu_exponent: f64,
    pub center: Vec<f64>,
    pub drift: Vec<f64>,
    pub drift_exponent: f64,
    pub kelvin_rate: [f64; 2],
    pub kelvin_exponent: f64,
}

impl PowerLawTrajectory {
    pub fn new(n: usize, t0: f64, mu_scale: f64, mu_exponent: f64) -> Result<Self> {
        crate::error::check_dim(n)?;
        if !(t0 > 0.0 && mu_scale > 0.0) {
            return Err(Error::Invalid(format!("need t0 > 0 and mu scale > 0, got {t0}, {mu_scale}")));
        }
        Ok(Self {
            t0,
            mu_scale,
            mu_exponent,
            center: vec![0.0; n],
            drift: vec![0.0; n],
            drift_exponent: 1.0,
            kelvin_rate: [0.0; 2],
            kelvin_exponent: 1.0,
        })
    }

    /// μ(t) = b·cₙ·t^{-1/(n-4)} about the origin.
    pub fn self_similar(n: usize, t0: f64, b: f64, c_n: f64) -> Result<Self> {
        Self::new(n, t0, b * c_n, 1.0 / (n as f64 - 4.0))
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = center;
        self
    }

    pub fn with_drift(mut self, drift: Vec<f64>, exponent: f64) -> Self {
        self.drift = drift;
        self.drift_exponent = exponent;
        self
    }

    pub fn with_kelvin_rate(mut self, rate: [f64; 2], exponent: f64) -> Self {
        self.kelvin_rate = rate;
        self.kelvin_exponent = exponent;
        self
    }
}

impl Trajectory for PowerLawTrajectory {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn start(&self) -> f64 {
        self.t0
    }

    fn mu(&self, t: f64) -> f64 {
        self.mu_scale * t.powf(-self.mu_exponent)
    }

    fn mu_dot(&self, t: f64) -> f64 {
        -self.mu_exponent * self.mu(t) / t
    }

    fn xi(&self, t: f64, out: &mut [f64]) {
        let f = (t / self.t0).powf(-self.drift_exponent);
        for ((o, c), d) in out.iter_mut().zip(&self.center).zip(&self.drift) {
            *o = c + d * f;
        }
    }

    fn xi_dot(&self, t: f64, out: &mut [f64]) {
        let f = -self.drift_exponent * (t / self.t0).powf(-self.drift_exponent) / t;
        for (o, d) in out.iter_mut().zip(&self.drift) {
            *o = d * f;
        }
    }

    fn a_dot(&self, t: f64) -> [f64; 2] {
        let f = (t / self.t0).powf(-self.kelvin_exponent);
        [self.kelvin_rate[0] * f, self.kelvin_rate[1] * f]
    }
}

/// Frozen geometry: μ and ξ stay fixed while the rates only scale the sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenTrajectory {
    pub t0: f64,
    pub mu: f64,
    pub mu_rate: f64,
    pub center: Vec<f64>,
    pub xi_rate: Vec<f64>,
    pub a_rate: [f64; 2],
}

impl Trajectory for FrozenTrajectory {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn start(&self) -> f64 {
        self.t0
    }

    fn mu(&self, _: f64) -> f64 {
        self.mu
    }

    fn mu_dot(&self, _: f64) -> f64 {
        self.mu_rate
    }

    fn xi(&self, _: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.center);
    }

    fn xi_dot(&self, _: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.xi_rate);
    }

    fn a_dot(&self, _: f64) -> [f64; 2] {
        self.a_rate
    }
}

/// Piecewise cubic Hermite history. μ and ξ use their sampled derivatives;
/// ȧ uses three-point slopes. Queries outside the sampled range clamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTrajectory {
    times: Vec<f64>,
    mu: Vec<f64>,
    mu_dot: Vec<f64>,
    xi: Vec<Vec<f64>>,
    xi_dot: Vec<Vec<f64>>,
    a_dot: Vec<[f64; 2]>,
    a_slope: Vec<[f64; 2]>,
}

fn hermite(s: f64, h: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let (s2, s3) = (s * s, s * s * s);
    let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1;
    let slope = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * h * d0 + (-6.0 * s2 + 6.0 * s) * y1
        + (3.0 * s2 - 2.0 * s) * h * d1)
        / h;
    (value, slope)
}

impl SampledTrajectory {
    /// Samples another trajectory at strictly increasing `times`.
    pub fn sample<T: Trajectory + ?Sized>(source: &T, times: Vec<f64>) -> Result<Self> {
        let n = source.dim();
        let mut xi = Vec::with_capacity(times.len());
        let mut xi_dot = Vec::with_capacity(times.len());
        for &t in &times {
            let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
            source.xi(t, &mut a);
            source.xi_dot(t, &mut b);
            xi.push(a);
            xi_dot.push(b);
        }
        Self::from_samples(
            times.clone(),
            times.iter().map(|&t| source.mu(t)).collect(),
            times.iter().map(|&t| source.mu_dot(t)).collect(),
            xi,
            xi_dot,
            times.iter().map(|&t| source.a_dot(t)).collect(),
        )
    }

    pub fn from_samples(
        times: Vec<f64>,
        mu: Vec<f64>,
        mu_dot: Vec<f64>,
        xi: Vec<Vec<f64>>,
        xi_dot: Vec<Vec<f64>>,
        a_dot: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let m = times.len();
        if m < 3 || [mu.len(), mu_dot.len(), xi.len(), xi_dot.len(), a_dot.len()].iter().any(|&l| l != m) {
            return Err(Error::Invalid("trajectory samples need at least 3 equally long columns".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("trajectory times must increase strictly".into()));
        }
        if mu.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Invalid("trajectory scale mu must stay positive".into()));
        }
        let a_slope = (0..m)
            .map(|i| {
                let (l, r) = (i.saturating_sub(1), (i + 1).min(m - 1));
                let h = times[r] - times[l];
                [(a_dot[r][0] - a_dot[l][0]) / h, (a_dot[r][1] - a_dot[l][1]) / h]
            })
            .collect();
        Ok(Self { times, mu, mu_dot, xi, xi_dot, a_dot, a_slope })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let t = t.clamp(self.times[0], *self.times.last().unwrap());
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let h = self.times[i + 1] - self.times[i];
        (i, (t - self.times[i]) / h, h)
    }
}

impl Trajectory for SampledTrajectory {
    fn dim(&self) -> usize {
        self.xi[0].len()
    }

    fn start(&self) -> f64 {
        self.times[0]
    }

    fn mu(&self, t: f64) -> f64 {
        let (i, s, h) = self.locate(t);
        hermite(s, h, self.mu[i], self.mu[i + 1], self.mu_dot[i], self.mu_dot[i + 1]).0
    }

    fn mu_dot(&self, t: f64) -> f64 {
        let (i, s, h) = self.locate(t);
        hermite(s, h, self.mu[i], self.mu[i + 1], self.mu_dot[i], self.mu_dot[i + 1]).1
    }

    fn xi(&self, t: f64, out: &mut [f64]) {
        let (i, s, h) = self.locate(t);
        for (k, o) in out.iter_mut().enumerate() {
            *o = hermite(s, h, self.xi[i][k], self.xi[i + 1][k], self.xi_dot[i][k], self.xi_dot[i + 1][k]).0;
        }
    }

    fn xi_dot(&self, t: f64, out: &mut [f64]) {
        let (i, s, h) = self.locate(t);
        for (k, o) in out.iter_mut().enumerate() {
            *o = hermite(s, h, self.xi[i][k], self.xi[i + 1][k], self.xi_dot[i][k], self.xi_dot[i + 1][k]).1;
        }
    }

    fn a_dot(&self, t: f64) -> [f64; 2] {
        let (i, s, h) = self.locate(t);
        let f = |k: usize| {
            hermite(s, h, self.a_dot[i][k], self.a_dot[i + 1][k], self.a_slope[i][k], self.a_slope[i + 1][k]).0
        };
        [f(0), f(1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::geomspace;

    #[test]
    fn sampled_history_is_accurate() {
        let exact = PowerLawTrajectory::self_similar(5, 10.0, 0.1, 0.2)
            .unwrap()
            .with_drift(vec![0.01, 0.0, 0.0, 0.0, 0.0], 2.0);
        let sampled = SampledTrajectory::sample(&exact, geomspace(10.0, 1e4, 181)).unwrap();
        let (mut a, mut b) = ([0.0; 5], [0.0; 5]);
        for t in geomspace(10.0, 1e4, 997) {
            assert!((sampled.mu(t) / exact.mu(t) - 1.0).abs() < 1e-6, "t = {t}");
            assert!((sampled.mu_dot(t) / exact.mu_dot(t) - 1.0).abs() < 1e-4);
            sampled.xi(t, &mut a);
            exact.xi(t, &mut b);
            assert!((a[0] - b[0]).abs() < 1e-6 * (b[0] - exact.center[0]).abs());
        }
    }

    #[test]
    fn power_law_derivatives() {
        let tr = PowerLawTrajectory::self_similar(6, 5.0, 0.3, 0.7)
            .unwrap()
            .with_drift(vec![0.1; 6], 1.0);
        let t = 17.0;
        let h = 1e-4;
        let fd = (tr.mu(t + h) - tr.mu(t - h)) / (2.0 * h);
        assert!((fd / tr.mu_dot(t) - 1.0).abs() < 1e-8);
        let (mut p, mut m, mut d) = ([0.0; 6], [0.0; 6], [0.0; 6]);
        tr.xi(t + h, &mut p);
        tr.xi(t - h, &mut m);
        tr.xi_dot(t, &mut d);
        assert!(((p[2] - m[2]) / (2.0 * h) / d[2] - 1.0).abs() < 1e-7);
        assert!(SampledTrajectory::from_samples(vec![1.0, 1.0, 2.0], vec![1.0; 3], vec![0.0; 3], vec![vec![0.0; 5]; 3], vec![vec![0.0; 5]; 3], vec![[0.0; 2]; 3]).is_err());
    }
}
