//! Radial method of lines for u_t = Δu + |u|^{p-1}u on a ball with
//! Dirichlet data, finite-volume in r on a sinh-graded grid.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::check_dim;
use crate::profiles::{bubble_alpha, critical_exponent};
use crate::util::{loglog_slope, sphere_area};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub n: usize,
    pub radii: Vec<f64>,
    /// Faces r_{i+1/2}, one fewer than nodes.
    faces: Vec<f64>,
    /// Cell volumes ∫ r^{n-1} dr over [r_{i-1/2}, r_{i+1/2}], node 0 from the origin.
    volumes: Vec<f64>,
}

impl RadialGrid {
    /// Nodes r_i = R·sinh(κ i/N)/sinh(κ), κ chosen so the first `core_nodes`
    /// intervals fit inside `core_radius`.
    pub fn graded(n: usize, radius: f64, core_radius: f64, intervals: usize, core_nodes: usize) -> Result<Self> {
        check_dim(n)?;
        if !(radius > 0.0 && core_radius > 0.0 && core_radius < radius) || intervals < 2 * core_nodes.max(1) {
            return Err(Error::Invalid(format!(
                "bad grid request: radius {radius}, core {core_radius}, {intervals} intervals"
            )));
        }
        let frac = core_nodes as f64 / intervals as f64;
        let reach = |k: f64| if k < 1e-12 { frac } else { (k * frac).sinh() / k.sinh() };
        let target = core_radius / radius;
        let kappa = if reach(0.0) <= target {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            while reach(hi) > target {
                hi *= 2.0;
                if hi > 700.0 {
                    return Err(Error::Invalid("core too small for the requested node count".into()));
                }
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if reach(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let radii = (0..=intervals)
            .map(|i| {
                let s = i as f64 / intervals as f64;
                if kappa == 0.0 {
                    radius * s
                } else {
                    radius * (kappa * s).sinh() / kappa.sinh()
                }
            })
            .collect();
        Ok(Self::from_radii(n, radii))
    }

    pub fn uniform(n: usize, radius: f64, intervals: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self::from_radii(n, (0..=intervals).map(|i| radius * i as f64 / intervals as f64).collect()))
    }

    fn from_radii(n: usize, mut radii: Vec<f64>) -> Self {
        radii[0] = 0.0;
        let nf = n as f64;
        let faces: Vec<f64> = radii.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let m = radii.len();
        let volumes = (0..m)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { faces[i - 1] };
                let hi = if i + 1 == m { radii[m - 1] } else { faces[i] };
                (hi.powf(nf) - lo.powf(nf)) / nf
            })
            .collect();
        Self { n, radii, faces, volumes }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn nodes_inside(&self, r: f64) -> usize {
        self.radii.iter().filter(|&&x| x <= r).count()
    }

    /// Coefficient of (u_{i+1} - u_i) in the flux through face i+1/2.
    fn conductance(&self, i: usize) -> f64 {
        self.faces[i].powf(self.n as f64 - 1.0) / (self.radii[i + 1] - self.radii[i])
    }

    /// Discrete radial Laplacian at interior nodes (boundary row left at 0).
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut out = vec![0.0; m];
        for i in 0..m - 1 {
            let flux = self.conductance(i) * (u[i + 1] - u[i]);
            out[i] += flux;
            if i + 1 < m - 1 {
                out[i + 1] -= flux;
            }
        }
        for (o, v) in out.iter_mut().zip(&self.volumes).take(m - 1) {
            *o /= v;
        }
        out[m - 1] = 0.0;
        out
    }

    /// ∫ f dx over the ball, as Σ V_i f_i |S^{n-1}|.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        sphere_area(self.n) * f.iter().zip(&self.volumes).map(|(a, v)| a * v).sum::<f64>()
    }

    /// Dirichlet energy ½∫|∇u|² in the finite-volume form.
    pub fn dirichlet_energy(&self, u: &[f64]) -> f64 {
        let s: f64 = (0..self.len() - 1).map(|i| self.conductance(i) * (u[i + 1] - u[i]).powi(2)).sum();
        0.5 * sphere_area(self.n) * s
    }
}

/// Solves the tridiagonal system (a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i).
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let m = b.len();
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
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
pub struct RadialSolver {
    pub grid: RadialGrid,
    pub p: f64,
    pub nonlinear: bool,
    pub boundary_value: f64,
    /// max|u| beyond which a step reports blow-up.
    pub overflow_guard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepOutcome {
    Ok,
    BlowUp { max_abs: f64 },
}

impl RadialSolver {
    pub fn new(grid: RadialGrid) -> Self {
        let p = critical_exponent(grid.n);
        Self { grid, p, nonlinear: true, boundary_value: 0.0, overflow_guard: 1e150 }
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn with_boundary_value(mut self, g: f64) -> Self {
        self.boundary_value = g;
        self
    }

    fn reaction(&self, u: f64) -> f64 {
        if self.nonlinear {
            u.abs().powf(self.p - 1.0) * u
        } else {
            0.0
        }
    }

    /// Largest reaction rate p|u|^{p-1}; bounds the explicit step.
    pub fn reaction_rate(&self, u: &[f64]) -> f64 {
        if !self.nonlinear {
            return 0.0;
        }
        let m = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.p * m.powf(self.p - 1.0)
    }

    /// One IMEX step: implicit diffusion, explicit reaction. The state is
    /// advanced in place even when the guard trips.
    pub fn step(&self, u: &mut [f64], dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0) {
            return Err(Error::Invalid(format!("time step {dt} must be positive")));
        }
        let g = &self.grid;
        let m = g.len();
        if u.len() != m {
            return Err(Error::Invalid("state length does not match grid".into()));
        }
        let (mut a, mut b, mut c, mut d) = (vec![0.0; m], vec![1.0; m], vec![0.0; m], vec![0.0; m]);
        for i in 0..m - 1 {
            let k = dt / g.volumes[i];
            let right = g.conductance(i);
            let left = if i > 0 { g.conductance(i - 1) } else { 0.0 };
            a[i] = -k * left;
            c[i] = -k * right;
            b[i] = 1.0 + k * (left + right);
            d[i] = u[i] + dt * self.reaction(u[i]);
        }
        d[m - 1] = self.boundary_value;
        let next = thomas(&a, &b, &c, &d);
        u.copy_from_slice(&next);
        let max_abs = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !max_abs.is_finite() || max_abs > self.overflow_guard {
            return Ok(StepOutcome::BlowUp { max_abs });
        }
        Ok(StepOutcome::Ok)
    }

    /// ∫ ½|∇u|² - |u|^{p+1}/(p+1), non-increasing under [`Self::step`] with zero boundary data.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let pot: Vec<f64> = u.iter().map(|v| v.abs().powf(self.p + 1.0) / (self.p + 1.0)).collect();
        self.grid.dirichlet_energy(u) - if self.nonlinear { self.grid.integrate(&pot) } else { 0.0 }
    }
}

/// Bubble dilation from the central value: μ = (αₙ/u(0))^{2/(n-2)}.
/// `None` unless u(0) > 0 is a strict maximum.
pub fn fit_mu(grid: &RadialGrid, u: &[f64]) -> Option<f64> {
    let u0 = u[0];
    if !(u0 > 0.0) || u.iter().skip(1).any(|&v| v >= u0) {
        return None;
    }
    Some((bubble_alpha(grid.n) / u0).powf(2.0 / (grid.n as f64 - 2.0)))
}

/// J_ν(x) by its power series; adequate for x ≲ 20.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut sum = 0.0;
    let log_lead = nu * half.ln();
    for k in 0..200 {
        let kf = k as f64;
        let log_term = 2.0 * kf * half.ln() + log_lead - ln_gamma(kf + 1.0) - ln_gamma(kf + nu + 1.0);
        let term = log_term.exp();
        sum += if k % 2 == 0 { term } else { -term };
        if kf > half && term < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// First positive zero of J_ν.
pub fn bessel_first_zero(nu: f64) -> f64 {
    let mut lo = nu.max(0.5);
    let step = 0.05;
    let f0 = bessel_j(nu, lo);
    let mut hi = lo + step;
    while bessel_j(nu, hi).signum() == f0.signum() {
        lo = hi;
        hi += step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_j(nu, mid).signum() == f0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// First Dirichlet eigenvalue of -Δ on the n-ball of radius R.
pub fn first_dirichlet_eigenvalue(n: usize, radius: f64) -> f64 {
    let j = bessel_first_zero(n as f64 / 2.0 - 1.0);
    (j / radius).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub n: usize,
    pub radius: f64,
    pub t0: f64,
    pub t_end: f64,
    /// Dilation of the initial bubble.
    pub mu_initial: f64,
    /// Multiplier on the initial ansatz.
    pub amplitude: f64,
    pub intervals: usize,
    pub records: usize,
    /// Explicit step as a fraction of 1/max(p|u|^{p-1}).
    pub safety: f64,
    pub max_steps: usize,
}

impl DemoConfig {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        if !(self.radius > 0.0 && self.t0 > 0.0 && self.t_end > self.t0) {
            return Err(Error::Invalid("demo needs radius > 0 and 0 < t0 < t_end".into()));
        }
        if !(self.mu_initial > 0.0 && self.mu_initial < 0.5 * self.radius) {
            return Err(Error::Invalid(format!("initial dilation {} out of range", self.mu_initial)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) || self.records < 2 || self.intervals < 64 {
            return Err(Error::Invalid("demo needs safety in (0,1], records >= 2, intervals >= 64".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DemoOutcome {
    Completed,
    BlowUp { t: f64 },
    Decayed { t: f64 },
    /// The core dropped below the grid resolution.
    Unresolved { t: f64 },
    StepLimit { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub t: f64,
    pub mu: Option<f64>,
    pub energy: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoResult {
    pub records: Vec<DemoRecord>,
    pub outcome: DemoOutcome,
    pub steps: usize,
    /// Log-log slope of the fitted μ over the records where the fit is valid.
    pub mu_slope: Option<f64>,
}

/// Radial bubble u = Q_μ - μ^{(n-2)/2}αₙR^{2-n} (zero on the boundary up to O(μ^{(n+2)/2})),
/// scaled by the amplitude and evolved over [t0, t_end].
pub fn run_blowup_demo(cfg: &DemoConfig) -> Result<DemoResult> {
    cfg.validate()?;
    let n = cfg.n;
    let grid = RadialGrid::graded(n, cfg.radius, cfg.mu_initial, cfg.intervals, 20)?;
    let solver = RadialSolver::new(grid);
    let alpha = bubble_alpha(n);
    let w = (n as f64 - 2.0) / 2.0;
    let mu = cfg.mu_initial;
    let shift = mu.powf(w) * alpha * cfg.radius.powf(2.0 - n as f64);
    let mut u: Vec<f64> = solver
        .grid
        .radii
        .iter()
        .map(|r| cfg.amplitude * (mu.powf(-w) * alpha * (1.0 + (r / mu).powi(2)).powf(-w) - shift))
        .collect();
    let last = u.len() - 1;
    u[last] = 0.0;

    let record_times = crate::util::geomspace(cfg.t0, cfg.t_end, cfg.records);
    let h0 = solver.grid.radii[1];
    let initial_max = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let dt_max = (cfg.t_end - cfg.t0) / 200.0;
    let mut t = cfg.t0;
    let mut records = Vec::with_capacity(cfg.records);
    let mut next = 0;
    let mut steps = 0;
    let mut outcome = DemoOutcome::Completed;
    let snapshot = |t: f64, u: &[f64]| DemoRecord {
        t,
        mu: fit_mu(&solver.grid, u),
        energy: solver.energy(u),
        max_abs: u.iter().fold(0.0f64, |a, v| a.max(v.abs())),
    };
    loop {
        while next < record_times.len() && t >= record_times[next] * (1.0 - 1e-12) {
            records.push(snapshot(t, &u));
            next += 1;
        }
        if next == record_times.len() {
            break;
        }
        if steps >= cfg.max_steps {
            outcome = DemoOutcome::StepLimit { t };
            break;
        }
        let rate = solver.reaction_rate(&u);
        let dt = (cfg.safety / rate.max(1e-300)).min(dt_max).min(record_times[next] - t).max(1e-300);
        let res = solver.step(&mut u, dt)?;
        t = if next < record_times.len() && record_times[next] - t <= dt { record_times[next] } else { t + dt };
        steps += 1;
        if let StepOutcome::BlowUp { .. } = res {
            outcome = DemoOutcome::BlowUp { t };
            break;
        }
        let max_abs = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if initial_max > 0.0 && max_abs < 1e-3 * initial_max {
            outcome = DemoOutcome::Decayed { t };
            records.push(snapshot(t, &u));
            break;
        }
        if let Some(m) = fit_mu(&solver.grid, &u) {
            if m < 5.0 * h0 {
                outcome = DemoOutcome::Unresolved { t };
                records.push(snapshot(t, &u));
                break;
            }
        }
    }
    let (ts, ms): (Vec<f64>, Vec<f64>) = records.iter().filter_map(|r| r.mu.map(|m| (r.t, m))).unzip();
    let mu_slope = (ts.len() >= 3).then(|| loglog_slope(&ts, &ms));
    Ok(DemoResult { records, outcome, steps, mu_slope })
}

/// Amplitude bracket around the decay/concentration threshold and the run just
/// above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRun {
    pub below: f64,
    pub above: f64,
    pub iterations: usize,
    pub result: DemoResult,
}

/// Bisects the initial amplitude between a decaying and a concentrating run.
/// The returned run is the concentrating one closest to the threshold.
pub fn bisect_threshold(cfg: &DemoConfig, mut below: f64, mut above: f64, iterations: usize) -> Result<ThresholdRun> {
    let run = |amplitude: f64| run_blowup_demo(&DemoConfig { amplitude, ..cfg.clone() });
    let concentrates = |r: &DemoResult| matches!(r.outcome, DemoOutcome::BlowUp { .. } | DemoOutcome::Unresolved { .. });
    if concentrates(&run(below)?) {
        return Err(Error::Invalid(format!("amplitude {below} does not decay")));
    }
    let mut best = run(above)?;
    if !concentrates(&best) {
        return Err(Error::Invalid(format!("amplitude {above} does not concentrate")));
    }
    for _ in 0..iterations {
        let mid = 0.5 * (below + above);
        let r = run(mid)?;
        if concentrates(&r) {
            above = mid;
            best = r;
        } else {
            below = mid;
        }
    }
    Ok(ThresholdRun { below, above, iterations, result: best })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_zeros() {
        // j_{1/2,1} = π, j_{3/2,1} solves tan x = x.
        assert!((bessel_first_zero(0.5) - std::f64::consts::PI).abs() < 1e-12);
        let j = bessel_first_zero(1.5);
        assert!((j.tan() - j).abs() < 1e-9 * j);
        assert!((bessel_first_zero(0.0) - 2.404_825_557_695_773).abs() < 1e-12);
    }

    #[test]
    fn graded_grid_resolves_core() {
        let g = RadialGrid::graded(5, 1.0, 1e-3, 600, 20).unwrap();
        assert!(g.nodes_inside(1e-3) >= 20);
        assert!(g.radii.windows(2).all(|w| w[1] > w[0]));
        assert!((g.radius() - 1.0).abs() < 1e-15);
        // Volumes sum to the ball volume.
        let ones = vec![1.0; g.len()];
        let vol = sphere_area(5) / 5.0;
        assert!((g.integrate(&ones) - vol).abs() < 1e-12 * vol);
    }

    #[test]
    fn zero_is_fixed() {
        let s = RadialSolver::new(RadialGrid::uniform(5, 1.0, 50).unwrap());
        let mut u = vec![0.0; 51];
        s.step(&mut u, 0.1).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_decay_rate_matches_bessel_eigenvalue() {
        for n in [5, 6] {
            let s = RadialSolver::new(RadialGrid::uniform(n, 1.0, 800).unwrap());
            let mut u: Vec<f64> = s.grid.radii.iter().map(|r| 1e-8 * (1.0 - r * r)).collect();
            let dt = 1e-4;
            let mut t = 0.0;
            let mut samples = vec![];
            while t < 0.6 {
                s.step(&mut u, dt).unwrap();
                t += dt;
                if t > 0.2 {
                    samples.push((t, u[0].ln()));
                }
            }
            let (slope, _) = crate::util::linear_fit(&samples);
            let lam = first_dirichlet_eigenvalue(n, 1.0);
            // Backward Euler damps by 1/(1+dtλ) per step.
            let rate = (1.0 + dt * lam).ln() / dt;
            assert!((-slope - rate).abs() < 1e-3 * rate, "n={n}: {} vs {rate}", -slope);
        }
    }

    #[test]
    fn harmonic_steady_state() {
        let s = RadialSolver::new(RadialGrid::uniform(5, 1.0, 100).unwrap()).linear().with_boundary_value(0.7);
        let mut u = vec![0.0; 101];
        for _ in 0..400 {
            s.step(&mut u, 0.05).unwrap();
        }
        assert!(u.iter().all(|v| (v - 0.7).abs() < 1e-10));
    }

    #[test]
    fn energy_is_non_increasing() {
        let s = RadialSolver::new(RadialGrid::graded(5, 1.0, 0.05, 400, 20).unwrap());
        let alpha = bubble_alpha(5);
        let mut u: Vec<f64> =
            s.grid.radii.iter().map(|r| 0.5 * alpha * 0.2f64.powf(-1.5) * (1.0 + (r / 0.2).powi(2)).powf(-1.5) * (1.0 - r * r)).collect();
        let mut e = s.energy(&u);
        for _ in 0..300 {
            let dt = (0.2 / s.reaction_rate(&u)).min(1e-2);
            s.step(&mut u, dt).unwrap();
            let e1 = s.energy(&u);
            assert!(e1 <= e + 1e-8 * e.abs().max(1.0), "{e1} > {e}");
            e = e1;
        }
    }

    #[test]
    fn spatial_convergence_is_second_order() {
        let n = 5;
        let run = |m: usize| {
            let s = RadialSolver::new(RadialGrid::uniform(n, 1.0, m).unwrap());
            let mut u: Vec<f64> = s.grid.radii.iter().map(|r| (1.0 - r * r) * (1.0 + r * r)).collect();
            for _ in 0..10 {
                s.step(&mut u, 1e-3).unwrap();
            }
            (u[0], u[m / 2])
        };
        let (a, b, c) = (run(50), run(100), run(200));
        let ratio0 = (a.0 - b.0) / (b.0 - c.0);
        let ratio1 = (a.1 - b.1) / (b.1 - c.1);
        assert!((ratio0 - 4.0).abs() < 0.5, "{ratio0}");
        assert!((ratio1 - 4.0).abs() < 0.5, "{ratio1}");
    }

    #[test]
    fn fit_mu_cases() {
        let g = RadialGrid::graded(5, 1.0, 0.1, 200, 20).unwrap();
        let alpha = bubble_alpha(5);
        let mu: f64 = 0.1;
        let u: Vec<f64> = g.radii.iter().map(|r| alpha * mu.powf(-1.5) * (1.0 + (r / mu).powi(2)).powf(-1.5)).collect();
        assert!((fit_mu(&g, &u).unwrap() - mu).abs() < 1e-15);
        let bumped: Vec<f64> = u.iter().zip(&g.radii).map(|(v, r)| v * (1.0 + 0.01 * (-r * r / 0.01).exp())).collect();
        assert!((fit_mu(&g, &bumped).unwrap() / mu - 1.0).abs() < 0.02);
        assert!(fit_mu(&g, &vec![1.0; g.len()]).is_none());
        let mut off_center = u.clone();
        off_center[3] = 2.0 * u[0];
        assert!(fit_mu(&g, &off_center).is_none());
        assert!(fit_mu(&g, &vec![0.0; g.len()]).is_none());
    }

    #[test]
    fn demo_zero_data_stays_zero() {
        let cfg = DemoConfig {
            n: 5,
            radius: 1.0,
            t0: 0.1,
            t_end: 0.2,
            mu_initial: 0.05,
            amplitude: 0.0,
            intervals: 200,
            records: 5,
            safety: 0.2,
            max_steps: 10_000,
        };
        let res = run_blowup_demo(&cfg).unwrap();
        assert!(res.records.iter().all(|r| r.max_abs == 0.0 && r.mu.is_none()));
        assert_eq!(res.outcome, DemoOutcome::Completed);
    }

    #[test]
    fn subcritical_amplitude_decays() {
        let cfg = DemoConfig {
            n: 5,
            radius: 1.0,
            t0: 0.1,
            t_end: 3.0,
            mu_initial: 0.05,
            amplitude: 0.1,
            intervals: 300,
            records: 10,
            safety: 0.2,
            max_steps: 200_000,
        };
        let res = run_blowup_demo(&cfg).unwrap();
        let first = res.records[0].max_abs;
        let last = res.records.last().unwrap().max_abs;
        assert!(last < 0.1 * first, "{:?}", res.outcome);
    }
}
