//! Acceptance suite: one check per numbered criterion, each returning the
//! measured quantities next to the thresholds they are judged against.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    b_residual, integrate_reduced_system, solve_b, system_size, BlowupConstants, Forcing, LambdaSolution, ModelForcing,
    XiSolution,
};
use crate::green::{BallGreen, DomainSpec, GreenConfig, GreenSolver, RegularPart};
use crate::heatpot::{HeatPotential, HeatPotentialSpec, PowerLawTrajectory, SourceKind, Trajectory};
use crate::pipeline::{bubble_far_field, compute_constants, ConstantsConfig};
use crate::profiles::{
    analytic_kernel_residuals, apply_linearized, check_transform_derivatives, eval_transformed, fit_farfield_constants,
    BubbleProfile, FitOptions, KernelBasis, Profile, TowerOptions, TowerProfile, TransformParams,
};
use crate::quadrature::{
    c1_identity, const_a, f_of_a, gamma_identity, gram_matrix, CubatureOptions, GramMatrix, QuadratureSpec,
};
use crate::simulate::{
    bisect_threshold, pde_residual, sample_points, AnsatzModel, AnsatzState, AnsatzSummary, DemoConfig,
};
use crate::util::{geomspace, norm};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    /// Exploratory; measured and reported without a threshold.
    Recorded,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Recorded => "INFO",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub verdict: Verdict,
    /// Human-readable summary of what was measured.
    pub measured: String,
    pub expected: String,
    pub metrics: BTreeMap<String, f64>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!("{} {:>2} {}: {} [expected {}]", self.verdict.label(), self.id, self.name, self.measured, self.expected)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AcceptanceOptions {
    pub seed: u64,
    /// Directory for cached collocation solves.
    pub cache: Option<PathBuf>,
}

pub const CRITERIA: [(u8, &str); 15] = [
    (1, "kernel annihilation"),
    (2, "transform derivatives"),
    (3, "c1 identity"),
    (4, "gamma identity"),
    (5, "F and A"),
    (6, "phi0 limit"),
    (7, "potential PDE residuals"),
    (8, "potential decay exponents"),
    (9, "b and c_n"),
    (10, "lambda ODE"),
    (11, "xi drift rate"),
    (12, "green oracle"),
    (13, "gram structure"),
    (14, "ansatz error structure"),
    (15, "radial blow-up demo"),
];

/// Collects named metrics and the conjunction of the gating checks.
struct Tally {
    ok: bool,
    metrics: BTreeMap<String, f64>,
    parts: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self { ok: true, metrics: BTreeMap::new(), parts: Vec::new() }
    }

    fn record(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    /// Records `value` and requires `pass`.
    fn check(&mut self, key: impl Into<String>, value: f64, pass: bool) {
        let key = key.into();
        if !pass {
            self.parts.push(format!("{key}={value:.4e} out of range"));
        }
        self.ok &= pass;
        self.record(key, value);
    }

    fn finish(self, id: u8, summary: String, expected: &str) -> CriterionOutcome {
        let mut measured = summary;
        if !self.parts.is_empty() {
            measured = format!("{measured}; {}", self.parts.join("; "));
        }
        CriterionOutcome {
            id,
            name: name_of(id).into(),
            verdict: Verdict::from_bool(self.ok),
            measured,
            expected: expected.into(),
            metrics: self.metrics,
        }
    }
}

fn name_of(id: u8) -> &'static str {
    CRITERIA.iter().find(|(i, _)| *i == id).map_or("unknown", |(_, s)| s)
}

fn random_points(n: usize, count: usize, half_width: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..n).map(|_| rng.random_range(-half_width..half_width)).collect()).collect()
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn ball_constants(n: usize, q: Option<Vec<f64>>) -> Result<BlowupConstants> {
    let cfg = ConstantsConfig { q, ..ConstantsConfig::unit_ball(n)? };
    Ok(compute_constants(&cfg, None)?.constants)
}

/// Runs one criterion. Module errors become a failed outcome carrying the message.
pub fn evaluate(id: u8, opts: &AcceptanceOptions) -> CriterionOutcome {
    let run = match id {
        1 => kernel_annihilation(opts),
        2 => transform_derivatives(opts),
        3 => c1_check(),
        4 => gamma_check(),
        5 => f_and_a(),
        6 => phi0_limit(),
        7 => potential_residuals(),
        8 => decay_exponents(),
        9 => b_and_scale(opts),
        10 => lambda_ode(),
        11 => xi_drift(),
        12 => green_oracle(opts),
        13 => gram_structure(),
        14 => ansatz_structure(),
        15 => blowup_demo(),
        _ => Err(Error::Invalid(format!("no criterion {id}"))),
    };
    run.unwrap_or_else(|e| CriterionOutcome {
        id,
        name: name_of(id).into(),
        verdict: if id == 15 { Verdict::Recorded } else { Verdict::Fail },
        measured: format!("error: {e}"),
        expected: "evaluation without error".into(),
        metrics: BTreeMap::new(),
    })
}

pub fn evaluate_all(opts: &AcceptanceOptions) -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(|(id, _)| evaluate(*id, opts)).collect()
}

fn kernel_annihilation(opts: &AcceptanceOptions) -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut analytic, mut fd) = (0.0f64, 0.0f64);
    for n in [5usize, 6] {
        let u = BubbleProfile::new(n)?;
        let a = analytic_kernel_residuals(&u).into_iter().fold(0.0, f64::max);
        let kb = KernelBasis::new(&u);
        let points = random_points(n, 50, 1.5, &mut rng);
        let mut worst = 0.0f64;
        for alpha in 0..=n {
            let z = |x: &[f64]| kb.eval(alpha, x).unwrap_or(f64::NAN);
            let scale = max_abs(points.iter().map(|x| u.potential(x) * z(x)));
            let res = max_abs(points.iter().map(|x| apply_linearized(&u, &z, x, 1e-4)));
            worst = worst.max(res / scale);
        }
        tally.check(format!("analytic_n{n}"), a, a <= 1e-12);
        tally.check(format!("fd_relative_n{n}"), worst, worst <= 1e-6);
        analytic = analytic.max(a);
        fd = fd.max(worst);
    }
    Ok(tally.finish(1, format!("analytic {analytic:.1e}, FD {fd:.2e} (n=5,6; 50 points; h=1e-4)"), "FD <= 1e-6 relative"))
}

fn transform_derivatives(opts: &AcceptanceOptions) -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for n in [5usize, 6] {
        // The tower is not rotation invariant, so every generator is non-trivial.
        let tower = TowerProfile::with_zeta(n, 8, 0.1)?;
        let points = random_points(n, 20, 1.5, &mut rng);
        for alpha in 0..3 * n {
            let coarse = check_transform_derivatives(&tower, alpha, 1e-2, &points)?;
            let fine = check_transform_derivatives(&tower, alpha, 5e-3, &points)?;
            let ratio = coarse / fine;
            tally.check(format!("ratio_n{n}_{alpha}"), ratio, (3.5..=4.5).contains(&ratio));
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    Ok(tally.finish(2, format!("h-halving ratios in [{lo:.3}, {hi:.3}] over 3n generators, n=5,6"), "ratio in [3.5, 4.5]"))
}

fn c1_check() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let spec = QuadratureSpec::default().with_rel_tol(1e-12);
    let mut worst = 0.0f64;
    for n in [5usize, 6] {
        let c = c1_identity(&BubbleProfile::new(n)?, &spec)?;
        let rel = (c.lhs.value / c.rhs.value - 1.0).abs();
        tally.record(format!("c1_n{n}"), c.lhs.value);
        tally.check(format!("relative_n{n}"), rel, rel <= 1e-8);
        worst = worst.max(rel);
    }
    Ok(tally.finish(3, format!("max relative gap {worst:.2e}"), "<= 1e-8"))
}

fn gamma_check() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let spec = QuadratureSpec::default().with_rel_tol(1e-12);
    let mut worst = 0.0f64;
    for n in [5usize, 6] {
        let g = gamma_identity(n, &spec)?;
        let rel = (g.lhs / g.rhs - 1.0).abs();
        tally.record(format!("rhs_n{n}"), g.rhs);
        tally.check(format!("relative_n{n}"), rel, rel <= 1e-6);
        worst = worst.max(rel);
    }
    Ok(tally.finish(4, format!("max relative gap {worst:.2e}"), "<= 1e-6"))
}

#[allow(non_snake_case)]
fn f_and_a() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let spec = QuadratureSpec::default();
    let mut summary = Vec::new();
    for n in [5usize, 6] {
        let D = bubble_far_field(n).D;
        // F is even and smooth in a, so F(a) - F(0) = O(a²).
        let near = f_of_a(1e-4, D, n, &spec)?;
        let gap = (near - 2.0 * D).abs() / (2.0 * D);
        tally.check(format!("f0_gap_n{n}"), gap, gap <= 1e-6);
        let plateau: Vec<f64> = geomspace(10.0, 100.0, 10)
            .into_iter()
            .map(|a| f_of_a(a, D, n, &spec).map(|f| a.powf(n as f64 - 2.0) * f))
            .collect::<Result<_>>()?;
        let same_sign = plateau.iter().all(|v| v.signum() == plateau[0].signum());
        let spread = max_abs(plateau.iter().copied()) / plateau.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        tally.check(format!("plateau_spread_n{n}"), spread, same_sign && spread <= 2.0);
        let a1 = const_a(D, n, &spec)?.value;
        let a2 = const_a(D, n, &spec.with_cutoff(2.0 * spec.radial_cutoff))?.value;
        // A vanishes at n = 5, so stability is measured against D.
        let drift = (a2 - a1).abs() / a1.abs().max(D);
        tally.record(format!("A_n{n}"), a1);
        tally.check(format!("A_cutoff_drift_n{n}"), drift, drift <= 1e-6);
        summary.push(format!("n={n}: |F(1e-4)-2D|/2D={gap:.1e}, plateau spread {spread:.3}, A={a1:.6e} drift {drift:.1e}"));
    }
    Ok(tally.finish(5, summary.join("; "), "F(0)=2D to 1e-6, spread <= 2, A drift <= 1e-6"))
}

fn self_similar(c: &BlowupConstants, t0: f64) -> Result<PowerLawTrajectory> {
    PowerLawTrajectory::self_similar(c.n, t0, c.b, c.c_n)
}

/// |μ̇/μ|·μ^{4-n}, the size of the dilation potential near the bubble.
fn natural_scale(tr: &dyn Trajectory, n: usize, t: f64) -> f64 {
    (tr.mu_dot(t) / tr.mu(t) * tr.mu(t).powf(4.0 - n as f64)).abs()
}

fn phi0_limit() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let t0 = 10.0;
    let t = 1e3 * t0;
    let mut summary = Vec::new();
    for n in [5usize, 6] {
        let c = ball_constants(n, None)?;
        let tr = self_similar(&c, t0)?;
        let phi = HeatPotential::new(HeatPotentialSpec::new(n, SourceKind::Dilation, &bubble_far_field(n))?, &tr)?;
        let value = phi.value(&vec![0.0; n], t)?;
        // Potentials solve φ_t = Δφ + source, so the limit carries the opposite sign.
        let target = -c.B * c.b.powf(4.0 - n as f64);
        let reference = target.abs().max(natural_scale(&tr, n, t));
        let rel = (value - target).abs() / reference;
        tally.record(format!("phi0_n{n}"), value);
        tally.record(format!("target_n{n}"), target);
        tally.check(format!("relative_n{n}"), rel, rel <= 0.05);
        summary.push(format!("n={n}: phi0={value:.6e} vs {target:.6e} (gap {rel:.1e} of {reference:.3e})"));
    }
    Ok(tally.finish(6, summary.join("; "), "within 5% at t = 1e3 t0"))
}

fn drifting(c: &BlowupConstants, t0: f64) -> Result<PowerLawTrajectory> {
    let mut drift = vec![0.0; c.n];
    drift[0] = 0.02;
    drift[1] = 0.01;
    Ok(self_similar(c, t0)?.with_drift(drift, 1.5).with_kelvin_rate([1e-3, 5e-4], 1.5))
}

fn potential_residuals() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let n = 5;
    let c = ball_constants(n, None)?;
    let tr = drifting(&c, 10.0)?;
    let ff = bubble_far_field(n);
    let samples: Vec<(Vec<f64>, f64)> = [20.0, 40.0]
        .iter()
        .flat_map(|&t| [0.3, 0.7, 1.5, 3.0, 6.0].map(move |r| (r, t)))
        .map(|(r, t)| {
            let (mu, mut x) = (tr.mu(t), vec![0.0; n]);
            tr.xi(t, &mut x);
            x[0] += r * mu;
            x[1] += 0.5 * r * mu;
            x[3] += 0.1 * mu;
            (x, t)
        })
        .collect();
    let mut parts = Vec::new();
    for (label, kind) in [("phi0", SourceKind::Dilation), ("phi1", SourceKind::Translation)] {
        let phi = HeatPotential::new(HeatPotentialSpec::new(n, kind, &ff)?, &tr)?;
        let res = phi.residual_check(&samples, 0.05)?;
        tally.check(format!("{label}_residual"), res, res <= 1e-3);
        parts.push(format!("{label} {res:.2e}"));
    }
    Ok(tally.finish(7, format!("max relative residual at 10 samples: {}", parts.join(", ")), "<= 1e-3"))
}

fn decay_exponents() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let (t0, t) = (10.0, 1e4);
    let mut summary = Vec::new();
    for n in [5usize, 6] {
        let c = ball_constants(n, None)?;
        let tr = drifting(&c, t0)?;
        let ff = bubble_far_field(n);
        let nf = n as f64;
        for (label, kind, expected) in [
            ("phi0", SourceKind::Dilation, -(nf - 4.0)),
            ("phi1", SourceKind::Translation, -(nf - 3.0)),
            ("phi2_1", SourceKind::Kelvin(1), -(nf - 5.0)),
            ("phi2_2", SourceKind::Kelvin(2), -(nf - 5.0)),
        ] {
            let phi = HeatPotential::new(HeatPotentialSpec::new(n, kind, &ff)?, &tr)?;
            let slope = phi.decay_profile(t, 10.0, 1000.0, 12)?.slope;
            tally.check(format!("{label}_n{n}"), slope, (slope - expected).abs() <= 0.3);
            summary.push(format!("n={n} {label} {slope:.3} (want {})", expected + 0.0));
        }
    }
    Ok(tally.finish(8, summary.join(", "), "slopes within 0.3 of -(n-4), -(n-3), -(n-5)"))
}

fn b_and_scale(opts: &AcceptanceOptions) -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(9));
    let mut worst_b = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(5..=7usize);
        let h = rng.random_range(0.1..10.0);
        worst_b = worst_b.max(b_residual(h, solve_b(h, n)?, n));
    }
    tally.check("b_residual", worst_b, worst_b <= 1e-12);
    let times = geomspace(1.0, 1e8, 50);
    let mut worst_mu = 0.0f64;
    for n in [5usize, 6] {
        let c = ball_constants(n, None)?;
        tally.record(format!("b_n{n}"), c.b);
        tally.record(format!("c_n{n}"), c.c_n);
        worst_mu = worst_mu.max(c.mu0_consistency(&times));
    }
    tally.check("mu0_consistency", worst_mu, worst_mu <= 1e-12);
    Ok(tally.finish(9, format!("b residual {worst_b:.1e} (1000 draws), mu0 consistency {worst_mu:.1e}"), "both <= 1e-12"))
}

fn lambda_ode() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let t0 = 10.0;
    let mut summary = Vec::new();
    for n in [5usize, 6] {
        let c = ball_constants(n, None)?;
        let nf = n as f64;
        let zero = |_: f64, _: &[f64], out: &mut [f64]| out.fill(0.0);
        let mut init = vec![0.0; system_size(n)];
        init[0] = 1.0;
        let free = integrate_reduced_system(&c, &zero, &init, t0, 1e3 * t0, &Default::default())?;
        let slope = crate::util::loglog_slope(&free.times, &free.lambda());
        let want = -(nf - 3.0) / (nf - 4.0);
        tally.check(format!("slope_n{n}"), slope, (slope - want).abs() <= 0.01);

        let sigma = 0.5;
        let forcing = ModelForcing::new(&c, sigma, 1.0, vec![0.0; n])?;
        let traj = integrate_reduced_system(&c, &forcing, &vec![0.0; system_size(n)], t0, 1e3 * t0, &Default::default())?;
        let exact = LambdaSolution::new(n, t0, 0.0, |t| c.mu0(t).powf(nf - 3.0 + sigma))?;
        let mut worst = 0.0f64;
        for (t, s) in traj.times.iter().zip(&traj.states).skip(1) {
            let e = exact.value(*t)?;
            worst = worst.max((s[0] - e).abs() / e.abs());
        }
        tally.check(format!("closed_form_n{n}"), worst, worst <= 1e-6);
        summary.push(format!("n={n}: slope {slope:.4} (want {want:.4}), closed-form gap {worst:.1e}"));
    }
    Ok(tally.finish(10, summary.join("; "), "slope within 0.01, gap <= 1e-6"))
}

fn xi_drift() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let t0 = 10.0;
    let coupling = 1.0;
    let mut summary = Vec::new();
    for n in [5usize, 6] {
        let mut q = vec![0.0; n];
        q[0] = 0.2;
        q[1] = 0.1;
        let c = ball_constants(n, Some(q.clone()))?;
        let nf = n as f64;
        let drift: Vec<f64> = c.grad_h.iter().map(|g| coupling * c.b.powf(nf - 2.0) * g).collect();
        // The forcing decays like μ₀^σ relative to the drift.
        let sigma = 0.75 * (nf - 4.0);
        let forcing = ModelForcing::new(&c, sigma, norm(&drift), drift.clone())?;
        let sol = XiSolution::new(&c, q.clone(), coupling, |t| {
            let mut out = vec![0.0; system_size(n)];
            forcing.eval(t, &[], &mut out);
            (1..=n).map(|l| out[l] - c.mu0(t).powf(nf - 2.0) * drift[l - 1]).collect()
        })?;
        let mut init = vec![0.0; system_size(n)];
        init[1..=n].copy_from_slice(&sol.value(t0)?);
        let traj = integrate_reduced_system(&c, &forcing, &init, t0, 1e3 * t0, &Default::default())?;
        let slope = traj.drift_slope(&q, 10.0 * t0, 1e3 * t0);
        let want = -2.0 / (nf - 4.0);
        tally.check(format!("slope_n{n}"), slope, (slope - want).abs() <= 0.05);
        summary.push(format!("n={n}: slope {slope:.4} (want {want})"));
    }
    Ok(tally.finish(11, summary.join("; "), "within 0.05 of -2/(n-4)"))
}

/// Sampling radius for the collocation check. The boundary data of Γ(· - q)
/// has harmonic content decaying like |q|^degree, and the default source count
/// resolves it to 1e-4 only up to about this radius.
const GREEN_RADIUS: f64 = 0.4;

fn green_oracle(opts: &AcceptanceOptions) -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let n = 5;
    let domain = DomainSpec::unit_ball(n)?;
    let solver = GreenSolver::build_cached(domain.clone(), GreenConfig::default(), opts.cache.as_deref())?;
    let exact = BallGreen::new(domain)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(12));
    let mut points = Vec::new();
    while points.len() < 20 {
        let q: Vec<f64> = (0..n).map(|_| rng.random_range(-GREEN_RADIUS..GREEN_RADIUS)).collect();
        if norm(&q) <= GREEN_RADIUS {
            points.push(q);
        }
    }
    let (mut worst, mut min_h) = (0.0f64, f64::INFINITY);
    for q in &points {
        let (h, e) = (solver.regular_part(q)?, exact.regular_part(q)?);
        worst = worst.max((h / e - 1.0).abs());
        min_h = min_h.min(h);
    }
    tally.check("relative_error", worst, worst <= 1e-4);
    tally.check("min_h", min_h, min_h > 0.0);
    Ok(tally.finish(
        12,
        format!("max relative error {worst:.2e} at 20 points with |q| <= {GREEN_RADIUS}, min H {min_h:.4}"),
        "<= 1e-4 and H > 0",
    ))
}

/// Entries of the corrected-row pairing that are claimed to be O(1/k).
fn small_entries(g: &GramMatrix) -> Vec<(usize, usize)> {
    let n = g.n;
    let leading = [(1, n + 2), (2, n + 3), (n + 2, 1), (n + 3, 2)];
    (0..g.size())
        .flat_map(|i| (0..g.size()).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !leading.contains(&(i, j)))
        .collect()
}

fn gram_structure() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let n = 5;
    let opts = CubatureOptions::default();
    let grams = [16usize, 32]
        .iter()
        .map(|&k| {
            let t = TowerProfile::fitted(n, k, &TowerOptions::default())?;
            let ff = fit_farfield_constants(&t, &FitOptions::default())?;
            gram_matrix(&t.with_far_field(ff), &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let (g16, g32) = (&grams[0], &grams[1]);
    let diag = |g: &GramMatrix, i: usize| g.get(i, i).abs();
    // Entries below round-off relative to their row diagonal at both k are
    // zero by the 2π/k and reflection symmetries of the tower.
    let floor = 1e-10;
    let (mut vanishing, mut halving, mut worst_small) = (0usize, Vec::new(), 0.0f64);
    for (i, j) in small_entries(g16) {
        let (a, b) = (g16.get(i, j).abs() / diag(g16, i), g32.get(i, j).abs() / diag(g32, i));
        worst_small = worst_small.max(a.max(b));
        if a <= floor && b <= floor {
            vanishing += 1;
        } else {
            let ratio = g32.get(i, j).abs() / g16.get(i, j).abs();
            tally.check(format!("ratio_{i}_{j}"), ratio, (0.3..=0.7).contains(&ratio));
            halving.push(ratio);
        }
    }
    tally.record("vanishing_entries", vanishing as f64);
    tally.record("max_small_relative", worst_small);
    let mut conditioning = f64::INFINITY;
    for g in [g16, g32] {
        for c in [1, 2] {
            conditioning = conditioning.min(g.kelvin_block_conditioning(c));
        }
    }
    tally.check("block_conditioning", conditioning, conditioning > 1e-3);
    for (label, g) in [("k16", g16), ("k32", g32)] {
        tally.record(format!("a00_{label}"), g.get(0, 0));
        tally.record(format!("a1_np2_{label}"), g.get(1, n + 2));
        tally.record(format!("anp2_1_{label}"), g.get(n + 2, 1));
    }
    let diag_growth = g32.get(0, 0) / g16.get(0, 0);
    tally.record("a00_growth", diag_growth);
    let halving_text = if halving.is_empty() {
        "no non-zero O(1/k) entry to test for halving".to_string()
    } else {
        format!("halving ratios {halving:?}")
    };
    Ok(tally.finish(
        13,
        format!(
            "{vanishing} O(1/k) entries vanish by symmetry (max {worst_small:.1e} of diagonal), {halving_text}; \
             min Kelvin block |det|/diag {conditioning:.3}; a00(32)/a00(16) = {diag_growth:.3}"
        ),
        "O(1/k) entries halve within 40%, blocks invertible",
    ))
}

fn ansatz_structure() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let n = 5;
    let b = BubbleProfile::new(n)?;
    let ff = bubble_far_field(n);

    // Static exact bubble.
    let static_model = AnsatzModel::new(&b, ff, vec![0.0; n])?;
    let mut params = TransformParams::identity(n);
    params.mu = 0.2;
    let state = AnsatzState::frozen(10.0, params.clone());
    let ys = sample_points(n, &[0.0, 0.5, 1.0, 2.0]);
    let out = static_model.ansatz_error(&state, &ys)?;
    let static_err = out
        .iter()
        .map(|s| s.scaled_error.abs() / b.radial(s.y.iter().map(|v| v * v).sum()).powf(b.p))
        .fold(0.0, f64::max);
    tally.check("static_scaled_error", static_err, static_err <= 1e-10);
    let u = |x: &[f64], _t: f64| eval_transformed(&b, &params, x).unwrap_or(f64::NAN);
    let fd = ys
        .iter()
        .filter(|y| norm(y) > 0.0)
        .map(|y| {
            let x = state.point(y);
            pde_residual(&u, &x, 1.0, 1e-3, 1e-3, b.p).abs() / u(&x, 1.0).powf(b.p)
        })
        .fold(0.0, f64::max);
    tally.check("static_fd_residual", fd, fd <= 1e-6);

    // Moving ansatz at an off-center point of the unit ball.
    let mut q = vec![0.0; n];
    q[0] = 0.2;
    let c = ball_constants(n, Some(q.clone()))?;
    let green = BallGreen::new(DomainSpec::unit_ball(n)?)?;
    let traj = self_similar(&c, 10.0)?.with_center(q.clone()).with_kelvin_rate([1e-6, -5e-7], 1.5);
    let model = AnsatzModel::new(&b, ff, q)?.with_regular_part(&green).with_potentials(&traj)?;
    let t = 100.0;
    let run = |a: f64| -> Result<AnsatzSummary> {
        let st = AnsatzState::from_trajectory(&traj, t, [a, 0.0], vec![0.0; 2 * n - 3]);
        let out = model.ansatz_error(&st, &ys)?;
        Ok(model.summarize(&st, &out))
    };
    let (base, one, two) = (run(0.0)?, run(0.01)?, run(0.02)?);
    let frozen_gap = base.max_discrepancy / base.max_leading;
    let frozen_ratio = two.max_discrepancy / one.max_discrepancy;
    tally.check("frozen_gap_a0", frozen_gap, frozen_gap <= 0.05);
    tally.check("frozen_doubling_ratio", frozen_ratio, (1.5..=2.5).contains(&frozen_ratio));
    let local_gap = base.max_localized_discrepancy / base.max_leading;
    let local_ratio = two.max_localized_discrepancy / one.max_localized_discrepancy;
    tally.record("localized_gap_a0", local_gap);
    tally.record("localized_doubling_ratio", local_ratio);
    Ok(tally.finish(
        14,
        format!(
            "static {static_err:.1e} (FD {fd:.1e}); leading terms with potentials frozen at q: gap {frozen_gap:.3} of leading, \
             |a|-doubling ratio {frozen_ratio:.3}; with potentials at x: gap {local_gap:.1e}, ratio {local_ratio:.3}"
        ),
        "static <= FD tolerance; discrepancy << leading and doubling ratio 2 +- 0.5",
    ))
}

fn blowup_demo() -> Result<CriterionOutcome> {
    let mut tally = Tally::new();
    let mut summary = Vec::new();
    for n in [5usize, 6] {
        let cfg = DemoConfig {
            n,
            radius: 1.0,
            t0: 1e-3,
            t_end: 10.0,
            mu_initial: 0.05,
            amplitude: 1.0,
            intervals: 600,
            records: 60,
            safety: 0.2,
            max_steps: 2_000_000,
        };
        let run = bisect_threshold(&cfg, 0.9, 1.1, 45)?;
        let mus: Vec<f64> = run.result.records.iter().filter_map(|r| r.mu).collect();
        let decreasing = mus.windows(2).all(|w| w[1] <= w[0]);
        let slope = run.result.mu_slope.unwrap_or(f64::NAN);
        tally.record(format!("mu_slope_n{n}"), slope);
        tally.record(format!("threshold_n{n}"), run.above);
        tally.record(format!("monotone_n{n}"), f64::from(u8::from(decreasing)));
        summary.push(format!(
            "n={n}: threshold amplitude {:.6}, fitted mu slope {slope:.3} (rate {:.3}), monotone {decreasing}",
            run.above,
            -1.0 / (n as f64 - 4.0)
        ));
    }
    let mut out = tally.finish(15, summary.join("; "), "recorded only");
    out.verdict = Verdict::Recorded;
    Ok(out)
}
