//! Command implementations behind the `critheat` binary: each takes a
//! validated config block, runs the modules and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acceptance::{evaluate, AcceptanceOptions, CriterionOutcome, Verdict, CRITERIA};
use crate::dynamics::{integrate_reduced_system, system_size, BlowupConstants, IntegratorOptions, ModelForcing};
use crate::error::check_dim;
use crate::green::{BallGreen, DomainShape, DomainSpec, GreenConfig, GreenSolver, RegularPart};
use crate::heatpot::{HeatPotential, HeatPotentialSpec, PowerLawTrajectory, SourceKind};
use crate::pipeline::{bubble_far_field, compute_constants, ConstantsConfig, ConstantsReport};
use crate::report::{config_hash, Chart, OutputDir, Series};
use crate::simulate::{bisect_threshold, run_blowup_demo, DemoConfig, DemoResult};
use crate::util::{geomspace, loglog_slope};
use crate::{Error, Result};

/// One optional parameter block per command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub constants: Option<ConstantsConfig>,
    pub phi0: Option<Phi0Config>,
    pub ode: Option<OdeConfig>,
    pub green: Option<GreenRunConfig>,
    pub simulate: Option<SimulateConfig>,
    pub verify: Option<VerifyConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phi0Config {
    pub n: usize,
    pub t0: f64,
    /// Last sample time as a multiple of t0.
    pub horizon: f64,
    pub samples: usize,
}

impl Phi0Config {
    pub fn for_dimension(n: usize) -> Self {
        Self { n, t0: 10.0, horizon: 1e3, samples: 16 }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        if !(self.t0 > 0.0 && self.horizon > 1.0 && self.samples >= 2) {
            return Err(Error::Invalid("phi0 needs t0 > 0, horizon > 1 and samples >= 2".into()));
        }
        Ok(())
    }
}

/// Bounded forcing of the reduced system; absent means the homogeneous system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeForcing {
    pub sigma: f64,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeConfig {
    pub n: usize,
    pub t0: f64,
    pub t_end: f64,
    pub lambda_initial: f64,
    #[serde(default)]
    pub forcing: Option<OdeForcing>,
    #[serde(default)]
    pub integrator: IntegratorOptions,
}

impl OdeConfig {
    pub fn for_dimension(n: usize) -> Self {
        Self { n, t0: 10.0, t_end: 1e4, lambda_initial: 1.0, forcing: None, integrator: IntegratorOptions::default() }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        if !(self.t0 > 0.0 && self.t_end > self.t0) {
            return Err(Error::Invalid("ode needs 0 < t0 < t_end".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenRunConfig {
    pub domain: DomainSpec,
    #[serde(default)]
    pub green: GreenConfig,
    /// Evaluation points; the domain center when empty.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

impl GreenRunConfig {
    pub fn for_dimension(n: usize) -> Result<Self> {
        Ok(Self { domain: DomainSpec::unit_ball(n)?, green: GreenConfig::default(), points: Vec::new() })
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.green.validate()?;
        if self.points.iter().any(|p| p.len() != self.domain.n) {
            return Err(Error::Invalid("evaluation point has the wrong dimension".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSearch {
    pub below: f64,
    pub above: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub demo: DemoConfig,
    #[serde(default)]
    pub threshold: Option<ThresholdSearch>,
}

impl SimulateConfig {
    pub fn for_dimension(n: usize) -> Self {
        Self {
            demo: DemoConfig {
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
            },
            threshold: Some(ThresholdSearch { below: 0.9, above: 1.1, iterations: 45 }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Criteria to run; all when empty.
    pub criteria: Vec<u8>,
}

/// Shared command settings coming from flags and the environment.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// What a command produced. `failed` is set when a verified criterion failed.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub headline: String,
    pub artifacts: Vec<PathBuf>,
    pub failed: bool,
}

impl CommandOutput {
    fn from_dir(headline: String, out: &OutputDir) -> Self {
        Self { headline, artifacts: out.written().to_vec(), failed: false }
    }
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'static str,
    config_hash: String,
    config: &'a C,
    result: R,
}

fn write_report<C: Serialize, R: Serialize>(
    out: &mut OutputDir,
    command: &'static str,
    config: &C,
    result: R,
) -> Result<String> {
    let hash = config_hash(config)?;
    out.json(&format!("{command}.json"), &Envelope { command, config_hash: hash.clone(), config, result })?;
    out.log(&format!("{command} config {hash}"))?;
    Ok(hash)
}

#[derive(Serialize)]
struct ConstantsResult<'a> {
    report: &'a ConstantsReport,
    gram_max_error: Option<f64>,
}

pub fn cmd_constants(cfg: &ConstantsConfig, ctx: &Context) -> Result<CommandOutput> {
    cfg.validate()?;
    let mut green = cfg.green.clone();
    if let Some(seed) = ctx.seed {
        green.seed = seed;
    }
    let cfg = ConstantsConfig { green, ..cfg.clone() };
    let report = compute_constants(&cfg, ctx.cache.as_ref())?;
    let mut out = OutputDir::create(&ctx.out)?;
    if let Some(g) = &report.gram {
        let header: Vec<String> = (0..g.size()).map(|j| format!("col{j}")).collect();
        out.csv("gram.csv", &header, &g.entries)?;
    }
    write_report(
        &mut out,
        "constants",
        &cfg,
        ConstantsResult { report: &report, gram_max_error: report.gram.as_ref().map(|g| g.max_error()) },
    )?;
    let c = &report.constants;
    let headline = format!("n={} b={:.12} c_n={:.9} c1={:.6} c2={:.6} A={:.3e}", c.n, c.b, c.c_n, c.c1, c.c2, c.A);
    Ok(CommandOutput::from_dir(headline, &out))
}

fn unit_ball_constants(n: usize) -> Result<BlowupConstants> {
    Ok(compute_constants(&ConstantsConfig::unit_ball(n)?, None)?.constants)
}

#[derive(Serialize)]
struct Phi0Result {
    target: f64,
    natural_scale_at_end: f64,
    relative_gap_at_end: f64,
}

/// Φ⁰ at the concentration point along the self-similar trajectory of the
/// unit ball, against its limit -B·b^{4-n}.
pub fn cmd_phi0(cfg: &Phi0Config, ctx: &Context) -> Result<CommandOutput> {
    cfg.validate()?;
    let n = cfg.n;
    let nf = n as f64;
    let c = unit_ball_constants(n)?;
    let tr = PowerLawTrajectory::self_similar(n, cfg.t0, c.b, c.c_n)?;
    let phi = HeatPotential::new(HeatPotentialSpec::new(n, SourceKind::Dilation, &bubble_far_field(n))?, &tr)?;
    let times = geomspace(2.0 * cfg.t0, cfg.horizon * cfg.t0, cfg.samples);
    let origin = vec![0.0; n];
    let values = times.iter().map(|&t| phi.value(&origin, t)).collect::<Result<Vec<_>>>()?;
    let target = -c.B * c.b.powf(4.0 - nf);
    let t_end = times[times.len() - 1];
    let mu = c.b * c.mu0(t_end);
    let scale = (mu.powf(4.0 - nf) / ((nf - 4.0) * t_end)).abs();
    let last = values[values.len() - 1];
    let gap = (last - target).abs() / target.abs().max(scale);

    let mut out = OutputDir::create(&ctx.out)?;
    let header = ["t", "phi0", "target"].map(String::from);
    out.csv("phi0.csv", &header, times.iter().zip(&values).map(|(t, v)| [*t, *v, target]))?;
    let chart = Chart::new(format!("dilation potential at the center, n = {n}"), "t", "phi0")
        .with_series(Series::new("phi0", &times, &values))
        .with_series(Series::new("limit", &times, &vec![target; times.len()]));
    out.svg("phi0.svg", &chart)?;
    write_report(&mut out, "phi0", cfg, Phi0Result { target, natural_scale_at_end: scale, relative_gap_at_end: gap })?;
    Ok(CommandOutput::from_dir(format!("n={n} phi0(t_end)={last:.6e} limit={target:.6e} gap={gap:.2e}"), &out))
}

#[derive(Serialize)]
struct OdeResult {
    lambda_slope: f64,
    homogeneous_slope: f64,
    steps: usize,
    constants: BlowupConstants,
}

pub fn cmd_ode(cfg: &OdeConfig, ctx: &Context) -> Result<CommandOutput> {
    cfg.validate()?;
    let n = cfg.n;
    let nf = n as f64;
    let c = unit_ball_constants(n)?;
    let mut init = vec![0.0; system_size(n)];
    init[0] = cfg.lambda_initial;
    let traj = match &cfg.forcing {
        None => {
            let zero = |_: f64, _: &[f64], out: &mut [f64]| out.fill(0.0);
            integrate_reduced_system(&c, &zero, &init, cfg.t0, cfg.t_end, &cfg.integrator)?
        }
        Some(f) => {
            let forcing = ModelForcing::new(&c, f.sigma, f.strength, vec![0.0; n])?;
            integrate_reduced_system(&c, &forcing, &init, cfg.t0, cfg.t_end, &cfg.integrator)?
        }
    };
    let lambda = traj.lambda();
    let abs: Vec<f64> = lambda.iter().map(|v| v.abs()).collect();
    let slope = loglog_slope(&traj.times, &abs);
    let homogeneous = -(nf - 3.0) / (nf - 4.0);

    let mut out = OutputDir::create(&ctx.out)?;
    out.csv("ode.csv", &traj.header(), traj.rows())?;
    let chart = Chart::new(format!("reduced system, n = {n}"), "t", "|lambda|")
        .log_log()
        .with_series(Series::new("|lambda|", &traj.times, &abs));
    out.svg("ode.svg", &chart)?;
    write_report(
        &mut out,
        "ode",
        cfg,
        OdeResult { lambda_slope: slope, homogeneous_slope: homogeneous, steps: traj.times.len(), constants: c },
    )?;
    Ok(CommandOutput::from_dir(format!("n={n} lambda slope {slope:.4} (homogeneous rate {homogeneous:.4})"), &out))
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenPoint {
    pub q: Vec<f64>,
    pub h: f64,
    pub grad: Vec<f64>,
    /// Image-formula value on balls.
    pub oracle: Option<f64>,
    pub relative_error: Option<f64>,
}

#[derive(Serialize)]
struct GreenResult<'a> {
    rank: usize,
    condition_estimate: f64,
    points: &'a [GreenPoint],
}

/// Collocation solve of the regular part, checked against the image formula
/// when the domain is a ball.
pub fn cmd_green(cfg: &GreenRunConfig, ctx: &Context) -> Result<CommandOutput> {
    cfg.validate()?;
    let mut green = cfg.green.clone();
    if let Some(seed) = ctx.seed {
        green.seed = seed;
    }
    let cfg = GreenRunConfig { green, ..cfg.clone() };
    let solver = GreenSolver::build_cached(cfg.domain.clone(), cfg.green.clone(), ctx.cache.as_deref())?;
    let oracle = match cfg.domain.shape {
        DomainShape::Ball { .. } => Some(BallGreen::new(cfg.domain.clone())?),
        DomainShape::StarShaped { .. } => None,
    };
    let points =
        if cfg.points.is_empty() { vec![cfg.domain.center_radius().0.to_vec()] } else { cfg.points.clone() };
    let results = points
        .iter()
        .map(|q| {
            let h = solver.regular_part(q)?;
            let exact = oracle.as_ref().map(|o| o.regular_part(q)).transpose()?;
            Ok(GreenPoint {
                q: q.clone(),
                h,
                grad: solver.grad_regular_part(q)?,
                oracle: exact,
                relative_error: exact.map(|e| (h / e - 1.0).abs()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = OutputDir::create(&ctx.out)?;
    write_report(
        &mut out,
        "green",
        &cfg,
        GreenResult { rank: solver.rank(), condition_estimate: solver.cond_estimate(), points: &results },
    )?;
    let first = &results[0];
    let headline = match first.oracle {
        Some(e) => format!("H(q,q)={:.9} oracle={e:.9} rel err {:.2e}", first.h, first.relative_error.unwrap_or(0.0)),
        None => format!("H(q,q)={:.9}", first.h),
    };
    Ok(CommandOutput::from_dir(headline, &out))
}

#[derive(Serialize)]
struct SimulateResult<'a> {
    threshold_bracket: Option<[f64; 2]>,
    run: &'a DemoResult,
}

pub fn cmd_simulate(cfg: &SimulateConfig, ctx: &Context) -> Result<CommandOutput> {
    cfg.demo.validate()?;
    let (bracket, run) = match &cfg.threshold {
        None => (None, run_blowup_demo(&cfg.demo)?),
        Some(s) => {
            let r = bisect_threshold(&cfg.demo, s.below, s.above, s.iterations)?;
            (Some([r.below, r.above]), r.result)
        }
    };
    let mut out = OutputDir::create(&ctx.out)?;
    let header = ["t", "mu", "energy", "max_abs"].map(String::from);
    out.csv(
        "simulate.csv",
        &header,
        run.records.iter().map(|r| [r.t, r.mu.unwrap_or(f64::NAN), r.energy, r.max_abs]),
    )?;
    let (ts, mus): (Vec<f64>, Vec<f64>) = run.records.iter().filter_map(|r| Some((r.t, r.mu?))).unzip();
    let chart = Chart::new(format!("radial evolution, n = {}", cfg.demo.n), "t", "fitted mu")
        .log_log()
        .with_series(Series::new("mu", &ts, &mus));
    out.svg("simulate.svg", &chart)?;
    write_report(&mut out, "simulate", cfg, SimulateResult { threshold_bracket: bracket, run: &run })?;
    let slope = run.mu_slope.map_or("n/a".to_string(), |s| format!("{s:.3}"));
    Ok(CommandOutput::from_dir(format!("outcome {:?}, {} steps, mu slope {slope}", run.outcome, run.steps), &out))
}

pub fn cmd_verify(cfg: &VerifyConfig, ctx: &Context) -> Result<(CommandOutput, Vec<CriterionOutcome>)> {
    let ids: Vec<u8> = if cfg.criteria.is_empty() { CRITERIA.iter().map(|(i, _)| *i).collect() } else { cfg.criteria.clone() };
    if let Some(bad) = ids.iter().find(|i| !CRITERIA.iter().any(|(c, _)| c == *i)) {
        return Err(Error::Invalid(format!("unknown criterion {bad}")));
    }
    let opts = AcceptanceOptions { seed: ctx.seed.unwrap_or(1), cache: ctx.cache.clone() };
    let outcomes: Vec<CriterionOutcome> = ids.iter().map(|&id| evaluate(id, &opts)).collect();
    let mut out = OutputDir::create(&ctx.out)?;
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| vec![o.id.to_string(), o.name.clone(), o.verdict.label().into(), o.measured.clone(), o.expected.clone()])
        .collect();
    out.table("verify.csv", &["id", "criterion", "verdict", "measured", "expected"], &rows)?;
    write_report(&mut out, "verify", &(cfg, opts.seed), &outcomes)?;
    let failed = outcomes.iter().filter(|o| o.verdict == Verdict::Fail).count();
    let passed = outcomes.iter().filter(|o| o.verdict == Verdict::Pass).count();
    let mut output = CommandOutput::from_dir(
        format!("{passed} passed, {failed} failed, {} recorded", outcomes.len() - passed - failed),
        &out,
    );
    output.failed = failed > 0;
    Ok((output, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(dir: &Path) -> Context {
        Context { out: dir.to_path_buf(), cache: None, seed: None }
    }

    #[test]
    fn homogeneous_ode_decays_like_t_minus_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_ode(&OdeConfig::for_dimension(5), &ctx(dir.path())).unwrap();
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("ode.json")).unwrap()).unwrap();
        let slope = report["result"]["lambda_slope"].as_f64().unwrap();
        assert!((slope + 2.0).abs() <= 0.01, "{slope}");
        assert!(out.artifacts.iter().any(|p| p.ends_with("ode.csv")));
        let csv = fs::read_to_string(dir.path().join("ode.csv")).unwrap();
        assert!(csv.starts_with("t,lambda,xi1"));
    }

    #[test]
    fn constants_rejects_dimension_four_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ConstantsConfig::unit_ball(5).unwrap();
        cmd_constants(&cfg, &ctx(dir.path())).unwrap();
        let first = fs::read(dir.path().join("constants.json")).unwrap();
        cmd_constants(&cfg, &ctx(dir.path())).unwrap();
        assert_eq!(first, fs::read(dir.path().join("constants.json")).unwrap());
        let report: serde_json::Value = serde_json::from_slice(&first).unwrap();
        let b = report["result"]["report"]["constants"]["b"].as_f64().unwrap();
        assert!((b / (2.0 / (3.0 * 15f64.powf(0.75))) - 1.0).abs() < 1e-12);

        cfg.n = 4;
        assert_eq!(cmd_constants(&cfg, &ctx(dir.path())).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn run_config_rejects_unknown_sections() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"odes": {}}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"verify": {"criteria": [3, 4]}}"#).unwrap();
        assert_eq!(cfg.verify.unwrap().criteria, vec![3, 4]);
    }

    #[test]
    fn verify_subset_writes_table() {
        let dir = tempfile::tempdir().unwrap();
        let (out, outcomes) = cmd_verify(&VerifyConfig { criteria: vec![3, 4] }, &ctx(dir.path())).unwrap();
        assert!(!out.failed);
        assert_eq!(outcomes.len(), 2);
        let table = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
        assert_eq!(table.lines().count(), 3);
        assert!(cmd_verify(&VerifyConfig { criteria: vec![99] }, &ctx(dir.path())).is_err());
    }
}
