//! Regular part H(x,y) of the Dirichlet Green's function G = Γ − H.
//!
//! Balls use the image formula. Star-shaped domains use exterior point
//! charges fitted to the boundary data by truncated-SVD least squares, so
//! the represented H is harmonic inside by construction.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use ndarray_linalg::{JobSvd, SVDDC};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::check_dim;
use crate::profiles::bubble_alpha;
use crate::util::{dist_sq, dot, norm, sphere_area};
use crate::{Error, Result};

/// Fundamental solution Γ(x) = α_n |x|^{2-n}, normalized like the bubble.
pub fn gamma_fundamental(x: &[f64]) -> Result<f64> {
    let n = x.len();
    check_dim(n)?;
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::Invalid("fundamental solution evaluated at 0".into()));
    }
    Ok(bubble_alpha(n) * r.powi(2 - n as i32))
}

/// Constant c(n) with −ΔΓ = c(n)δ under the normalization of [`gamma_fundamental`].
pub fn laplacian_normalization(n: usize) -> f64 {
    (n as f64 - 2.0) * sphere_area(n) * bubble_alpha(n)
}

/// One smooth boundary perturbation: ρ gains `amplitude · ω_axis^degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialMode {
    pub axis: usize,
    pub degree: u32,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainShape {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Boundary c + ρ(ω)ω with ρ(ω) = radius·(1 + Σ modes).
    StarShaped {
        center: Vec<f64>,
        radius: f64,
        modes: Vec<RadialMode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub n: usize,
    #[serde(flatten)]
    pub shape: DomainShape,
}

impl DomainSpec {
    pub fn ball(n: usize, center: Vec<f64>, radius: f64) -> Result<Self> {
        let spec = Self { n, shape: DomainShape::Ball { center, radius } };
        spec.validate()?;
        Ok(spec)
    }

    pub fn unit_ball(n: usize) -> Result<Self> {
        Self::ball(n, vec![0.0; n], 1.0)
    }

    pub fn star_shaped(n: usize, center: Vec<f64>, radius: f64, modes: Vec<RadialMode>) -> Result<Self> {
        let spec = Self { n, shape: DomainShape::StarShaped { center, radius, modes } };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        let (center, radius) = self.center_radius();
        if center.len() != self.n {
            return Err(Error::Invalid(format!(
                "domain center has {} components, expected {}",
                center.len(),
                self.n
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Invalid(format!("domain radius {radius} must be positive")));
        }
        if let DomainShape::StarShaped { modes, .. } = &self.shape {
            // Keeps ρ ≥ radius/2 on the whole sphere.
            let total: f64 = modes.iter().map(|m| m.amplitude.abs()).sum();
            if total >= 0.5 {
                return Err(Error::Invalid(format!(
                    "perturbation amplitudes sum to {total}; must stay below 0.5"
                )));
            }
            if let Some(m) = modes.iter().find(|m| m.axis >= self.n) {
                return Err(Error::Invalid(format!("mode axis {} out of range", m.axis)));
            }
        }
        Ok(())
    }

    pub fn center_radius(&self) -> (&[f64], f64) {
        match &self.shape {
            DomainShape::Ball { center, radius } => (center, *radius),
            DomainShape::StarShaped { center, radius, .. } => (center, *radius),
        }
    }

    /// Boundary radius in unit direction ω.
    pub fn boundary_radius(&self, omega: &[f64]) -> f64 {
        match &self.shape {
            DomainShape::Ball { radius, .. } => *radius,
            DomainShape::StarShaped { radius, modes, .. } => {
                let bump: f64 = modes
                    .iter()
                    .map(|m| m.amplitude * omega[m.axis].powi(m.degree as i32))
                    .sum();
                radius * (1.0 + bump)
            }
        }
    }

    /// Radial gap between `q` and the boundary; negative outside.
    pub fn radial_gap(&self, q: &[f64]) -> f64 {
        let (center, _) = self.center_radius();
        let d: Vec<f64> = q.iter().zip(center).map(|(a, b)| a - b).collect();
        let r = norm(&d);
        if r == 0.0 {
            let mut e = vec![0.0; self.n];
            e[0] = 1.0;
            return self.boundary_radius(&e);
        }
        let omega: Vec<f64> = d.iter().map(|v| v / r).collect();
        self.boundary_radius(&omega) - r
    }

    fn check_interior(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n {
            return Err(Error::Invalid(format!("point has {} components, expected {}", q.len(), self.n)));
        }
        let gap = self.radial_gap(q);
        if gap <= 0.0 {
            return Err(Error::Exterior(gap));
        }
        Ok(())
    }

    fn boundary_point(&self, omega: &[f64], scale: f64) -> Vec<f64> {
        let (center, _) = self.center_radius();
        let rho = self.boundary_radius(omega) * scale;
        center.iter().zip(omega).map(|(c, w)| c + rho * w).collect()
    }
}

/// Anything that can produce H(x,y) near the diagonal.
pub trait RegularPart: Sync {
    fn domain(&self) -> &DomainSpec;

    /// H(x,y) for x, y inside the domain.
    fn value_at(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// ∇ₓH(x,q) at x = q.
    fn grad_regular_part(&self, q: &[f64]) -> Result<Vec<f64>>;

    /// H(q,q).
    fn regular_part(&self, q: &[f64]) -> Result<f64> {
        self.value_at(q, q)
    }
}

/// Closed-form regular part on a ball.
#[derive(Debug, Clone)]
pub struct BallGreen {
    domain: DomainSpec,
    alpha: f64,
}

impl BallGreen {
    pub fn new(domain: DomainSpec) -> Result<Self> {
        domain.validate()?;
        if !matches!(domain.shape, DomainShape::Ball { .. }) {
            return Err(Error::Invalid("closed-form Green function needs a ball".into()));
        }
        let alpha = bubble_alpha(domain.n);
        Ok(Self { domain, alpha })
    }

    fn scaled(&self, p: &[f64]) -> Vec<f64> {
        let (c, r) = self.domain.center_radius();
        p.iter().zip(c).map(|(a, b)| (a - b) / r).collect()
    }

    /// 1 − 2x·y + |x|²|y|², which equals (|y||x − y/|y|²|)² and stays smooth at y = 0.
    fn image_distance_sq(x: &[f64], y: &[f64]) -> f64 {
        1.0 - 2.0 * dot(x, y) + dot(x, x) * dot(y, y)
    }
}

impl RegularPart for BallGreen {
    fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn value_at(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.domain.check_interior(x)?;
        self.domain.check_interior(y)?;
        let n = self.domain.n as f64;
        let (_, r) = self.domain.center_radius();
        let (xs, ys) = (self.scaled(x), self.scaled(y));
        let d2 = Self::image_distance_sq(&xs, &ys);
        Ok(self.alpha * r.powf(2.0 - n) * d2.powf(1.0 - n / 2.0))
    }

    fn grad_regular_part(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.domain.check_interior(q)?;
        let n = self.domain.n as f64;
        let (_, r) = self.domain.center_radius();
        let qs = self.scaled(q);
        let q2 = dot(&qs, &qs);
        let d2 = Self::image_distance_sq(&qs, &qs);
        let pref = self.alpha * r.powf(1.0 - n) * (2.0 - n) * d2.powf(-n / 2.0);
        Ok(qs.iter().map(|v| pref * (v * q2 - v)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenConfig {
    pub n_sources: usize,
    pub n_nodes: usize,
    /// Sources sit on the boundary scaled by this factor about the center.
    pub inflation: f64,
    /// Singular values below this fraction of the largest are dropped.
    pub svd_threshold: f64,
    pub seed: u64,
    /// Repulsion sweeps used to spread the sphere points.
    pub repulsion_iterations: usize,
    /// Allowed boundary residual relative to max |Γ(· − y)| on the check set.
    /// Check points fall between nodes, so this only catches gross failure;
    /// the interior error is orders of magnitude smaller.
    pub residual_tol: f64,
    pub check_nodes: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self {
            n_sources: 2000,
            n_nodes: 4000,
            inflation: 3.0,
            svd_threshold: 1e-12,
            seed: 1,
            repulsion_iterations: 15,
            residual_tol: 1e-2,
            check_nodes: 300,
        }
    }
}

impl GreenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sources == 0 || self.n_nodes < self.n_sources {
            return Err(Error::Invalid(format!(
                "need 0 < n_sources <= n_nodes, got {} and {}",
                self.n_sources, self.n_nodes
            )));
        }
        if self.inflation <= 1.0 {
            return Err(Error::Invalid(format!("inflation {} must exceed 1", self.inflation)));
        }
        if !(self.svd_threshold > 0.0 && self.svd_threshold < 1.0) {
            return Err(Error::Invalid("svd_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Quasi-uniform points on S^{n-1}: Gaussian seeds relaxed by Riesz repulsion.
pub fn quasi_uniform_sphere(n: usize, count: usize, seed: u64, iterations: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = norm(&v);
            v.into_iter().map(|x| x / r).collect()
        })
        .collect();
    let step = 0.1 / (count as f64).sqrt();
    for _ in 0..iterations {
        let forces: Vec<Vec<f64>> = pts
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut f = vec![0.0; n];
                for (j, y) in pts.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let inv = dist_sq(x, y).sqrt().recip();
                    let w = inv.powi(n as i32 + 1);
                    f.iter_mut().zip(x.iter().zip(y)).for_each(|(fk, (a, b))| *fk += w * (a - b));
                }
                let radial = dot(&f, x);
                f.iter_mut().zip(x).for_each(|(fk, xk)| *fk -= radial * xk);
                f
            })
            .collect();
        let fmax = forces.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        if fmax == 0.0 {
            break;
        }
        for (x, f) in pts.iter_mut().zip(&forces) {
            x.iter_mut().zip(f).for_each(|(a, b)| *a += b * step / fmax);
            let r = norm(x);
            x.iter_mut().for_each(|a| *a /= r);
        }
    }
    pts
}

/// Point-charge solver for H on a star-shaped domain.
#[derive(Debug, Clone)]
pub struct GreenSolver {
    domain: DomainSpec,
    config: GreenConfig,
    alpha: f64,
    sources: Vec<Vec<f64>>,
    nodes: Vec<Vec<f64>>,
    check: Vec<Vec<f64>>,
    /// Leading rows of diag(1/s)·Uᵀ, rank × n_nodes.
    left: Array2<f64>,
    /// Leading columns of V, n_sources × rank.
    right: Array2<f64>,
    rank: usize,
    cond_estimate: f64,
}

const CACHE_MAGIC: &[u8; 8] = b"CHGREEN1";

impl GreenSolver {
    pub fn build(domain: DomainSpec, config: GreenConfig) -> Result<Self> {
        domain.validate()?;
        config.validate()?;
        let n = domain.n;
        let alpha = bubble_alpha(n);
        let source_dirs = quasi_uniform_sphere(n, config.n_sources, config.seed, config.repulsion_iterations);
        let node_dirs =
            quasi_uniform_sphere(n, config.n_nodes, config.seed.wrapping_add(1), config.repulsion_iterations);
        let check_dirs = quasi_uniform_sphere(n, config.check_nodes, config.seed.wrapping_add(2), 0);
        let sources: Vec<Vec<f64>> =
            source_dirs.iter().map(|w| domain.boundary_point(w, config.inflation)).collect();
        let nodes: Vec<Vec<f64>> = node_dirs.iter().map(|w| domain.boundary_point(w, 1.0)).collect();
        let check: Vec<Vec<f64>> = check_dirs.iter().map(|w| domain.boundary_point(w, 1.0)).collect();

        let rows: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|x| sources.iter().map(|s| alpha * dist_sq(x, s).powf(1.0 - n as f64 / 2.0)).collect())
            .collect();
        let matrix = Array2::from_shape_fn((nodes.len(), sources.len()), |(i, j)| rows[i][j]);
        drop(rows);
        let (u, s, vt) = matrix.svddc(JobSvd::Some).map_err(|e| Error::Linalg(e.to_string()))?;
        let (u, vt) = match (u, vt) {
            (Some(u), Some(vt)) => (u, vt),
            _ => return Err(Error::Linalg("SVD returned no singular vectors".into())),
        };
        let smax = s[0];
        let rank = s.iter().take_while(|&&v| v > config.svd_threshold * smax).count();
        if rank == 0 {
            return Err(Error::IllConditioned("collocation matrix has rank 0".into()));
        }
        let cond_estimate = smax / s[rank - 1];
        let mut left = u.slice(ndarray::s![.., ..rank]).t().to_owned();
        for (mut row, sv) in left.rows_mut().into_iter().zip(s.iter()) {
            row /= *sv;
        }
        let left = left.as_standard_layout().into_owned();
        let right = vt.slice(ndarray::s![..rank, ..]).t().as_standard_layout().into_owned();
        Ok(Self { domain, config, alpha, sources, nodes, check, left, right, rank, cond_estimate })
    }

    /// Loads a solver from `dir` if a matching entry exists, otherwise builds and stores it.
    pub fn build_cached(domain: DomainSpec, config: GreenConfig, dir: Option<&Path>) -> Result<Self> {
        let Some(dir) = dir else {
            return Self::build(domain, config);
        };
        let path = dir.join(format!("green-{}.bin", content_hash(&domain, &config)?));
        if let Ok(solver) = Self::load(&path, &domain, &config) {
            return Ok(solver);
        }
        let solver = Self::build(domain, config)?;
        fs::create_dir_all(dir)?;
        solver.save(&path)?;
        Ok(solver)
    }

    pub fn config(&self) -> &GreenConfig {
        &self.config
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    pub fn source_points(&self) -> &[Vec<f64>] {
        &self.sources
    }

    pub fn boundary_nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    /// Mean spacing of the collocation nodes.
    pub fn grid_scale(&self) -> f64 {
        let (_, r) = self.domain.center_radius();
        let n = self.domain.n;
        r * (sphere_area(n) / self.nodes.len() as f64).powf(1.0 / (n as f64 - 1.0))
    }

    /// True when `q` is closer to the boundary than the node spacing, where accuracy degrades.
    pub fn near_boundary(&self, q: &[f64]) -> bool {
        self.domain.radial_gap(q) < self.grid_scale()
    }

    fn gamma(&self, x: &[f64], y: &[f64]) -> f64 {
        self.alpha * dist_sq(x, y).powf(1.0 - self.domain.n as f64 / 2.0)
    }

    /// Charge weights reproducing Γ(· − y) on the boundary.
    pub fn weights(&self, y: &[f64]) -> Result<Array1<f64>> {
        self.domain.check_interior(y)?;
        let rhs: Array1<f64> = self.nodes.iter().map(|x| self.gamma(x, y)).collect();
        let w = self.right.dot(&self.left.dot(&rhs));
        let residual = self.boundary_residual(&w, y);
        if !(residual <= self.config.residual_tol) {
            return Err(Error::Collocation { residual });
        }
        Ok(w)
    }

    /// Max boundary mismatch on the independent check set, relative to max |Γ(· − y)|.
    fn boundary_residual(&self, w: &Array1<f64>, y: &[f64]) -> f64 {
        let (mut worst, mut scale) = (0.0f64, 0.0f64);
        for x in &self.check {
            let g = self.gamma(x, y);
            worst = worst.max((self.charge_sum(w, x) - g).abs());
            scale = scale.max(g);
        }
        worst / scale
    }

    fn charge_sum(&self, w: &Array1<f64>, x: &[f64]) -> f64 {
        self.sources.iter().zip(w.iter()).map(|(s, wi)| wi * self.gamma(x, s)).sum()
    }

    /// Evaluates H(x,y) for several x sharing the same pole y.
    pub fn values_with_pole(&self, xs: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
        let w = self.weights(y)?;
        xs.iter()
            .map(|x| {
                self.domain.check_interior(x)?;
                Ok(self.charge_sum(&w, x))
            })
            .collect()
    }

    fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(64 + 8 * (self.left.len() + self.right.len()));
        buf.extend_from_slice(CACHE_MAGIC);
        for v in [self.right.nrows(), self.left.ncols(), self.rank] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        buf.extend_from_slice(&self.cond_estimate.to_le_bytes());
        for v in self.left.iter().chain(self.right.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(&buf)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    fn load(path: &Path, domain: &DomainSpec, config: &GreenConfig) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let corrupt = || Error::Invalid(format!("corrupt cache entry {}", path.display()));
        if bytes.len() < 40 || &bytes[..8] != CACHE_MAGIC {
            return Err(corrupt());
        }
        let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        let (rows, cols, rank) = (word(0) as usize, word(1) as usize, word(2) as usize);
        let cond_estimate = f64::from_bits(word(3));
        if rows != config.n_sources
            || cols != config.n_nodes
            || bytes.len() != 40 + 8 * rank * (rows + cols)
        {
            return Err(corrupt());
        }
        let mut data: Vec<f64> = bytes[40..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let right_data = data.split_off(rank * cols);
        let left = Array2::from_shape_vec((rank, cols), data).map_err(|_| corrupt())?;
        let right = Array2::from_shape_vec((rows, rank), right_data).map_err(|_| corrupt())?;
        // Geometry is cheap and deterministic, so it is regenerated rather than stored.
        let n = domain.n;
        let dirs = |count, offset: u64, iters| quasi_uniform_sphere(n, count, config.seed.wrapping_add(offset), iters);
        let sources = dirs(config.n_sources, 0, config.repulsion_iterations)
            .iter()
            .map(|w| domain.boundary_point(w, config.inflation))
            .collect();
        let nodes = dirs(config.n_nodes, 1, config.repulsion_iterations)
            .iter()
            .map(|w| domain.boundary_point(w, 1.0))
            .collect();
        let check = dirs(config.check_nodes, 2, 0).iter().map(|w| domain.boundary_point(w, 1.0)).collect();
        Ok(Self {
            domain: domain.clone(),
            config: config.clone(),
            alpha: bubble_alpha(n),
            sources,
            nodes,
            check,
            left,
            right,
            rank,
            cond_estimate,
        })
    }
}

impl RegularPart for GreenSolver {
    fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn value_at(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.domain.check_interior(x)?;
        let w = self.weights(y)?;
        Ok(self.charge_sum(&w, x))
    }

    fn grad_regular_part(&self, q: &[f64]) -> Result<Vec<f64>> {
        let w = self.weights(q)?;
        let n = self.domain.n;
        let mut grad = vec![0.0; n];
        for (s, wi) in self.sources.iter().zip(w.iter()) {
            let r2 = dist_sq(q, s);
            let f = wi * self.alpha * (2.0 - n as f64) * r2.powf(-(n as f64) / 2.0);
            grad.iter_mut().zip(q.iter().zip(s)).for_each(|(g, (a, b))| *g += f * (a - b));
        }
        Ok(grad)
    }
}

/// Hex sha256 of the JSON encoding of `(domain, config)`.
pub fn content_hash(domain: &DomainSpec, config: &GreenConfig) -> Result<String> {
    let json = serde_json::to_vec(&(domain, config))?;
    Ok(hex::encode(Sha256::digest(&json)))
}

/// Default cache location when none is configured.
pub fn default_cache_dir() -> PathBuf {
    std::env::temp_dir().join("critheat-cache")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::laplacian4;
    use std::sync::OnceLock;

    fn unit_solver() -> &'static GreenSolver {
        static SOLVER: OnceLock<GreenSolver> = OnceLock::new();
        SOLVER.get_or_init(|| GreenSolver::build(DomainSpec::unit_ball(5).unwrap(), GreenConfig::default()).unwrap())
    }

    fn point(n: usize, r: f64, axis: usize) -> Vec<f64> {
        let mut q = vec![0.0; n];
        q[axis] = r;
        q[(axis + 1) % n] = 0.01;
        q
    }

    #[test]
    fn fundamental_solution() {
        let mut x = vec![0.0; 5];
        x[2] = 1.0;
        assert!((gamma_fundamental(&x).unwrap() - 15f64.powf(0.75)).abs() < 1e-12);
        let y = [0.3, -0.2, 0.5, 0.1, 0.7];
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let ratio = gamma_fundamental(&y2).unwrap() / gamma_fundamental(&y).unwrap();
        assert!((ratio - 0.125).abs() < 1e-14);
        let lap = laplacian4(&|p: &[f64]| gamma_fundamental(p).unwrap(), &y, 1e-2);
        assert!(lap.abs() < 1e-6 * gamma_fundamental(&y).unwrap());
        assert!(gamma_fundamental(&[0.0; 5]).is_err());
    }

    #[test]
    fn ball_closed_form() {
        let alpha = 15f64.powf(0.75);
        let g = BallGreen::new(DomainSpec::unit_ball(5).unwrap()).unwrap();
        let o = vec![0.0; 5];
        assert!((g.regular_part(&o).unwrap() - alpha).abs() < 1e-12);
        let big = BallGreen::new(DomainSpec::ball(5, vec![0.0; 5], 2.0).unwrap()).unwrap();
        assert!((big.regular_part(&o).unwrap() - alpha / 8.0).abs() < 1e-12);
        assert!(g.grad_regular_part(&o).unwrap().iter().all(|v| v.abs() < 1e-14));

        let q = point(5, 0.5, 0);
        let exact = alpha * (1.0 - dot(&q, &q)).powi(-3);
        assert!((g.regular_part(&q).unwrap() / exact - 1.0).abs() < 1e-12);
        let grad = g.grad_regular_part(&q).unwrap();
        assert!(dot(&grad, &q) > 0.0);
        let h = 1e-5;
        for i in 0..5 {
            let (mut a, mut b) = (q.clone(), q.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (g.value_at(&a, &q).unwrap() - g.value_at(&b, &q).unwrap()) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-6 * exact, "component {i}");
        }
        assert!(matches!(g.regular_part(&point(5, 1.2, 0)), Err(Error::Exterior(_))));
    }

    #[test]
    fn ball_symmetry_and_monotonicity() {
        let g = BallGreen::new(DomainSpec::unit_ball(6).unwrap()).unwrap();
        let x = [0.1, 0.3, -0.2, 0.0, 0.4, 0.1];
        let y = [-0.5, 0.1, 0.2, 0.3, 0.0, -0.1];
        let (a, b) = (g.value_at(&x, &y).unwrap(), g.value_at(&y, &x).unwrap());
        assert!((a / b - 1.0).abs() < 1e-12);
        let values: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|r| {
                BallGreen::new(DomainSpec::ball(6, vec![0.0; 6], *r).unwrap())
                    .unwrap()
                    .regular_part(&[0.0; 6])
                    .unwrap()
            })
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn collocation_matches_image_formula() {
        let solver = unit_solver();
        let exact = BallGreen::new(DomainSpec::unit_ball(5).unwrap()).unwrap();
        for (i, r) in [0.0, 0.2, 0.3, 0.4].iter().enumerate() {
            let q = point(5, *r, i % 5);
            let (h, e) = (solver.regular_part(&q).unwrap(), exact.regular_part(&q).unwrap());
            assert!((h / e - 1.0).abs() < 1e-4, "r = {r}: {h} vs {e}");
            let (g, ge) = (solver.grad_regular_part(&q).unwrap(), exact.grad_regular_part(&q).unwrap());
            let err = g.iter().zip(&ge).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-3 * e, "gradient at r = {r}: {err}");
        }
    }

    #[test]
    fn collocation_harmonic_and_symmetric() {
        let solver = unit_solver();
        let y = point(5, 0.3, 1);
        let w = solver.weights(&y).unwrap();
        let x = [0.1, -0.2, 0.05, 0.2, -0.1];
        let h = solver.charge_sum(&w, &x);
        let lap = laplacian4(&|p: &[f64]| solver.charge_sum(&w, p), &x, 1e-2);
        assert!(lap.abs() < 1e-6 * h, "laplacian {lap} vs {h}");
        let swapped = solver.value_at(&y, &x).unwrap();
        assert!((solver.value_at(&x, &y).unwrap() / swapped - 1.0).abs() < 1e-6);
        assert!(!solver.near_boundary(&y));
        assert!(solver.near_boundary(&point(5, 0.95, 0)));
    }

    #[test]
    fn perturbed_ball_is_positive() {
        let modes = vec![
            RadialMode { axis: 0, degree: 2, amplitude: 0.1 },
            RadialMode { axis: 2, degree: 3, amplitude: -0.05 },
        ];
        let domain = DomainSpec::star_shaped(5, vec![0.0; 5], 1.0, modes).unwrap();
        let config = GreenConfig { n_sources: 1200, n_nodes: 2400, inflation: 2.5, ..Default::default() };
        let solver = GreenSolver::build(domain, config).unwrap();
        for r in [0.0, 0.2, 0.4] {
            for axis in 0..3 {
                assert!(solver.regular_part(&point(5, r, axis)).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let domain = DomainSpec::ball(5, vec![0.1, 0.0, 0.0, 0.0, 0.0], 1.5).unwrap();
        let config = GreenConfig { n_sources: 300, n_nodes: 600, residual_tol: 1e-2, ..Default::default() };
        let built = GreenSolver::build_cached(domain.clone(), config.clone(), Some(dir.path())).unwrap();
        let loaded = GreenSolver::build_cached(domain, config, Some(dir.path())).unwrap();
        let q = point(5, 0.4, 0);
        assert_eq!(built.regular_part(&q).unwrap(), loaded.regular_part(&q).unwrap());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn domain_json_roundtrip() {
        let d = DomainSpec::star_shaped(6, vec![0.0; 6], 2.0, vec![RadialMode { axis: 1, degree: 2, amplitude: 0.1 }])
            .unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"kind\":\"star_shaped\""));
        assert_eq!(serde_json::from_str::<DomainSpec>(&s).unwrap(), d);
        assert!(DomainSpec::ball(5, vec![0.0; 5], -1.0).is_err());
        assert!(DomainSpec::unit_ball(4).is_err());
    }
}
