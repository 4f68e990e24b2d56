use serde::{Deserialize, Serialize};

use super::{KernelBasis, KernelRole, Profile};
use crate::error::{Error, Result};
use crate::util::norm_sq;
use crate::MAX_DIM;

const KELVIN_TOL: f64 = 1e-12;

/// Dilation μ, translation ξ, Kelvin parameter a (in the (x₁,x₂)-plane) and
/// plane-rotation angles θ ordered (1,2),(1,3),…,(1,n),(2,3),…,(2,n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub mu: f64,
    pub xi: Vec<f64>,
    pub a: [f64; 2],
    pub theta: Vec<f64>,
}

impl TransformParams {
    pub fn identity(n: usize) -> Self {
        Self { mu: 1.0, xi: vec![0.0; n], a: [0.0; 2], theta: vec![0.0; 2 * n - 3] }
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::Invalid(format!("dilation must be positive, got {}", self.mu)));
        }
        if self.xi.len() != n || self.theta.len() != 2 * n - 3 {
            return Err(Error::Invalid("transform parameter lengths do not match n".into()));
        }
        Ok(())
    }

    /// Index into `theta` of the rotation in the (i,j) plane, i < j, zero-based.
    pub fn plane_index(n: usize, i: usize, j: usize) -> usize {
        match i {
            0 => j - 1,
            _ => n + j - 3,
        }
    }

    /// Perturb the parameter generating kernel `role` by `h`.
    /// Returns the sign s with ∂Q_A/∂(param) = s·z_role at the identity.
    pub fn perturb(&mut self, role: KernelRole, h: f64) -> f64 {
        let n = self.dim();
        match role {
            KernelRole::Dilation => {
                self.mu += h;
                -1.0
            }
            KernelRole::Translation(i) => {
                self.xi[i] += h;
                -1.0
            }
            KernelRole::Kelvin(i) => {
                self.a[i] += h;
                -1.0
            }
            KernelRole::PlaneRotation => {
                self.theta[0] += h;
                1.0
            }
            KernelRole::RotationFirst(l) => {
                self.theta[Self::plane_index(n, 0, l)] += h;
                1.0
            }
            KernelRole::RotationSecond(l) => {
                self.theta[Self::plane_index(n, 1, l)] += h;
                1.0
            }
        }
    }

    /// Apply R_θ to `v` in place.
    pub fn rotate(&self, v: &mut [f64]) {
        let n = v.len();
        let mut apply = |i: usize, j: usize, th: f64| {
            if th != 0.0 {
                let (s, c) = th.sin_cos();
                let (vi, vj) = (v[i], v[j]);
                v[i] = c * vi - s * vj;
                v[j] = s * vi + c * vj;
            }
        };
        for j in 1..n {
            apply(0, j, self.theta[Self::plane_index(n, 0, j)]);
        }
        for j in 2..n {
            apply(1, j, self.theta[Self::plane_index(n, 1, j)]);
        }
    }
}

/// Q_A(x) = μ^{-(n-2)/2} |η|^{2-n} Q(R_θ(y - a|y|²)/|η|²), y = (x-ξ)/μ.
pub fn eval_transformed<P: Profile + ?Sized>(profile: &P, params: &TransformParams, x: &[f64]) -> Result<f64> {
    let n = profile.dim();
    let mut y = [0.0; MAX_DIM];
    for i in 0..n {
        y[i] = (x[i] - params.xi[i]) / params.mu;
    }
    let y = &mut y[..n];
    let y2 = norm_sq(y);
    let a2 = params.a[0] * params.a[0] + params.a[1] * params.a[1];
    let ay = params.a[0] * y[0] + params.a[1] * y[1];
    let eta2 = 1.0 - 2.0 * ay + a2 * y2;
    if eta2 < KELVIN_TOL * KELVIN_TOL {
        return Err(Error::SingularKelvin(eta2.max(0.0).sqrt()));
    }
    y[0] = (y[0] - params.a[0] * y2) / eta2;
    y[1] = (y[1] - params.a[1] * y2) / eta2;
    for v in y.iter_mut().skip(2) {
        *v /= eta2;
    }
    params.rotate(y);
    let w = (n as f64 - 2.0) / 2.0;
    Ok(params.mu.powf(-w) * eta2.powf(-w) * profile.value(y))
}

/// Max over `points` of |central difference of Q_A in the parameter of
/// kernel `alpha` at the identity minus the signed kernel z_α|.
pub fn check_transform_derivatives<P: Profile + ?Sized>(
    profile: &P,
    alpha: usize,
    h: f64,
    points: &[Vec<f64>],
) -> Result<f64> {
    let n = profile.dim();
    let role = KernelRole::from_index(n, alpha)?;
    let kb = KernelBasis::new(profile);
    let mut plus = TransformParams::identity(n);
    let sign = plus.perturb(role, h);
    let mut minus = TransformParams::identity(n);
    minus.perturb(role, -h);
    let mut worst: f64 = 0.0;
    for x in points {
        let d = (eval_transformed(profile, &plus, x)? - eval_transformed(profile, &minus, x)?) / (2.0 * h);
        worst = worst.max((d - sign * kb.eval(alpha, x)?).abs());
    }
    Ok(worst)
}
