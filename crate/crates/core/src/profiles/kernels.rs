use super::Profile;
use crate::error::{Error, Result};
use crate::util::dot;
use crate::MAX_DIM;

/// Symmetry generator behind each kernel index. Coordinate indices are
/// zero-based (`Translation(0)` is ∂Q/∂x₁).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelRole {
    Dilation,
    Translation(usize),
    /// Rotation in the (x₁,x₂)-plane.
    PlaneRotation,
    /// Kelvin generator paired with coordinate 0 or 1.
    Kelvin(usize),
    /// Rotation in the (x₁,x_l) plane, l ≥ 2 zero-based.
    RotationFirst(usize),
    /// Rotation in the (x₂,x_l) plane, l ≥ 2 zero-based.
    RotationSecond(usize),
}

impl KernelRole {
    pub fn from_index(n: usize, alpha: usize) -> Result<Self> {
        // One-based l in 3..=n maps to kernel indices n+l+1 and 2n+l-1.
        Ok(match alpha {
            0 => Self::Dilation,
            a if a <= n => Self::Translation(a - 1),
            a if a == n + 1 => Self::PlaneRotation,
            a if a == n + 2 || a == n + 3 => Self::Kelvin(a - n - 2),
            a if a <= 2 * n + 1 => Self::RotationFirst(a - n - 2),
            a if a < 3 * n => Self::RotationSecond(a - 2 * n),
            _ => return Err(Error::KernelIndex { index: alpha, n }),
        })
    }

    pub fn index(self, n: usize) -> usize {
        match self {
            Self::Dilation => 0,
            Self::Translation(i) => i + 1,
            Self::PlaneRotation => n + 1,
            Self::Kelvin(i) => n + 2 + i,
            Self::RotationFirst(l) => n + 2 + l,
            Self::RotationSecond(l) => 2 * n + l,
        }
    }
}

/// The 3n kernel functions z_α generated by a profile.
#[derive(Debug, Clone, Copy)]
pub struct KernelBasis<'a, P: Profile + ?Sized> {
    profile: &'a P,
}

impl<'a, P: Profile + ?Sized> KernelBasis<'a, P> {
    pub fn new(profile: &'a P) -> Self {
        Self { profile }
    }

    pub fn len(&self) -> usize {
        3 * self.profile.dim()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn profile(&self) -> &'a P {
        self.profile
    }

    /// z_α(x).
    pub fn eval(&self, alpha: usize, x: &[f64]) -> Result<f64> {
        let n = self.profile.dim();
        let role = KernelRole::from_index(n, alpha)?;
        let mut g = [0.0; MAX_DIM];
        let q = self.profile.value_grad(x, &mut g[..n]);
        Ok(from_jet(role, q, &g[..n], x))
    }

    /// All 3n kernel values at `x`, written into `out`.
    pub fn eval_all(&self, x: &[f64], out: &mut [f64]) {
        let n = self.profile.dim();
        let mut g = [0.0; MAX_DIM];
        let q = self.profile.value_grad(x, &mut g[..n]);
        fill_from_jet(q, &g[..n], x, out);
    }
}

fn dilation(q: f64, g: &[f64], x: &[f64]) -> f64 {
    (x.len() as f64 - 2.0) / 2.0 * q + dot(g, x)
}

fn from_jet(role: KernelRole, q: f64, g: &[f64], x: &[f64]) -> f64 {
    match role {
        KernelRole::Dilation => dilation(q, g, x),
        KernelRole::Translation(i) => g[i],
        KernelRole::PlaneRotation => -x[1] * g[0] + x[0] * g[1],
        KernelRole::Kelvin(i) => -2.0 * x[i] * dilation(q, g, x) + dot(x, x) * g[i],
        KernelRole::RotationFirst(l) => -x[l] * g[0] + x[0] * g[l],
        KernelRole::RotationSecond(l) => -x[l] * g[1] + x[1] * g[l],
    }
}

/// All 3n kernels from a value/gradient jet (Q(x), ∇Q(x)) at `x`.
pub fn fill_from_jet(q: f64, g: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let z0 = dilation(q, g, x);
    let r2 = dot(x, x);
    out[0] = z0;
    out[1..=n].copy_from_slice(g);
    out[n + 1] = -x[1] * g[0] + x[0] * g[1];
    out[n + 2] = -2.0 * x[0] * z0 + r2 * g[0];
    out[n + 3] = -2.0 * x[1] * z0 + r2 * g[1];
    for l in 2..n {
        out[n + 2 + l] = -x[l] * g[0] + x[0] * g[l];
        out[2 * n + l] = -x[l] * g[1] + x[1] * g[l];
    }
}
