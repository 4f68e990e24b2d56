//! Bubble profiles, the sign-changing tower, the transformed family and the
//! kernel functions of the linearized operator.

mod bubble;
mod farfield;
mod kernels;
mod linearized;
mod tower;
mod transform;

pub use bubble::{bubble_alpha, critical_exponent, BubbleProfile};
pub use farfield::{fit_farfield_constants, FarField, FitOptions};
pub use kernels::{fill_from_jet as kernels_from_jet, KernelBasis, KernelRole};
pub use linearized::{analytic_kernel_residuals, apply_linearized, RadialSeries};
pub use tower::{TowerOptions, TowerProfile};
pub use transform::{check_transform_derivatives, eval_transformed, TransformParams};

/// A steady profile Q on R^n with an analytic gradient.
pub trait Profile: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes ∇Q(x) into `grad` and returns Q(x).
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// The underlying positive bubble (fixes n, p and the normalization).
    fn bubble(&self) -> &BubbleProfile;

    /// Potential p|Q|^{p-1} of the linearized operator.
    fn potential(&self, x: &[f64]) -> f64 {
        let b = self.bubble();
        b.p * self.value(x).abs().powf(b.p - 1.0)
    }
}
