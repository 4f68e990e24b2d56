//! Adaptive quadrature and the scalar constants of the reduction.

mod adaptive;
mod constants;
pub mod cubature;
mod gauss;
mod gram;

pub use adaptive::{geometric_breaks, integrate, integrate_breaks, integrate_power_tail, Estimate, QuadratureSpec};
pub use gauss::{gauss_legendre, PanelRule};
pub use constants::{c1_identity, const_a, const_c1, const_c2, dilation_far_field, f_of_a, gamma_identity, z0_norm_sq, z1_norm_sq, C1Identity, GammaIdentity};
pub use cubature::CubatureOptions;
pub use gram::{gram_matrix, kernel_pair_integral, tower_c1_c2, GramMatrix, TowerConstants};
