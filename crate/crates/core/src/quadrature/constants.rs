//! Radially reduced constants of the single bubble and the Gaussian-averaged
//! far-field function F(a).

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::{geometric_breaks, integrate_breaks, integrate_power_tail, Estimate, QuadratureSpec};
use crate::error::{check_dim, Error, Result};
use crate::profiles::BubbleProfile;
use crate::util::{gamma_ratio, sphere_area};

/// Relative size of the uncancelled far-field remainder above which the
/// subtraction constant is rejected.
const TAIL_RATIO_LIMIT: f64 = 1e-3;

/// g(r) = (2 - r²)(1 + r²)^{-n/2}, the far-field shape of z₀.
pub fn dilation_far_field(n: usize, r2: f64) -> f64 {
    (2.0 - r2) * (1.0 + r2).powf(-(n as f64) / 2.0)
}

/// Radial dilation kernel Z₀(r) of the bubble.
fn z0_radial(b: &BubbleProfile, r: f64) -> f64 {
    let s = 1.0 + r * r;
    b.weight() * b.alpha_n * (1.0 - r * r) * s.powf(-(b.n as f64) / 2.0)
}

fn radial_integral<F: Fn(f64) -> f64>(b: &BubbleProfile, f: F, decay: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    let n = b.n as i32;
    let area = sphere_area(b.n);
    let e = integrate_power_tail(|r| f(r) * r.powi(n - 1), 0.0, decay, spec)?;
    Ok(Estimate { value: area * e.value, error: area * e.error })
}

/// Both sides of -p∫U^{p-1}Z₀ = (n-2)/2 ∫U^p over R^n.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct C1Identity {
    pub lhs: Estimate,
    pub rhs: Estimate,
}

pub fn c1_identity(b: &BubbleProfile, spec: &QuadratureSpec) -> Result<C1Identity> {
    spec.validate()?;
    let p = b.p;
    let lhs = radial_integral(b, |r| -p * b.radial(r * r).powf(p - 1.0) * z0_radial(b, r), 3.0, spec)?;
    let rhs = radial_integral(b, |r| b.weight() * b.radial(r * r).powf(p), 3.0, spec)?;
    Ok(C1Identity { lhs, rhs })
}

/// c₁ = -p∫U^{p-1}Z₀ for the single bubble.
pub fn const_c1(b: &BubbleProfile, spec: &QuadratureSpec) -> Result<f64> {
    Ok(c1_identity(b, spec)?.lhs.value)
}

/// c₂ = ∫(Z₀ - D g)Z₀ for the single bubble. Rejects a `d_coef` that leaves
/// the slowly decaying part of Z₀ uncancelled.
#[allow(non_snake_case)]
pub fn const_c2(b: &BubbleProfile, D: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    spec.validate()?;
    check_tail_cancelled(b, D, spec.radial_cutoff)?;
    let n = b.n;
    radial_integral(b, |r| (z0_radial(b, r) - D * dilation_far_field(n, r * r)) * z0_radial(b, r), n as f64 - 1.0, spec)
}

#[allow(non_snake_case)]
fn check_tail_cancelled(b: &BubbleProfile, D: f64, radius: f64) -> Result<()> {
    let z0 = z0_radial(b, radius);
    let ratio = ((z0 - D * dilation_far_field(b.n, radius * radius)) / z0).abs();
    if ratio > TAIL_RATIO_LIMIT {
        return Err(Error::TailNotCancelled { ratio, radius });
    }
    Ok(())
}

/// Both sides of the Γ-function identity for ∫(Z₀ - (n-2)/2 α g)Z₀.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaIdentity {
    /// Radial integral ∫₀^∞ r^{n-1}(Z₀ - (n-2)/2 α g)Z₀ dr divided by (n-2)/2 α.
    pub lhs: f64,
    /// (n-2)/2 α √π 2^{-n} Γ(n/2-1)/Γ((n+1)/2).
    pub rhs: f64,
    /// The same pairing over all of R^n (sphere area and (n-2)/2 α restored).
    pub full_space: f64,
}

pub fn gamma_identity(n: usize, spec: &QuadratureSpec) -> Result<GammaIdentity> {
    check_dim(n)?;
    let b = BubbleProfile::new(n)?;
    let wa = b.weight() * b.alpha_n;
    let full = const_c2(&b, wa, spec)?.value;
    let lhs = full / (sphere_area(n) * wa);
    let nf = n as f64;
    let rhs = wa * std::f64::consts::PI.sqrt() * 2f64.powf(-nf) * gamma_ratio(nf / 2.0 - 1.0, (nf + 1.0) / 2.0);
    Ok(GammaIdentity { lhs, rhs, full_space: full })
}

/// ∫Z₀² for the bubble.
pub fn z0_norm_sq(b: &BubbleProfile, spec: &QuadratureSpec) -> Result<Estimate> {
    radial_integral(b, |r| z0_radial(b, r).powi(2), b.n as f64 - 3.0, spec)
}

/// ∫(∂₁U)² for the bubble.
pub fn z1_norm_sq(b: &BubbleProfile, spec: &QuadratureSpec) -> Result<Estimate> {
    let n = b.n as f64;
    let c = (n - 2.0) * b.alpha_n;
    radial_integral(b, |r| c * c * r * r * (1.0 + r * r).powf(-n) / n, n - 1.0, spec)
}

/// F(a) = ∫ p(1,x) D g(a x) dx with the unit-time Gaussian heat kernel,
/// reduced to a radial integral.
#[allow(non_snake_case)]
pub fn f_of_a(a: f64, D: f64, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    check_dim(n)?;
    if !(a >= 0.0) {
        return Err(Error::Invalid(format!("F(a) needs a >= 0, got {a}")));
    }
    if a == 0.0 {
        return Ok(2.0 * D);
    }
    let nf = n as f64;
    let norm = sphere_area(n) * (4.0 * std::f64::consts::PI).powf(-nf / 2.0);
    let f = |r: f64| r.powi(n as i32 - 1) * (-r * r / 4.0).exp() * dilation_far_field(n, a * a * r * r);
    // The Gaussian is negligible beyond r = 60; grade towards the scale 1/a.
    let mut breaks: Vec<f64> = geometric_breaks(0.0, 60.0);
    let mut x = 1.0 / (8.0 * a);
    while x < 60.0 {
        breaks.push(x);
        x *= 2.0;
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|u, v| (*u - *v).abs() < 1e-12 * v.abs().max(1e-300));
    // F changes sign, so the tolerance needs an absolute floor on the O(1) scale.
    let inner = QuadratureSpec { abs_tol: spec.abs_tol.max(1e-13), rel_tol: spec.rel_tol.max(1e-13), ..*spec };
    let e = integrate_breaks(f, &breaks, &inner)?;
    Ok(D * norm * e.value)
}

/// A = ∫₀^∞ a F(a) da, with the tail beyond the cutoff taken from the
/// leading far field F(a) ≈ -D C a^{2-n}, C = E|X|^{2-n} = 2^{2-n}/Γ(n/2).
#[allow(non_snake_case)]
pub fn const_a(D: f64, n: usize, spec: &QuadratureSpec) -> Result<Estimate> {
    check_dim(n)?;
    spec.validate()?;
    let cut = spec.radial_cutoff;
    let inner = spec.with_rel_tol(spec.rel_tol.min(1e-11));
    let head = integrate_breaks(
        |a| a * f_of_a(a, D, n, &inner).unwrap_or(f64::NAN),
        &geometric_breaks(0.0, cut),
        &QuadratureSpec { abs_tol: spec.abs_tol.max(1e-13 * D.abs()), ..*spec },
    )?;
    let nf = n as f64;
    let c = 2f64.powf(2.0 - nf) / gamma(nf / 2.0);
    let tail = -D * c * cut.powf(4.0 - nf) / (nf - 4.0);
    // Next-order far-field terms are O(a^{-n} log a).
    let tail_err = D.abs() * cut.powf(2.0 - nf) * (1.0 + cut.ln());
    Ok(head + Estimate { value: tail, error: tail_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{fit_farfield_constants, FitOptions};

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default().with_rel_tol(1e-12)
    }

    #[test]
    fn c1_identity_holds() {
        for n in [5, 6, 7] {
            let b = BubbleProfile::new(n).unwrap();
            let c = c1_identity(&b, &spec()).unwrap();
            assert!(c.lhs.value > 0.0);
            assert!((c.lhs.value / c.rhs.value - 1.0).abs() < 1e-10, "n={n}: {c:?}");
        }
    }

    #[test]
    fn c1_n5_regression() {
        // (3/2)∫U^p = (3/2)·15^{7/4}·|S⁴|·∫₀^∞ r⁴(1+r²)^{-7/2}dr and the
        // radial integral equals B(5/2,1)/2 = 1/5.
        let b = BubbleProfile::new(5).unwrap();
        let c1 = const_c1(&b, &spec()).unwrap();
        let exact = 1.5 * 15f64.powf(1.75) * sphere_area(5) / 5.0;
        assert!((c1 / exact - 1.0).abs() < 1e-10, "{c1} vs {exact}");
    }

    #[test]
    fn gamma_identity_n5_n6() {
        for n in [5, 6] {
            let g = gamma_identity(n, &spec()).unwrap();
            assert!(g.rhs > 0.0);
            assert!((g.lhs / g.rhs - 1.0).abs() < 1e-9, "n={n}: {g:?}");
        }
        // n = 6 reduces to 2/5.
        let g = gamma_identity(6, &spec()).unwrap();
        assert!((g.rhs - 0.4).abs() < 1e-14);
    }

    #[test]
    fn c2_rejects_wrong_subtraction() {
        let b = BubbleProfile::new(5).unwrap();
        let d = fit_farfield_constants(&b, &FitOptions::default()).unwrap().D;
        assert!(const_c2(&b, d, &spec()).unwrap().value > 0.0);
        assert!(matches!(const_c2(&b, d / 2.0, &spec()), Err(Error::TailNotCancelled { .. })));
        let b6 = BubbleProfile::new(6).unwrap();
        let d6 = fit_farfield_constants(&b6, &FitOptions::default()).unwrap().D;
        assert!(const_c2(&b6, d6, &spec()).unwrap().value > 0.0);
    }

    #[test]
    fn f_at_zero_and_plateau() {
        let d = 1.7;
        let f0 = f_of_a(0.0, d, 5, &spec()).unwrap();
        assert_eq!(f0, 2.0 * d);
        let tiny = f_of_a(1e-6, d, 5, &spec()).unwrap();
        assert!((tiny - 2.0 * d).abs() < 1e-9);
        let p10 = 10f64.powi(3) * f_of_a(10.0, d, 5, &spec()).unwrap();
        let p100 = 100f64.powi(3) * f_of_a(100.0, d, 5, &spec()).unwrap();
        let ratio = p10 / p100;
        assert!((0.5..2.0).contains(&ratio), "{ratio}");
        let f1 = f_of_a(1.0, d, 5, &spec()).unwrap();
        assert!(f1.is_finite());
    }

    #[test]
    fn a_matches_closed_form() {
        // Oracle: A = D E|X|^{-2} ∫₀^∞ u g(u) du = D (n-5)/((n-2)²(n-4)).
        for n in [5usize, 6, 7] {
            let d = 2.5;
            let a = const_a(d, n, &QuadratureSpec::default()).unwrap();
            let nf = n as f64;
            let exact = d * (nf - 5.0) / ((nf - 2.0).powi(2) * (nf - 4.0));
            assert!((a.value - exact).abs() < 1e-7 * d, "n={n}: {} vs {exact}", a.value);
        }
    }
}
