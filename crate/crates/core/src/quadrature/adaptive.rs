//! Globally adaptive Gauss–Kronrod (10/21) integration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Tolerances and limits for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Outer truncation radius for semi-infinite integrals.
    pub radial_cutoff: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
            radial_cutoff: 1e4,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_cutoff(mut self, radial_cutoff: f64) -> Self {
        self.radial_cutoff = radial_cutoff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.radial_cutoff > 0.0) {
            return Err(Error::Invalid("quadrature tolerances and cutoff must be positive".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Invalid("max_subdivisions must be positive".into()));
        }
        Ok(())
    }
}

/// Integral value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate { value: self.value + o.value, error: self.error + o.error }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Segment {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[10] * fc;
    let mut g = 0.0;
    let mut asc = WGK[10] * fc.abs();
    let mut vals = [(0.0, 0.0); 10];
    for (i, v) in vals.iter_mut().enumerate() {
        let dx = h * XGK[i];
        let (f1, f2) = (f(c - dx), f(c + dx));
        *v = (f1, f2);
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * k;
    for (i, (f1, f2)) in vals.iter().enumerate() {
        asc += WGK[i] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    asc = (asc - WGK[10] * fc.abs() + WGK[10] * (fc - mean).abs()) * h.abs();
    let value = k * h;
    let mut error = ((k - g) * h).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    Segment { a, b, value, error: error.max(50.0 * f64::EPSILON * value.abs()) }
}

/// Integrate `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    integrate_breaks(f, &[a, b], spec)
}

/// Integrate over consecutive intervals given by `breaks`, refining globally.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], spec: &QuadratureSpec) -> Result<Estimate> {
    let mut heap: BinaryHeap<Segment> = breaks.windows(2).map(|w| kronrod(&f, w[0], w[1])).collect();
    let total = |h: &BinaryHeap<Segment>| {
        let mut segs: Vec<&Segment> = h.iter().collect();
        segs.sort_by(|x, y| x.a.total_cmp(&y.a));
        segs.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
    };
    let mut splits = 0;
    loop {
        let (value, error) = total(&heap);
        if !value.is_finite() {
            return Err(Error::Quadrature { value, error });
        }
        if error <= spec.abs_tol.max(spec.rel_tol * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if splits >= spec.max_subdivisions {
            return Err(Error::Quadrature { value, error });
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            let (value, error) = total(&heap);
            let (value, error) = (value + worst.value, error + worst.error);
            if error <= 10.0 * spec.abs_tol.max(spec.rel_tol * value.abs()) {
                return Ok(Estimate { value, error });
            }
            return Err(Error::Quadrature { value, error });
        }
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
        splits += 1;
    }
}

/// Breakpoints 0, 1/8, 1/4, ..., doubling up to `cutoff`, so that every panel
/// has bounded relative width.
pub fn geometric_breaks(start: f64, cutoff: f64) -> Vec<f64> {
    let mut b = vec![start];
    let mut x = if start > 0.0 { start * 2.0 } else { 0.125 };
    while x < cutoff {
        b.push(x);
        x *= 2.0;
    }
    b.push(cutoff);
    b
}

/// Integrate `f` over `[start, ∞)` for an integrand with power-law decay
/// `f(r) ~ c₁ r^{-m} + c₂ r^{-m-2}`. The tail beyond the cutoff is fitted
/// from samples at the cutoff and added analytically.
pub fn integrate_power_tail<F: Fn(f64) -> f64>(
    f: F,
    start: f64,
    decay: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    if decay <= 1.0 {
        return Err(Error::Invalid(format!("tail exponent {decay} is not integrable")));
    }
    let r = spec.radial_cutoff;
    let head = integrate_breaks(&f, &geometric_breaks(start, r), spec)?;
    let (g1, g2) = (f(r) * r.powf(decay), f(2.0 * r) * (2.0 * r).powf(decay));
    // g(r) = c1 + c2 r^{-2}
    let c2 = (g1 - g2) / (r.powi(-2) - (2.0 * r).powi(-2));
    let c1 = g1 - c2 * r.powi(-2);
    let lead = c1 * r.powf(1.0 - decay) / (decay - 1.0);
    let corr = c2 * r.powf(-1.0 - decay) / (decay + 1.0);
    Ok(head + Estimate { value: lead + corr, error: corr.abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let e = integrate(|x| 3.0 * x * x, 0.0, 2.0, &QuadratureSpec::default()).unwrap();
        assert!((e.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let e = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn power_tail_added() {
        let spec = QuadratureSpec::default().with_cutoff(50.0);
        let e = integrate_power_tail(|r: f64| 1.0 / (1.0 + r * r), 0.0, 2.0, &spec).unwrap();
        assert!((e.value - std::f64::consts::FRAC_PI_2).abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn failure_is_reported() {
        let spec = QuadratureSpec { max_subdivisions: 3, ..Default::default() };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &spec);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
