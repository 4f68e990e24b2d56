//! End-to-end evaluation of the blow-up constants for a profile, a domain and
//! a concentration point.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::BlowupConstants;
use crate::green::{BallGreen, DomainShape, DomainSpec, GreenConfig, GreenSolver, RegularPart};
use crate::profiles::{
    bubble_alpha, fit_farfield_constants, BubbleProfile, FarField, FitOptions, TowerOptions, TowerProfile,
};
use crate::quadrature::{
    const_a, const_c1, const_c2, gram_matrix, tower_c1_c2, CubatureOptions, GramMatrix, QuadratureSpec,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub n: usize,
    /// Number of satellites; `None` uses the single positive bubble.
    #[serde(default)]
    pub k: Option<usize>,
    pub domain: DomainSpec,
    /// Concentration point; defaults to the domain center.
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub cubature: CubatureOptions,
    #[serde(default)]
    pub green: GreenConfig,
}

impl ConstantsConfig {
    pub fn unit_ball(n: usize) -> Result<Self> {
        Ok(Self {
            n,
            k: None,
            domain: DomainSpec::unit_ball(n)?,
            q: None,
            quadrature: QuadratureSpec::default(),
            cubature: CubatureOptions::default(),
            green: GreenConfig::default(),
        })
    }

    pub fn point(&self) -> Vec<f64> {
        self.q.clone().unwrap_or_else(|| self.domain.center_radius().0.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::check_dim(self.n)?;
        self.domain.validate()?;
        if self.domain.n != self.n {
            return Err(Error::Invalid(format!("domain dimension {} differs from n = {}", self.domain.n, self.n)));
        }
        if let Some(q) = &self.q {
            if q.len() != self.n {
                return Err(Error::Invalid(format!("q has {} components, expected {}", q.len(), self.n)));
            }
        }
        if matches!(self.k, Some(k) if k < 2) {
            return Err(Error::Invalid("a tower needs k >= 2".into()));
        }
        self.quadrature.validate()?;
        self.green.validate()
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub n: usize,
    pub k: Option<usize>,
    pub q: Vec<f64>,
    pub D: f64,
    pub E: f64,
    pub constants: BlowupConstants,
    /// Satellite scale ζ of the tower.
    pub zeta: Option<f64>,
    #[serde(skip)]
    pub gram: Option<GramMatrix>,
}

/// H(q,q) and ∇H(q,q), from the image formula on balls and collocation otherwise.
pub fn regular_part_at(domain: &DomainSpec, green: &GreenConfig, q: &[f64], cache: Option<&PathBuf>) -> Result<(f64, Vec<f64>)> {
    match domain.shape {
        DomainShape::Ball { .. } => {
            let g = BallGreen::new(domain.clone())?;
            Ok((g.regular_part(q)?, g.grad_regular_part(q)?))
        }
        DomainShape::StarShaped { .. } => {
            let g = GreenSolver::build_cached(domain.clone(), green.clone(), cache.map(|p| p.as_path()))?;
            Ok((g.regular_part(q)?, g.grad_regular_part(q)?))
        }
    }
}

/// Far field of the single bubble: D = (n-2)/2·α, E = -(n-2)α.
pub fn bubble_far_field(n: usize) -> FarField {
    let alpha = bubble_alpha(n);
    let w = (n as f64 - 2.0) / 2.0;
    FarField { D: w * alpha, E: -2.0 * w * alpha, d: 0.0 }
}

pub fn compute_constants(cfg: &ConstantsConfig, cache: Option<&PathBuf>) -> Result<ConstantsReport> {
    cfg.validate()?;
    let n = cfg.n;
    let q = cfg.point();
    let (h_qq, grad_h) = regular_part_at(&cfg.domain, &cfg.green, &q, cache)?;
    let (ff, c1, c2, zeta, gram) = match cfg.k {
        None => {
            let b = BubbleProfile::new(n)?;
            let ff = bubble_far_field(n);
            let c1 = const_c1(&b, &cfg.quadrature)?;
            let c2 = const_c2(&b, ff.D, &cfg.quadrature)?.value;
            (ff, c1, c2, None, None)
        }
        Some(k) => {
            let tower = TowerProfile::fitted(n, k, &TowerOptions::default())?;
            let ff = fit_farfield_constants(&tower, &FitOptions::default())?;
            let tower = tower.with_far_field(ff);
            let c = tower_c1_c2(&tower, &cfg.cubature)?;
            let gram = gram_matrix(&tower, &cfg.cubature)?;
            (ff, c.c1.value, c.c2.value, Some(tower.zeta_k), Some(gram))
        }
    };
    let a = const_a(ff.D, n, &cfg.quadrature)?.value;
    let constants = BlowupConstants::new(n, c1, c2, a, h_qq, grad_h)?;
    Ok(ConstantsReport { n, k: cfg.k, q, D: ff.D, E: ff.E, constants, zeta, gram })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_center_n5() {
        let r = compute_constants(&ConstantsConfig::unit_ball(5).unwrap(), None).unwrap();
        let b = 2.0 / (3.0 * 15f64.powf(0.75));
        assert!((r.constants.b / b - 1.0).abs() < 1e-12, "{}", r.constants.b);
        assert!(r.constants.grad_h.iter().all(|g| g.abs() < 1e-14));
        assert!(r.constants.A.abs() < 1e-7 * r.D);
    }

    #[test]
    fn config_round_trips_and_rejects_mismatch() {
        let cfg = ConstantsConfig::unit_ball(6).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ConstantsConfig>(&text).unwrap(), cfg);
        let bad = ConstantsConfig { n: 5, ..cfg };
        assert!(bad.validate().is_err());
    }
}
