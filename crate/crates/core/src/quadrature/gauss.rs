//! Gauss–Legendre rules and composite panel rules.

/// Nodes and weights of the `m`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * p - pm1) / (z * z - 1.0);
            if m == 1 {
                dp = 1.0;
            }
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite rule: `m`-point Gauss–Legendre on each panel between `breaks`.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    pub fn new(breaks: &[f64], m: usize) -> Self {
        let (x, w) = gauss_legendre(m);
        let mut nodes = Vec::with_capacity(m * breaks.len());
        let mut weights = Vec::with_capacity(m * breaks.len());
        for p in breaks.windows(2) {
            let (c, h) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(c + h * xi);
                weights.push(h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for m in [1, 2, 5, 12, 20] {
            let (x, w) = gauss_legendre(m);
            let deg = 2 * m - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "m={m}: {s} vs {exact}");
        }
    }

    #[test]
    fn panel_rule_on_exponential() {
        let r = PanelRule::new(&[0.0, 0.5, 1.0, 3.0], 10);
        let s: f64 = r.iter().map(|(x, w)| w * (-x).exp()).sum();
        assert!((s - (1.0 - (-3.0f64).exp())).abs() < 1e-14);
    }
}
