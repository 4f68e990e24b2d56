//! Dilation, translation and Kelvin heat potentials along a self-similar
//! trajectory: spatial decay rates and the limit of the dilation potential at
//! the concentration point.
//!
//!     cargo run --release --example heat_potentials

use critheat::heatpot::{HeatPotential, HeatPotentialSpec, PowerLawTrajectory, SourceKind};
use critheat::pipeline::{bubble_far_field, compute_constants, ConstantsConfig};

fn main() -> critheat::Result<()> {
    let (t0, t) = (10.0, 1e4);
    for n in [5usize, 6] {
        let c = compute_constants(&ConstantsConfig::unit_ball(n)?, None)?.constants;
        let mut drift = vec![0.0; n];
        drift[0] = 0.02;
        let ff = bubble_far_field(n);
        let still = PowerLawTrajectory::self_similar(n, t0, c.b, c.c_n)?;
        let phi0 = HeatPotential::new(HeatPotentialSpec::new(n, SourceKind::Dilation, &ff)?, &still)?;
        println!("n={n}: phi0(0, t) = {:.6e}, limit -B b^(4-n) = {:.6e}", phi0.value(&vec![0.0; n], t)?, -c.B * c.b.powf(4.0 - n as f64));
        let tr = still.with_drift(drift, 1.5).with_kelvin_rate([1e-3, 5e-4], 1.5);
        for (label, kind) in [
            ("dilation", SourceKind::Dilation),
            ("translation", SourceKind::Translation),
            ("kelvin 1", SourceKind::Kelvin(1)),
            ("kelvin 2", SourceKind::Kelvin(2)),
        ] {
            let phi = HeatPotential::new(HeatPotentialSpec::new(n, kind, &ff)?, &tr)?;
            let fit = phi.decay_profile(t, 10.0, 1000.0, 12)?;
            println!("  {label:<12} decay slope {:.3}", fit.slope);
        }
    }
    Ok(())
}
