//! Reduced parameter system: homogeneous decay of the dilation correction and
//! a forced run with its weighted norms.
//!
//!     cargo run --release --example reduced_ode

use critheat::dynamics::{integrate_reduced_system, system_size, ModelForcing};
use critheat::pipeline::{compute_constants, ConstantsConfig};
use critheat::util::loglog_slope;

fn main() -> critheat::Result<()> {
    let t0 = 10.0;
    for n in [5usize, 6] {
        let c = compute_constants(&ConstantsConfig::unit_ball(n)?, None)?.constants;
        let zero = |_: f64, _: &[f64], out: &mut [f64]| out.fill(0.0);
        let mut init = vec![0.0; system_size(n)];
        init[0] = 1.0;
        let free = integrate_reduced_system(&c, &zero, &init, t0, 1e3 * t0, &Default::default())?;
        let nf = n as f64;
        println!(
            "n={n}: homogeneous lambda slope {:.4} (rate {:.4})",
            loglog_slope(&free.times, &free.lambda()),
            -(nf - 3.0) / (nf - 4.0)
        );

        let sigma = 0.5 * (nf - 4.0);
        let forcing = ModelForcing::new(&c, sigma, 1.0, vec![0.0; n])?;
        let forced = integrate_reduced_system(&c, &forcing, &vec![0.0; system_size(n)], t0, 1e3 * t0, &Default::default())?;
        let norms = forced.norms(&c, &vec![0.0; n], sigma);
        println!("  forced run, {} steps: {norms:?}", forced.times.len());
    }
    Ok(())
}
