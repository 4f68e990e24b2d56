//! Radial evolution of a bubble in the unit ball near the threshold between
//! decay and concentration.
//!
//!     cargo run --release --example blowup_demo

use critheat::simulate::{bisect_threshold, DemoConfig};

fn main() -> critheat::Result<()> {
    let cfg = DemoConfig {
        n: 5,
        radius: 1.0,
        t0: 1e-3,
        t_end: 10.0,
        mu_initial: 0.05,
        amplitude: 1.0,
        intervals: 600,
        records: 30,
        safety: 0.2,
        max_steps: 2_000_000,
    };
    let run = bisect_threshold(&cfg, 0.9, 1.1, 40)?;
    println!("threshold amplitude in [{:.8}, {:.8}], outcome {:?}", run.below, run.above, run.result.outcome);
    println!("{:>12} {:>12} {:>12}", "t", "mu", "energy");
    for r in &run.result.records {
        if let Some(mu) = r.mu {
            println!("{:>12.4e} {mu:>12.5e} {:>12.5e}", r.t, r.energy);
        }
    }
    if let Some(s) = run.result.mu_slope {
        println!("fitted log-log slope of mu: {s:.3}");
    }
    Ok(())
}
