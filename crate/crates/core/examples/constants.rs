//! Reduction constants for the single bubble at the center of the unit ball,
//! and at an off-center point.
//!
//!     cargo run --release --example constants

use critheat::pipeline::{compute_constants, ConstantsConfig};

fn main() -> critheat::Result<()> {
    for n in [5usize, 6, 7] {
        let report = compute_constants(&ConstantsConfig::unit_ball(n)?, None)?;
        let c = &report.constants;
        println!(
            "n={n}: c1={:.6} c2={:.6} A={:.4e} B={:.4e} H(q,q)={:.6} b={:.10} c_n={:.8}",
            c.c1, c.c2, c.A, c.B, c.h_qq, c.b, c.c_n
        );
    }
    let closed = 2.0 / (3.0 * 15f64.powf(0.75));
    println!("closed-form b at n=5: {closed:.10}");

    let mut cfg = ConstantsConfig::unit_ball(5)?;
    cfg.q = Some(vec![0.3, 0.0, 0.0, 0.0, 0.0]);
    let c = compute_constants(&cfg, None)?.constants;
    println!("q = (0.3,0,0,0,0): H = {:.6}, grad H = {:?}, b = {:.8}", c.h_qq, c.grad_h, c.b);
    Ok(())
}
