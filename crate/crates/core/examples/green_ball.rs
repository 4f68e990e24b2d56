//! Collocation solve for the regular part of the Green function, compared with
//! the image formula on the unit ball. The first run builds the solver (about
//! 20 s in five dimensions); later runs reuse the cache.
//!
//!     cargo run --release --example green_ball

use critheat::green::{default_cache_dir, BallGreen, DomainSpec, GreenConfig, GreenSolver, RegularPart};

fn main() -> critheat::Result<()> {
    let n = 5;
    let domain = DomainSpec::unit_ball(n)?;
    let cache = default_cache_dir();
    let solver = GreenSolver::build_cached(domain.clone(), GreenConfig::default(), Some(&cache))?;
    let exact = BallGreen::new(domain)?;
    println!("rank {}, condition estimate {:.2e}", solver.rank(), solver.cond_estimate());
    println!("{:>6} {:>14} {:>14} {:>10}", "|q|", "collocation", "image", "rel err");
    for r in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let mut q = vec![0.0; n];
        q[0] = r * 0.6;
        q[2] = r * 0.8;
        let (h, e) = (solver.regular_part(&q)?, exact.regular_part(&q)?);
        println!("{r:>6.2} {h:>14.8} {e:>14.8} {:>10.2e}", (h / e - 1.0).abs());
    }
    Ok(())
}
