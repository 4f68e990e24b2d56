//! Bubble profile, its 3n symmetry kernels and the action of the linearized
//! operator on them.
//!
//!     cargo run --release --example bubble_kernels -- 6

use critheat::profiles::{analytic_kernel_residuals, apply_linearized, BubbleProfile, KernelBasis, Profile};

fn main() -> critheat::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let bubble = BubbleProfile::new(n)?;
    println!("n = {n}, p = {:.6}, alpha_n = {:.6}", bubble.p, bubble.alpha_n);

    let worst = analytic_kernel_residuals(&bubble).into_iter().fold(0.0, f64::max);
    println!("closed-form residual of L(z) over the radial kernels: {worst:.2e}");

    let kernels = KernelBasis::new(&bubble);
    let mut x = vec![0.0; n];
    x[0] = 0.7;
    x[1] = -0.4;
    x[2] = 0.2;
    println!("{:>6} {:>14} {:>14}", "index", "z(x)", "L z(x) (FD)");
    for alpha in 0..kernels.len() {
        let z = |y: &[f64]| kernels.eval(alpha, y).unwrap_or(f64::NAN);
        let lz = apply_linearized(&bubble, &z, &x, 1e-4);
        println!("{alpha:>6} {:>14.6e} {:>14.3e}", z(&x), lz);
    }
    println!("Q(x) = {:.6}", bubble.value(&x));
    Ok(())
}
