//! Tower of bubbles: fitted satellite scale, far-field constants and the
//! pairing matrix of kernels against corrected rows.
//!
//!     cargo run --release --example gram_tower -- 16

use critheat::profiles::{fit_farfield_constants, FitOptions, TowerOptions, TowerProfile};
use critheat::quadrature::{gram_matrix, tower_c1_c2, CubatureOptions};

fn main() -> critheat::Result<()> {
    let n = 5;
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let tower = TowerProfile::fitted(n, k, &TowerOptions::default())?;
    let ff = fit_farfield_constants(&tower, &FitOptions::default())?;
    println!("k={k}: zeta = {:.6e}, D = {:.6}, E = {:.6}", tower.zeta_k, ff.D, ff.E);
    let tower = tower.with_far_field(ff);
    let opts = CubatureOptions::default();
    let c = tower_c1_c2(&tower, &opts)?;
    println!("c1 = {:.6}, c2 = {:.6}", c.c1.value, c.c2.value);
    let g = gram_matrix(&tower, &opts)?;
    println!("cubature difference {:.2e}", g.max_error());
    for row in &g.entries {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>9.2e}")).collect();
        println!("{}", cells.join(" "));
    }
    println!("Kelvin block conditioning: {:.4}", g.kelvin_block_conditioning(0));
    Ok(())
}
