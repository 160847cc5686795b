//! Semidefinite relaxation of max-cut on a 5-cycle: maximize
//! `½ Σ_edges (1 − X_ij)` over `X ⪰ 0` with unit diagonal.

use ddcacc_sdp::{ConicProgram, ConicSolver, InteriorPoint, PsdBlock};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 5;
    // One variable per upper-triangular entry of X.
    let index = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + j
    };
    let mut p = ConicProgram::new(n * (n + 1) / 2);
    for i in 0..n {
        p.add_equality(&[(index(i, i), 1.0)], 1.0);
        // Minimizing Σ X_ij over edges maximizes the cut.
        p.set_objective(index(i, (i + 1) % n), 1.0);
    }
    let mut block = PsdBlock::new(n, "X");
    for i in 0..n {
        for j in i..n {
            block.add_term(index(i, j), i, j, 1.0);
        }
    }
    p.add_block(block);
    let s = InteriorPoint::default().solve(&p)?;
    let cut = 0.5 * (n as f64 - s.objective);
    println!("{} after {} iterations", s.status, s.iterations);
    println!(
        "relaxed cut value {cut:.6} (closed form {:.6})",
        2.5 * (1.0 + (std::f64::consts::PI / 5.0).cos())
    );
    Ok(())
}
