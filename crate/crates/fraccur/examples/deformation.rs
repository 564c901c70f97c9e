//! Deforming chains onto a coarser grid: the diagonal becomes a staircase,
//! and the flat distance to the grid chain shrinks linearly with the grid
//! width (measured through the exact decomposition T = P + dR + S).

use fraccur::flatnorm::deform;
use fraccur::grid::{Chain, SimplicialChain};

fn main() -> fraccur::Result<()> {
    let mut diag = SimplicialChain::zero(2, 1);
    diag.push(vec![vec![0.0, 0.0], vec![1.0, 1.0]], 1.0);
    let r = deform(&Chain::Simplicial(diag), 2)?;
    println!("diagonal deformed onto the quarter grid:");
    println!("  staircase mass {:.4} (l1 length of the diagonal)", r.ratios.mass_p);
    println!(
        "  sweep mass {:.4}, remainder mass {:.2e}",
        r.ratios.mass_r, r.ratios.mass_s
    );

    // circle boundary: halving the grid width halves the residual bound
    let n = 512;
    let mut circle = SimplicialChain::zero(2, 1);
    for i in 0..n {
        let a0 = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let a1 = 2.0 * std::f64::consts::PI * (i + 1) as f64 / n as f64;
        circle.push(vec![vec![a0.cos(), a0.sin()], vec![a1.cos(), a1.sin()]], 1.0);
    }
    println!("\ncircle boundary, flat-distance bound M(R) + M(S) per grid width:");
    for k in [3, 4, 5] {
        let r = deform(&Chain::Simplicial(circle.clone()), k)?;
        println!(
            "  eps = 1/{:<3} bound {:.5}  M(P)/M(T) {:.4}  M(R)/(eps M(T)) {:.4}",
            1 << k,
            r.ratios.mass_r + r.ratios.mass_s,
            r.ratios.grid_over_mass,
            r.ratios.sweep_over_eps_mass,
        );
    }
    Ok(())
}
