//! Planar degree fields by winding numbers, cross-validated against the
//! density of the coned pushforward, and their fractional regularity.

use std::sync::Arc;

use fraccur::fractal::{disk, square};
use fraccur::grid::{Chain, CubicalChain};
use fraccur::holder::{weierstrass, HolderFunction};
use fraccur::pushforward::{
    degree_field, degree_regularity, density_field, perturbed_identity, top_pushforward,
};

fn main() -> fraccur::Result<()> {
    // squaring map on the disk: degree 2 inside the image
    let zsq = HolderFunction::new(
        1.0,
        4.0,
        vec![-1.0, -1.0],
        vec![1.0, 1.0],
        2,
        true,
        "zsquare",
        Arc::new(|x: &[f64]| vec![x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]]),
    );
    let u = disk([0.0, 0.0], 1.0);
    let field = degree_field(&zsq, &u, 6)?;
    let mut hist = std::collections::BTreeMap::new();
    for (i, &v) in field.deg.values.iter().enumerate() {
        if !field.flagged[i] {
            *hist.entry(v as i64).or_insert(0usize) += 1;
        }
    }
    println!("squaring map on the disk, unflagged degree histogram: {hist:?}");

    // rough perturbation of the identity on the square
    let w = weierstrass(0.8, 2.0, 12, 0.0)?;
    let f = perturbed_identity(&w, 0.1)?;
    let deg = degree_field(&f, &square(), 7)?;
    let top = top_pushforward(&f, 0.8, &Chain::Cubical(CubicalChain::unit_cube(2)), 0.0, 7, 0.0)?;
    let dens = density_field(&top.chain, 7)?;
    println!(
        "\nperturbed identity: winding field {} cells ({} unflagged), pushforward density {} cells",
        deg.deg.values.len(),
        deg.unflagged_cells(),
        dens.deg.values.len()
    );
    println!(
        "cone boundary defect {:.2e} (vanishes on cycles)",
        top.boundary_defect
    );
    for beta in [0.25] {
        let semi = degree_regularity(&deg, beta)?;
        println!("degree field W^(1-{beta},1) seminorm: {semi:.4}");
    }
    Ok(())
}
