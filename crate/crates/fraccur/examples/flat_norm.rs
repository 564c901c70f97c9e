//! Flat norms by linear programming: a two-point chain whose value switches
//! from the connecting length to the endpoint masses, and a square boundary
//! that prefers being filled.

use fraccur::flatnorm::{flat_norm, ComplexDomain};
use fraccur::grid::{boundary, mass, CubicalChain, DyadicFace};

fn main() -> fraccur::Result<()> {
    // two opposite point masses at increasing separation
    println!("two-point chains at level 4 (cell = 1/16):");
    for sep in [1i64, 4, 16, 40, 64] {
        let mut t = CubicalChain::zero(1, 0, 4);
        t.add_term(DyadicFace::new(vec![0], vec![]), 1.0);
        t.add_term(DyadicFace::new(vec![sep], vec![]), -1.0);
        let domain = ComplexDomain::padded_cover(&t, 2)?;
        let r = flat_norm(&t, &domain)?;
        println!(
            "  separation {:6.4}: flat norm {:.6} (min of distance and total mass 2)",
            sep as f64 / 16.0,
            r.value
        );
    }

    // the boundary of the unit square: filling it costs area 1, cheaper
    // than its own length 4
    let square = CubicalChain::unit_cube(2);
    let b = boundary(&square)?;
    let domain = ComplexDomain::padded_cover(&b, 1)?;
    let r = flat_norm(&b, &domain)?;
    println!("\nboundary of the unit square:");
    println!("  mass {}  flat norm {:.6}", mass(&b), r.value);
    println!(
        "  witness filling mass {:.6}, residual mass {:.6}, {} simplex iterations",
        mass(&r.witness_s),
        mass(&r.residual),
        r.iterations
    );
    Ok(())
}
