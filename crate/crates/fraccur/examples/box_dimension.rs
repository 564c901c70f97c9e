//! Box counting over closed dyadic cubes and the slope estimator, on sets
//! with known dimensions, plus summability partial sums.

use fraccur::fractal::{
    box_dimension, cantor_product, koch_curve, segment_set, square, summability,
};

fn main() -> fraccur::Result<()> {
    let cases: Vec<(&str, fraccur::fractal::OccupancySet, f64)> = vec![
        ("unit square", square(), 2.0),
        ("segment", segment_set(&[0.05, 0.3], &[0.95, 0.7]), 1.0),
        ("snowflake boundary", koch_curve(7), 4f64.ln() / 3f64.ln()),
        ("cantor product", cantor_product(1.0 / 3.0)?, 2.0 * 2f64.ln() / 3f64.ln()),
    ];
    println!("box-dimension estimates over levels 2..=7:");
    for (name, set, expect) in &cases {
        let (dim, rms) = box_dimension(set, 2..=7)?;
        println!("  {name:<20} {dim:.4} (expected {expect:.4}, fit rms {rms:.3})");
    }

    println!("\nsummability of the snowflake boundary, partial sums of N(k) 2^(-km):");
    let curve = koch_curve(7);
    for m in [1.2, 1.3] {
        let s = summability(&curve, m, 9)?;
        let sums: Vec<String> = s.partial_sums.iter().map(|v| format!("{v:.2}")).collect();
        println!("  m = {m}: [{}] -> {:?}", sums.join(", "), s.verdict);
    }
    Ok(())
}
