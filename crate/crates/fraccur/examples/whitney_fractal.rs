//! Whitney decompositions: interior cubes of the disk and the snowflake,
//! the per-level count bound against boundary box counts, and the
//! fractional cost series on both sides of the summability threshold.

use fraccur::flatnorm::improve_decomposition;
use fraccur::fractal::{disk, koch_snowflake, whitney_chain};

fn main() -> fraccur::Result<()> {
    let u = disk([0.0, 0.0], 1.0);
    let wc = whitney_chain(&u, 0.5, 8)?;
    let w = &wc.whitney;
    println!(
        "disk (dilated by 2^{}): first level {}, coverage {:.4} of measure {:.4}",
        w.scale_log2, w.k0, w.covered_measure, w.set_measure
    );
    println!("  level  cubes  bound 36 N_b(k-1)");
    for (&k, &n) in &w.counts {
        match w.boundary_counts.get(&k) {
            Some(&nb) => println!("  {k:>5}  {n:>5}  {:>6}", 36 * nb),
            None => println!("  {k:>5}  {n:>5}       -"),
        }
    }

    // greedy merge/split passes can only lower the cost upper bound
    let improved = improve_decomposition(&wc.decomposition, 4)?;
    println!(
        "\ncost upper bound {:.4} -> {:.4} after greedy merge/split passes",
        wc.decomposition.cost, improved.cost
    );

    // cost series of the snowflake interior across the threshold
    println!("\nsnowflake interior, cost series N^(1-a) F^a per level:");
    for alpha in [0.4, 0.2] {
        let wc = whitney_chain(&koch_snowflake(6), alpha, 9)?;
        let terms: Vec<String> = wc.cost_terms.iter().map(|t| format!("{t:.3}")).collect();
        println!(
            "  alpha {alpha}: [{}] -> {:?}",
            terms.join(", "),
            wc.cost_verdict
        );
    }
    Ok(())
}
