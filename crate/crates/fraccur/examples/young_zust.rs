//! Dyadic Riemann–Stieltjes sums: convergence above the exponent-sum
//! threshold, breakdown below it, and the planar corner-increment integral.

use fraccur::holder::{lift_to_plane, weierstrass, HolderFunction, SpectralForm};
use fraccur::young::{young_1d, zust_integral};
use std::sync::Arc;

fn spectral_fn(gamma: f64, form: SpectralForm, name: &str) -> HolderFunction {
    let f2 = form.clone();
    let d = form.linear.len();
    HolderFunction::new(
        gamma,
        2.0,
        vec![0.0; d],
        vec![1.0; d],
        1,
        true,
        name,
        Arc::new(move |x: &[f64]| vec![f2.eval(x)]),
    )
    .with_spectral(vec![form])
}

fn main() -> fraccur::Result<()> {
    // smooth sanity: integral of t dt
    let id = spectral_fn(1.0, SpectralForm { constant: 0.0, linear: vec![1.0], waves: vec![] }, "t");
    let r = young_1d(&id, &id, 12)?;
    println!("∫ t dt by left sums at level 12: {:.8}", r.value);

    // rough pairs: exponent sum 1.4 settles, 0.9 does not
    for a in [0.7, 0.45] {
        let w = weierstrass(a, 2.0, 16, 0.0)?;
        let r = young_1d(&w, &w, 12)?;
        println!(
            "exponents {a}+{a}: increments fit 2^({:.3} L) (predicted {:.3}), settles: {}",
            r.rate_log2.unwrap_or(f64::NAN),
            r.predicted_rate_log2,
            r.cauchy_pass
        );
    }

    // planar corner-increment integral of a rough area form
    let one = spectral_fn(
        1.0,
        SpectralForm { constant: 1.0, linear: vec![0.0, 0.0], waves: vec![] },
        "1",
    );
    let w8 = weierstrass(0.8, 2.0, 10, 0.0)?;
    let lifted = lift_to_plane(&w8, 1)?;
    let mut g1_form = lifted.spectral.clone().unwrap()[0].clone();
    g1_form.linear = vec![1.0, 0.0];
    for wave in &mut g1_form.waves {
        wave.1 *= 0.2;
    }
    let g1 = spectral_fn(0.8, g1_form, "x1 + 0.2 W(x2)");
    let g2 = spectral_fn(
        1.0,
        SpectralForm { constant: 0.0, linear: vec![0.0, 1.0], waves: vec![] },
        "x2",
    );
    let r = zust_integral(&[one, g1, g2], 9)?;
    println!(
        "\ncorner integral of (1, x1 + 0.2 W(x2), x2) at level 9: {:.10} (exact 1)",
        r.value
    );
    Ok(())
}
