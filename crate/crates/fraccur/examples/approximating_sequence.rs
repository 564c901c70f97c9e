//! Smoothed approximating sequences of a rough function: at stage n the fixed
//! bump kernel is scaled to width 2^-n; the measured sup-error, step size and
//! Lipschitz slope sit under their geometric envelopes.

use fraccur::holder::{approx_sequence, holder_quotient, weierstrass};

fn main() -> fraccur::Result<()> {
    let f = weierstrass(0.6, 2.0, 16, 0.0)?;
    let (maxq, slope) = holder_quotient(&f, 10_000, 7);
    println!(
        "W(0.6): measured quotient {maxq:.3} (declared {:.3}), increment exponent fit {slope:.3}",
        f.holder_constant
    );
    println!("\nstage certificates (measured vs envelope):");
    println!("  n   sup|f_n-f|      bound   sup|f_n+1-f_n|    bound     Lip f_n      bound");
    for n in 2..=8 {
        let st = approx_sequence(&f, n)?;
        println!(
            "  {n}  {:>10.5} {:>10.5}  {:>13.5} {:>9.5}  {:>10.3} {:>10.3}  {}",
            st.sup_err,
            st.bound_sup_err,
            st.sup_step,
            st.bound_sup_step,
            st.lip,
            st.bound_lip,
            if st.passes() { "ok" } else { "VIOLATED" }
        );
    }
    Ok(())
}
