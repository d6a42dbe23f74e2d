//! Exact verification, rounding a perturbed scheme back onto a grid, and
//! the exponent of block recursion.

use tensornet::scalar::Scalar;
use tensornet::verify::{
    default_grid, exponent, known_strassen, round_learned, verify_exact, verify_float,
};

fn main() -> tensornet::Result<()> {
    let exact = known_strassen();
    println!("Strassen exact: {:?}", verify_exact(&exact)?.exact);

    // gauge-rescale one product and add noise, as a trained scheme would look
    let mut learned = exact.map(Scalar::to_f64).scale_slot(4, &-1.7, &0.3, &(1.0 / (-1.7 * 0.3)));
    for (i, x) in learned.parts_mut()[0].data_mut().iter_mut().enumerate() {
        *x += 1e-3 * ((i % 5) as f64 - 2.0);
    }
    println!("noisy residual {:.3e}", verify_float(&learned)?.residual);
    let rounded = round_learned(&learned, &default_grid())?;
    println!("after rounding exact: {:?}", verify_exact(&rounded)?.exact);

    for (k, r) in [(2, 8), (2, 7), (3, 23)] {
        println!("log_{k} {r} = {:.4}", exponent(k, r));
    }
    Ok(())
}
