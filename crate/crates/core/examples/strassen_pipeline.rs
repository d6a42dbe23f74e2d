//! Strassen's scheme run through the two-stage network pipeline in exact
//! arithmetic.

use tensornet::netgraph::strassen_pipeline;
use tensornet::scalar::ratio;
use tensornet::verify::known_strassen;
use tensornet::Tensor;

fn main() -> tensornet::Result<()> {
    let a = Tensor::new(vec![2, 2], vec![ratio(1, 2), ratio(-3, 1), ratio(2, 1), ratio(5, 7)])?;
    let b = Tensor::new(vec![2, 2], vec![ratio(4, 1), ratio(0, 1), ratio(-1, 3), ratio(1, 1)])?;
    let st = strassen_pipeline(&a, &b, &known_strassen())?;
    let show = |t: &Tensor<_>| t.data().iter().map(ToString::to_string).collect::<Vec<_>>().join(" ");
    println!("left factors  {}", show(&st.s_left));
    println!("right factors {}", show(&st.s_right));
    println!("output        {}", show(&st.output));
    println!("A*B           {}", show(&a.matmul(&b)?));
    Ok(())
}
