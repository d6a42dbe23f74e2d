//! BMP, blow, forget and contraction on small exact tensors.

use tensornet::scalar::{ratio, Rational};
use tensornet::tensor::bmp;
use tensornet::Tensor;

fn ints(dims: &[usize], vals: &[i64]) -> Tensor<Rational> {
    Tensor::new(dims.to_vec(), vals.iter().map(|&v| ratio(v, 1)).collect()).unwrap()
}

fn show(t: &Tensor<Rational>) -> String {
    let vals: Vec<String> = t.data().iter().map(ToString::to_string).collect();
    format!("{:?} [{}]", t.dims(), vals.join(" "))
}

fn main() -> tensornet::Result<()> {
    let a = ints(&[2, 2], &[1, 2, 3, 4]);
    let b = ints(&[2, 2], &[0, 1, 1, 0]);
    // two factors: the product of the second with the first
    println!("bmp(A, B) = {}", show(&bmp(&[a.clone(), b.clone()])?));
    println!("B * A     = {}", show(&b.matmul(&a)?));

    let t = ints(&[2, 2, 2], &[1, 0, 2, 1, 0, 3, 1, 1]);
    let u = ints(&[2, 2, 2], &[1, 1, 0, 2, 1, 0, 0, 1]);
    let v = ints(&[2, 2, 2], &[2, 0, 1, 0, 0, 1, 1, 1]);
    let p = bmp(&[t, u, v])?;
    println!("ternary bmp {}", show(&p));

    let blown = a.blow()?;
    println!("blow(A) dims {:?}, contracted back: {}", blown.dims(), blown.contraction(&[2])? == a);

    let wide = a.forget(&[1], &[3], 3)?;
    println!("forget(A) dims {:?}", wide.dims());
    println!("full contraction of A: {}", a.contraction(&[0, 1])?.data()[0]);
    Ok(())
}
