//! Total tensor of a DAG network by direct products and by BMP of lifted
//! activations; the classical product as a three-node chain.

use tensornet::netgraph::{classical_2x2, marginalize, Network, Node};
use tensornet::Tensor;

fn main() -> tensornet::Result<()> {
    let net = Network {
        nodes: vec![
            Node {
                id: "weather".into(),
                states: 2,
                hidden: false,
                activation: Tensor::vector(vec![0.7, 0.3]),
            },
            Node {
                id: "sprinkler".into(),
                states: 2,
                hidden: true,
                activation: Tensor::from_rows(vec![vec![0.6, 0.4], vec![0.99, 0.01]])?,
            },
            Node {
                id: "grass".into(),
                states: 2,
                hidden: false,
                activation: Tensor::new(
                    vec![2, 2, 2],
                    vec![1.0, 0.0, 0.1, 0.9, 0.2, 0.8, 0.01, 0.99],
                )?,
            },
        ],
        edges: vec![
            ("weather".into(), "sprinkler".into()),
            ("weather".into(), "grass".into()),
            ("sprinkler".into(), "grass".into()),
        ],
        order: vec!["weather".into(), "sprinkler".into(), "grass".into()],
    };
    let direct = net.total_direct()?;
    let via_bmp = net.total_bmp()?;
    let gap = direct.sub(&via_bmp)?.norm_sq().sqrt();
    println!("total tensor dims {:?}, routes differ by {gap:.2e}", direct.dims());
    println!("mass {:.6}", direct.sum());
    let observed = marginalize(&direct, &net.hidden_slots()?)?;
    println!("P(weather, grass) = {:?}", observed.rows());

    let a = Tensor::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]])?;
    let b = Tensor::from_rows(vec![vec![5.0, 6.0], vec![7.0, 8.0]])?;
    println!("classical chain: {:?}", classical_2x2(&a, &b)?.rows());
    Ok(())
}
