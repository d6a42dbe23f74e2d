#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensornet::netgraph::{Network, Node};
use tensornet::scalar::{ratio, Rational};
use tensornet::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    ratio(rng.random_range(-4..=4), rng.random_range(1..=3))
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor<Rational> {
    Tensor::from_fn(dims, |_| small_rational(rng))
}

pub fn random_matrix_f64(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(&[rows, cols], |_| rng.random_range(-1.0..1.0))
}

/// Row-major offset of `idx` in a tensor of shape `dims`.
pub fn offset(dims: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (i, d)| acc * d + i)
}

/// Every multi-index of `dims` in row-major order.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &d in dims {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..d).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// Textbook BMP: `T[i] = Σ_h Π_k F_k[i with slot k replaced by h]`.
pub fn naive_bmp(factors: &[Tensor<Rational>]) -> Tensor<Rational> {
    let d = factors.len();
    let l = factors[0].dims()[0];
    let mut dims = vec![0; d];
    for m in 0..d {
        dims[m] = factors[(m + 1) % d].dims()[m];
    }
    let mut data = Vec::new();
    for idx in all_indices(&dims) {
        let mut acc = ratio(0, 1);
        for h in 0..l {
            let mut term = ratio(1, 1);
            for (k, f) in factors.iter().enumerate() {
                let mut j = idx.clone();
                j[k] = h;
                term *= f.data()[offset(f.dims(), &j)].clone();
            }
            acc += term;
        }
        data.push(acc);
    }
    Tensor::new(dims, data).unwrap()
}

/// A random valid network with `q ≤ max_nodes` nodes, each with at most
/// `max_states` states, listed in a scrambled order. Position `j` of the
/// network order is node `order[j]`.
pub fn random_network(rng: &mut ChaCha8Rng, max_nodes: usize, max_states: usize) -> Network<Rational> {
    let q = rng.random_range(1..=max_nodes);
    let states: Vec<usize> = (0..q).map(|_| rng.random_range(1..=max_states)).collect();
    let ids: Vec<String> = (0..q).map(|j| format!("v{}", rng.random_range(0..1000) * 10 + j)).collect();
    let mut parents = vec![Vec::new(); q];
    let mut edges = Vec::new();
    for j in 0..q {
        for i in 0..j {
            if rng.random_bool(0.5) {
                parents[j].push(i);
                edges.push((ids[i].clone(), ids[j].clone()));
            }
        }
    }
    edges.shuffle(rng);
    let mut nodes: Vec<Node<Rational>> = (0..q)
        .map(|j| {
            let mut dims: Vec<usize> = parents[j].iter().map(|&p| states[p]).collect();
            dims.push(states[j]);
            Node {
                id: ids[j].clone(),
                states: states[j],
                hidden: rng.random_bool(0.3),
                activation: random_tensor(rng, &dims),
            }
        })
        .collect();
    nodes.shuffle(rng);
    Network {
        nodes,
        edges,
        order: ids,
    }
}

/// Total tensor by the defining product, from scratch.
pub fn naive_total(net: &Network<Rational>) -> Tensor<Rational> {
    let q = net.order.len();
    let node = |id: &str| net.nodes.iter().find(|n| n.id == id).unwrap();
    let pos = |id: &str| net.order.iter().position(|o| o == id).unwrap();
    let dims: Vec<usize> = net.order.iter().map(|id| node(id).states).collect();
    let mut data = Vec::new();
    for idx in all_indices(&dims) {
        let mut prod = ratio(1, 1);
        for j in 0..q {
            let nd = node(&net.order[j]);
            let mut ps: Vec<usize> = net
                .edges
                .iter()
                .filter(|(_, c)| *c == nd.id)
                .map(|(p, _)| pos(p))
                .collect();
            ps.sort_unstable();
            let mut key: Vec<usize> = ps.iter().map(|&p| idx[p]).collect();
            key.push(idx[j]);
            prod *= nd.activation.data()[offset(nd.activation.dims(), &key)].clone();
        }
        data.push(prod);
    }
    Tensor::new(dims, data).unwrap()
}
