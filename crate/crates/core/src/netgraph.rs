//! Networks on directed acyclic graphs with per-node activation tensors.
//!
//! The total tensor of a network can be computed directly as a product of
//! activation entries, or as the BMP of the lifted activations taken in the
//! rotated order `(T_q, T_1, .., T_{q-1})`. Both routes are exposed so they
//! can be checked against each other.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BilinearScheme;
use crate::scalar::Scalar;
use crate::tensor::{bmp, for_each_index, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Scalar + Serialize",
    deserialize = "S: Scalar + Deserialize<'de>"
))]
pub struct Node<S = f64> {
    pub id: String,
    pub states: usize,
    #[serde(default)]
    pub hidden: bool,
    /// Order in-degree + 1: parent signals (in network order), then own state.
    pub activation: Tensor<S>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(
    serialize = "S: Scalar + Serialize",
    deserialize = "S: Scalar + Deserialize<'de>"
))]
pub struct Network<S = f64> {
    pub nodes: Vec<Node<S>>,
    /// `(parent, child)` pairs.
    pub edges: Vec<(String, String)>,
    /// Total ordering of node ids, compatible with the edges.
    pub order: Vec<String>,
}

/// Nodes rearranged into network order with parents as positions.
struct Layout<'a, S> {
    nodes: Vec<&'a Node<S>>,
    parents: Vec<Vec<usize>>,
}

impl<S: Scalar> Network<S> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.layout().map(|_| ())
    }

    fn layout(&self) -> Result<Layout<'_, S>> {
        let mut by_id: HashMap<&str, usize> = HashMap::new();
        for (k, node) in self.nodes.iter().enumerate() {
            if by_id.insert(node.id.as_str(), k).is_some() {
                return Err(Error::UnknownNode(node.id.clone()));
            }
        }
        let lookup = |id: &str| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownNode(id.to_string()))
        };
        let q = self.nodes.len();
        if q == 0 {
            return Err(Error::ShapeMismatch("network has no nodes".into()));
        }
        let mut children = vec![Vec::new(); q];
        let mut indeg = vec![0usize; q];
        for (p, c) in &self.edges {
            let (p, c) = (lookup(p)?, lookup(c)?);
            children[p].push(c);
            indeg[c] += 1;
        }

        // Kahn's algorithm, only to detect cycles.
        let mut remaining = indeg.clone();
        let mut ready: Vec<usize> = (0..q).filter(|&k| remaining[k] == 0).collect();
        let mut seen = 0;
        while let Some(k) = ready.pop() {
            seen += 1;
            for &c in &children[k] {
                remaining[c] -= 1;
                if remaining[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if seen != q {
            return Err(Error::CycleDetected);
        }

        if self.order.len() != q {
            return Err(Error::OrderNotTopological);
        }
        let mut pos = vec![usize::MAX; q];
        for (p, id) in self.order.iter().enumerate() {
            let k = lookup(id)?;
            if pos[k] != usize::MAX {
                return Err(Error::OrderNotTopological);
            }
            pos[k] = p;
        }
        let mut parents = vec![Vec::new(); q];
        for (p, c) in &self.edges {
            let (p, c) = (lookup(p)?, lookup(c)?);
            if pos[p] >= pos[c] {
                return Err(Error::OrderNotTopological);
            }
            parents[pos[c]].push(pos[p]);
        }
        let mut ordered = vec![&self.nodes[0]; q];
        for (k, node) in self.nodes.iter().enumerate() {
            ordered[pos[k]] = node;
        }
        for ps in &mut parents {
            ps.sort_unstable();
            ps.dedup();
        }

        for (i, node) in ordered.iter().enumerate() {
            let act = &node.activation;
            let expected = parents[i].len() + 1;
            if act.order() != expected {
                return Err(Error::ActivationOrderMismatch {
                    node: i,
                    expected,
                    got: act.order(),
                });
            }
            let want: Vec<usize> = parents[i]
                .iter()
                .map(|&p| ordered[p].states)
                .chain([node.states])
                .collect();
            if act.dims() != want.as_slice() {
                return Err(Error::StateSizeMismatch {
                    node: i,
                    detail: format!("activation dims {:?}, expected {want:?}", act.dims()),
                });
            }
        }
        Ok(Layout {
            nodes: ordered,
            parents,
        })
    }

    /// State sizes in network order.
    pub fn state_sizes(&self) -> Result<Vec<usize>> {
        Ok(self.layout()?.nodes.iter().map(|n| n.states).collect())
    }

    /// Slots of the total tensor that belong to hidden nodes.
    pub fn hidden_slots(&self) -> Result<Vec<usize>> {
        Ok(self
            .layout()?
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.hidden)
            .map(|(i, _)| i)
            .collect())
    }

    /// Order-q tensor of the node at position `i` of the network order.
    ///
    /// Forget the non-parent predecessors, blow unless `i` is the sink, then
    /// forget every slot past `i + 1`.
    pub fn lift(&self, i: usize) -> Result<Tensor<S>> {
        let layout = self.layout()?;
        let q = layout.nodes.len();
        if i >= q {
            return Err(Error::BadIndexSet(format!("node position {i} out of range")));
        }
        let sizes: Vec<usize> = layout.nodes.iter().map(|n| n.states).collect();
        let mut t = layout.nodes[i].activation.clone();
        if i > 0 {
            let missing: Vec<usize> = (0..i).filter(|p| !layout.parents[i].contains(p)).collect();
            let extents: Vec<usize> = missing.iter().map(|&p| sizes[p]).collect();
            t = t.forget(&missing, &extents, i + 1)?;
        }
        if i + 1 != q {
            t = t.blow()?;
        }
        if t.order() < q {
            let tail: Vec<usize> = (t.order()..q).collect();
            let extents: Vec<usize> = tail.iter().map(|&p| sizes[p]).collect();
            t = t.forget(&tail, &extents, q)?;
        }
        Ok(t)
    }

    /// `N[i_1..i_q] = Π_j A_j[concat(P_j, i_j)]`.
    pub fn total_direct(&self) -> Result<Tensor<S>> {
        let layout = self.layout()?;
        let sizes: Vec<usize> = layout.nodes.iter().map(|n| n.states).collect();
        let mut scratch = Vec::new();
        Ok(Tensor::from_fn(&sizes, |idx| {
            let mut prod = S::one();
            for (j, node) in layout.nodes.iter().enumerate() {
                scratch.clear();
                scratch.extend(layout.parents[j].iter().map(|&p| idx[p]));
                scratch.push(idx[j]);
                prod = prod * node.activation.get(&scratch).clone();
            }
            prod
        }))
    }

    /// `N = ∘(T_q, T_1, .., T_{q-1})` over the lifted activations.
    pub fn total_bmp(&self) -> Result<Tensor<S>> {
        let q = self.node_count();
        if q == 1 {
            return self.lift(0);
        }
        let mut factors = Vec::with_capacity(q);
        factors.push(self.lift(q - 1)?);
        for i in 0..q - 1 {
            factors.push(self.lift(i)?);
        }
        bmp(&factors)
    }

    /// Total tensor with the hidden nodes summed out.
    pub fn observed(&self) -> Result<Tensor<S>> {
        marginalize(&self.total_bmp()?, &self.hidden_slots()?)
    }
}

pub fn marginalize<S: Scalar>(total: &Tensor<S>, hidden: &[usize]) -> Result<Tensor<S>> {
    total.contraction(hidden)
}

fn square_dim<S: Scalar>(m: &Tensor<S>) -> Result<usize> {
    match m.matrix_dims()? {
        [r, c] if r == c => Ok(r),
        [r, c] => Err(Error::ShapeMismatch(format!("{r}x{c} is not square"))),
    }
}

/// Three-node chain `N1 → N2 → N3` (N2 hidden) whose observed tensor is `A·B`.
pub fn classical_network<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Network<S>> {
    let n = square_dim(a)?;
    if square_dim(b)? != n {
        return Err(Error::ShapeMismatch("A and B differ in size".into()));
    }
    let node = |id: &str, hidden, activation| Node {
        id: id.to_string(),
        states: n,
        hidden,
        activation,
    };
    let net = Network {
        nodes: vec![
            node("N1", false, Tensor::vector(vec![S::one(); n])),
            node("N2", true, a.clone()),
            node("N3", false, b.clone()),
        ],
        edges: vec![("N1".into(), "N2".into()), ("N2".into(), "N3".into())],
        order: vec!["N1".into(), "N2".into(), "N3".into()],
    };
    net.validate()?;
    Ok(net)
}

/// Row-by-column product computed as the marginal total tensor of the
/// classical network.
pub fn classical_2x2<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    classical_network(a, b)?.observed()
}

/// Intermediate tensors of the two-stage bilinear pipeline.
#[derive(Clone, Debug)]
pub struct PipelineStages<S> {
    /// Total tensors of the input sub-networks `A → H` and `B → K`.
    pub s0_left: Tensor<S>,
    pub s0_right: Tensor<S>,
    /// Their contractions over the input slot: the r left and right factors.
    pub s_left: Tensor<S>,
    pub s_right: Tensor<S>,
    /// Lifted factors fed to the final BMP.
    pub sf_left: Tensor<S>,
    pub sf_right: Tensor<S>,
    pub f_lifted: Tensor<S>,
    pub product: Tensor<S>,
    pub output: Tensor<S>,
}

fn input_subnetwork<S: Scalar>(dist: &Tensor<S>, comb: &Tensor<S>) -> Result<Network<S>> {
    let [m, r] = comb.matrix_dims()?;
    if dist.dims() != [m] {
        return Err(Error::ShapeMismatch(format!(
            "input of length {:?} for a {m}x{r} combination",
            dist.dims()
        )));
    }
    let net = Network {
        nodes: vec![
            Node {
                id: "in".into(),
                states: m,
                hidden: false,
                activation: dist.clone(),
            },
            Node {
                id: "comb".into(),
                states: r,
                hidden: false,
                activation: comb.clone(),
            },
        ],
        edges: vec![("in".into(), "comb".into())],
        order: vec!["in".into(), "comb".into()],
    };
    net.validate()?;
    Ok(net)
}

/// Two-stage pipeline: each input vector feeds a two-node sub-network whose
/// activation is the combination matrix (`h`, `k`: inputs × r); contracting
/// the input slot gives the r factors. The factors are lifted, multiplied
/// against the lifted post-combination `f0` (outputs × r) by a three-factor
/// BMP, and the two factor slots are contracted away.
pub fn bilinear_pipeline<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    h: &Tensor<S>,
    k: &Tensor<S>,
    f0: &Tensor<S>,
) -> Result<PipelineStages<S>> {
    let [_, r] = h.matrix_dims()?;
    let [_, rk] = k.matrix_dims()?;
    let [outputs, rf] = f0.matrix_dims()?;
    if rk != r || rf != r {
        return Err(Error::ShapeMismatch(format!(
            "combination ranks disagree: {r}, {rk}, {rf}"
        )));
    }
    // Sub-network total is ∘(H, b(a)) = diag(a)·H.
    let s0_left = input_subnetwork(a, h)?.total_bmp()?;
    let s0_right = input_subnetwork(b, k)?.total_bmp()?;
    let s_left = s0_left.contraction(&[0])?;
    let s_right = s0_right.contraction(&[0])?;

    let sf_left = s_left.forget(&[1], &[outputs], 2)?.blow()?;
    let sf_right = s_right.forget(&[0], &[r], 2)?.blow()?;
    let f_lifted = f0.forget(&[0], &[r], 3)?;
    let product = bmp(&[sf_left.clone(), sf_right.clone(), f_lifted.clone()])?;
    let output = product.contraction(&[0])?.contraction(&[1])?;
    Ok(PipelineStages {
        s0_left,
        s0_right,
        s_left,
        s_right,
        sf_left,
        sf_right,
        f_lifted,
        product,
        output,
    })
}

fn pad_matrix<S: Scalar>(m: &Tensor<S>, rows: usize, cols: usize) -> Result<Tensor<S>> {
    let [r, c] = m.matrix_dims()?;
    if r > rows || c > cols {
        return Err(Error::ShapeMismatch(format!("cannot pad {r}x{c} to {rows}x{cols}")));
    }
    Ok(Tensor::from_fn(&[rows, cols], |ix| {
        if ix[0] < r && ix[1] < c {
            m.at(ix[0], ix[1]).clone()
        } else {
            S::zero()
        }
    }))
}

/// Row-major vec of a square matrix padded with zeros to `len`.
pub fn padded_vec<S: Scalar>(m: &Tensor<S>, len: usize) -> Result<Tensor<S>> {
    let n = square_dim(m)?;
    if n * n > len {
        return Err(Error::ShapeMismatch(format!("{} entries exceed length {len}", n * n)));
    }
    let mut data = m.data().to_vec();
    data.resize(len, S::zero());
    Ok(Tensor::vector(data))
}

/// The 2×2 pipeline on square-padded operands: inputs `D_A`, `D_B` of length
/// `r` (vec row-major, then zeros), `H`, `K` padded to r×r with zero rows and
/// `F_0 = Fᵀ` padded likewise. The first four output coordinates are
/// vec(A·B), the rest vanish.
pub fn strassen_pipeline<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    scheme: &BilinearScheme<S>,
) -> Result<PipelineStages<S>> {
    if square_dim(a)? != scheme.n() || square_dim(b)? != scheme.n() {
        return Err(Error::ShapeMismatch("operands do not match the scheme size".into()));
    }
    let size = scheme.r().max(scheme.n() * scheme.n());
    let da = padded_vec(a, size)?;
    let db = padded_vec(b, size)?;
    let h = pad_matrix(scheme.h(), size, size)?;
    let k = pad_matrix(scheme.k(), size, size)?;
    let f0 = pad_matrix(&scheme.f().transpose()?, size, size)?;
    bilinear_pipeline(&da, &db, &h, &k, &f0)
}

/// Brute-force frequency mass: sum over every joint state of the product of
/// activation entries, enumerated without building the total tensor.
pub fn total_mass<S: Scalar>(net: &Network<S>) -> Result<S> {
    let layout = net.layout()?;
    let sizes: Vec<usize> = layout.nodes.iter().map(|n| n.states).collect();
    let mut acc = S::zero();
    for_each_index(&sizes, |idx| {
        let mut prod = S::one();
        for (j, node) in layout.nodes.iter().enumerate() {
            let mut key: Vec<usize> = layout.parents[j].iter().map(|&p| idx[p]).collect();
            key.push(idx[j]);
            prod = prod * node.activation.get(&key).clone();
        }
        acc = acc.clone() + prod;
    });
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};
    use crate::verify::known_strassen;

    fn m(rows: &[[f64; 2]; 2]) -> Tensor {
        Tensor::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn chain() -> Network {
        classical_network(&m(&[[1., 2.], [3., 4.]]), &m(&[[5., 6.], [7., 8.]])).unwrap()
    }

    #[test]
    fn chain_is_valid() {
        chain().validate().unwrap();
    }

    #[test]
    fn wrong_order_is_rejected() {
        let mut net = chain();
        net.order = vec!["N2".into(), "N1".into(), "N3".into()];
        assert!(matches!(net.validate(), Err(Error::OrderNotTopological)));
    }

    #[test]
    fn cycle_is_rejected() {
        let mut net = chain();
        net.edges.push(("N3".into(), "N1".into()));
        assert!(matches!(net.validate(), Err(Error::CycleDetected)));
    }

    #[test]
    fn activation_checks() {
        let mut net = chain();
        net.nodes[1].activation = Tensor::vector(vec![1., 1.]);
        assert!(matches!(
            net.validate(),
            Err(Error::ActivationOrderMismatch { node: 1, .. })
        ));
        let mut net = chain();
        net.nodes[2].activation = Tensor::zeros(&[2, 3]);
        assert!(matches!(net.validate(), Err(Error::StateSizeMismatch { .. })));
        let mut net = chain();
        net.edges.push(("N1".into(), "N9".into()));
        assert!(matches!(net.validate(), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn lift_matches_named_constructions() {
        let net = chain();
        let d1 = &net.nodes[0].activation;
        let d2 = &net.nodes[1].activation;
        let d3 = &net.nodes[2].activation;
        assert_eq!(net.lift(0).unwrap(), d1.blow().unwrap().forget(&[2], &[2], 3).unwrap());
        assert_eq!(net.lift(1).unwrap(), d2.blow().unwrap());
        assert_eq!(net.lift(2).unwrap(), d3.forget(&[0], &[2], 3).unwrap());
    }

    #[test]
    fn single_node_network() {
        let v = Tensor::vector(vec![1., 1.]);
        let net = Network {
            nodes: vec![Node {
                id: "x".into(),
                states: 2,
                hidden: false,
                activation: v.clone(),
            }],
            edges: vec![],
            order: vec!["x".into()],
        };
        assert_eq!(net.lift(0).unwrap(), v);
        assert_eq!(net.total_direct().unwrap(), v);
        assert_eq!(net.total_bmp().unwrap(), v);
    }

    #[test]
    fn two_node_chain_direct() {
        let net = Network {
            nodes: vec![
                Node {
                    id: "a".into(),
                    states: 2,
                    hidden: false,
                    activation: Tensor::vector(vec![1., 0.]),
                },
                Node {
                    id: "b".into(),
                    states: 2,
                    hidden: false,
                    activation: m(&[[2., 3.], [4., 5.]]),
                },
            ],
            edges: vec![("a".into(), "b".into())],
            order: vec!["a".into(), "b".into()],
        };
        let n = net.total_direct().unwrap();
        assert_eq!(n, m(&[[2., 3.], [0., 0.]]));
        assert_eq!(net.total_bmp().unwrap(), n);
    }

    #[test]
    fn classical_matches_product() {
        let a = m(&[[1., 2.], [3., 4.]]);
        let b = m(&[[5., 6.], [7., 8.]]);
        assert_eq!(classical_2x2(&a, &b).unwrap(), m(&[[19., 22.], [43., 50.]]));
        let id = m(&[[1., 0.], [0., 1.]]);
        assert_eq!(classical_2x2(&id, &id).unwrap(), id);
        let net = classical_network(&a, &b).unwrap();
        assert_eq!(net.total_bmp().unwrap(), net.total_direct().unwrap());
    }

    #[test]
    fn marginalize_edge_cases() {
        let t = chain().total_direct().unwrap();
        assert_eq!(marginalize(&t, &[]).unwrap(), t);
        let all = marginalize(&t, &[0, 1, 2]).unwrap();
        assert_eq!(all.data()[0], t.sum());
    }

    #[test]
    fn strassen_identity_product() {
        let s = known_strassen();
        let id = Tensor::from_rows(vec![
            vec![ratio(1, 1), ratio(0, 1)],
            vec![ratio(0, 1), ratio(1, 1)],
        ])
        .unwrap();
        let out = strassen_pipeline(&id, &id, &s).unwrap().output;
        let want: Vec<Rational> = [1, 0, 0, 1, 0, 0, 0].iter().map(|&v| ratio(v, 1)).collect();
        assert_eq!(out.data(), want.as_slice());
    }

    #[test]
    fn strassen_left_factors() {
        let s = known_strassen();
        let a = Tensor::from_rows(vec![
            vec![ratio(2, 1), ratio(3, 1)],
            vec![ratio(5, 1), ratio(7, 1)],
        ])
        .unwrap();
        let stages = strassen_pipeline(&a, &a, &s).unwrap();
        // a11+a22, a21+a22, a11, a22, a11+a12, a21-a11, a12-a22
        let want: Vec<Rational> = [9, 12, 2, 7, 5, 3, -4].iter().map(|&v| ratio(v, 1)).collect();
        assert_eq!(stages.s_left.data(), want.as_slice());
        assert_eq!(stages.sf_left.dims(), &[7, 7, 7]);
    }

    #[test]
    fn final_stage_matches_network_form() {
        // The final stage equals the observed tensor of the network
        // S1, S2 → F with activation F[s1, s2, o] = δ(s1, s2)·F0[o, s1].
        let f0 = Tensor::from_rows(vec![vec![1., 2., 0.], vec![-1., 0., 3.]]).unwrap();
        let h = Tensor::from_rows(vec![vec![1., 0., 2.], vec![0., 1., 1.]]).unwrap();
        let k = Tensor::from_rows(vec![vec![2., 1., 0.], vec![1., 1., -1.]]).unwrap();
        let a = Tensor::vector(vec![0.5, -2.0]);
        let b = Tensor::vector(vec![1.5, 3.0]);
        let st = bilinear_pipeline(&a, &b, &h, &k, &f0).unwrap();
        let g = Tensor::from_fn(&[3, 3, 2], |ix| {
            if ix[0] == ix[1] {
                *f0.at(ix[2], ix[0])
            } else {
                0.0
            }
        });
        let node = |id: &str, states, hidden, activation| Node {
            id: String::from(id),
            states,
            hidden,
            activation,
        };
        let net = Network {
            nodes: vec![
                node("S1", 3, true, st.s_left.clone()),
                node("S2", 3, true, st.s_right.clone()),
                node("F", 2, false, g),
            ],
            edges: vec![("S1".into(), "F".into()), ("S2".into(), "F".into())],
            order: vec!["S1".into(), "S2".into(), "F".into()],
        };
        let via_net = net.observed().unwrap();
        for (x, y) in via_net.data().iter().zip(st.output.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn network_json_round_trip() {
        let net = chain();
        let s = serde_json::to_string(&net).unwrap();
        let back: Network = serde_json::from_str(&s).unwrap();
        assert_eq!(back, net);
        assert!(serde_json::from_str::<Network>(r#"{"nodes":[],"edges":[],"order":[],"x":1}"#).is_err());
    }
}
