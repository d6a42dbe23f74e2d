mod common;

use common::*;
use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng;
use tensornet::border::{EpsScheme, PolyMatrix};
use tensornet::model::BilinearScheme;
use tensornet::netgraph::{marginalize, strassen_pipeline};
use tensornet::scalar::{ratio, Rational, Scalar};
use tensornet::stats::{summarize, t_cdf, welch_one_tailed, SampleStats};
use tensornet::tensor::{bmp, matmul_tensor, reconstruct};
use tensornet::train::{batch_loss, central_difference, clip, gen_dataset, grad_analytic, Grads};
use tensornet::verify::{known_strassen, residual_sq};
use tensornet::Tensor;

fn random_scheme_q(seed: u64, n: usize, r: usize) -> BilinearScheme<Rational> {
    let mut g = rng(seed);
    let m = n * n;
    BilinearScheme::new(
        n,
        r,
        random_tensor(&mut g, &[m, r]),
        random_tensor(&mut g, &[m, r]),
        random_tensor(&mut g, &[r, m]),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bmp_matches_textbook_definition(seed in any::<u64>(), d in 2usize..=4, l in 1usize..=3) {
        let mut g = rng(seed);
        let ext: Vec<usize> = (0..d).map(|_| g.random_range(1..=2)).collect();
        let factors: Vec<Tensor<Rational>> = (0..d)
            .map(|k| {
                let mut dims = ext.clone();
                dims[k] = l;
                random_tensor(&mut g, &dims)
            })
            .collect();
        prop_assert_eq!(bmp(&factors).unwrap(), naive_bmp(&factors));
    }

    #[test]
    fn contractions_compose(seed in any::<u64>(), a in 1usize..=3, b in 1usize..=3, c in 1usize..=3) {
        let t = random_tensor(&mut rng(seed), &[a, b, c]);
        let stepwise = t.contraction(&[0]).unwrap().contraction(&[0]).unwrap();
        prop_assert_eq!(&stepwise, &t.contraction(&[0, 1]).unwrap());
        let all = t.contraction(&[0, 1, 2]).unwrap();
        prop_assert_eq!(all.order(), 0);
        prop_assert_eq!(&all.data()[0], &t.sum());
    }

    #[test]
    fn contracting_a_blown_slot_is_identity(seed in any::<u64>(), a in 1usize..=3, b in 1usize..=3) {
        let t = random_tensor(&mut rng(seed), &[a, b]);
        let blown = t.blow().unwrap();
        prop_assert_eq!(blown.dims(), &[a, b, a][..]);
        prop_assert_eq!(blown.contraction(&[2]).unwrap(), t);
    }

    #[test]
    fn forgetting_then_summing_multiplies_mass(seed in any::<u64>(), a in 1usize..=3, e in 1usize..=3) {
        let t = random_tensor(&mut rng(seed), &[a, a]);
        let f = t.forget(&[1], &[e], 3).unwrap();
        prop_assert_eq!(f.contraction(&[1]).unwrap(), t.scale(&ratio(e as i64, 1)));
    }

    #[test]
    fn reconstruct_is_additive_over_slots(seed in any::<u64>(), r1 in 1usize..=4, r2 in 1usize..=4) {
        let s1 = random_scheme_q(seed, 2, r1);
        let s2 = random_scheme_q(seed ^ 0x5555, 2, r2);
        let cat = |a: &Tensor<Rational>, b: &Tensor<Rational>, cols: bool| -> Tensor<Rational> {
            if cols {
                let rows = a.dims()[0];
                let (ca, cb) = (a.dims()[1], b.dims()[1]);
                Tensor::from_fn(&[rows, ca + cb], |ix| {
                    if ix[1] < ca { a.at(ix[0], ix[1]).clone() } else { b.at(ix[0], ix[1] - ca).clone() }
                })
            } else {
                let mut data = a.data().to_vec();
                data.extend_from_slice(b.data());
                Tensor::new(vec![a.dims()[0] + b.dims()[0], a.dims()[1]], data).unwrap()
            }
        };
        let joint = BilinearScheme::new(
            2,
            r1 + r2,
            cat(s1.h(), s2.h(), true),
            cat(s1.k(), s2.k(), true),
            cat(s1.f(), s2.f(), false),
        )
        .unwrap();
        let sum = reconstruct(&s1, 2).unwrap().add(&reconstruct(&s2, 2).unwrap()).unwrap();
        prop_assert_eq!(reconstruct(&joint, 2).unwrap(), sum);
    }

    #[test]
    fn total_tensor_routes_agree(seed in any::<u64>()) {
        let net = random_network(&mut rng(seed), 4, 3);
        net.validate().unwrap();
        let direct = net.total_direct().unwrap();
        prop_assert_eq!(&net.total_bmp().unwrap(), &direct);
        prop_assert_eq!(&naive_total(&net), &direct);
        let hidden = net.hidden_slots().unwrap();
        prop_assert_eq!(net.observed().unwrap(), marginalize(&direct, &hidden).unwrap());
    }

    #[test]
    fn forward_is_bilinear(seed in any::<u64>(), n in 1usize..=3, r in 1usize..=5) {
        let s = random_scheme_q(seed, n, r);
        let mut g = rng(seed.wrapping_add(1));
        let m = n * n;
        let v = |g: &mut _| (0..m).map(|_| small_rational(g)).collect::<Vec<_>>();
        let (a, a2, b) = (v(&mut g), v(&mut g), v(&mut g));
        let (x, y) = (small_rational(&mut g), small_rational(&mut g));
        let comb: Vec<Rational> = a.iter().zip(&a2).map(|(p, q)| x.clone() * p + y.clone() * q).collect();
        let lhs = s.forward_fast(&comb, &b).unwrap();
        let f1 = s.forward_fast(&a, &b).unwrap();
        let f2 = s.forward_fast(&a2, &b).unwrap();
        let rhs: Vec<Rational> = f1.iter().zip(&f2).map(|(p, q)| x.clone() * p + y.clone() * q).collect();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn pipeline_matches_fast_forward(seed in any::<u64>(), n in 1usize..=3, r in 1usize..=5) {
        let s = random_scheme_q(seed, n, r);
        let mut g = rng(seed.wrapping_add(7));
        let a = random_tensor(&mut g, &[n, n]);
        let b = random_tensor(&mut g, &[n, n]);
        prop_assert_eq!(s.forward_bmp(&a, &b).unwrap(), s.forward_fast(a.data(), b.data()).unwrap());
    }

    #[test]
    fn strassen_pipeline_multiplies(seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_tensor(&mut g, &[2, 2]);
        let b = random_tensor(&mut g, &[2, 2]);
        let out = strassen_pipeline(&a, &b, &known_strassen()).unwrap().output;
        let direct = a.matmul(&b).unwrap();
        prop_assert_eq!(&out.data()[..4], direct.data());
        prop_assert!(out.data()[4..].iter().all(Zero::is_zero));
    }

    #[test]
    fn gauge_moves_preserve_the_tensor(seed in any::<u64>(), r in 2usize..=6) {
        let s = random_scheme_q(seed, 2, r);
        let mut g = rng(seed ^ 0xABCD);
        let mut perm: Vec<usize> = (0..r).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut g);
        let base = reconstruct(&s, 2).unwrap();
        prop_assert_eq!(&reconstruct(&s.permute_slots(&perm).unwrap(), 2).unwrap(), &base);
        let lh = ratio(g.random_range(1..=5), g.random_range(1..=4));
        let lk = ratio(-g.random_range(1..=5), g.random_range(1..=4));
        let lf = ratio(1, 1) / (lh.clone() * lk.clone());
        let slot = g.random_range(0..r);
        prop_assert_eq!(&reconstruct(&s.scale_slot(slot, &lh, &lk, &lf), 2).unwrap(), &base);
    }

    #[test]
    fn welch_is_antisymmetric(
        m1 in -1.0f64..1.0, s1 in 0.01f64..1.0, n1 in 2usize..30,
        m2 in -1.0f64..1.0, s2 in 0.01f64..1.0, n2 in 2usize..30,
    ) {
        let g1 = SampleStats::new(m1, s1, n1).unwrap();
        let g2 = SampleStats::new(m2, s2, n2).unwrap();
        let a = welch_one_tailed(&g1, &g2).unwrap();
        let b = welch_one_tailed(&g2, &g1).unwrap();
        prop_assert_eq!(a.t, -b.t);
        prop_assert!((a.p_one_tailed - (1.0 - b.p_one_tailed)).abs() < 1e-12);
        prop_assert!((a.df - b.df).abs() <= 1e-12 * a.df);
        prop_assert!(a.df > 0.0 && (0.0..=1.0).contains(&a.p_one_tailed));
        prop_assert!(a.ci95[0] <= m1 - m2 && m1 - m2 <= a.ci95[1]);
    }

    #[test]
    fn t_cdf_is_monotone_and_symmetric(t1 in -50.0f64..50.0, dt in 0.0f64..10.0, nu in 0.5f64..60.0) {
        let (lo, hi) = (t_cdf(t1, nu), t_cdf(t1 + dt, nu));
        prop_assert!(lo <= hi + 1e-15);
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!((t_cdf(-t1, nu) - (1.0 - lo)).abs() < 1e-12);
    }

    #[test]
    fn summarize_matches_exact_arithmetic(seed in any::<u64>(), len in 2usize..200) {
        let mut g = rng(seed);
        let xs: Vec<f64> = (0..len).map(|_| g.random_range(-10.0..10.0)).collect();
        let s = summarize(&xs).unwrap();
        let q: Vec<Rational> = xs.iter().map(|&x| tensornet::scalar::rational_from_f64(x).unwrap()).collect();
        let nq = ratio(len as i64, 1);
        let mean: Rational = q.iter().cloned().fold(ratio(0, 1), |a, b| a + b) / nq.clone();
        let ss: Rational = q.iter().map(|x| (x - &mean) * (x - &mean)).fold(ratio(0, 1), |a, b| a + b);
        let var = ss / ratio(len as i64 - 1, 1);
        prop_assert!((s.mean - mean.to_f64()).abs() <= 1e-12 * (1.0 + mean.to_f64().abs()));
        prop_assert!((s.std - var.to_f64().sqrt()).abs() <= 1e-12 * (1.0 + var.to_f64().sqrt()));
    }

    #[test]
    fn clipping_never_grows_the_norm(seed in any::<u64>(), scale in 0.0f64..100.0, thr in 0.1f64..20.0) {
        let mut g = rng(seed);
        let v = |g: &mut _, k: usize| (0..k).map(|_| scale * rand::Rng::random_range(g, -1.0..1.0)).collect::<Vec<f64>>();
        let grads = Grads { h: v(&mut g, 8), k: v(&mut g, 8), f: v(&mut g, 6) };
        let before = grads.norm();
        let after = clip(grads, thr).norm();
        prop_assert!(after <= before * (1.0 + 1e-12));
        prop_assert!(after <= thr * (1.0 + 1e-12));
    }

    #[test]
    fn eps_evaluation_is_continuous(seed in any::<u64>(), e in 0.01f64..1.0) {
        let base = BilinearScheme::init(2, 3, seed, 1.0).unwrap();
        let mut es = EpsScheme::from_base(&base, 2, -2, e).unwrap();
        let mut g = rng(seed);
        for c in es.h.coeffs.iter_mut().chain(es.f.coeffs.iter_mut()) {
            for x in c.data_mut() {
                *x += g.random_range(-1.0..1.0);
            }
        }
        let at = |x: f64| es.evaluate_at(x).unwrap();
        let gap = |a: &BilinearScheme, b: &BilinearScheme| {
            a.f().sub(b.f()).unwrap().norm_sq() + a.h().sub(b.h()).unwrap().norm_sq()
        };
        let d1 = gap(&at(e), &at(e * (1.0 + 1e-4)));
        let d2 = gap(&at(e), &at(e * (1.0 + 1e-6)));
        prop_assert!(d2 <= d1);
        let size = at(e).f().norm_sq() + at(e).h().norm_sq();
        prop_assert!((d2 / size).sqrt() < 1e-5);
    }
}

#[test]
fn t_cdf_at_reported_df_brackets_published_p() {
    let p = t_cdf(-3.318, 11.2);
    assert!((0.0030..=0.0036).contains(&p), "p = {p}");
}

#[test]
fn fd_error_shrinks_quadratically() {
    // The loss is quadratic in any single entry, where central differences
    // are exact, so probe along a joint direction instead.
    let s = BilinearScheme::init(2, 4, 3, 1.0).unwrap();
    let d = gen_dataset(2, 8, 1, [-1.0, 1.0]).unwrap();
    let idx: Vec<usize> = (0..8).collect();
    let g = grad_analytic(&s, &d, &idx);
    let mut r = rng(5);
    let dir: Vec<Vec<f64>> = [s.h().len(), s.k().len(), s.f().len()]
        .iter()
        .map(|&l| (0..l).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let exact: f64 = [&g.h, &g.k, &g.f]
        .iter()
        .zip(&dir)
        .flat_map(|(gp, dp)| gp.iter().zip(dp).map(|(a, b)| a * b))
        .sum();
    let along = |t: f64| {
        let mut p = s.clone();
        for (part, dp) in p.parts_mut().into_iter().zip(&dir) {
            for (x, dx) in part.data_mut().iter_mut().zip(dp) {
                *x += t * dx;
            }
        }
        batch_loss(&p, &d, &idx)
    };
    let e1 = (central_difference(along, 0.0, 1e-2) - exact).abs();
    let e2 = (central_difference(along, 0.0, 5e-3) - exact).abs();
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn eps_gradients_match_finite_differences() {
    let base = BilinearScheme::init(2, 3, 11, 1.0).unwrap();
    let mut es = EpsScheme::from_base(&base, 1, -2, 0.3).unwrap();
    let mut g = rng(4);
    for c in es.h.coeffs.iter_mut().chain(es.k.coeffs.iter_mut()).chain(es.f.coeffs.iter_mut()) {
        for x in c.data_mut() {
            *x = g.random_range(-0.5..0.5);
        }
    }
    let d = gen_dataset(2, 6, 2, [-1.0, 1.0]).unwrap();
    let idx: Vec<usize> = (0..6).collect();
    let (_, grads) = es.loss_and_grad(&d, &idx).unwrap();
    let h = 1e-6;
    let loss = |s: &EpsScheme| s.loss_and_grad(&d, &idx).unwrap().0;
    fn block(s: &mut EpsScheme, bi: usize) -> &mut Tensor {
        s.h.coeffs
            .iter_mut()
            .chain(s.k.coeffs.iter_mut())
            .chain(s.f.coeffs.iter_mut())
            .nth(bi)
            .unwrap()
    }
    let scale = grads.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut worst = 0.0f64;
    for (bi, gb) in grads.iter().enumerate() {
        for (j, gj) in gb.iter().enumerate() {
            let mut up = es.clone();
            block(&mut up, bi).data_mut()[j] += h;
            let mut down = es.clone();
            block(&mut down, bi).data_mut()[j] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            worst = worst.max((fd - gj).abs() / scale);
        }
    }
    assert!(worst <= 1e-4, "relative error {worst}");
}

#[test]
fn eps_reconstruction_is_polynomial() {
    // With no negative powers each entry of the reconstructed tensor is a
    // polynomial in ε of degree at most 3·d_max.
    let d_max = 2u32;
    let base = BilinearScheme::init(2, 3, 9, 1.0).unwrap();
    let mut es = EpsScheme::from_base(&base, d_max, 0, 1.0).unwrap();
    let mut g = rng(8);
    for c in es.h.coeffs.iter_mut().chain(es.k.coeffs.iter_mut()).chain(es.f.coeffs.iter_mut()) {
        for x in c.data_mut() {
            *x = g.random_range(-1.0..1.0);
        }
    }
    let deg = 3 * d_max as usize;
    let xs: Vec<f64> = (0..=deg).map(|i| 0.2 + 0.15 * i as f64).collect();
    let ys: Vec<Tensor> = xs.iter().map(|&x| reconstruct(&es.evaluate_at(x).unwrap(), 2).unwrap()).collect();
    let probe = 0.77;
    let want = reconstruct(&es.evaluate_at(probe).unwrap(), 2).unwrap();
    for o in 0..want.len() {
        let mut interp = 0.0;
        for i in 0..=deg {
            let mut w = 1.0;
            for j in 0..=deg {
                if j != i {
                    w *= (probe - xs[j]) / (xs[i] - xs[j]);
                }
            }
            interp += w * ys[i].data()[o];
        }
        assert!((interp - want.data()[o]).abs() < 1e-8, "entry {o}");
    }
}

#[test]
fn poly_matrix_rejects_mixed_shapes() {
    let a = Tensor::<f64>::zeros(&[2, 2]);
    let b = Tensor::<f64>::zeros(&[2, 3]);
    assert!(PolyMatrix::new(0, vec![a, b]).is_err());
    assert!(PolyMatrix::new(0, vec![]).is_err());
}

#[test]
fn matmul_tensor_residual_of_zero_scheme() {
    for n in 1..=3 {
        let z = BilinearScheme::<Rational>::zeros(n, 2);
        assert_eq!(residual_sq(&z, n).unwrap(), ratio((n * n * n) as i64, 1));
        assert_eq!(matmul_tensor::<Rational>(n, n, n).sum(), ratio((n * n * n) as i64, 1));
    }
}
