use std::f64::consts::PI;

use mourre_core::lattice::{inner, norm};
use mourre_core::linop::LinOp;
use mourre_core::norms::{inverse_weight_op, laplacian, opnorm, start_vector, weight_op, NormMethod};
use mourre_core::{Grid, GridFunction, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), n)
}

#[test]
fn laplacian_spectrum_small_grid() {
    let g = Grid::new(1, 8, PI, 0.0).unwrap();
    let m = laplacian(&g).to_dense().unwrap();
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // analytic symbol k_n^2 on n in {-4..3}
    let mut expect: Vec<f64> = (-4i32..4).map(|n| (n * n) as f64).collect();
    expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in ev.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12, "{ev:?}");
    }
}

#[test]
fn laplacian_kills_constants() {
    let g = Grid::centered(2, 16, 5.0).unwrap();
    let one = vec![C64::new(1.0, 0.0); g.len()];
    let out = laplacian(&g).apply_vec(&one);
    assert!(out.iter().all(|v| v.norm() < 1e-12));
}

#[test]
fn power_iteration_matches_svd_for_gaussian_diagonal() {
    let g = Grid::centered(1, 64, 20.0).unwrap();
    let v = LinOp::diagonal_fn(&g, |x| C64::new((-x[0] * x[0]).exp(), 0.0));
    let svd = opnorm(&v, 1.0, 0.0, -1.0, 0.0, NormMethod::DenseSvd).unwrap();
    let pow = opnorm(&v, 1.0, 0.0, -1.0, 0.0, NormMethod::PowerIteration { max_iters: 20000, tol: 1e-13 }).unwrap();
    assert!(rel(pow, svd) < 1e-6, "{pow} vs {svd}");
}

#[test]
fn lanczos_matches_svd_on_near_degenerate_pairs() {
    let g = Grid::centered(1, 128, 20.0).unwrap();
    // even potential: top singular values come in nearly equal pairs
    let v = LinOp::diagonal_fn(&g, |x| C64::new(1.0 / (1.0 + x[0] * x[0]).powf(1.25) * (x[0].abs() > 4.0) as u8 as f64, 0.0));
    let svd = opnorm(&v, 1.0, 0.0, -1.0, 0.0, NormMethod::DenseSvd).unwrap();
    let lz = opnorm(&v, 1.0, 0.0, -1.0, 0.0, NormMethod::default()).unwrap();
    assert!(rel(lz, svd) < 1e-8, "{lz} vs {svd}");
}

#[test]
fn identity_and_inverse_laplacian_norms() {
    let g = Grid::centered(1, 32, 8.0).unwrap();
    let id = LinOp::identity(&g);
    assert!((opnorm(&id, 0.0, 0.0, 0.0, 0.0, NormMethod::default()).unwrap() - 1.0).abs() < 1e-12);
    let t = weight_op(&g, -2.0, 0.0);
    assert!((opnorm(&t, 0.0, 0.0, 0.0, 0.0, NormMethod::default()).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn twenty_random_operators_norm_methods_agree() {
    let g = Grid::centered(1, 32, 6.0).unwrap();
    for seed in 0..20u64 {
        let raw = start_vector(32 * 32, 100 + seed);
        let m = DMatrix::from_column_slice(32, 32, &raw);
        let op = LinOp::dense(&g, m);
        let (ti, si, to, so) = [(0.0, 0.0, 0.0, 0.0), (1.0, 0.0, -1.0, 0.0), (1.0, 0.5, -1.0, -0.5)][seed as usize % 3];
        let a = opnorm(&op, ti, si, to, so, NormMethod::DenseSvd).unwrap();
        let b = opnorm(&op, ti, si, to, so, NormMethod::PowerIteration { max_iters: 100000, tol: 1e-14 }).unwrap();
        assert!(rel(b, a) < 1e-6, "seed {seed}: {b} vs {a}");
    }
}

#[test]
fn weight_order_matters_but_inverse_is_exact() {
    let g = Grid::centered(1, 32, 6.0).unwrap();
    let a = weight_op(&g, -1.0, 0.5).mul(&weight_op(&g, 1.0, -0.5)).to_dense().unwrap();
    let id = DMatrix::<C64>::identity(32, 32);
    assert!((&a - &id).norm() > 1e-3);
    let b = inverse_weight_op(&g, 1.0, 0.5).mul(&weight_op(&g, 1.0, 0.5)).to_dense().unwrap();
    assert!((&b - &id).norm() < 1e-10);
}

#[test]
fn multipliers_and_diagonals_commute_among_themselves() {
    let g = Grid::centered(1, 32, 6.0).unwrap();
    let m1 = LinOp::multiplier_fn(&g, |k| C64::new(k[0].sin(), k[0]));
    let m2 = LinOp::multiplier_fn(&g, |k| C64::new(1.0 + k[0] * k[0], 0.0));
    let c = m1.commutator(&m2).to_dense().unwrap();
    let scale = m1.to_dense().unwrap().norm() * m2.to_dense().unwrap().norm();
    assert!(c.norm() <= 1e-12 * scale);
    let d1 = LinOp::diagonal_fn(&g, |x| C64::new(x[0], 1.0));
    let d2 = LinOp::diagonal_fn(&g, |x| C64::new((-x[0]).exp(), 0.0));
    assert_eq!(d1.commutator(&d2).to_dense().unwrap().norm(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plancherel_and_roundtrip(v in vec_strategy(64)) {
        let g = Grid::centered(1, 64, 7.0).unwrap();
        let f = GridFunction::new(g.clone(), v.clone()).unwrap();
        prop_assert!(rel(f.momentum_norm(), f.norm()) < 1e-12);
        let back = g.inverse(&g.forward(&v));
        let err: f64 = back.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-12 * norm(&g, &v).max(1e-300) / g.weight().sqrt());
    }

    #[test]
    fn plancherel_two_dim(v in vec_strategy(256)) {
        let g = Grid::centered(2, 16, 3.0).unwrap();
        let f = GridFunction::new(g, v).unwrap();
        prop_assert!(rel(f.momentum_norm(), f.norm()) < 1e-12);
    }

    #[test]
    fn linearity_and_adjoint(f in vec_strategy(32), h in vec_strategy(32), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = Grid::centered(1, 32, 5.0).unwrap();
        let ops = vec![
            LinOp::multiplier_fn(&g, |k| C64::new(k[0].cos(), k[0])),
            LinOp::diagonal_fn(&g, |x| C64::new(x[0], x[0].sin())),
            LinOp::dense(&g, DMatrix::from_column_slice(32, 32, &start_vector(1024, 7))),
            LinOp::position(&g, 0).mul(&LinOp::momentum(&g, 0)),
            LinOp::momentum(&g, 0).add(&LinOp::position(&g, 0).scale(C64::new(0.0, 2.0))),
            LinOp::momentum(&g, 0).mul(&LinOp::position(&g, 0)).adjoint(),
        ];
        let ca = C64::new(a, 0.5);
        let cb = C64::new(b, -1.0);
        let comb: Vec<C64> = f.iter().zip(&h).map(|(x, y)| ca * x + cb * y).collect();
        for op in &ops {
            let lhs = op.apply_vec(&comb);
            let fa = op.apply_vec(&f);
            let ha = op.apply_vec(&h);
            let rhs: Vec<C64> = fa.iter().zip(&ha).map(|(x, y)| ca * x + cb * y).collect();
            let scale = norm(&g, &lhs).max(norm(&g, &rhs)).max(1e-300);
            let err = norm(&g, &lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect::<Vec<_>>());
            prop_assert!(err <= 1e-12 * scale);
            let l = inner(&g, &op.adjoint_vec(&f), &h);
            let r = inner(&g, &f, &op.apply_vec(&h));
            prop_assert!((l - r).norm() <= 1e-12 * l.norm().max(r.norm()).max(1e-300));
        }
    }
}
