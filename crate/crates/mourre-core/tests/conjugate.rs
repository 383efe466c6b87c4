use std::f64::consts::PI;

use mourre_core::conjugate::*;
use mourre_core::lattice::{inner, norm};
use mourre_core::linop::{dense_norm, LinOp};
use mourre_core::norms::{dense_form_norm, TestWindow};
use mourre_core::{Grid, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn packet(g: &Grid, x0: f64, k0: f64, w: f64) -> Vec<C64> {
    g.sample(|x| {
        let e = (-(x[0] - x0).powi(2) / (2.0 * w * w)).exp();
        C64::new((k0 * x[0]).cos() * e, (k0 * x[0]).sin() * e)
    })
}

/// Scaling-and-squaring Taylor exponential, independent of the transport code.
fn expm(x: &DMatrix<C64>) -> DMatrix<C64> {
    let n = x.nrows();
    let nrm = x.iter().map(|z| z.norm()).sum::<f64>();
    let s = (nrm / 0.25).log2().ceil().max(0.0) as i32;
    let y = x / C64::new(2f64.powi(s), 0.0);
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut out = term.clone();
    for k in 1..30 {
        term = &term * &y / C64::new(k as f64, 0.0);
        out += &term;
    }
    for _ in 0..s {
        out = &out * &out;
    }
    out
}

fn diff_norm(g: &Grid, a: &[C64], b: &[C64]) -> f64 {
    norm(g, &a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

#[test]
fn nakamura_a_matches_expansion_on_inner_window() {
    // a / h integer, so the lattice translation is an exact index roll
    let g = Grid::centered(1, 32, 16.0).unwrap();
    let a = 1.0;
    let op = assemble_a(&g, &VectorField::Nakamura { a }).to_dense().unwrap();
    let q = LinOp::position(&g, 0);
    let s = LinOp::multiplier_fn(&g, |k| C64::new((a * k[0]).sin(), 0.0));
    let c = LinOp::multiplier_fn(&g, |k| C64::new(0.0, -0.5 * a * (a * k[0]).cos()));
    let expansion = q.mul(&s).add(&c).to_dense().unwrap();
    let err = dense_form_norm(&g, &(&op - &expansion), &TestWindow::sharp(0.5)).unwrap();
    assert!(err <= 1e-12 * dense_norm(&op), "{err}");
}

#[test]
fn nakamura_a_on_random_states() {
    let g = Grid::centered(1, 256, 32.0).unwrap();
    let a = 1.0;
    let op = assemble_a(&g, &VectorField::Nakamura { a });
    let q = LinOp::position(&g, 0);
    let s = LinOp::multiplier_fn(&g, |k| C64::new((a * k[0]).sin(), 0.0));
    let c = LinOp::multiplier_fn(&g, |k| C64::new(0.0, -0.5 * a * (a * k[0]).cos()));
    let expansion = q.mul(&s).add(&c);
    for seed in 0..5 {
        // random states supported in the inner window
        let mut f = mourre_core::norms::start_vector(g.len(), seed);
        for (i, v) in f.iter_mut().enumerate() {
            if g.coord(i, 0).abs() > 12.0 {
                *v = C64::new(0.0, 0.0);
            }
        }
        let lhs = op.apply_vec(&f);
        let rhs = expansion.apply_vec(&f);
        let mask = g.window_mask(0.5);
        let err: f64 = lhs.iter().zip(&rhs).zip(&mask).filter(|(_, m)| **m).map(|((x, y), _)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = lhs.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-12 * scale, "seed {seed}: {err} vs {scale}");
    }
}

#[test]
fn zero_field_gives_zero_operator() {
    let g = Grid::centered(1, 32, 8.0).unwrap();
    let m = assemble_a(&g, &VectorField::zero()).to_dense().unwrap();
    assert_eq!(m.norm(), 0.0);
}

#[test]
fn dilation_expectation_is_real() {
    let g = Grid::centered(1, 256, 40.0).unwrap();
    let a = assemble_a(&g, &VectorField::Dilation);
    for (x0, w) in [(0.0, 1.0), (3.0, 2.0), (-5.0, 1.5)] {
        let f = packet(&g, x0, 0.0, w);
        let e = inner(&g, &f, &a.apply_vec(&f));
        assert!(e.im.abs() <= 1e-10 * norm(&g, &f).powi(2), "{e}");
    }
}

#[test]
fn a_is_symmetric_on_inner_window_forms() {
    let g = Grid::centered(1, 32, 16.0).unwrap();
    let m = assemble_a(&g, &VectorField::Nakamura { a: 1.0 }).to_dense().unwrap();
    let err = dense_form_norm(&g, &(&m - m.adjoint()), &TestWindow::sharp(0.5)).unwrap();
    assert!(err <= 1e-10 * dense_norm(&m), "{err}");
    let g = Grid::centered(1, 256, 40.0).unwrap();
    for u in [VectorField::Arctan, VectorField::Normalized, VectorField::Nakamura { a: 1.0 }] {
        let m = assemble_a(&g, &u).to_dense().unwrap();
        let err = dense_form_norm(&g, &(&m - m.adjoint()), &TestWindow::band_limited()).unwrap();
        assert!(err <= 1e-10, "{}: {err}", u.label());
    }
}

#[test]
fn multiplier_commutator_symbols() {
    let g = Grid::centered(1, 64, 10.0).unwrap();
    let a = 0.7;
    let m = laplacian_commutator(&g, &VectorField::Nakamura { a });
    let expect = LinOp::multiplier_fn(&g, |k| C64::new(2.0 * k[0] * (a * k[0]).sin(), 0.0));
    assert!((m.to_dense().unwrap() - expect.to_dense().unwrap()).norm() < 1e-12);
    let zero = multiplier_commutator(&g, &VectorField::Arctan, |_| [0.0; 3]);
    assert_eq!(zero.to_dense().unwrap().norm(), 0.0);
    let d = laplacian_commutator(&g, &VectorField::Dilation);
    let two_delta = LinOp::multiplier_fn(&g, |k| C64::new(2.0 * k[0] * k[0], 0.0));
    assert!((d.to_dense().unwrap() - two_delta.to_dense().unwrap()).norm() < 1e-12);
}

#[test]
fn flow_examples() {
    let opts = FlowOptions::default();
    let u = VectorField::Nakamura { a: 1.0 };
    let r0 = flow(&u, &[0.3], 0.0, &opts).unwrap();
    assert_eq!((r0.point[0], r0.jacobian_det), (0.3, 1.0));
    let r = flow(&u, &[PI / 2.0], 1.0, &opts).unwrap();
    let expect = 2.0 * (1f64.exp()).atan();
    assert!((r.point[0] - expect).abs() < 1e-8);
    assert!((expect - 2.436566).abs() < 1e-6);
    for kk in [-1.0, 0.0, 1.0] {
        let x = kk * PI;
        for tau in [-2.0, 0.5, 2.0] {
            let f = flow(&u, &[x], tau, &opts).unwrap();
            assert!((f.point[0] - x).abs() < 1e-12);
        }
    }
}

#[test]
fn flow_matches_closed_form_and_derivative() {
    let opts = FlowOptions::default();
    let u = VectorField::Nakamura { a: 1.0 };
    let mut worst: f64 = 0.0;
    let mut worst_j: f64 = 0.0;
    for i in 0..40 {
        let x = 0.05 + (PI - 0.1) * i as f64 / 39.0;
        for tau in [-2.0, -1.0, -0.3, 0.7, 1.0, 2.0] {
            let f = flow(&u, &[x], tau, &opts).unwrap();
            worst = worst.max((f.point[0] - sine_flow_closed_form(x, tau)).abs());
            assert!(f.jacobian_det > 0.0);
            if tau == 1.0 {
                // finite-difference derivative of the closed form
                let e = 1e-5;
                let fd = (sine_flow_closed_form(x + e, tau) - sine_flow_closed_form(x - e, tau)) / (2.0 * e);
                worst_j = worst_j.max((f.jacobian_det - fd).abs());
                assert!((f.jacobian_det - sine_flow_closed_form_derivative(x, tau)).abs() < 1e-9);
            }
        }
    }
    assert!(worst < 1e-8, "{worst}");
    assert!(worst_j < 1e-6, "{worst_j}");
}

#[test]
fn multidimensional_flow_jacobian() {
    // normalized field couples the axes; compare det against finite differences of the flow
    let u = VectorField::Normalized;
    let opts = FlowOptions::default();
    let x = [0.4, -0.7];
    let tau = 0.8;
    let base = flow(&u, &x, tau, &opts).unwrap();
    let e = 1e-5;
    let mut jm = [[0.0; 2]; 2];
    for j in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[j] += e;
        xm[j] -= e;
        let fp = flow(&u, &xp, tau, &opts).unwrap().point;
        let fm = flow(&u, &xm, tau, &opts).unwrap().point;
        for i in 0..2 {
            jm[i][j] = (fp[i] - fm[i]) / (2.0 * e);
        }
    }
    let det = jm[0][0] * jm[1][1] - jm[0][1] * jm[1][0];
    assert!((base.jacobian_det - det).abs() < 1e-7);
}

#[test]
fn class_positivity() {
    let g = Grid::centered(1, 256, 40.0).unwrap();
    for u in [VectorField::Nakamura { a: 1.0 }, VectorField::Arctan, VectorField::Normalized, VectorField::Decay { power: 1.0 }] {
        let c = class_check(&u, &g);
        assert!(c.positive && c.bounded, "{}", u.label());
    }
    let c = class_check(&VectorField::Nakamura { a: 1.0 }, &Grid::centered(2, 32, 4.0).unwrap());
    assert!(c.positive);
    assert!(!class_check(&VectorField::Dilation, &g).bounded);
}

#[test]
fn group_identity_and_unitarity() {
    let g = Grid::centered(1, 256, 40.0).unwrap();
    let u = VectorField::Arctan;
    let id = group_element(&g, &u, 0.0, &TransportOptions::default()).unwrap();
    let f = packet(&g, 2.0, 1.0, 2.0);
    assert_eq!(id.apply_vec(&f), f);
    for interp in [Interpolation::Trigonometric, Interpolation::Lagrange(8)] {
        let opts = TransportOptions::with_interpolation(interp);
        for tau in [-0.5, 0.1, 0.5, 1.0] {
            let gt = group_element(&g, &u, tau, &opts).unwrap();
            let r = norm(&g, &gt.apply_vec(&f)) / norm(&g, &f);
            assert!((r - 1.0).abs() < 1e-6, "{interp:?} tau {tau}: {r}");
        }
    }
}

#[test]
fn cubic_stencil_is_the_coarse_option() {
    // documented accuracy ladder on a band-limited packet
    let g = Grid::centered(1, 256, 40.0).unwrap();
    let f = packet(&g, 2.0, 1.0, 2.0);
    let drift = |w| {
        let gt = group_element(&g, &VectorField::Arctan, -0.5, &TransportOptions::with_interpolation(Interpolation::Lagrange(w))).unwrap();
        (norm(&g, &gt.apply_vec(&f)) / norm(&g, &f) - 1.0).abs()
    };
    assert!(drift(4) < 1e-4);
    assert!(drift(8) < 1e-3 * drift(4));
}

#[test]
fn group_law_on_band_limited_states() {
    let g = Grid::centered(1, 256, 40.0).unwrap();
    let u = VectorField::Nakamura { a: 1.0 };
    let opts = TransportOptions::default();
    let f = packet(&g, -3.0, 0.5, 2.5);
    let (s, t) = (0.3, 0.45);
    let gs = group_element(&g, &u, s, &opts).unwrap();
    let gt = group_element(&g, &u, t, &opts).unwrap();
    let gst = group_element(&g, &u, s + t, &opts).unwrap();
    let lhs = gs.apply_vec(&gt.apply_vec(&f));
    let rhs = gst.apply_vec(&f);
    // interpolation tolerance measured on a single step
    let one = diff_norm(&g, &group_element(&g, &u, -t, &opts).unwrap().apply_vec(&gt.apply_vec(&f)), &f);
    let defect = diff_norm(&g, &lhs, &rhs);
    assert!(defect <= 2.0 * one.max(1e-8), "{defect} vs {one}");
    assert!(defect < 1e-5 * norm(&g, &f));
}

#[test]
fn group_matches_matrix_exponential() {
    let g = Grid::centered(1, 32, 8.0).unwrap();
    let u = VectorField::Arctan;
    let tau = 0.1;
    let gm = group_element(&g, &u, tau, &TransportOptions::default()).unwrap().to_dense().unwrap();
    let a = assemble_a_symmetric(&g, &u).to_dense().unwrap();
    let e = expm(&(a * C64::new(0.0, tau)));
    // compared on band-limited inner-window states; raw corner entries couple across the wrap
    let err = dense_form_norm(&g, &(gm - e), &TestWindow::band_limited()).unwrap();
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn symmetric_assembly_agrees_with_a_on_inner_forms() {
    let g = Grid::centered(1, 256, 40.0).unwrap();
    for u in [VectorField::Arctan, VectorField::Nakamura { a: 1.0 }] {
        let a = assemble_a(&g, &u).to_dense().unwrap();
        let s = assemble_a_symmetric(&g, &u).to_dense().unwrap();
        assert!((&s - s.adjoint()).norm() < 1e-10 * s.norm());
        let err = dense_form_norm(&g, &(a - s), &TestWindow::band_limited()).unwrap();
        assert!(err < 1e-10, "{}: {err}", u.label());
    }
}

#[test]
fn group_refuses_escapes_and_long_dilations() {
    let g = Grid::centered(1, 64, 10.0).unwrap();
    assert!(group_element(&g, &VectorField::Dilation, 1.0, &TransportOptions::default()).is_err());
    assert!(group_element(&g, &VectorField::Dilation, 0.1, &TransportOptions::default()).is_ok());
    // the constant-speed field carries the window edge well beyond the guard band
    let shift = VectorField::Custom(CustomField {
        name: "shift".into(),
        u: std::sync::Arc::new(|_| [1.0, 0.0, 0.0]),
        jacobian: std::sync::Arc::new(|_| [[0.0; 3]; 3]),
        sup_u: Some(1.0),
        sup_du: 0.0,
    });
    let err = group_element(&g, &shift, 20.0, &TransportOptions::default()).unwrap_err();
    assert!(matches!(err, mourre_core::Error::FlowEscapes { .. }));
}

#[test]
fn invariance_growth_is_finite() {
    let g = Grid::centered(1, 256, 40.0).unwrap();
    let f = packet(&g, 0.0, 1.0, 2.0);
    let r = invariance_growth(&g, &VectorField::Arctan, 0.5, 1.0, 1.0, &f).unwrap();
    assert!(r.is_finite() && r > 0.2 && r < 5.0, "{r}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flow_group_law(x in -3.0f64..3.0, s in -1.5f64..1.5, t in -1.5f64..1.5) {
        let opts = FlowOptions::default();
        for u in [VectorField::Nakamura { a: 1.0 }, VectorField::Arctan, VectorField::Decay { power: 1.0 }] {
            let a = flow(&u, &[x], t, &opts).unwrap();
            let b = flow(&u, &a.point[..1], s, &opts).unwrap();
            let c = flow(&u, &[x], s + t, &opts).unwrap();
            prop_assert!((b.point[0] - c.point[0]).abs() < 1e-9);
            prop_assert!((a.jacobian_det * b.jacobian_det - c.jacobian_det).abs() < 1e-8 * c.jacobian_det.max(1.0));
            prop_assert!(c.jacobian_det > 0.0);
        }
    }
}

