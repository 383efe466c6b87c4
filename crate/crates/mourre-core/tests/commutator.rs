use mourre_core::commutator::*;
use mourre_core::conjugate::{assemble_a, laplacian_commutator, TransportOptions, VectorField};
use mourre_core::linop::{dense_norm, LinOp};
use mourre_core::norms::{dense_form_norm, form_norm, laplacian, start_vector, NormMethod, TestWindow};
use mourre_core::potentials::{realize, Cutoff, PotentialSpec};
use mourre_core::report::Verdict;
use mourre_core::{Grid, C64};
use nalgebra::DMatrix;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Spacing 1, so a = 1 translations are exact index rolls.
fn unit_grid() -> Grid {
    Grid::centered(1, 32, 16.0).unwrap()
}

fn random_diagonal(g: &Grid, seed: u64) -> LinOp {
    let v: Vec<f64> = start_vector(g.len(), seed).iter().map(|c| c.re).collect();
    LinOp::diagonal_real(g, &v)
}

fn dense(op: &LinOp) -> DMatrix<C64> {
    op.to_dense().unwrap()
}

fn inner_err(g: &Grid, a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    dense_form_norm(g, &(a - b), &TestWindow::sharp(0.5)).unwrap() / dense_norm(b).max(1.0)
}

#[test]
fn delta_of_coordinate_is_a_on_unwrapped_nodes() {
    let g = unit_grid();
    for a in [1.0, 2.0, -3.0] {
        let d = dense(&delta(&LinOp::position(&g, 0), a, 0));
        let wrap = wrap_mask(&g, a, 0);
        for i in 0..g.len() {
            if !wrap[i] {
                assert_eq!(d[(i, i)], C64::new(a, 0.0));
            }
        }
        assert!(wrap.iter().filter(|w| **w).count() == a.abs() as usize);
    }
}

#[test]
fn delta_vanishes_on_multipliers_and_constants() {
    let g = unit_grid();
    let m = LinOp::multiplier_fn(&g, |k| C64::new(k[0].atan(), 0.0));
    assert_eq!(dense_norm(&dense(&delta(&m, 1.0, 0))), 0.0);
    let c = LinOp::diagonal_real(&g, &vec![2.5; g.len()]);
    assert_eq!(dense_norm(&dense(&delta(&c, 1.0, 0))), 0.0);
    // non-integer shift goes through the phase conjugation
    assert!(dense_norm(&dense(&delta(&c, 0.3, 0))) < 1e-13);
}

#[test]
fn delta_leibniz_rule() {
    let g = unit_grid();
    let a = 1.0;
    let t = translation(&g, a, 0);
    for seed in 0..3 {
        let m = LinOp::dense(&g, DMatrix::from_fn(32, 32, |r, c| start_vector(1, seed * 1000 + (r * 32 + c) as u64)[0]));
        let n = LinOp::dense(&g, DMatrix::from_fn(32, 32, |r, c| start_vector(1, seed * 1000 + 7 + (r * 32 + c) as u64)[0]));
        let lhs = dense(&delta(&m.mul(&n), a, 0));
        let tnt = LinOp::compose(vec![t.clone(), n.clone(), t.adjoint()]).unwrap();
        let rhs = dense(&delta(&m, a, 0).mul(&tnt).add(&m.mul(&delta(&n, a, 0))));
        assert!(dense_norm(&(&lhs - &rhs)) <= 1e-12 * dense_norm(&lhs), "{}", dense_norm(&(&lhs - &rhs)));
    }
}

#[test]
fn a_translation_commutator_matches_dense() {
    let g = unit_grid();
    let a = 1.0;
    let ia = dense(&nakamura_component(&g, a, 0).scale(I));
    let t = dense(&translation(&g, a, 0));
    let oracle = &ia * &t - &t * &ia;
    let c = dense(&a_translation_commutator(&g, a, 0, 0));
    assert!(inner_err(&g, &c, &oracle) <= 1e-8);
}

#[test]
fn first_commutator_matches_dense_oracle() {
    let g = unit_grid();
    let a = 1.0;
    let ia2 = dense(&nakamura_component(&g, a, 0).scale(C64::new(0.0, 2.0)));
    let mut vs: Vec<LinOp> = (0..10).map(|s| random_diagonal(&g, 100 + s)).collect();
    vs.push(LinOp::position(&g, 0));
    for v in &vs {
        let vd = dense(v);
        let oracle = &ia2 * &vd - &vd * &ia2;
        let got = dense(&first_commutator_an(v, a, 0));
        let err = inner_err(&g, &got, &oracle);
        assert!(err <= 1e-8, "{err}");
    }
    assert_eq!(dense_norm(&dense(&first_commutator_an(&LinOp::zero(&g), a, 0))), 0.0);
}

#[test]
fn first_commutator_is_self_adjoint_for_real_potentials() {
    let g = unit_grid();
    for s in 0..3 {
        let c = dense(&first_commutator_an(&random_diagonal(&g, s), 1.0, 0));
        let drift = dense_form_norm(&g, &(&c - c.adjoint()), &TestWindow::sharp(0.5)).unwrap();
        assert!(drift <= 1e-12 * dense_norm(&c), "{drift}");
        assert!(dense_norm(&c) > 0.1);
    }
}

#[test]
fn coordinate_reduction_of_first_commutator() {
    // V = q: (b+q) a T + T^*(b+q) a
    let g = unit_grid();
    let a = 1.0;
    let t = translation(&g, a, 0);
    let bq = LinOp::diagonal_fn(&g, |x| C64::new(0.5 * a + x[0], 0.0));
    let expected = dense(&bq.mul(&t).scale_re(a).add(&t.adjoint().mul(&bq).scale_re(a)));
    let got = dense(&first_commutator_an(&LinOp::position(&g, 0), a, 0));
    assert!(inner_err(&g, &got, &expected) <= 1e-12);
}

#[test]
fn second_commutator_matches_nested_dense_oracle() {
    let g = unit_grid();
    let a = 1.0;
    let ia = dense(&nakamura_component(&g, a, 0).scale(I));
    let q = LinOp::position(&g, 0);
    let mut vs: Vec<LinOp> = (0..10).map(|s| random_diagonal(&g, 200 + s)).collect();
    vs.push(q.mul(&q));
    for v in &vs {
        let vd = dense(v);
        let inner_c = &ia * &vd - &vd * &ia;
        let oracle = &ia * &inner_c - &inner_c * &ia;
        let got = dense(&second_commutator_an(v, a, 0, 0));
        let err = inner_err(&g, &got, &oracle);
        assert!(err <= 1e-8, "{err}");
    }
    assert_eq!(dense_norm(&dense(&second_commutator_an(&LinOp::zero(&g), a, 0, 0))), 0.0);
}

#[test]
fn mixed_second_commutators_agree_in_two_dimensions() {
    let g = Grid::centered(2, 16, 8.0).unwrap();
    let a = 1.0;
    let v = random_diagonal(&g, 9);
    let vd = dense(&v);
    let ia: Vec<DMatrix<C64>> = (0..2).map(|j| dense(&nakamura_component(&g, a, j).scale(I))).collect();
    let c = |x: &DMatrix<C64>, y: &DMatrix<C64>| x * y - y * x;
    let jk = dense(&second_commutator_an(&v, a, 0, 1));
    let kj = dense(&second_commutator_an(&v, a, 1, 0));
    let oracle = c(&ia[0], &c(&ia[1], &vd));
    assert!(inner_err(&g, &jk, &oracle) <= 1e-8);
    assert!(inner_err(&g, &jk, &kj) <= 1e-8);
    let qq = LinOp::position(&g, 0).mul(&LinOp::position(&g, 1));
    let got = dense(&second_commutator_an(&qq, a, 0, 1));
    let oracle = c(&ia[0], &c(&ia[1], &dense(&qq)));
    assert!(inner_err(&g, &got, &oracle) <= 1e-8);
    assert!(dense_norm(&got) > 0.1);
}

#[test]
fn second_difference_is_the_mixed_difference() {
    let g = Grid::centered(2, 16, 8.0).unwrap();
    let f = |x: f64, y: f64| (0.3 * x).sin() * (0.2 * y + 0.1 * x * y).cos();
    let v = LinOp::diagonal_fn(&g, |x| C64::new(f(x[0], x[1]), 0.0));
    let d = dense(&second_difference(&v, 1.0, 0, 1));
    for i in 0..g.len() {
        let [x, y, _] = g.position(i);
        if x.abs() < 6.0 && y.abs() < 6.0 {
            let e = f(x + 1.0, y + 1.0) - f(x + 1.0, y) - f(x, y + 1.0) + f(x, y);
            assert!((d[(i, i)].re - e).abs() < 1e-12);
        }
    }
}

#[test]
fn difference_bounded_by_derivative_commutator() {
    // on the torus delta(V) = int_0^a T_s [ip, V] T_s^* ds, so the bound holds for any V
    let g = Grid::centered(1, 128, 16.0).unwrap();
    let p = LinOp::momentum(&g, 0);
    let specs = [
        PotentialSpec::decay(1.0),
        PotentialSpec::decay(2.0),
        PotentialSpec::decay(3.0),
        PotentialSpec::oscillating(1.5, 1.0).with_taper(6.0),
        PotentialSpec::oscillating(2.0, 1.0).with_taper(6.0),
        PotentialSpec::exponential(Cutoff::unit()).with_taper(2.5),
        PotentialSpec::constant(1.0),
        PotentialSpec::custom("gauss", |x| (-x[0] * x[0]).exp()),
        PotentialSpec::custom("wide_gauss", |x| 3.0 * (-x[0] * x[0] / 20.0).exp()),
        PotentialSpec::custom("cos_packet", |x| (2.0 * x[0]).cos() * (-x[0] * x[0] / 8.0).exp()),
    ];
    for spec in &specs {
        let v = LinOp::diagonal(&g, realize(spec, &g).unwrap().values);
        for a in [0.25, 0.5, 1.0] {
            let lhs = dense_norm(&dense(&delta(&v, a, 0)));
            let rhs = a * dense_norm(&dense(&p.commutator(&v)));
            assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-13, "{}: {lhs} > {rhs}", spec.label());
        }
    }
}

#[test]
fn generic_commutator_basics() {
    let g = unit_grid();
    let a = assemble_a(&g, &VectorField::Arctan);
    assert!(dense_norm(&dense(&generic_commutator(&a, &a))) < 1e-12);
    // [Delta, iA_u] against the multiplier symbol on band-limited states
    let g = Grid::centered(1, 256, 40.0).unwrap();
    for u in [VectorField::Nakamura { a: 1.0 }, VectorField::Arctan] {
        let c = generic_commutator(&laplacian(&g), &assemble_a(&g, &u)).scale(I);
        let diff = c.sub(&laplacian_commutator(&g, &u));
        let err = form_norm(&diff, &TestWindow::band_limited(), NormMethod::default()).unwrap();
        assert!(err <= 1e-8, "{}: {err}", u.label());
    }
}

#[test]
fn iterated_commutator_is_resolution_stable() {
    // (alpha, beta) = (3, 1): alpha + beta - 1 >= 2, so ad^2 stays bounded
    let spec = PotentialSpec::oscillating(3.0, 1.0).with_taper(4.0);
    let mut vals = Vec::new();
    for n in [2048, 4096] {
        let g = Grid::centered(1, n, 16.0).unwrap();
        let v = LinOp::diagonal(&g, realize(&spec, &g).unwrap().values);
        let a = assemble_a(&g, &VectorField::Arctan);
        vals.push(h1_form_norm(&iterated(&v, &a, 2), &TestWindow::sharp(0.5), NormMethod::default()).unwrap());
    }
    assert!(vals[0].is_finite() && vals[0] > 0.0);
    assert!((vals[0] - vals[1]).abs() <= 0.02 * vals[1], "{vals:?}");
}

#[test]
fn dense_iteration_refuses_large_grids() {
    let g = Grid::centered(1, 64, 8.0).unwrap();
    let v = LinOp::position(&g, 0);
    let a = assemble_a(&g, &VectorField::Arctan);
    assert!(matches!(iterated_dense(&v, &a, 2, 32), Err(mourre_core::Error::SizeCap { .. })));
    let d = iterated_dense(&v, &a, 1, 64).unwrap();
    let m = dense(&iterated(&v, &a, 1));
    assert!(dense_norm(&(&d - &m)) < 1e-10 * dense_norm(&m));
}

#[test]
fn zero_potential_regularity_reports() {
    let g = Grid::centered(1, 128, 16.0).unwrap();
    let z = LinOp::zero(&g);
    let u = VectorField::Arctan;
    let taus = c11_schedule(&g, &u, 1.0, 4);
    let rep = c11_double_difference(&z, &u, &taus, &TransportOptions::default(), NormMethod::default()).unwrap();
    assert!(rep.profile.values.iter().all(|v| *v == 0.0));
    assert_eq!(rep.verdict, Verdict::Satisfied);
    let rep = lr_scan(&z, &LrMode::Generic(u), &[1.0, 2.0, 4.0], NormMethod::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::Satisfied);
}

#[test]
fn lr_scan_compact_potential_vanishes_beyond_support() {
    // spacing 0.25 so a = 1 is an exact roll and delta stays local
    let g = Grid::centered(1, 256, 32.0).unwrap();
    let v = LinOp::diagonal(&g, realize(&PotentialSpec::custom("compact", |x| mourre_core::potentials::bump(x[0] / 3.0)), &g).unwrap().values);
    let rep = lr_scan(&v, &LrMode::Nakamura { a: 1.0, axis: 0 }, &geomspace(1.0, 10.0, 8), NormMethod::default()).unwrap();
    let vals = &rep.profile.values;
    assert!(vals[0] > 0.0);
    for (r, val) in rep.profile.axis_values.iter().zip(vals) {
        if *r > 4.0 {
            assert_eq!(*val, 0.0, "r = {r}");
        }
    }
    assert_eq!(rep.verdict, Verdict::Satisfied);
}

#[test]
fn lr_scan_inverse_square_decays() {
    let g = Grid::centered(1, 1024, 40.0).unwrap();
    let v = LinOp::diagonal(&g, realize(&PotentialSpec::decay(2.0), &g).unwrap().values);
    for mode in [LrMode::Nakamura { a: 1.0, axis: 0 }, LrMode::Generic(VectorField::Arctan)] {
        let rep = lr_scan(&v, &mode, &geomspace(1.0, 10.0, 8), NormMethod::default()).unwrap();
        let fit = rep.fit.unwrap();
        assert!(fit.slope <= -1.0, "{mode:?}: {}", fit.slope);
        assert_eq!(rep.verdict, Verdict::Satisfied);
    }
}

#[test]
fn lr_scan_drops_radii_beyond_window() {
    let g = Grid::centered(1, 256, 16.0).unwrap();
    let v = LinOp::diagonal(&g, realize(&PotentialSpec::decay(2.0), &g).unwrap().values);
    let rep = lr_scan(&v, &LrMode::Nakamura { a: 0.5, axis: 0 }, &[1.0, 2.0, 4.0, 8.0], NormMethod::default()).unwrap();
    assert_eq!(rep.dropped, vec![8.0]);
    assert_eq!(rep.profile.len(), 3);
}

#[test]
fn comb_is_regular_for_bounded_fields() {
    let g0 = Grid::centered(1, 4096, 40.0).unwrap();
    let g = Grid::new(1, 4096, 40.0, 0.5 * g0.spacing()).unwrap();
    let v = LinOp::diagonal(&g, realize(&PotentialSpec::fourier_comb(), &g).unwrap().values);
    for mode in [LrMode::Nakamura { a: 1.0, axis: 0 }, LrMode::Generic(VectorField::Arctan)] {
        let rep = lr_scan(&v, &mode, &geomspace(1.0, 10.0, 8), NormMethod::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Satisfied, "{mode:?} {:?}", rep.fit);
    }
}

#[test]
fn double_difference_satisfied_for_resolved_oscillation() {
    let g = Grid::centered(1, 512, 20.0).unwrap();
    let v = LinOp::diagonal(&g, realize(&PotentialSpec::oscillating(2.0, 1.0).with_taper(7.5), &g).unwrap().values);
    let u = VectorField::Arctan;
    let rep = c11_double_difference(&v, &u, &c11_schedule(&g, &u, 1.0, 8), &TransportOptions::default(), NormMethod::default())
        .unwrap();
    assert!(rep.profile.values.iter().all(|x| *x > 0.0 && x.is_finite()));
    assert_eq!(rep.verdict, Verdict::Satisfied, "{:?}", rep.fit);
}

#[test]
fn lr_verdict_implies_double_difference_verdict() {
    let g = Grid::centered(1, 512, 20.0).unwrap();
    let u = VectorField::Arctan;
    let taus = c11_schedule(&g, &u, 1.0, 6);
    let specs = [
        PotentialSpec::decay(2.0),
        PotentialSpec::custom("compact", |x| mourre_core::potentials::bump(x[0] / 3.0)),
        PotentialSpec::oscillating(2.0, 1.0).with_taper(7.5),
    ];
    for spec in &specs {
        let v = LinOp::diagonal(&g, realize(spec, &g).unwrap().values);
        let lr = lr_scan(&v, &LrMode::Generic(u.clone()), &geomspace(0.5, 5.0, 6), NormMethod::default()).unwrap();
        if lr.verdict == Verdict::Satisfied {
            let c = c11_double_difference(&v, &u, &taus, &TransportOptions::default(), NormMethod::default()).unwrap();
            assert_eq!(c.verdict, Verdict::Satisfied, "{}", spec.label());
        }
    }
}

#[test]
fn double_difference_stops_at_transport_failure() {
    let g = Grid::centered(1, 128, 16.0).unwrap();
    let v = LinOp::diagonal(&g, realize(&PotentialSpec::decay(2.0), &g).unwrap().values);
    let rep = c11_double_difference(&v, &VectorField::Dilation, &[0.1, 0.5, 0.05], &TransportOptions::default(), NormMethod::default())
        .unwrap();
    assert_eq!(rep.profile.len(), 1);
    assert_eq!(rep.dropped, vec![0.5, 0.05]);
    assert_eq!(rep.verdict, Verdict::Inconclusive);
    assert!(!rep.notes.is_empty());
}

fn comb_grid() -> Grid {
    let g0 = Grid::centered(1, 65536, 10.0 * std::f64::consts::PI).unwrap();
    Grid::new(1, 65536, 10.0 * std::f64::consts::PI, 0.5 * g0.spacing()).unwrap()
}

#[test]
fn comb_witnesses_grow() {
    let g = comb_grid();
    let comb = PotentialSpec::fourier_comb();
    let sched: Vec<f64> = (1..=11).map(|p| (1u64 << p) as f64).collect();
    let r = witness_sequence(&comb, WitnessKind::CombDilation, &sched, Some(&g)).unwrap();
    assert!(r.monotone && r.growth >= 10.0, "{:?}", r.normalized);
    assert!(r.norm_products.iter().all(|n| (0.9..1.2).contains(n)));
    // lower bound (N-1)/<N+1> lambda_N int_0^2 chi, up to the quadrature of chi
    let chi_int: f64 = (0..2000).map(|i| mourre_core::potentials::bump(-1.0 + (i as f64 + 0.5) / 1000.0) / 1000.0).sum();
    for (n, p) in r.record.axis_values.iter().zip(&r.record.values) {
        let lambda = n.log2();
        let bound = (n - 1.0) / (1.0 + (n + 1.0) * (n + 1.0)).sqrt() * lambda * chi_int;
        assert!(*p >= 0.5 * bound / (2.0 * std::f64::consts::PI).sqrt(), "N = {n}: {p} vs {bound}");
    }
    let sched: Vec<f64> = (1..=11).map(|p| (1u64 << p) as f64 + 1.0).collect();
    let r = witness_sequence(&comb, WitnessKind::CombDeltaBound, &sched, Some(&g)).unwrap();
    assert!(r.monotone && r.growth >= 10.0, "{:?}", r.normalized);
    let spread = r.norm_products.iter().cloned().fold(0.0, f64::max) / r.norm_products.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1.0 + 1e-9);
}

#[test]
fn comb_witness_truncates_beyond_grid() {
    let g = Grid::new(1, 1024, 10.0 * std::f64::consts::PI, 0.01).unwrap();
    let r = witness_sequence(&PotentialSpec::fourier_comb(), WitnessKind::CombDilation, &[2.0, 4.0, 64.0], Some(&g)).unwrap();
    assert_eq!(r.truncated, vec![64.0]);
    assert_eq!(r.record.len(), 2);
}

#[test]
fn zero_potential_witnesses_vanish() {
    let z = PotentialSpec::constant(0.0);
    let g = Grid::new(1, 4096, 10.0 * std::f64::consts::PI, 0.01).unwrap();
    let r = witness_sequence(&z, WitnessKind::CombDilation, &[2.0, 4.0], Some(&g)).unwrap();
    assert!(r.record.values.iter().all(|v| *v == 0.0));
    let r = witness_sequence(&z, WitnessKind::ExponentialDilation, &[1.0, 10.0], None).unwrap();
    assert!(r.record.values.iter().all(|v| *v == 0.0));
}

#[test]
fn exponential_witnesses_grow_with_bounded_norms() {
    let e = PotentialSpec::exponential(Cutoff::unit());
    let sched: Vec<f64> = (1..=10).map(|p| 10f64.powi(p)).collect();
    let r = witness_sequence(&e, WitnessKind::ExponentialDeltaBound, &sched, None).unwrap();
    assert!(r.monotone && r.growth >= 10.0, "{:?}", r.normalized);
    let sched: Vec<f64> = (0..=6).map(|p| 10f64.powi(p)).collect();
    let r = witness_sequence(&e, WitnessKind::ExponentialDilation, &sched, None).unwrap();
    assert!(r.monotone && r.growth >= 10.0, "{:?}", r.normalized);
    assert!(r.norm_products.iter().all(|n| (7.0..7.5).contains(n)));
}

#[test]
fn exponential_quadrature_matches_grid_sum() {
    let e = PotentialSpec::exponential(Cutoff::unit());
    let g = Grid::new(1, 1 << 18, 8.0, 1e-5).unwrap();
    for kind in [WitnessKind::ExponentialDeltaBound, WitnessKind::ExponentialDilation] {
        for n in [1.0, 2.0, 3.0] {
            let on_grid = exponential_witness_on_grid(kind, n, &g).unwrap();
            let quad = witness_sequence(&e, kind, &[n], None).unwrap().record.values[0];
            assert!((on_grid.abs() - quad).abs() <= 1e-8 * quad, "{kind:?} {n}: {on_grid} vs {quad}");
        }
    }
}

#[test]
fn packet_witness_grows_outside_dilation_region() {
    // |alpha - 1| + beta < 1
    let w = PotentialSpec::oscillating(1.2, 0.3);
    let sched = geomspace(10.0, 10000.0, 7);
    let r = witness_sequence(&w, WitnessKind::PacketDilation { alpha: 1.2, width: 1.0 }, &sched, None).unwrap();
    assert!(r.monotone && r.growth >= 10.0, "{:?}", r.normalized);
    // inside the region the normalized pairing stays bounded
    let w = PotentialSpec::oscillating(1.2, 1.0);
    let r = witness_sequence(&w, WitnessKind::PacketDilation { alpha: 1.2, width: 1.0 }, &sched, None).unwrap();
    assert!(r.normalized.iter().all(|v| *v < 1.0), "{:?}", r.normalized);
}
