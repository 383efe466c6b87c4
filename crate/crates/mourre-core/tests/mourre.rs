use std::f64::consts::PI;

use mourre_core::conjugate::VectorField;
use mourre_core::error::Error;
use mourre_core::hamiltonian::Hamiltonian;
use mourre_core::mourre::*;
use mourre_core::potentials::{realize, PotentialSpec};
use mourre_core::Grid;
use proptest::prelude::*;

fn grid(n: usize, l: f64) -> Grid {
    Grid::centered(1, n, l / 2.0).unwrap()
}

/// Box of length `12 pi`: momentum spacing `1/6`, so `k = 0.5` is a node.
fn commensurate(n: usize) -> Grid {
    grid(n, 12.0 * PI)
}

#[test]
fn projection_is_orthogonal() {
    let g = grid(128, 20.0);
    let v = realize(&PotentialSpec::decay(2.0), &g).unwrap();
    let s = Hamiltonian::new(&v).spectrum().unwrap();
    let e = spectral_projection(&s, (0.2, 1.5)).to_dense().unwrap();
    assert!((&e * &e - &e).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    assert!((e.adjoint() - &e).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
}

#[test]
fn window_inf_known_values() {
    let g = grid(256, 40.0);
    let w = window_inf(&g, &VectorField::Nakamura { a: 1.0 }, (0.25, 0.64)).unwrap();
    assert!((w - 0.479425538604203).abs() < 1e-12);
    // dilation symbol is 2|k|^2
    let d = window_inf(&g, &VectorField::Dilation, (1.0, 4.0)).unwrap();
    assert!((d - 2.0).abs() < 1e-12);
}

#[test]
fn window_inf_sign_at_window_edge() {
    let g = grid(256, 40.0);
    let u = VectorField::Nakamura { a: 1.0 };
    let (_, top) = nakamura_window(1.0).unwrap();
    assert!(window_inf(&g, &u, (0.1, top - 0.1)).unwrap() > 0.0);
    assert!(window_inf(&g, &u, (1.0, top + 0.5)).unwrap() <= 0.0);
    let full = window_inf(&g, &u, (0.0, top)).unwrap();
    assert!(full.abs() < 1e-12);
}

#[test]
fn window_errors() {
    let g = grid(64, 40.0);
    let u = VectorField::Nakamura { a: 1.0 };
    assert!(matches!(nakamura_window(0.0), Err(Error::InvalidParameter(_))));
    assert!(matches!(window_inf(&g, &u, (2.0, 1.0)), Err(Error::InvalidParameter(_))));
    assert!(matches!(window_inf(&g, &u, (0.0, 1e6)), Err(Error::InvalidParameter(_))));
    // no momentum node between the first two shells
    let dk = g.momentum_spacing();
    assert!(matches!(node_inf(&g, &u, (0.1 * dk * dk, 0.2 * dk * dk)), Err(Error::EmptyShell { .. })));
}

#[test]
fn free_compression_matches_window() {
    let g = commensurate(256);
    let h = Hamiltonian::free(&g);
    let s = h.spectrum().unwrap();
    let c = mourre_constant(&h, &s, &VectorField::Nakamura { a: 1.0 }, (0.25, 0.64), &MourreOptions::default())
        .unwrap();
    let bottom = c.bottom().unwrap();
    assert!((bottom - c.window_inf).abs() <= 0.05 * c.window_inf, "{bottom} vs {}", c.window_inf);
    assert_eq!(c.defect_count, 0);
    assert!(c.hermitian_drift < 1e-10);
}

#[test]
fn off_grid_box_resolves_node_infimum() {
    let g = grid(256, 40.0);
    let h = Hamiltonian::free(&g);
    let s = h.spectrum().unwrap();
    let c = mourre_constant(&h, &s, &VectorField::Nakamura { a: 1.0 }, (0.25, 0.64), &MourreOptions::default())
        .unwrap();
    assert!((c.bottom().unwrap() - c.c0_multiplier).abs() < 1e-10);
    assert!(c.c0_multiplier > c.window_inf);
}

#[test]
fn empty_interval_below_spectrum() {
    let g = grid(64, 20.0);
    let h = Hamiltonian::free(&g);
    let s = h.spectrum().unwrap();
    let dk = g.momentum_spacing();
    // between the zero mode and the first shell
    let c = mourre_constant(&h, &s, &VectorField::Dilation, (0.0, 0.5 * dk * dk), &MourreOptions::default())
        .unwrap();
    assert_eq!(c.eigenvalues_of_h_in_i.len(), 1);
    let c = mourre_constant(&h, &s, &VectorField::Dilation, (0.2 * dk * dk, 0.5 * dk * dk), &MourreOptions::default());
    assert!(matches!(c, Err(Error::EmptyShell { .. })));
}

#[test]
fn oscillating_defects_stable_under_refinement() {
    let u = VectorField::Nakamura { a: 1.0 };
    let spec = PotentialSpec::oscillating(2.0, 1.0).with_taper(15.0);
    let counts: Vec<usize> = [256, 512]
        .iter()
        .map(|&n| {
            let g = grid(n, 40.0);
            let h = Hamiltonian::new(&realize(&spec, &g).unwrap());
            let s = h.spectrum().unwrap();
            mourre_constant(&h, &s, &u, (0.25, 0.64), &MourreOptions::default()).unwrap().defect_count
        })
        .collect();
    assert!(counts[0].abs_diff(counts[1]) <= 1, "{counts:?}");
}

#[test]
fn well_eigenvalue_is_localized() {
    let g = grid(256, 40.0);
    let v = realize(&PotentialSpec::custom("well", |x| -4.0 * (-x[0] * x[0]).exp()), &g).unwrap();
    let s = Hamiltonian::new(&v).spectrum().unwrap();
    assert!(s.values[0] < 0.0);
    assert!(s.localization(0) < 1e-3);
    // a high free-like state spreads over the box
    assert!(s.localization(200) > 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn window_inf_monotone_on_nested(lo in 0.05f64..1.0, w in 0.1f64..3.0, shrink in 0.0f64..0.45) {
        let g = grid(256, 40.0);
        let u = VectorField::Nakamura { a: 1.0 };
        let hi = lo + w;
        let inner = (lo + shrink * w, hi - shrink * w);
        let outer = window_inf(&g, &u, (lo, hi)).unwrap();
        let inside = window_inf(&g, &u, inner).unwrap();
        prop_assert!(inside >= outer - 1e-12);
    }

    #[test]
    fn window_inf_positive_inside_nakamura(a in 0.5f64..2.0, f0 in 0.05f64..0.45, f1 in 0.55f64..0.95) {
        let g = grid(256, 40.0);
        let (_, top) = nakamura_window(a).unwrap();
        let w = window_inf(&g, &VectorField::Nakamura { a }, (f0 * top, f1 * top)).unwrap();
        prop_assert!(w > 0.0);
    }
}
