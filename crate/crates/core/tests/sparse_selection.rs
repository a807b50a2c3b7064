use std::sync::Arc;

use sparse_radon::cloud::pairing;
use sparse_radon::dyadic::{build_grid_with, GridMode};
use sparse_radon::geometry::models;
use sparse_radon::operators::{CZKernel, Cutoff, RadonOperator};
use sparse_radon::sht::presets;
use sparse_radon::sparse::*;
use sparse_radon::DyadicGrid;

fn hilbert_line(n: usize) -> (DyadicGrid, RadonOperator) {
    let s = Arc::new(presets::unit_interval(n));
    let g = build_grid_with(s.clone(), 0.5, 0, GridMode::Classical).unwrap();
    let op = RadonOperator::new(s, models::monomial(&[1]).with_radius(0.05), CZKernel::hilbert(0.05), 0.5)
        .unwrap()
        .with_cutoffs(Cutoff::in_box(&[0.0], &[1.0], 0.8, 0.85), Cutoff::in_box(&[0.0], &[1.0], 0.9, 0.95))
        .unwrap();
    (g, op)
}

fn params(whitney: WhitneyRule) -> SelectParams {
    SelectParams { r: 1.5, s: 2.0, sigma: 0.5, whitney }
}

/// Spikes inside the right half, on top of a constant floor.
fn spiky_pair(g: &DyadicGrid, q0: sparse_radon::CubeId) -> (Vec<f64>, Vec<f64>) {
    let s = g.sht();
    let mut f1 = vec![0.0; s.len()];
    let mut f2 = vec![0.0; s.len()];
    for &m in &g.cube(q0).members {
        let p = s.point(m)[0];
        f1[m] = if (p - 0.7).abs() < 0.02 { 30.0 } else { 1.0 };
        f2[m] = if (p - 0.71).abs() < 0.003 { 50.0 } else { 1.0 };
    }
    (f1, f2)
}

#[test]
fn recursion_descends_and_stays_sparse() {
    let (g, op) = hilbert_line(2048);
    let q0 = starting_cube(&g, g.sht().cloud().nearest(&[0.75]), 1).unwrap();
    let (f1, f2) = spiky_pair(&g, q0);
    let sel = sparse_select(&op, &g, q0, &f1, &f2, params(WhitneyRule::Smallest)).unwrap();
    assert!(sel.family.len() > 1, "{:?}", sel.trace);
    assert!(sel.trace.iter().any(|t| t.depth >= 1));
    assert_eq!(sel.family.cubes[0].id, q0);
    let chk = verify_sparse(&sel.family, g.sht());
    assert!(chk.holds(), "{chk:?}");
    assert!(chk.worst_ratio >= 0.5);
    let dom = domination_check(&op, &sel.family, &f1, &f2, 1.5, 2.0, sel.support.kappa_prime).unwrap();
    assert!(dom.ratio.is_finite() && dom.rhs > 0.0);
}

#[test]
fn processed_cubes_stay_inside_their_parent() {
    let (g, op) = hilbert_line(2048);
    let q0 = starting_cube(&g, g.sht().cloud().nearest(&[0.75]), 1).unwrap();
    let (f1, f2) = spiky_pair(&g, q0);
    let sel = sparse_select(&op, &g, q0, &f1, &f2, params(WhitneyRule::Smallest)).unwrap();
    let root = &g.cube(q0).members;
    for q in &sel.family.cubes {
        assert!(q.members.iter().all(|m| root.binary_search(m).is_ok()));
        assert!(q.witness.iter().all(|m| q.members.binary_search(m).is_ok()));
    }
}

#[test]
fn constrained_constant_is_recorded() {
    let (g, op) = hilbert_line(1024);
    let q0 = starting_cube(&g, g.sht().cloud().nearest(&[0.75]), 1).unwrap();
    let (f1, f2) = spiky_pair(&g, q0);
    let sel = sparse_select(&op, &g, q0, &f1, &f2, params(WhitneyRule::Constrained)).unwrap();
    let wc = whitney_constant(&g, sel.support.displacement).unwrap();
    assert_eq!(sel.whitney_constant, wc.value);
    assert!(verify_sparse(&sel.family, g.sht()).holds());
}

#[test]
fn zero_input_gives_the_starting_cube_and_a_zero_form() {
    let (g, op) = hilbert_line(1024);
    let q0 = starting_cube(&g, g.sht().cloud().nearest(&[0.75]), 1).unwrap();
    let (_, f2) = spiky_pair(&g, q0);
    let zero = vec![0.0; g.sht().len()];
    let sel = sparse_select(&op, &g, q0, &zero, &f2, params(WhitneyRule::Smallest)).unwrap();
    assert_eq!(sel.family.len(), 1);
    let dom = domination_check(&op, &sel.family, &zero, &f2, 1.5, 2.0, sel.support.kappa_prime).unwrap();
    assert_eq!((dom.lhs, dom.rhs, dom.ratio), (0.0, 0.0, 0.0));
}

#[test]
fn orthogonal_partner_has_no_pairing() {
    let (g, op) = hilbert_line(1024);
    let s = g.sht();
    let q0 = starting_cube(&g, s.cloud().nearest(&[0.75]), 1).unwrap();
    let (f1, h) = spiky_pair(&g, q0);
    let tf = op.apply_full(&f1).unwrap();
    let w = s.weights();
    let c = pairing(w, &tf, &h) / pairing(w, &tf, &tf);
    let f2: Vec<f64> = h.iter().zip(&tf).map(|(a, b)| a - c * b).collect();
    let fam = SparseFamily::canonical(&g, &[q0], 0.5);
    let dom = domination_check(&op, &fam, &f1, &f2, 1.5, 2.0, 1.1).unwrap();
    assert!(dom.lhs < 1e-12 * dom.rhs, "{dom:?}");
}

#[test]
fn inputs_outside_the_starting_cube_are_rejected() {
    let (g, op) = hilbert_line(1024);
    let q0 = starting_cube(&g, g.sht().cloud().nearest(&[0.75]), 1).unwrap();
    let one = vec![1.0; g.sht().len()];
    assert!(sparse_select(&op, &g, q0, &one, &one, params(WhitneyRule::Smallest)).is_err());
}
