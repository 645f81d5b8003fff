use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qgraph::boundary::{BoundaryCondition, Preset};
use qgraph::expansion::{
    genef_residual, hs_norm, inverse_l2_sqr_quadrature, parseval, standard_battery, weight,
    weighted_norm_sqr, DiscreteSpectralRep, TestFunction, Weight,
};
use qgraph::fixtures;
use qgraph::graph::{EdgeEnd, End, MetricGraph, Point};
use qgraph::secular::{modes, solve_at_energy, ScanOptions};

fn kirchhoff_star() -> (MetricGraph, BoundaryCondition) {
    let g = fixtures::star(&[1.5, 2.0, 2.5]);
    let bc = BoundaryCondition::uniform(&g, Preset::Kirchhoff);
    (g, bc)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn weight_dominates_powered_distance(eps in 0.05f64..2.0, k in 0usize..11, s in 0.0f64..1.0, base in 0usize..11) {
        let g = fixtures::path(10, 1.3);
        let x0 = Point::Vertex(base);
        let w = weight(&g, &x0, eps).unwrap();
        let e = k % g.edge_count();
        let t = s * g.length(e);
        let d = w.distance(e, t);
        prop_assert!(w.value(e, t) >= d.powf(1.0 + eps) * (1.0 - 1e-12));
        prop_assert!(w.value(e, t) >= 1.0);
        let exact = w.inverse_l2_sqr();
        let quad = inverse_l2_sqr_quadrature(&g, &w, 8);
        prop_assert!((exact - quad).abs() < 1e-10 * exact.max(1.0), "{exact} {quad}");
    }
}

#[test]
fn eigenfunctions_of_a_star_are_generalized_eigenfunctions() {
    let (g, bc) = kirchhoff_star();
    let rep = DiscreteSpectralRep::new(
        &g,
        modes(&g, &bc, &ScanOptions::new(&g, -1.0, 60.0)).unwrap(),
    );
    assert!(rep.mode_count() > 8);
    let tests = standard_battery(&g, &bc).unwrap();
    for (_, phi) in rep.modes() {
        assert!(phi.vertex_residual(&g, &bc) < 1e-8);
        let r = genef_residual(&g, &bc, phi, phi.lambda, &tests, None).unwrap();
        assert!(r.worst < 1e-8, "λ = {}: {r:?}", phi.lambda);
    }
    let w = weight(&g, &Point::Vertex(0), 0.5).unwrap();
    let hs = hs_norm(&rep, &w, 1.0).unwrap();
    assert!(hs.hs_norm_sq.is_finite() && hs.hs_norm_sq > hs.partial_sum - 1e-15);
    for (_, phi) in rep.modes() {
        // ‖w⁻¹φ‖ ≤ ‖φ‖ since w ≥ 1
        assert!(weighted_norm_sqr(phi, &w) <= 1.0 + 1e-10);
    }
}

#[test]
fn parseval_on_a_star() {
    let (g, bc) = kirchhoff_star();
    let rep = DiscreteSpectralRep::new(
        &g,
        modes(&g, &bc, &ScanOptions::new(&g, -1.0, 3000.0)).unwrap(),
    );
    // continuous at the center, Kirchhoff-compatible, smooth on each edge
    let f = |e: usize, t: f64| {
        let l = [1.5, 2.0, 2.5][e];
        Complex64::new(
            (PI * t / (2.0 * l)).cos() * (1.0 + 0.1 * e as f64 * t * t),
            0.0,
        )
    };
    let p = parseval(&rep, &f).unwrap();
    assert!(p.relative_gap < 1e-4, "{p:?}");
}

#[test]
fn generalized_eigenfunctions_off_the_spectrum() {
    // star with one free tip: for any λ there is a solution of all other conditions
    let (g, bc) = kirchhoff_star();
    let lambda = 3.3;
    let free = EdgeEnd {
        edge: 2,
        end: End::Term,
    };
    let sols = solve_at_energy(&g, &bc, lambda, &[free]).unwrap();
    assert_eq!(sols.len(), 1);
    let tests: Vec<TestFunction> = standard_battery(&g, &bc)
        .unwrap()
        .into_iter()
        .filter(|t| !matches!(t, TestFunction::Vertex { vertex: 3, .. }))
        .collect();
    let r = genef_residual(&g, &bc, &sols[0], lambda, &tests, None).unwrap();
    assert!(r.worst < 1e-8, "{r:?}");
}

#[test]
fn constant_weight_hs_norm_on_g1() {
    let g = fixtures::interval(PI);
    let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
    let rep = DiscreteSpectralRep::new(
        &g,
        modes(&g, &bc, &ScanOptions::new(&g, 0.5, 420.0)).unwrap(),
    );
    assert_eq!(rep.mode_count(), 20);
    let one = qgraph::expansion::ConstantWeight::new(&g, 1.0).unwrap();
    assert!((one.inverse_l2_sqr() - PI).abs() < 1e-14);
    let r = hs_norm(&rep, &one, 1.0).unwrap();
    assert!((r.hs_norm_sq - (PI / PI.tanh() - 1.0) / 2.0).abs() < 1e-3);
}
