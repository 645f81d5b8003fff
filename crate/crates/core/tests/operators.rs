use std::f64::consts::PI;

use qgraph::boundary::{BoundaryCondition, Preset};
use qgraph::fem::{assemble, check_heins, check_randterm, eigensystem};
use qgraph::fixtures;
use qgraph::graph::MetricGraph;
use qgraph::linalg::fro;
use qgraph::sampling::FormSampler;
use qgraph::secular::{eigenvalues_scan, ScanOptions};

fn fixture_set() -> Vec<(&'static str, MetricGraph, BoundaryCondition)> {
    let iv = fixtures::interval(PI);
    let star = fixtures::star(&[1.5, 2.0, 2.5]);
    let lw = fixtures::loop_with_edge(3.0, 2.0);
    vec![
        (
            "dirichlet",
            iv.clone(),
            BoundaryCondition::uniform(&iv, Preset::Dirichlet),
        ),
        (
            "neumann",
            iv.clone(),
            BoundaryCondition::uniform(&iv, Preset::Neumann),
        ),
        (
            "robin",
            iv.clone(),
            BoundaryCondition::uniform(&iv, Preset::Delta(-1.0)),
        ),
        (
            "star",
            star.clone(),
            BoundaryCondition::uniform(&star, Preset::Kirchhoff),
        ),
        (
            "loop",
            lw.clone(),
            BoundaryCondition::uniform(&lw, Preset::Kirchhoff),
        ),
    ]
}

fn exact(g: &MetricGraph, bc: &BoundaryCondition, k: usize) -> Vec<f64> {
    let vals = eigenvalues_scan(g, bc, &ScanOptions::new(g, -3.0, 130.0)).unwrap();
    let all: Vec<f64> = vals
        .iter()
        .flat_map(|v| std::iter::repeat_n(v.lambda, v.multiplicity))
        .collect();
    assert!(all.len() >= k, "only {} eigenvalues found", all.len());
    all[..k].to_vec()
}

#[test]
fn fem_converges_to_secular_at_second_order() {
    for (name, g, bc) in fixture_set() {
        let ex = exact(&g, &bc, 10);
        let mut errors = Vec::new();
        for h in [0.04, 0.02, 0.01] {
            let fa = assemble(&g, &bc, h).unwrap();
            let es = eigensystem(&fa, 10).unwrap();
            for (j, (a, b)) in es.values.iter().zip(&ex).enumerate() {
                assert!(
                    (a - b).abs() <= 10.0 * h * h * b.abs().max(1.0),
                    "{name}: mode {j}, fem {a} vs {b}"
                );
            }
            errors.push(
                es.values
                    .iter()
                    .zip(&ex)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.3, "{name}: order {order}");
        }
    }
}

#[test]
fn assembled_form_is_hermitian_and_mass_is_positive() {
    let g = fixtures::star(&[1.0, 2.0, 1.5]);
    let mut bc = BoundaryCondition::uniform(&g, Preset::Kirchhoff);
    bc.vertices[0] = Preset::Delta(2.0).build(3);
    let fa = assemble(&g, &bc, 0.1).unwrap();
    let op = fa.operator();
    assert_eq!(fro(&(&op - op.adjoint())), 0.0);
    assert!(fa.mass.clone().cholesky().is_some());
}

#[test]
fn form_domains_order_the_spectra() {
    let g = fixtures::star(&[1.0, 1.7, 2.3]);
    let spec = |p: Preset| {
        let bc = BoundaryCondition::uniform(&g, p);
        eigensystem(&assemble(&g, &bc, 0.02).unwrap(), 8)
            .unwrap()
            .values
    };
    let d = spec(Preset::Dirichlet);
    let k = spec(Preset::Kirchhoff);
    let n = spec(Preset::Neumann);
    for j in 0..8 {
        assert!(
            d[j] >= k[j] - 1e-9 && k[j] >= n[j] - 1e-9,
            "mode {j}: {} {} {}",
            d[j],
            k[j],
            n[j]
        );
    }
}

#[test]
fn heins_margin_on_every_fixture() {
    let mut cases = fixture_set();
    let star = fixtures::star(&[1.0, 1.0, 2.0]);
    for alpha in [-30.0, -3.0, 5.0] {
        let mut bc = BoundaryCondition::uniform(&star, Preset::Neumann);
        bc.vertices[0] = Preset::Delta(alpha).build(3);
        cases.push(("delta", star.clone(), bc));
    }
    for (name, g, bc) in cases {
        let fa = assemble(&g, &bc, 0.05).unwrap();
        let hc = fa.heins();
        assert!(hc.s <= 10.0 + 1e-12);
        let samples = FormSampler::new(11).samples(&fa, 300);
        let r = check_heins(&fa, &hc, &samples).unwrap();
        assert!(r.worst_margin >= -1e-8, "{name}: {r:?}");
        assert!(r.extremal >= -1e-8, "{name}: {r:?}");
        for eps in [hc.u / 2.0, hc.u] {
            let r = check_randterm(&fa, eps, &samples).unwrap();
            assert!(
                r.worst_margin >= -1e-8 && r.extremal >= -1e-8,
                "{name}: {r:?}"
            );
        }
    }
}

#[test]
fn attractive_delta_needs_its_heins_shift() {
    // with a strongly attractive coupling the form alone is not bounded by ½‖f‖²_{W^{1,2}}
    let g = fixtures::star(&[1.0, 1.0, 1.0]);
    let mut bc = BoundaryCondition::uniform(&g, Preset::Neumann);
    bc.vertices[0] = Preset::Delta(-9.0).build(3);
    let fa = assemble(&g, &bc, 0.05).unwrap();
    let mut weak = fa.heins();
    weak.c = 0.5;
    let samples = FormSampler::new(2).samples(&fa, 30);
    assert!(check_heins(&fa, &weak, &samples).unwrap().extremal < 0.0);
}
