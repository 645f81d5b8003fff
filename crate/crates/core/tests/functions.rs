use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qgraph::fixtures;
use qgraph::funcspace::{cutoff, norms, sobolev_check, traces, GridFunction, Mesh};
use qgraph::graph::Point;
use qgraph::sampling::FormSampler;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sobolev_holds_for_random_functions(seed in any::<u64>(), len in 1.0f64..4.0) {
        let g = fixtures::interval(len);
        let mesh = Mesh::uniform(&g, 0.01).unwrap();
        let f = FormSampler::new(seed).edge_function(&mesh, 0);
        let u = g.u();
        for a in [u / 2.0, u, len] {
            let r = sobolev_check(&f, 0, a).unwrap();
            prop_assert!(r.holds, "a = {a}: {r:?}");
        }
    }
}

#[test]
fn constants_are_sharp_for_the_sobolev_estimate() {
    let g = fixtures::interval(3.0);
    let mesh = Mesh::uniform(&g, 0.05).unwrap();
    let one = GridFunction::from_fn(&mesh, |_, _| Complex64::new(1.0, 0.0));
    for a in [0.5, 1.0, 3.0] {
        let r = sobolev_check(&one, 0, a).unwrap();
        assert!((r.rhs / r.lhs - 2.0).abs() < 1e-12);
    }
    assert!(sobolev_check(&one, 0, 3.5).is_err());
}

#[test]
fn trace_and_norm_errors_shrink_quadratically() {
    let g = fixtures::interval(PI);
    let mut prev: Option<(f64, f64)> = None;
    for n in [50usize, 100, 200] {
        let mesh = Mesh::from_counts(vec![PI], vec![n]).unwrap();
        let f = GridFunction::from_fn(&mesh, |_, t| Complex64::new(t.sin(), 0.0));
        let tr = traces(&g, &f).unwrap();
        let trace_err = (tr.derivs[0][0] - 1.0)
            .norm()
            .max((tr.derivs[1][0] - 1.0).norm());
        // trapezoid is exact for sin² over a period, so measure on t² instead
        let sq = GridFunction::from_fn(&mesh, |_, t| Complex64::new(t * t, 0.0));
        let norm_err = (norms(&sq).l2.powi(2) - PI.powi(5) / 5.0).abs();
        if let Some((t0, n0)) = prev {
            assert!((t0 / trace_err).log2() > 1.7, "trace order");
            assert!((n0 / norm_err).log2() > 1.7, "norm order");
        }
        prev = Some((trace_err, norm_err));
    }
}

#[test]
fn cutoff_is_one_inside_and_zero_outside() {
    let g = fixtures::path(12, 1.0);
    let x = g.point_on_edge(5, 0.3).unwrap();
    let mesh = Mesh::uniform(&g, 0.01).unwrap();
    let ball = g.ball(&x).unwrap();
    for n in [1.5, 3.0, 4.2] {
        let psi = cutoff(&g, &x, n).unwrap();
        let sup = psi.grid_sup(&mesh);
        assert!(sup.iter().all(|&s| s <= psi.bound()));
        for e in 0..g.edge_count() {
            for k in 0..mesh.nodes(e) {
                let t = mesh.node(e, k);
                let p = if k == 0 {
                    Point::Vertex(g.init(e))
                } else if k + 1 == mesh.nodes(e) {
                    Point::Vertex(g.term(e).unwrap())
                } else {
                    g.point_on_edge(e, t).unwrap()
                };
                let d = ball.distance_to(&p);
                let v = psi.eval(e, t)[0];
                if d <= n - 2.0 * g.u() {
                    assert_eq!(v, 1.0, "n = {n}, d = {d}");
                }
                if d >= n + 2.0 * g.u() {
                    assert_eq!(v, 0.0, "n = {n}, d = {d}");
                }
            }
        }
    }
}
