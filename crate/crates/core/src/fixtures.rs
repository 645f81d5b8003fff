//! Small named graphs used by the test-suites, the CLI examples and the docs.

use crate::graph::MetricGraph;

fn lower_bound(lengths: &[f64]) -> f64 {
    lengths.iter().copied().fold(1.0, f64::min)
}

/// One edge `e` from `a` to `b`.
pub fn interval(length: f64) -> MetricGraph {
    MetricGraph::builder(lower_bound(&[length]))
        .vertices(["a", "b"])
        .edge("e", "a", "b", length)
        .build()
}

/// Star with center `c` and tips `t1..tn`; edge `ek` runs from `c` to `tk`.
pub fn star(lengths: &[f64]) -> MetricGraph {
    let mut b = MetricGraph::builder(lower_bound(lengths)).vertex("c");
    for k in 1..=lengths.len() {
        b = b.vertex(format!("t{k}"));
    }
    for (k, &l) in lengths.iter().enumerate() {
        b = b.edge(format!("e{}", k + 1), "c", format!("t{}", k + 1), l);
    }
    b.build()
}

/// Path `v0 - v1 - ... - vn` with `n` edges of equal length.
pub fn path(n: usize, length: f64) -> MetricGraph {
    let mut b =
        MetricGraph::builder(lower_bound(&[length])).vertices((0..=n).map(|k| format!("v{k}")));
    for k in 0..n {
        b = b.edge(
            format!("e{}", k + 1),
            format!("v{k}"),
            format!("v{}", k + 1),
            length,
        );
    }
    b.build()
}

/// Two parallel edges `short` and `long` between `v` and `w`.
pub fn parallel_edges(short: f64, long: f64) -> MetricGraph {
    MetricGraph::builder(lower_bound(&[short, long]))
        .vertices(["v", "w"])
        .edge("short", "v", "w", short)
        .edge("long", "v", "w", long)
        .build()
}

/// A loop at `v` plus a pendant edge `v - w`.
pub fn loop_with_edge(loop_length: f64, edge_length: f64) -> MetricGraph {
    MetricGraph::builder(lower_bound(&[loop_length, edge_length]))
        .vertices(["v", "w"])
        .edge("loop", "v", "v", loop_length)
        .edge("e", "v", "w", edge_length)
        .build()
}
