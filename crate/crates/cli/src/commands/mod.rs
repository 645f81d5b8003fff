mod expansion;
mod potential;
mod spectrum;
mod validate;

pub use expansion::{Expansion, ExpansionReport};
pub use potential::{PotentialCmd, PotentialReport};
pub use spectrum::{SpectrumCmd, SpectrumReport};
pub use validate::{Validate, ValidateReport};

use qgraph::boundary::BoundaryCondition;
use qgraph::funcspace::{traces, GridFunction};
use qgraph::graph::MetricGraph;

/// Residual tolerance for exact vertex traces.
pub const VERTEX_TOL: f64 = 1e-8;

/// Finite values as numbers, the rest as `null`.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Largest vertex residual of a sampled function, with one-sided difference traces.
fn grid_vertex_residual(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    f: &GridFunction,
) -> qgraph::Result<f64> {
    let tr = traces(g, f)?;
    Ok((0..g.vertex_count())
        .map(|v| {
            let (a, b) = bc.vertex(v).residual(&tr.values[v], &tr.derivs[v]);
            a + b
        })
        .fold(0.0, f64::max))
}

fn csv_of(write: impl FnOnce(&mut Vec<u8>) -> qgraph::Result<()>) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}
