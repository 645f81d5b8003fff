use qgraph::boundary::{heins_constant, validate_bc, BcReport, HeinsConstant};
use qgraph::graph::Violation;
use serde::Serialize;

use super::finite;
use crate::{Command, Outcome, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub vertices: usize,
    pub edges: usize,
    pub u: f64,
    /// `null` for graphs with infinite edges.
    pub total_length: Option<f64>,
    pub compact: bool,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub command: &'static str,
    pub valid: bool,
    pub graph: GraphSummary,
    pub graph_violations: Vec<Violation>,
    pub bc: BcReport,
    pub heins: HeinsConstant,
}

pub struct Validate;

impl Command for Validate {
    fn name(&self) -> &'static str {
        "validate"
    }

    fn about(&self) -> &'static str {
        "check the graph conditions and the vertex conditions"
    }

    fn run(&self, cfg: &RunConfig) -> anyhow::Result<Outcome> {
        let g = cfg.load_graph()?;
        let bc = cfg.load_bc(&g)?;
        let graph_violations = g.validate();
        let bc_report = validate_bc(&g, &bc, cfg.bc_tol)?;
        let valid = graph_violations.is_empty() && bc_report.is_valid();
        let report = ValidateReport {
            command: self.name(),
            valid,
            graph: GraphSummary {
                vertices: g.vertex_count(),
                edges: g.edge_count(),
                u: g.u(),
                total_length: finite(g.total_length()),
                compact: g.is_compact(),
                connected: g.is_connected(),
            },
            graph_violations,
            heins: heins_constant(bc_report.s, g.u()),
            bc: bc_report,
        };
        Outcome::new(valid, report)
    }
}
