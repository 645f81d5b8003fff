use qgraph::fem::write_spectrum_csv;
use qgraph::solver::{clusters, SolverRegistry, SpectrumRequest};
use serde::Serialize;

use super::csv_of;
use crate::{Command, InputError, Outcome, RunConfig};

/// Relative gap below which neighbouring eigenvalues count as one level.
const LEVEL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub lambda: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSpectrum {
    pub solver: String,
    pub h_max: Option<f64>,
    pub values: Vec<f64>,
    pub levels: Vec<Level>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reference: String,
    pub other: String,
    pub modes_compared: usize,
    pub max_abs_diff: f64,
    /// Largest `|Δλ| / (10 h² max(1, |λ|))`.
    pub max_budget_ratio: f64,
    pub worst_mode: usize,
    pub within_budget: bool,
    pub counts_agree: bool,
    pub multiplicities_agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub command: &'static str,
    pub modes: usize,
    pub h_max: f64,
    pub potential: Option<String>,
    pub spectra: Vec<SolverSpectrum>,
    pub comparison: Option<Comparison>,
    pub pass: bool,
}

pub struct SpectrumCmd;

impl Command for SpectrumCmd {
    fn name(&self) -> &'static str {
        "spectrum"
    }

    fn about(&self) -> &'static str {
        "lowest eigenvalues from each selected solver and their disagreement"
    }

    fn run(&self, cfg: &RunConfig) -> anyhow::Result<Outcome> {
        let g = cfg.load_graph()?;
        g.require_valid()?;
        g.require_compact()?;
        let (bc, _) = cfg.load_valid_bc(&g)?;
        let potential = match cfg.potential {
            Some(_) => Some(cfg.load_potential(&g)?),
            None => None,
        };
        let registry = SolverRegistry::builtin();
        let solvers = registry.select(&cfg.solvers)?;
        if solvers.is_empty() {
            return Err(InputError("--solvers selects nothing".into()).into());
        }
        let req = SpectrumRequest {
            modes: cfg.modes.unwrap_or(10),
            h_max: cfg.mesh_width(&g),
            lambda_min: cfg.lambda_min,
            lambda_max: cfg.lambda_max,
            tol: qgraph::secular::SINGULAR_TOL,
        };
        let mut spectra = Vec::new();
        let mut artifacts = Vec::new();
        for s in solvers {
            let sp = s.solve(&g, &bc, potential.as_ref(), &req)?;
            artifacts.push((
                format!("spectrum_{}.csv", sp.solver),
                csv_of(|buf| write_spectrum_csv(&sp.values, buf))?,
            ));
            spectra.push(SolverSpectrum {
                levels: clusters(&sp.values, LEVEL_TOL)
                    .into_iter()
                    .map(|(lambda, multiplicity)| Level {
                        lambda,
                        multiplicity,
                    })
                    .collect(),
                solver: sp.solver,
                h_max: sp.h_max,
                values: sp.values,
            });
        }
        let comparison = (spectra.len() >= 2).then(|| compare(&spectra[0], &spectra[1], req.h_max));
        let pass = comparison
            .as_ref()
            .is_none_or(|c| c.within_budget && c.counts_agree);
        let report = SpectrumReport {
            command: self.name(),
            modes: req.modes,
            h_max: req.h_max,
            potential: cfg.potential.clone(),
            spectra,
            comparison,
            pass,
        };
        let mut out = Outcome::new(pass, report)?;
        for (name, csv) in artifacts {
            out = out.with_artifact(name, csv);
        }
        Ok(out)
    }
}

/// The discretized spectrum is judged against the `10 h² max(1, |λ|)` budget;
/// when neither solver is discretized the budget uses the requested mesh width.
fn compare(a: &SolverSpectrum, b: &SolverSpectrum, h_req: f64) -> Comparison {
    let h = a.h_max.or(b.h_max).unwrap_or(h_req);
    let exact = if a.h_max.is_none() { a } else { b };
    let n = a.values.len().min(b.values.len());
    let mut max_abs_diff = 0.0;
    let mut max_budget_ratio = 0.0;
    let mut worst_mode = 0;
    for j in 0..n {
        let d = (a.values[j] - b.values[j]).abs();
        let ratio = d / (10.0 * h * h * exact.values[j].abs().max(1.0));
        max_abs_diff = f64::max(max_abs_diff, d);
        if ratio > max_budget_ratio {
            max_budget_ratio = ratio;
            worst_mode = j;
        }
    }
    let mult = |s: &SolverSpectrum| -> Vec<usize> {
        let mut total = 0;
        s.levels
            .iter()
            .take_while(|l| {
                total += l.multiplicity;
                total <= n
            })
            .map(|l| l.multiplicity)
            .collect()
    };
    Comparison {
        reference: a.solver.clone(),
        other: b.solver.clone(),
        modes_compared: n,
        max_abs_diff,
        max_budget_ratio,
        worst_mode,
        within_budget: max_budget_ratio <= 1.0,
        counts_agree: a.values.len() == b.values.len(),
        multiplicities_agree: mult(a) == mult(b),
    }
}
