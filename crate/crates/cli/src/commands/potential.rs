use qgraph::fem::assemble;
use qgraph::funcspace::EdgeFunction;
use qgraph::potentials::{
    check_relative_bound, fem_convergence, layered_problem, m_v, perturbed_genef_check,
    ConvergenceStudy, PerturbedGenefReport, RelativeBoundReport,
};
use qgraph::sampling::FormSampler;
use qgraph::secular::{SecularEigenvalue, SecularProblem, SecularSolution, SINGULAR_TOL};
use serde::Serialize;

use super::VERTEX_TOL;
use crate::config::WeightInfo;
use crate::{Command, Outcome, RunConfig};

/// Slack for the sampled form inequalities.
const MARGIN_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialInfo {
    pub spec: String,
    pub piecewise_constant: bool,
    pub sup_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MvEntry {
    pub m: f64,
    pub edge: String,
    pub t0: f64,
    pub t1: f64,
    pub windows: usize,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FemCrossCheck {
    /// Largest gap between the finest FEM and the layered eigenvalues.
    pub max_abs_diff: f64,
    pub study: ConvergenceStudy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialReport {
    pub command: &'static str,
    pub potential: PotentialInfo,
    pub m_v: MvEntry,
    pub h_max: f64,
    pub samples: usize,
    pub seed: u64,
    pub relative_bound: Vec<RelativeBoundReport>,
    /// Width of the midpoint layers standing in for sloped pieces; `null` when `V`
    /// is piecewise constant and the perturbed spectrum is exact.
    pub layer_width: Option<f64>,
    pub unperturbed: Vec<f64>,
    pub perturbed: Vec<f64>,
    /// `λ_k(H₀ + V) − λ_k(H₀)`.
    pub shifts: Vec<f64>,
    pub weight: WeightInfo,
    pub genef: PerturbedGenefReport,
    pub worst_genef_residual: f64,
    pub worst_vertex_residual: f64,
    /// Finite elements on three halved meshes, for sloped `V`.
    pub fem: Option<FemCrossCheck>,
    pub tolerance: f64,
    pub pass: bool,
}

pub struct PotentialCmd;

impl Command for PotentialCmd {
    fn name(&self) -> &'static str {
        "potential"
    }

    fn about(&self) -> &'static str {
        "Schrödinger perturbation: M_V, relative bound, perturbed spectrum and eigen-equation"
    }

    fn run(&self, cfg: &RunConfig) -> anyhow::Result<Outcome> {
        let g = cfg.load_graph()?;
        g.require_valid()?;
        g.require_compact()?;
        let (bc, _) = cfg.load_valid_bc(&g)?;
        let v = cfg.load_potential(&g)?;
        let (w, weight_info) = cfg.weight(&g)?;
        let u = g.u();
        let count = cfg.modes.unwrap_or(10);
        let h = cfg.mesh_width(&g);

        let step = u / 10.0;
        let mv = m_v(&g, &v, step)?;
        let fa = assemble(&g, &bc, h)?;
        let samples = FormSampler::new(cfg.seed).samples(&fa, cfg.samples);
        let relative_bound = [u / 4.0, u / 2.0, u]
            .into_iter()
            .map(|a| check_relative_bound(&g, &fa, &v, a, &samples))
            .collect::<qgraph::Result<Vec<_>>>()?;
        let bound_ok = relative_bound.iter().all(|r| {
            r.worst_margin >= -MARGIN_SLACK
                && r.extremal >= -MARGIN_SLACK
                && r.window_margin >= -MARGIN_SLACK
        });

        let exact = v.is_piecewise_constant();
        let width = h / 10.0;
        let base = SecularProblem::new(&g, &bc)?;
        let unperturbed = expand(
            &base.lowest(count, cfg.lambda_min, cfg.lambda_max, SINGULAR_TOL)?,
            count,
        );
        let problem = layered_problem(&g, &bc, &v, width)?;
        let phis: Vec<SecularSolution> =
            problem.lowest_modes(count, cfg.lambda_min, cfg.lambda_max, SINGULAR_TOL)?;
        let mut perturbed: Vec<f64> = phis.iter().map(|p| p.lambda).collect();
        perturbed.truncate(count);
        let modes: Vec<(f64, &dyn EdgeFunction)> = phis
            .iter()
            .map(|p| (p.lambda, p as &dyn EdgeFunction))
            .collect();
        let genef = perturbed_genef_check(&g, &bc, &v, &modes, Some(w.as_ref()))?;
        let worst_vertex_residual = phis
            .iter()
            .map(|p| p.vertex_residual(&g, &bc))
            .fold(0.0, f64::max);
        let tol = cfg.tol.unwrap_or(if exact { 1e-6 } else { 1e-4 });
        let fem = if exact {
            None
        } else {
            let k = perturbed.len().min(fa.dim());
            let study = fem_convergence(&g, &bc, &v, h, 3, k)?;
            let finest = study.values.last().cloned().unwrap_or_default();
            let max_abs_diff = finest
                .iter()
                .zip(&perturbed)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Some(FemCrossCheck {
                max_abs_diff,
                study,
            })
        };
        let shifts = perturbed
            .iter()
            .zip(&unperturbed)
            .map(|(b, a)| b - a)
            .collect();
        let worst_genef_residual = genef.worst();
        let pass = bound_ok && worst_genef_residual <= tol && worst_vertex_residual <= VERTEX_TOL;
        let report = PotentialReport {
            command: self.name(),
            potential: PotentialInfo {
                spec: cfg.potential.clone().unwrap_or_default(),
                piecewise_constant: exact,
                sup_abs: v.sup_abs(),
            },
            m_v: MvEntry {
                m: mv.m,
                edge: g.edge(mv.segment.edge).id.clone(),
                t0: mv.segment.t0,
                t1: mv.segment.t1,
                windows: mv.windows,
                step,
            },
            h_max: h,
            samples: samples.len(),
            seed: cfg.seed,
            relative_bound,
            layer_width: (!exact).then_some(width),
            unperturbed,
            perturbed,
            shifts,
            weight: weight_info,
            genef,
            worst_genef_residual,
            worst_vertex_residual,
            fem,
            tolerance: tol,
            pass,
        };
        Outcome::new(pass, report)
    }
}

fn expand(levels: &[SecularEigenvalue], count: usize) -> Vec<f64> {
    let mut out: Vec<f64> = levels
        .iter()
        .flat_map(|v| std::iter::repeat_n(v.lambda, v.multiplicity.max(1)))
        .collect();
    out.truncate(count);
    out
}
