use num_complex::Complex64;
use qgraph::expansion::{
    genef_residual, hs_norm, parseval, standard_battery, DiscreteSpectralRep, GenefReport,
    TestFunction,
};
use qgraph::funcspace::GridFunction;
use qgraph::secular::{SecularProblem, SINGULAR_TOL};
use serde::Serialize;

use super::{grid_vertex_residual, VERTEX_TOL};
use crate::config::WeightInfo;
use crate::{Command, InputError, Outcome, RunConfig};

/// Parseval gap allowed for a function in the span of the computed modes.
const IN_SPAN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeEntry {
    pub j: usize,
    pub lambda: f64,
    /// `‖w⁻¹ φ‖²`.
    pub weighted_norm_sqr: f64,
    /// `(C + λ)⁻¹ ‖w⁻¹ φ‖²`.
    pub term: f64,
    pub genef_residual: f64,
    pub worst_test: String,
    pub vertex_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsevalEntry {
    pub function: String,
    pub norm_sqr: f64,
    pub coeff_sqr: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub file: String,
    pub lambda: f64,
    pub genef: GenefReport,
    pub vertex_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub command: &'static str,
    pub modes: usize,
    /// Largest multiplicity among the computed levels.
    pub layers: usize,
    pub weight: WeightInfo,
    pub inverse_weight_l2_sqr: f64,
    pub c: f64,
    pub hs_norm_sq: f64,
    pub partial_sum: f64,
    pub tail_bound: f64,
    /// Relative Parseval gap of the in-span function.
    pub parseval_gap: f64,
    pub parseval: Vec<ParsevalEntry>,
    pub worst_genef_residual: f64,
    pub worst_vertex_residual: f64,
    pub tolerance: f64,
    pub per_mode: Vec<ModeEntry>,
    pub check: Option<CheckEntry>,
    pub pass: bool,
}

pub struct Expansion;

impl Command for Expansion {
    fn name(&self) -> &'static str {
        "expansion"
    }

    fn about(&self) -> &'static str {
        "eigenfunction expansion: HS norm, Parseval and the generalized eigen-equation"
    }

    fn run(&self, cfg: &RunConfig) -> anyhow::Result<Outcome> {
        let g = cfg.load_graph()?;
        g.require_valid()?;
        g.require_compact()?;
        let (bc, heins) = cfg.load_valid_bc(&g)?;
        let (w, weight_info) = cfg.weight(&g)?;
        let tol = cfg.tol.unwrap_or(1e-6);
        let count = cfg.modes.unwrap_or(20);

        let problem = SecularProblem::new(&g, &bc)?;
        let modes = problem.lowest_modes(count, cfg.lambda_min, cfg.lambda_max, SINGULAR_TOL)?;
        if modes.is_empty() {
            return Err(InputError("no eigenvalues in the requested range".into()).into());
        }
        let rep = DiscreteSpectralRep::new(&g, modes);
        let c = cfg.gamma_shift.unwrap_or(heins.c + 1.0);
        let hs = hs_norm(&rep, w.as_ref(), c)?;

        let tests = standard_battery(&g, &bc)?;
        let mut per_mode = Vec::with_capacity(rep.mode_count());
        for ((idx, phi), m) in rep.modes().zip(&hs.per_mode) {
            let r = genef_residual(&g, &bc, phi, phi.lambda, &tests, None)?;
            per_mode.push(ModeEntry {
                j: idx.j,
                lambda: idx.lambda,
                weighted_norm_sqr: m.weighted_norm_sqr,
                term: m.term,
                genef_residual: r.worst,
                worst_test: r.worst_test,
                vertex_residual: phi.vertex_residual(&g, &bc),
            });
        }
        let worst_genef_residual = per_mode
            .iter()
            .map(|m| m.genef_residual)
            .fold(0.0, f64::max);
        let worst_vertex_residual = per_mode
            .iter()
            .map(|m| m.vertex_residual)
            .fold(0.0, f64::max);

        // a function in the span of the first modes, then the interior bumps
        let first: Vec<_> = rep.modes().take(3).map(|(_, p)| p.clone()).collect();
        let in_span =
            move |e: usize, t: f64| -> Complex64 { first.iter().map(|p| p.eval(e, t)).sum() };
        let mut parseval_entries = vec![parseval_entry(
            "sum of the first modes",
            &parseval(&rep, &in_span)?,
        )];
        for test in tests
            .iter()
            .filter(|t| matches!(t, TestFunction::Bump { .. }))
        {
            let f = |e: usize, t: f64| test.eval(&g, e, t).0;
            parseval_entries.push(parseval_entry(&test.describe(&g), &parseval(&rep, &f)?));
        }
        let parseval_gap = parseval_entries[0].relative_gap;

        let check = match &cfg.check_file {
            None => None,
            Some(path) => {
                let lambda = cfg
                    .check_lambda
                    .ok_or_else(|| InputError("--check-file needs --check-lambda".into()))?;
                let file = std::fs::File::open(path)
                    .map_err(|e| InputError(format!("reading `{}`: {e}", path.display())))?;
                let f = GridFunction::read_csv(&g, file)?;
                let genef = genef_residual(&g, &bc, &f, lambda, &tests, None)?;
                let vertex_residual = grid_vertex_residual(&g, &bc, &f)?;
                let pass = genef.worst <= cfg.check_tol && vertex_residual <= cfg.check_tol;
                Some(CheckEntry {
                    file: path.display().to_string(),
                    lambda,
                    genef,
                    vertex_residual,
                    tolerance: cfg.check_tol,
                    pass,
                })
            }
        };

        let pass = worst_genef_residual <= tol
            && worst_vertex_residual <= VERTEX_TOL
            && parseval_gap <= IN_SPAN_TOL
            && check.as_ref().is_none_or(|c| c.pass);
        let report = ExpansionReport {
            command: self.name(),
            modes: rep.mode_count(),
            layers: rep.layers(),
            weight: weight_info,
            inverse_weight_l2_sqr: w.inverse_l2_sqr(),
            c,
            hs_norm_sq: hs.hs_norm_sq,
            partial_sum: hs.partial_sum,
            tail_bound: hs.tail_bound,
            parseval_gap,
            parseval: parseval_entries,
            worst_genef_residual,
            worst_vertex_residual,
            tolerance: tol,
            per_mode,
            check,
            pass,
        };
        Outcome::new(pass, report)
    }
}

fn parseval_entry(name: &str, p: &qgraph::expansion::ParsevalReport) -> ParsevalEntry {
    ParsevalEntry {
        function: name.into(),
        norm_sqr: p.norm_sqr,
        coeff_sqr: p.coeff_sqr,
        gap: p.gap,
        relative_gap: p.relative_gap,
    }
}
