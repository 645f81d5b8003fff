//! Eigenvalue solvers behind one trait, looked up by name at run time.

use serde::Serialize;

use crate::boundary::BoundaryCondition;
use crate::error::{Error, Result};
use crate::fem::{assemble, eigensystem};
use crate::graph::MetricGraph;
use crate::potentials::{assemble_perturbed, layered_problem, Potential};
use crate::secular::SecularProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRequest {
    /// Number of eigenvalues, counted with multiplicity.
    pub modes: usize,
    /// Mesh width for discretizing solvers.
    pub h_max: f64,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub solver: String,
    /// Lowest eigenvalues in increasing order, repeated by multiplicity.
    pub values: Vec<f64>,
    pub h_max: Option<f64>,
}

pub trait SpectralSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn solve(
        &self,
        g: &MetricGraph,
        bc: &BoundaryCondition,
        potential: Option<&Potential>,
        req: &SpectrumRequest,
    ) -> Result<Spectrum>;
}

pub struct FemSolver;

impl SpectralSolver for FemSolver {
    fn name(&self) -> &'static str {
        "fem"
    }

    fn describe(&self) -> &'static str {
        "piecewise linear finite elements with exact vertex constraints"
    }

    fn solve(
        &self,
        g: &MetricGraph,
        bc: &BoundaryCondition,
        potential: Option<&Potential>,
        req: &SpectrumRequest,
    ) -> Result<Spectrum> {
        let mut fa = assemble(g, bc, req.h_max)?;
        if let Some(v) = potential {
            fa = assemble_perturbed(&fa, v)?;
        }
        let es = eigensystem(&fa, req.modes.min(fa.dim()))?;
        let values = es
            .values
            .into_iter()
            .filter(|&l| {
                req.lambda_min.is_none_or(|m| l >= m) && req.lambda_max.is_none_or(|m| l <= m)
            })
            .collect();
        Ok(Spectrum {
            solver: self.name().into(),
            values,
            h_max: Some(es.h_max),
        })
    }
}

pub struct SecularSolver;

impl SpectralSolver for SecularSolver {
    fn name(&self) -> &'static str {
        "secular"
    }

    fn describe(&self) -> &'static str {
        "exact edge solutions matched at the vertices; sloped potentials as layers of width h/10"
    }

    fn solve(
        &self,
        g: &MetricGraph,
        bc: &BoundaryCondition,
        potential: Option<&Potential>,
        req: &SpectrumRequest,
    ) -> Result<Spectrum> {
        let problem = match potential {
            Some(v) => layered_problem(g, bc, v, req.h_max / 10.0)?,
            None => SecularProblem::new(g, bc)?,
        };
        let found = problem.lowest(req.modes, req.lambda_min, req.lambda_max, req.tol)?;
        let mut values: Vec<f64> = found
            .iter()
            .flat_map(|v| std::iter::repeat_n(v.lambda, v.multiplicity.max(1)))
            .collect();
        values.truncate(req.modes);
        Ok(Spectrum {
            solver: self.name().into(),
            values,
            h_max: None,
        })
    }
}

pub struct SolverRegistry {
    solvers: Vec<Box<dyn SpectralSolver>>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry {
            solvers: Vec::new(),
        }
    }

    /// `fem` and `secular`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(FemSolver));
        r.register(Box::new(SecularSolver));
        r
    }

    /// Replaces a solver of the same name.
    pub fn register(&mut self, solver: Box<dyn SpectralSolver>) {
        self.solvers.retain(|s| s.name() != solver.name());
        self.solvers.push(solver);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.solvers.iter().map(|s| s.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn SpectralSolver> {
        self.solvers
            .iter()
            .find(|s| s.name() == name)
            .map(|s| s.as_ref())
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown solver `{name}`; known: {}",
                    self.names().join(", ")
                ))
            })
    }

    /// Solvers named in a comma-separated list, in that order.
    pub fn select(&self, list: &str) -> Result<Vec<&dyn SpectralSolver>> {
        let names: Vec<&str> = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::InvalidInput("no solver selected".into()));
        }
        names.into_iter().map(|n| self.get(n)).collect()
    }
}

/// Groups sorted values closer than `tol · max(1, |λ|)` into `(value, multiplicity)`.
pub fn clusters(values: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some((w, n)) if (v - *w).abs() <= tol * v.abs().max(1.0) => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Preset;
    use crate::fixtures;
    use std::f64::consts::PI;

    fn request(modes: usize) -> SpectrumRequest {
        SpectrumRequest {
            modes,
            h_max: PI / 200.0,
            lambda_min: None,
            lambda_max: None,
            tol: 1e-8,
        }
    }

    #[test]
    fn registry_selects_by_name() {
        let r = SolverRegistry::builtin();
        assert_eq!(r.names(), ["fem", "secular"]);
        let both = r.select("secular, fem").unwrap();
        assert_eq!(both[0].name(), "secular");
        assert!(r.select("fem,lanczos").is_err());
        assert!(r.select(" ").is_err());
    }

    #[test]
    fn both_solvers_agree_on_dirichlet_interval() {
        let g = fixtures::interval(PI);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let r = SolverRegistry::builtin();
        let sec = r
            .get("secular")
            .unwrap()
            .solve(&g, &bc, None, &request(6))
            .unwrap();
        let fem = r
            .get("fem")
            .unwrap()
            .solve(&g, &bc, None, &request(6))
            .unwrap();
        assert_eq!(sec.values.len(), 6);
        for (n, (s, f)) in sec.values.iter().zip(&fem.values).enumerate() {
            let exact = ((n + 1) * (n + 1)) as f64;
            assert!((s - exact).abs() < 1e-8);
            assert!((f - exact).abs() < 10.0 * (PI / 200.0f64).powi(2) * exact);
        }
    }

    #[test]
    fn secular_repeats_degenerate_values() {
        let g = fixtures::star(&[1.0, 1.0, 1.0]);
        let bc = BoundaryCondition::uniform(&g, Preset::Kirchhoff);
        let sec = SecularSolver.solve(&g, &bc, None, &request(4)).unwrap();
        let cl = clusters(&sec.values, 1e-6);
        assert_eq!(cl[0].1, 1);
        assert_eq!(cl[1].1, 2);
    }

    #[test]
    fn potential_goes_through_both_solvers() {
        let g = fixtures::interval(PI);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let v = Potential::constant(&g, 1.0);
        let sec = SecularSolver.solve(&g, &bc, Some(&v), &request(5)).unwrap();
        let fem = FemSolver.solve(&g, &bc, Some(&v), &request(5)).unwrap();
        for (n, (s, f)) in sec.values.iter().zip(&fem.values).enumerate() {
            let exact = ((n + 1) * (n + 1)) as f64 + 1.0;
            assert!((s - exact).abs() < 1e-8);
            assert!((f - exact).abs() < 10.0 * (PI / 200.0f64).powi(2) * exact);
        }
    }
}
