use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use qgraph::boundary::{heins_constant, validate_bc, BoundaryCondition, HeinsConstant, Preset};
use qgraph::expansion::{weight, ConstantWeight, Weight};
use qgraph::graph::MetricGraph;
use qgraph::potentials::{Potential, PotentialRegistry};

use crate::InputError;

/// Everything a command needs; built from the command line or directly in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub graph: PathBuf,
    /// A bc file, or a preset name applied at every vertex. Kirchhoff when absent.
    pub bc: Option<String>,
    /// Mesh width; `u/20` when absent.
    pub mesh: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    /// Number of eigenvalues; each command has its own default.
    pub modes: Option<usize>,
    /// Residual tolerance for the eigen-equation checks.
    pub tol: Option<f64>,
    /// Self-adjointness and idempotence tolerance for vertex conditions.
    pub bc_tol: f64,
    pub seed: u64,
    /// Random form-domain samples for the inequality checks.
    pub samples: usize,
    pub out: Option<PathBuf>,
    pub potential: Option<String>,
    pub weight_eps: f64,
    /// Base point of the weight; `w ≡ 1` when absent.
    pub weight_base: Option<String>,
    pub solvers: String,
    pub check_file: Option<PathBuf>,
    pub check_lambda: Option<f64>,
    pub check_tol: f64,
    pub gamma_shift: Option<f64>,
}

impl RunConfig {
    pub fn new(graph: impl Into<PathBuf>) -> Self {
        RunConfig {
            graph: graph.into(),
            bc: None,
            mesh: None,
            lambda_min: None,
            lambda_max: None,
            modes: None,
            tol: None,
            bc_tol: qgraph::boundary::DEFAULT_TOL,
            seed: 0,
            samples: 1000,
            out: None,
            potential: None,
            weight_eps: 0.5,
            weight_base: None,
            solvers: "fem,secular".into(),
            check_file: None,
            check_lambda: None,
            check_tol: 1e-4,
            gamma_shift: None,
        }
    }

    pub fn check(&self) -> Result<(), InputError> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(InputError(format!("--{name} must be positive, got {x}")))
            }
        };
        positive("bc-tol", self.bc_tol)?;
        positive("check-tol", self.check_tol)?;
        positive("weight-eps", self.weight_eps)?;
        if let Some(t) = self.tol {
            positive("tol", t)?;
        }
        if let Some(h) = self.mesh {
            positive("mesh", h)?;
        }
        if self.modes == Some(0) {
            return Err(InputError("--modes must be at least 1".into()));
        }
        if let (Some(a), Some(b)) = (self.lambda_min, self.lambda_max) {
            if !(a < b) {
                return Err(InputError(format!(
                    "--lambda-min {a} must be below --lambda-max {b}"
                )));
            }
        }
        Ok(())
    }

    pub fn load_graph(&self) -> anyhow::Result<MetricGraph> {
        MetricGraph::from_json_file(&self.graph)
            .with_context(|| format!("reading graph `{}`", self.graph.display()))
    }

    pub fn load_bc(&self, g: &MetricGraph) -> anyhow::Result<BoundaryCondition> {
        match &self.bc {
            None => Ok(BoundaryCondition::uniform(g, Preset::Kirchhoff)),
            Some(spec) if Path::new(spec).is_file() => BoundaryCondition::from_json_file(g, spec)
                .with_context(|| format!("reading vertex conditions `{spec}`")),
            Some(spec) => match Preset::parse(spec) {
                Ok(p) => Ok(BoundaryCondition::uniform(g, p)),
                Err(_) => Err(InputError(format!(
                    "`{spec}` is neither a file nor a vertex condition preset"
                ))
                .into()),
            },
        }
    }

    /// Valid conditions or an input error listing the violations.
    pub fn load_valid_bc(
        &self,
        g: &MetricGraph,
    ) -> anyhow::Result<(BoundaryCondition, HeinsConstant)> {
        let bc = self.load_bc(g)?;
        let report = validate_bc(g, &bc, self.bc_tol)?;
        if !report.is_valid() {
            bail!(InputError(format!(
                "invalid vertex conditions: {}",
                serde_json::to_string(&report.violations)?
            )));
        }
        Ok((bc, heins_constant(report.s, g.u())))
    }

    pub fn load_potential(&self, g: &MetricGraph) -> anyhow::Result<Potential> {
        let spec = self
            .potential
            .as_deref()
            .ok_or_else(|| InputError("--potential is required".into()))?;
        let registry = PotentialRegistry::builtin();
        if registry.recognizes(spec) {
            return Ok(registry.parse(g, spec)?);
        }
        let file = std::fs::File::open(spec)
            .with_context(|| format!("`{spec}` is neither a preset nor a readable CSV file"))?;
        Ok(Potential::read_csv(g, file)?)
    }

    pub fn mesh_width(&self, g: &MetricGraph) -> f64 {
        self.mesh.unwrap_or(g.u() / 20.0)
    }

    pub fn weight<'a>(
        &self,
        g: &'a MetricGraph,
    ) -> anyhow::Result<(Box<dyn Weight + 'a>, WeightInfo)> {
        match &self.weight_base {
            None => Ok((
                Box::new(ConstantWeight::new(g, 1.0)?),
                WeightInfo {
                    kind: "constant".into(),
                    base: None,
                    eps: None,
                },
            )),
            Some(base) => {
                if !g.is_connected() {
                    bail!(InputError("the weight needs a connected graph".into()));
                }
                let x0 = g.parse_point(base)?;
                Ok((
                    Box::new(weight(g, &x0, self.weight_eps)?),
                    WeightInfo {
                        kind: "ball_volume".into(),
                        base: Some(base.clone()),
                        eps: Some(self.weight_eps),
                    },
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeightInfo {
    pub kind: String,
    pub base: Option<String>,
    pub eps: Option<f64>,
}
