//! Vertex conditions `(L_v, P_v)`: a self-adjoint `L_v` and an orthogonal
//! projection `P_v` on the edge-ends of each vertex star. A function in the
//! operator domain satisfies
//!
//! ```text
//! P_v f(v) = 0,    L_v f(v) + (1 - P_v) f'(v) = 0
//! ```
//!
//! where `f'(v)` collects the inward derivatives.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::linalg::{c, fro, positive_part_norm, CMatrix, CVector};

/// Default relative Frobenius tolerance for self-adjointness and idempotence.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct VertexCondition {
    pub l: CMatrix,
    pub p: CMatrix,
}

impl VertexCondition {
    pub fn degree(&self) -> usize {
        self.p.nrows()
    }

    /// `1 - P_v`.
    pub fn complement(&self) -> CMatrix {
        CMatrix::identity(self.degree(), self.degree()) - &self.p
    }

    /// `‖P_v L_v (1 - P_v)‖_F`: nonzero when the verbatim condition
    /// constrains more than the form does.
    pub fn coupling_anomaly(&self) -> f64 {
        fro(&(&self.p * &self.l * self.complement()))
    }

    /// `(‖P f(v)‖, ‖L f(v) + (1 - P) f'(v)‖)`.
    pub fn residual(&self, value: &CVector, deriv: &CVector) -> (f64, f64) {
        let dirichlet = (&self.p * value).norm();
        let robin = (&self.l * value + self.complement() * deriv).norm();
        (dirichlet, robin)
    }
}

/// Standard vertex conditions in `(L, P)` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Dirichlet,
    Neumann,
    Kirchhoff,
    Delta(f64),
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "dirichlet" => Ok(Preset::Dirichlet),
            "neumann" => Ok(Preset::Neumann),
            "kirchhoff" => Ok(Preset::Kirchhoff),
            other => {
                if let Some(a) = other.strip_prefix("delta:") {
                    let alpha = a
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad delta strength `{a}`")))?;
                    Ok(Preset::Delta(alpha))
                } else {
                    Err(Error::Parse(format!("unknown vertex condition `{other}`")))
                }
            }
        }
    }

    /// `(L_v, P_v)` for a star of the given degree.
    ///
    /// `delta(α)` is continuity plus `Σ_e f_e'(v) = α f(v)`.
    pub fn build(self, degree: usize) -> VertexCondition {
        let d = degree;
        let id = CMatrix::identity(d, d);
        let ones = CMatrix::from_element(d, d, c(1.0));
        let zero = CMatrix::zeros(d, d);
        let continuity = || &id - &ones * c(1.0 / d as f64);
        match self {
            Preset::Dirichlet => VertexCondition { l: zero, p: id },
            Preset::Neumann => VertexCondition {
                l: zero.clone(),
                p: zero,
            },
            Preset::Kirchhoff => VertexCondition {
                l: zero,
                p: continuity(),
            },
            Preset::Delta(alpha) => VertexCondition {
                l: &ones * c(-alpha / (d * d) as f64),
                p: continuity(),
            },
        }
    }
}

/// Per-vertex conditions, indexed like the graph's vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    pub vertices: Vec<VertexCondition>,
}

/// A failed check on one vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BcViolation {
    NotSelfAdjoint { vertex: String, deviation: f64 },
    NotHermitianProjection { vertex: String, deviation: f64 },
    NotIdempotent { vertex: String, deviation: f64 },
    NonFinite { vertex: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcReport {
    pub violations: Vec<BcViolation>,
    /// `max_v ‖L_v⁺‖`.
    pub s: f64,
    /// Vertices where `P_v L_v (1 - P_v) ≠ 0`.
    pub anomalies: Vec<String>,
}

impl BcReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl BoundaryCondition {
    /// The same preset at every vertex.
    pub fn uniform(g: &MetricGraph, preset: Preset) -> Self {
        Self::from_presets(g, |_| preset)
    }

    pub fn from_presets(g: &MetricGraph, f: impl Fn(usize) -> Preset) -> Self {
        let vertices = (0..g.vertex_count())
            .map(|v| f(v).build(g.degree(v)))
            .collect();
        BoundaryCondition { vertices }
    }

    pub fn vertex(&self, v: usize) -> &VertexCondition {
        &self.vertices[v]
    }

    pub fn from_json_str(g: &MetricGraph, s: &str) -> Result<Self> {
        let file: BTreeMap<String, VertexSpec> = serde_json::from_str(s)?;
        let default = file.get("*");
        for key in file.keys() {
            if key != "*" {
                g.vertex(key)?;
            }
        }
        let mut vertices = Vec::with_capacity(g.vertex_count());
        for (v, id) in g.vertex_ids().iter().enumerate() {
            let spec = file.get(id).or(default).ok_or_else(|| {
                Error::InvalidBoundary(format!(
                    "no condition for vertex `{id}` and no \"*\" default"
                ))
            })?;
            vertices.push(spec.build(id, g.degree(v))?);
        }
        Ok(BoundaryCondition { vertices })
    }

    pub fn from_json_file(g: &MetricGraph, path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(g, &text)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum VertexSpec {
    Name(String),
    Delta(DeltaSpec),
    Explicit(ExplicitSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeltaSpec {
    delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ExplicitSpec {
    L: Vec<Vec<Entry>>,
    P: Vec<Vec<Entry>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(x) => c(x),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

fn matrix(rows: &[Vec<Entry>], d: usize, what: &str, vertex: &str) -> Result<CMatrix> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidBoundary(format!(
            "{what} at vertex `{vertex}` must be {d}x{d} (the vertex degree)"
        )));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| rows[i][j].value()))
}

impl VertexSpec {
    fn build(&self, vertex: &str, d: usize) -> Result<VertexCondition> {
        match self {
            VertexSpec::Name(name) => Ok(Preset::parse(name)?.build(d)),
            VertexSpec::Delta(DeltaSpec { delta }) => Ok(Preset::Delta(*delta).build(d)),
            VertexSpec::Explicit(ExplicitSpec { L, P }) => Ok(VertexCondition {
                l: matrix(L, d, "L", vertex)?,
                p: matrix(P, d, "P", vertex)?,
            }),
        }
    }
}

fn relative(dev: f64, m: &CMatrix) -> f64 {
    dev / fro(m).max(1.0)
}

/// Checks self-adjointness of `L_v`, that `P_v` is an orthogonal projection,
/// and returns the (UB) constant `S = max_v ‖L_v⁺‖`.
pub fn validate_bc(g: &MetricGraph, bc: &BoundaryCondition, tol: f64) -> Result<BcReport> {
    if bc.vertices.len() != g.vertex_count() {
        return Err(Error::InvalidBoundary(format!(
            "{} vertex conditions for {} vertices",
            bc.vertices.len(),
            g.vertex_count()
        )));
    }
    let mut violations = Vec::new();
    let mut anomalies = Vec::new();
    let mut s: f64 = 0.0;
    for (v, vc) in bc.vertices.iter().enumerate() {
        let id = g.vertex_ids()[v].clone();
        let d = g.degree(v);
        for (name, m) in [("L", &vc.l), ("P", &vc.p)] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::InvalidBoundary(format!(
                    "{name} at vertex `{id}` is {}x{}, star has degree {d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if vc
            .l
            .iter()
            .chain(vc.p.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            violations.push(BcViolation::NonFinite { vertex: id });
            continue;
        }
        let dl = relative(fro(&(&vc.l - vc.l.adjoint())), &vc.l);
        if dl > tol {
            violations.push(BcViolation::NotSelfAdjoint {
                vertex: id.clone(),
                deviation: dl,
            });
        }
        let dp = relative(fro(&(&vc.p - vc.p.adjoint())), &vc.p);
        if dp > tol {
            violations.push(BcViolation::NotHermitianProjection {
                vertex: id.clone(),
                deviation: dp,
            });
        }
        let di = relative(fro(&(&vc.p * &vc.p - &vc.p)), &vc.p);
        if di > tol {
            violations.push(BcViolation::NotIdempotent {
                vertex: id.clone(),
                deviation: di,
            });
        }
        if dl <= tol {
            s = s.max(positive_part_norm(&vc.l));
        }
        if vc.coupling_anomaly() > 1e-10 * fro(&vc.l).max(1.0) {
            anomalies.push(id);
        }
    }
    Ok(BcReport {
        violations,
        s,
        anomalies,
    })
}

/// The shift making `s₀(f,f) + C‖f‖² ≥ ½‖f‖²_{W^{1,2}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeinsConstant {
    pub s: f64,
    pub u: f64,
    pub eps0: f64,
    pub c: f64,
}

/// `ε₀ = min(u, 1/(4S))` and `C = 4S/ε₀ + ½`; `C = ½` when `S = 0`.
pub fn heins_constant(s: f64, u: f64) -> HeinsConstant {
    if s > 0.0 {
        let eps0 = u.min(1.0 / (4.0 * s));
        HeinsConstant {
            s,
            u,
            eps0,
            c: 4.0 * s / eps0 + 0.5,
        }
    } else {
        HeinsConstant {
            s: 0.0,
            u,
            eps0: u,
            c: 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::hermitian_eigen;
    use proptest::prelude::*;

    fn vc(l: &[f64], p: &[f64], d: usize) -> VertexCondition {
        VertexCondition {
            l: CMatrix::from_row_slice(d, d, &l.iter().map(|&x| c(x)).collect::<Vec<_>>()),
            p: CMatrix::from_row_slice(d, d, &p.iter().map(|&x| c(x)).collect::<Vec<_>>()),
        }
    }

    fn two_vertex_bc(g: &MetricGraph, at0: VertexCondition) -> BoundaryCondition {
        let mut bc = BoundaryCondition::uniform(g, Preset::Kirchhoff);
        bc.vertices[0] = at0;
        bc
    }

    #[test]
    fn validate_examples() {
        // vertex 0 of the two-loop-free multigraph has degree 2
        let g = fixtures::parallel_edges(1.0, 2.0);
        let bc = two_vertex_bc(&g, vc(&[0.0; 4], &[0.5, 0.5, 0.5, 0.5], 2));
        let r = validate_bc(&g, &bc, DEFAULT_TOL).unwrap();
        assert!(r.is_valid());
        assert_eq!(r.s, 0.0);

        let bc = two_vertex_bc(&g, vc(&[0.0, 1.0, 1.0, 0.0], &[0.0; 4], 2));
        let r = validate_bc(&g, &bc, DEFAULT_TOL).unwrap();
        assert!(r.is_valid());
        assert!((r.s - 1.0).abs() < 1e-12);

        let bc = two_vertex_bc(&g, vc(&[0.0; 4], &[1.0, 0.0, 0.0, 0.5], 2));
        let r = validate_bc(&g, &bc, DEFAULT_TOL).unwrap();
        assert!(matches!(
            r.violations[..],
            [BcViolation::NotIdempotent { .. }]
        ));

        let bc = two_vertex_bc(&g, vc(&[0.0, 1.0, 2.0, 0.0], &[0.0; 4], 2));
        let r = validate_bc(&g, &bc, DEFAULT_TOL).unwrap();
        assert!(matches!(
            r.violations[..],
            [BcViolation::NotSelfAdjoint { .. }]
        ));

        let bc = two_vertex_bc(&g, vc(&[0.0], &[0.0], 1));
        assert!(validate_bc(&g, &bc, DEFAULT_TOL).is_err());
    }

    #[test]
    fn preset_examples() {
        let k1 = Preset::Kirchhoff.build(1);
        assert_eq!(k1.p, CMatrix::zeros(1, 1));
        assert_eq!(k1.l, CMatrix::zeros(1, 1));
        let d1 = Preset::Delta(2.5).build(1);
        assert_eq!(d1.p, CMatrix::zeros(1, 1));
        assert_eq!(d1.l[(0, 0)], c(-2.5));
        let dir = Preset::Dirichlet.build(3);
        assert_eq!(dir.p, CMatrix::identity(3, 3));
        assert_eq!(Preset::Delta(0.0).build(4).p, Preset::Kirchhoff.build(4).p);
        assert!(Preset::Delta(0.0)
            .build(4)
            .l
            .iter()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn presets_validate_and_have_no_anomaly() {
        let g = fixtures::star(&[1.0, 1.5, 2.0]);
        for p in [
            Preset::Dirichlet,
            Preset::Neumann,
            Preset::Kirchhoff,
            Preset::Delta(-3.0),
            Preset::Delta(2.0),
        ] {
            let bc = BoundaryCondition::uniform(&g, p);
            let r = validate_bc(&g, &bc, DEFAULT_TOL).unwrap();
            assert!(r.is_valid(), "{p:?}");
            assert!(r.anomalies.is_empty(), "{p:?}");
        }
        // center: L = (3/9) 11*, norm 1; degree-one tips: L = 3
        let bc = BoundaryCondition::uniform(&g, Preset::Delta(-3.0));
        assert!((validate_bc(&g, &bc, DEFAULT_TOL).unwrap().s - 3.0).abs() < 1e-12);
        let bc = BoundaryCondition::from_presets(&g, |v| {
            if v == 0 {
                Preset::Delta(-3.0)
            } else {
                Preset::Dirichlet
            }
        });
        assert!((validate_bc(&g, &bc, DEFAULT_TOL).unwrap().s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heins_examples() {
        let h = heins_constant(0.0, 1.0);
        assert_eq!(h.c, 0.5);
        let h = heins_constant(1.0, 1.0);
        assert_eq!(h.eps0, 0.25);
        assert_eq!(h.c, 16.5);
        let h = heins_constant(1.0, 0.1);
        assert_eq!(h.eps0, 0.1);
        assert!((h.c - 40.5).abs() < 1e-12);
    }

    #[test]
    fn json_presets_and_explicit() {
        let g = fixtures::star(&[1.0, 1.0, 1.0]);
        let text = r#"{"c": {"delta": 2.0}, "*": "neumann", "t1": "dirichlet",
                       "t2": {"L": [[-1.5]], "P": [[[0, 0]]]}}"#;
        let bc = BoundaryCondition::from_json_str(&g, text).unwrap();
        assert_eq!(bc.vertices[0], Preset::Delta(2.0).build(3));
        assert_eq!(bc.vertices[1], Preset::Dirichlet.build(1));
        assert_eq!(bc.vertices[2].l[(0, 0)], c(-1.5));
        assert_eq!(bc.vertices[3], Preset::Neumann.build(1));
        assert!(
            BoundaryCondition::from_json_str(&g, r#"{"zz": "neumann", "*": "neumann"}"#).is_err()
        );
        assert!(BoundaryCondition::from_json_str(&g, r#"{"c": "kirchhoff"}"#).is_err());
        assert!(
            BoundaryCondition::from_json_str(&g, r#"{"*": {"L": [[0]], "P": [[0]]}}"#).is_err()
        );
    }

    proptest! {
        #[test]
        fn positive_part_matches_eigen(entries in proptest::collection::vec(-5.0f64..5.0, 18)) {
            let d = 3;
            let mut m = CMatrix::zeros(d, d);
            let mut k = 0;
            for i in 0..d {
                for j in i..d {
                    let z = if i == j { c(entries[k]) } else { Complex64::new(entries[k], entries[k + 1]) };
                    k += 2;
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
            let full = m.clone().symmetric_eigen();
            let top = full.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((positive_part_norm(&m) - top.max(0.0)).abs() < 1e-10);
            let (vals, _) = hermitian_eigen(&m);
            prop_assert!((vals[2] - top).abs() < 1e-10);
        }
    }
}
