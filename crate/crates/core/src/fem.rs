//! Piecewise-linear finite elements for the form `s₀` with the vertex
//! conditions `P_v f(v) = 0` eliminated: every end value at `v` is expanded in
//! an orthonormal basis of `ker P_v`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::{heins_constant, validate_bc, BoundaryCondition, HeinsConstant, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::funcspace::{GridFunction, Mesh};
use crate::graph::{End, MetricGraph};
use crate::linalg::{c, fro, generalized_eigen, projection_kernel, quad, CMatrix, CVector, ZERO};

/// Linear combination of degrees of freedom giving one nodal value.
type NodeDofs = Vec<(usize, Complex64)>;

/// Stiffness, boundary and mass matrices in the constrained basis.
#[derive(Debug, Clone)]
pub struct FormAssembly {
    mesh: Mesh,
    nodes: Vec<Vec<NodeDofs>>,
    /// First degree of freedom and `ker P_v` basis of each vertex.
    vertex_dofs: Vec<(usize, CMatrix)>,
    dim: usize,
    /// `Σ_e ∫ f' conj(g')`.
    pub stiffness: CMatrix,
    /// `Σ_v ⟨L_v f(v), g(v)⟩`.
    pub boundary: CMatrix,
    /// `Σ_e ∫ f conj(g)`.
    pub mass: CMatrix,
    /// `∫ V f conj(g)` once a potential has been added.
    pub potential: Option<CMatrix>,
    heins: HeinsConstant,
}

/// Builds the constrained P1 system on a uniform mesh of width at most `h_max`.
pub fn assemble(g: &MetricGraph, bc: &BoundaryCondition, h_max: f64) -> Result<FormAssembly> {
    g.require_valid()?;
    g.require_compact()?;
    let mesh = Mesh::uniform(g, h_max)?;
    assemble_on(g, bc, &mesh)
}

pub fn assemble_on(g: &MetricGraph, bc: &BoundaryCondition, mesh: &Mesh) -> Result<FormAssembly> {
    g.require_compact()?;
    mesh.check_graph(g)?;
    let report = validate_bc(g, bc, DEFAULT_TOL)?;
    if !report.is_valid() {
        return Err(Error::InvalidBoundary(
            serde_json::to_string(&report.violations)
                .unwrap_or_else(|_| "invalid vertex condition".into()),
        ));
    }

    let mut dim = 0;
    let mut nodes: Vec<Vec<NodeDofs>> = Vec::with_capacity(g.edge_count());
    for e in 0..g.edge_count() {
        let n = mesh.elements(e);
        let mut list = vec![Vec::new(); n + 1];
        for (k, slot) in list.iter_mut().enumerate().take(n).skip(1) {
            *slot = vec![(dim + k - 1, c(1.0))];
        }
        dim += n - 1;
        nodes.push(list);
    }
    let mut vertex_dofs = Vec::with_capacity(g.vertex_count());
    for (v, star) in g.stars().iter().enumerate() {
        let q = projection_kernel(&bc.vertex(v).p);
        let base = dim;
        for (slot, end) in star.ends.iter().enumerate() {
            let k = match end.end {
                End::Init => 0,
                End::Term => mesh.elements(end.edge),
            };
            nodes[end.edge][k] = (0..q.ncols())
                .map(|j| (base + j, q[(slot, j)]))
                .filter(|(_, z)| *z != ZERO)
                .collect();
        }
        dim += q.ncols();
        vertex_dofs.push((base, q));
    }

    let mut fa = FormAssembly {
        mesh: mesh.clone(),
        nodes,
        vertex_dofs,
        dim,
        stiffness: CMatrix::zeros(0, 0),
        boundary: CMatrix::zeros(dim, dim),
        mass: CMatrix::zeros(0, 0),
        potential: None,
        heins: heins_constant(report.s, g.u()),
    };
    fa.stiffness = fa.element_matrix(|_, _, h| {
        let k = 1.0 / h;
        [[k, -k], [-k, k]]
    });
    fa.mass = fa.element_matrix(|_, _, h| {
        let m = h / 6.0;
        [[2.0 * m, m], [m, 2.0 * m]]
    });
    for (v, (base, q)) in fa.vertex_dofs.iter().enumerate() {
        let r = q.adjoint() * &bc.vertex(v).l * q;
        let d = q.ncols();
        fa.boundary.view_mut((*base, *base), (d, d)).copy_from(&r);
    }
    Ok(fa)
}

impl FormAssembly {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn heins(&self) -> HeinsConstant {
        self.heins
    }

    /// Sums `conj(z_a) m_ab z_b` over all cells, `m` given per `(edge, cell, width)`.
    pub fn element_matrix(&self, local: impl Fn(usize, usize, f64) -> [[f64; 2]; 2]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (e, list) in self.nodes.iter().enumerate() {
            let h = self.mesh.step(e);
            for k in 0..self.mesh.elements(e) {
                let m = local(e, k, h);
                for a in 0..2 {
                    for b in 0..2 {
                        for &(i, zi) in &list[k + a] {
                            for &(j, zj) in &list[k + b] {
                                out[(i, j)] += zi.conj() * zj * m[a][b];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Matrix of `s₀` (plus the potential, if any): `A − R (+ V)`.
    pub fn operator(&self) -> CMatrix {
        let mut op = &self.stiffness - &self.boundary;
        if let Some(v) = &self.potential {
            op += v;
        }
        op
    }

    /// `s₀(x, x)` without the potential.
    pub fn form(&self, x: &CVector) -> f64 {
        quad(&self.stiffness, x) - quad(&self.boundary, x)
    }

    pub fn norm_sqr(&self, x: &CVector) -> f64 {
        quad(&self.mass, x)
    }

    pub fn deriv_norm_sqr(&self, x: &CVector) -> f64 {
        quad(&self.stiffness, x)
    }

    pub fn boundary_term(&self, x: &CVector) -> f64 {
        quad(&self.boundary, x)
    }

    /// Nodal value of edge `e` at node `k`.
    pub fn node_value(&self, x: &CVector, e: usize, k: usize) -> Complex64 {
        self.nodes[e][k].iter().map(|&(i, z)| z * x[i]).sum()
    }

    pub fn end_value(&self, x: &CVector, e: usize, end: End) -> Complex64 {
        match end {
            End::Init => self.node_value(x, e, 0),
            End::Term => self.node_value(x, e, self.mesh.elements(e)),
        }
    }

    /// Degree-of-freedom index of interior node `k` of edge `e`.
    pub fn interior_dof(&self, e: usize, k: usize) -> Option<usize> {
        if k == 0 || k >= self.mesh.elements(e) {
            None
        } else {
            Some(self.nodes[e][k][0].0)
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_dofs.len()
    }

    /// First index and number of the degrees of freedom at vertex `v`.
    pub fn vertex_dofs(&self, v: usize) -> (usize, usize) {
        (self.vertex_dofs[v].0, self.vertex_dofs[v].1.ncols())
    }

    pub fn to_grid(&self, x: &CVector) -> GridFunction {
        let values = (0..self.mesh.edge_count())
            .map(|e| {
                (0..self.mesh.nodes(e))
                    .map(|k| self.node_value(x, e, k))
                    .collect()
            })
            .collect();
        GridFunction::new(self.mesh.clone(), values).expect("nodal values match the mesh")
    }

    /// Adds a Hermitian potential matrix to the operator.
    pub fn with_potential(mut self, v: CMatrix) -> Result<Self> {
        if v.nrows() != self.dim || v.ncols() != self.dim {
            return Err(Error::InvalidInput(
                "potential matrix has the wrong size".into(),
            ));
        }
        self.potential = Some(v);
        Ok(self)
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteEigensystem {
    pub values: Vec<f64>,
    /// Mass-orthonormal eigenvectors as columns.
    pub vectors: CMatrix,
    pub h_max: f64,
}

/// Lowest `k` eigenpairs of `(A − R (+ V), B)`.
pub fn eigensystem(fa: &FormAssembly, k: usize) -> Result<DiscreteEigensystem> {
    if k > fa.dim {
        return Err(Error::InvalidInput(format!(
            "{k} modes requested, discrete space has dimension {}",
            fa.dim
        )));
    }
    let (values, vectors) = generalized_eigen(&fa.operator(), &fa.mass, k)?;
    Ok(DiscreteEigensystem {
        values,
        vectors,
        h_max: fa.mesh.h_max(),
    })
}

impl DiscreteEigensystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// `‖(A − R)x − λBx‖ / ‖A − R‖_F`.
    pub fn residual(&self, fa: &FormAssembly, k: usize) -> f64 {
        let op = fa.operator();
        let x = self.vector(k);
        let r = &op * &x - &fa.mass * &x * c(self.values[k]);
        r.norm() / fro(&op).max(f64::MIN_POSITIVE)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_spectrum_csv(&self.values, w)
    }
}

/// Rows `(index, eigenvalue)`.
pub fn write_spectrum_csv(values: &[f64], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "eigenvalue"])?;
    for (i, v) in values.iter().enumerate() {
        out.write_record([i.to_string(), format!("{v:e}")])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginReport {
    /// Smallest margin over the samples, each scaled to unit `L²` norm.
    pub worst_margin: f64,
    /// Index of the sample attaining it.
    pub worst_sample: usize,
    /// Smallest margin over the whole discrete space relative to `‖f‖²_{W^{1,2}}`.
    pub extremal: f64,
    pub samples: usize,
}

fn scaled(fa: &FormAssembly, x: &CVector) -> Option<CVector> {
    let n = fa.norm_sqr(x).sqrt();
    (n > 0.0 && n.is_finite()).then(|| x / c(n))
}

fn worst(fa: &FormAssembly, samples: &[CVector], margin: impl Fn(&CVector) -> f64) -> (f64, usize) {
    let mut out = (f64::INFINITY, 0);
    for (i, x) in samples.iter().enumerate() {
        if let Some(y) = scaled(fa, x) {
            let m = margin(&y);
            if m < out.0 {
                out = (m, i);
            }
        }
    }
    out
}

fn lowest_ratio(fa: &FormAssembly, m: &CMatrix) -> Result<f64> {
    if fa.dim == 0 {
        return Ok(f64::INFINITY);
    }
    let w = &fa.stiffness + &fa.mass;
    Ok(generalized_eigen(m, &w, 1)?.0[0])
}

/// `s₀(f,f) + C‖f‖² − ½‖f‖²_{W^{1,2}}` over the samples.
pub fn check_heins(
    fa: &FormAssembly,
    hc: &HeinsConstant,
    samples: &[CVector],
) -> Result<MarginReport> {
    let margin = |x: &CVector| {
        fa.form(x) + hc.c * fa.norm_sqr(x) - 0.5 * (fa.norm_sqr(x) + fa.deriv_norm_sqr(x))
    };
    let (worst_margin, worst_sample) = worst(fa, samples, margin);
    let m = &fa.stiffness * c(0.5) - &fa.boundary + &fa.mass * c(hc.c - 0.5);
    Ok(MarginReport {
        worst_margin,
        worst_sample,
        extremal: lowest_ratio(fa, &m)?,
        samples: samples.len(),
    })
}

/// `(4S/ε)‖f‖² + 2Sε‖f'‖² − Σ_v ⟨L_v f(v), f(v)⟩` over the samples.
pub fn check_randterm(fa: &FormAssembly, eps: f64, samples: &[CVector]) -> Result<MarginReport> {
    let u = fa.heins.u;
    if !(eps > 0.0) || eps > u * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "ε = {eps} must lie in (0, u = {u}]"
        )));
    }
    let s = fa.heins.s;
    let margin = |x: &CVector| {
        4.0 * s / eps * fa.norm_sqr(x) + 2.0 * s * eps * fa.deriv_norm_sqr(x) - fa.boundary_term(x)
    };
    let (worst_margin, worst_sample) = worst(fa, samples, margin);
    let m = &fa.mass * c(4.0 * s / eps) + &fa.stiffness * c(2.0 * s * eps) - &fa.boundary;
    Ok(MarginReport {
        worst_margin,
        worst_sample,
        extremal: lowest_ratio(fa, &m)?,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Preset;
    use crate::fixtures;
    use std::f64::consts::PI;

    #[test]
    fn dirichlet_interval_has_only_interior_dofs() {
        let g = fixtures::interval(PI);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let fa = assemble(&g, &bc, PI / 50.0).unwrap();
        assert_eq!(fa.dim(), 49);
        assert_eq!(fro(&fa.boundary), 0.0);
    }

    #[test]
    fn neumann_interval_keeps_end_values() {
        let g = fixtures::interval(1.0);
        let bc = BoundaryCondition::uniform(&g, Preset::Neumann);
        let fa = assemble(&g, &bc, 0.1).unwrap();
        assert_eq!(fa.dim(), 11);
        assert_eq!(fro(&fa.boundary), 0.0);
        let es = eigensystem(&fa, 2).unwrap();
        assert!(es.values[0].abs() < 1e-12);
        let f = fa.to_grid(&es.vector(0));
        let v0 = f.values(0)[0];
        assert!(f.values(0).iter().all(|z| (z - v0).norm() < 1e-10));
    }

    #[test]
    fn kirchhoff_star_shares_center_value() {
        let g = fixtures::star(&[1.0, 1.0, 1.0]);
        let bc = BoundaryCondition::uniform(&g, Preset::Kirchhoff);
        let fa = assemble(&g, &bc, 0.25).unwrap();
        assert_eq!(fa.vertex_dofs(0).1, 1);
        assert_eq!(fa.dim(), 3 * 3 + 1 + 3);
        let x = CVector::from_fn(fa.dim(), |i, _| c(i as f64 + 1.0));
        let vals: Vec<_> = (0..3).map(|e| fa.end_value(&x, e, End::Init)).collect();
        assert!((vals[0] - vals[1]).norm() < 1e-14 && (vals[1] - vals[2]).norm() < 1e-14);
    }

    #[test]
    fn matrices_are_hermitian() {
        let g = fixtures::loop_with_edge(3.0, 2.0);
        let mut bc = BoundaryCondition::uniform(&g, Preset::Delta(-2.0));
        bc.vertices[0].l[(0, 1)] = Complex64::new(0.0, 0.3);
        bc.vertices[0].l[(1, 0)] = Complex64::new(0.0, -0.3);
        let fa = assemble(&g, &bc, 0.2).unwrap();
        for m in [&fa.stiffness, &fa.boundary, &fa.mass, &fa.operator()] {
            assert!(fro(&(m - m.adjoint())) <= 1e-14 * fro(m).max(1.0));
        }
    }

    #[test]
    fn dirichlet_eigenvalues_converge() {
        let g = fixtures::interval(PI);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let fa = assemble(&g, &bc, PI / 200.0).unwrap();
        let es = eigensystem(&fa, 4).unwrap();
        let h = fa.mesh().h_max();
        for (n, v) in es.values.iter().enumerate() {
            let exact = ((n + 1) * (n + 1)) as f64;
            assert!(
                (v - exact).abs() <= 10.0 * h * h * exact.max(1.0),
                "{v} vs {exact}"
            );
            assert!(es.residual(&fa, n) < 1e-8);
        }
        assert!(eigensystem(&fa, fa.dim() + 1).is_err());
    }

    #[test]
    fn repulsive_delta_raises_eigenvalues() {
        let g = fixtures::interval(1.0);
        let spectrum = |alpha: f64| {
            let bc = BoundaryCondition::from_presets(&g, |v| {
                if v == 0 {
                    Preset::Delta(alpha)
                } else {
                    Preset::Dirichlet
                }
            });
            eigensystem(&assemble(&g, &bc, 0.01).unwrap(), 3)
                .unwrap()
                .values
        };
        let (free, pushed) = (spectrum(0.0), spectrum(1.0));
        for (a, b) in free.iter().zip(&pushed) {
            assert!(b > a);
        }
    }

    #[test]
    fn heins_extremal_margin_is_nonnegative() {
        let g = fixtures::star(&[1.5, 2.0, 2.5]);
        for alpha in [0.0, -3.0, -30.0] {
            let bc = BoundaryCondition::uniform(&g, Preset::Delta(alpha));
            let fa = assemble(&g, &bc, 0.1).unwrap();
            let hc = fa.heins();
            let es = eigensystem(&fa, 1).unwrap();
            let r = check_heins(&fa, &hc, &[es.vector(0)]).unwrap();
            assert!(r.extremal >= -1e-10, "{alpha}: {r:?}");
            assert!(r.worst_margin >= -1e-10);
            let r = check_randterm(&fa, hc.u, &[es.vector(0)]).unwrap();
            assert!(r.extremal >= -1e-10, "{alpha}: {r:?}");
            assert!(check_randterm(&fa, 2.0 * hc.u, &[]).is_err());
        }
    }

    #[test]
    fn infinite_edges_are_rejected() {
        let g = MetricGraph::builder(1.0)
            .vertex("a")
            .half_line("h", "a", Some(5.0))
            .build();
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        assert!(matches!(assemble(&g, &bc, 0.1), Err(Error::Unsupported(_))));
    }
}
