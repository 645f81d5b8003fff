//! Exact eigenfunctions on compact graphs. On every edge a solution of
//! `−f'' = λ f` is `α c(t; λ) + β s(t; λ)`; the vertex conditions become a
//! square linear system `M(λ)` in the coefficients, singular exactly at the
//! eigenvalues.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{heins_constant, validate_bc, BoundaryCondition, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::funcspace::{EdgeFunction, GridFunction, Mesh, TraceVector};
use crate::graph::{EdgeEnd, End, MetricGraph};
use crate::linalg::{c, fix_phase, fro, null_space, singular_values, CMatrix, CVector};

/// Relative singularity threshold for `M(λ)`.
pub const SINGULAR_TOL: f64 = 1e-8;

/// The solutions of `−f'' = λ f` with `c(0)=1, c'(0)=0, s(0)=0, s'(0)=1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalBasis {
    pub lambda: f64,
}

impl FundamentalBasis {
    pub fn new(lambda: f64) -> Self {
        FundamentalBasis { lambda }
    }

    /// `(c, s)` at `t`; `c' = −λ s` and `s' = c`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let lam = self.lambda;
        let x = lam * t * t;
        if x.abs() < 1.0 {
            // power series in −λt², good to machine precision for |λ|t² < 1
            let mut cterm = 1.0;
            let mut sterm = t;
            let (mut cs, mut ss) = (cterm, sterm);
            for n in 1..30 {
                let k = 2 * n;
                cterm *= -x / ((k - 1) * k) as f64;
                sterm *= -x / (k * (k + 1)) as f64;
                cs += cterm;
                ss += sterm;
                if cterm.abs() < 1e-18 * cs.abs() && sterm.abs() < 1e-18 * ss.abs() {
                    break;
                }
            }
            (cs, ss)
        } else if lam > 0.0 {
            let k = lam.sqrt();
            ((k * t).cos(), (k * t).sin() / k)
        } else {
            let k = (-lam).sqrt();
            ((k * t).cosh(), (k * t).sinh() / k)
        }
    }

    /// `c s' − c' s`, identically one.
    pub fn wronskian(&self, t: f64) -> f64 {
        let (cv, sv) = self.eval(t);
        cv * cv + self.lambda * sv * sv
    }

    /// `(∫c², ∫cs, ∫s²)` over `[0, l]`.
    pub fn gram(&self, l: f64) -> (f64, f64, f64) {
        let lam = self.lambda;
        let (cv, sv) = self.eval(l);
        let x = lam * l * l;
        let ss = if x.abs() < 1.0 {
            // Σ_{n≥1} (−1)^{n+1} 4^n λ^{n−1} l^{2n+1} / (2 (2n+1)!)
            let mut term = 4.0 * l * l * l / (2.0 * 6.0);
            let mut sum = term;
            for n in 2..30 {
                term *= -4.0 * x / ((2 * n) * (2 * n + 1)) as f64;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            sum
        } else {
            (l - cv * sv) / (2.0 * lam)
        };
        (l - lam * ss, 0.5 * sv * sv, ss)
    }
}

/// Row blocks of boundary data: value and signed derivative at one end of an
/// edge as linear forms in `(α_e, β_e)`, given the edge transfer matrix.
fn end_rows(transfer: &Mat2, end: End) -> ([f64; 2], [f64; 2]) {
    match end {
        End::Init => ([1.0, 0.0], [0.0, 1.0]),
        End::Term => (transfer[0], [-transfer[1][0], -transfer[1][1]]),
    }
}

type Mat2 = [[f64; 2]; 2];

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn apply(m: &Mat2, (a, b): (Complex64, Complex64)) -> (Complex64, Complex64) {
    (a * m[0][0] + b * m[0][1], a * m[1][0] + b * m[1][1])
}

/// A piecewise constant potential on one edge: `values[k]` on
/// `[starts[k], starts[k + 1])`, the last layer running to `length`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLayers {
    starts: Vec<f64>,
    values: Vec<f64>,
    length: f64,
}

impl EdgeLayers {
    pub fn new(length: f64, starts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let ok = length.is_finite()
            && length > 0.0
            && !starts.is_empty()
            && starts.len() == values.len()
            && starts[0] == 0.0
            && starts.windows(2).all(|w| w[0] < w[1])
            && starts.last().is_some_and(|&s| s < length)
            && values.iter().all(|q| q.is_finite());
        if !ok {
            return Err(Error::InvalidInput(
                "layers need increasing starts from 0 inside the edge and finite values".into(),
            ));
        }
        Ok(EdgeLayers {
            starts,
            values,
            length,
        })
    }

    pub fn flat(length: f64, value: f64) -> Self {
        EdgeLayers {
            starts: vec![0.0],
            values: vec![value],
            length,
        }
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn width(&self, k: usize) -> f64 {
        self.starts.get(k + 1).copied().unwrap_or(self.length) - self.starts[k]
    }

    fn locate(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Maps `(f(0), f'(0))` to `(f, f')` at every layer start, then at the end.
    fn transfers(&self, lambda: f64) -> Vec<Mat2> {
        let mut out = Vec::with_capacity(self.starts.len() + 1);
        let mut t = IDENTITY;
        out.push(t);
        for (k, q) in self.values.iter().enumerate() {
            let mu = lambda - q;
            let (cv, sv) = FundamentalBasis::new(mu).eval(self.width(k));
            t = mul(&[[cv, sv], [-mu * sv, cv]], &t);
            out.push(t);
        }
        out
    }
}

fn check_inputs(g: &MetricGraph, bc: &BoundaryCondition) -> Result<()> {
    g.require_compact()?;
    let report = validate_bc(g, bc, DEFAULT_TOL)?;
    if !report.is_valid() {
        return Err(Error::InvalidBoundary(
            serde_json::to_string(&report.violations)
                .unwrap_or_else(|_| "invalid vertex condition".into()),
        ));
    }
    Ok(())
}

/// `M(λ)`: for each vertex `d_v` rows `P_v f(v) + (1 − P_v)(L_v f(v) + f'(v))`,
/// columns `(α_0, β_0, α_1, β_1, …)`.
pub fn secular_matrix(g: &MetricGraph, bc: &BoundaryCondition, lambda: f64) -> Result<CMatrix> {
    Ok(SecularProblem::new(g, bc)?.matrix(lambda))
}

fn build_matrix(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    layers: &[EdgeLayers],
    lambda: f64,
) -> CMatrix {
    let n = 2 * g.edge_count();
    let ends: Vec<Mat2> = layers
        .iter()
        .map(|l| *l.transfers(lambda).last().expect("at least one layer"))
        .collect();
    let mut m = CMatrix::zeros(n, n);
    let mut row = 0;
    for (v, star) in g.stars().iter().enumerate() {
        let d = star.degree();
        let mut val = CMatrix::zeros(d, n);
        let mut der = CMatrix::zeros(d, n);
        for (k, end) in star.ends.iter().enumerate() {
            let (fv, fd) = end_rows(&ends[end.edge], end.end);
            for j in 0..2 {
                val[(k, 2 * end.edge + j)] = c(fv[j]);
                der[(k, 2 * end.edge + j)] = c(fd[j]);
            }
        }
        let vc = bc.vertex(v);
        let block = &vc.p * &val + vc.complement() * (&vc.l * &val + der);
        m.view_mut((row, 0), (d, n)).copy_from(&block);
        row += d;
    }
    m
}

/// `σ_min(M(λ)) / ‖M(λ)‖_F`.
pub fn relative_sigma_min(g: &MetricGraph, bc: &BoundaryCondition, lambda: f64) -> f64 {
    let m = build_matrix(g, bc, &flat_layers(g), lambda);
    sigma_ratio(&m)
}

fn sigma_ratio(m: &CMatrix) -> f64 {
    singular_values(m)[0] / fro(m).max(f64::MIN_POSITIVE)
}

fn flat_layers(g: &MetricGraph) -> Vec<EdgeLayers> {
    (0..g.edge_count())
        .map(|e| EdgeLayers::flat(g.length(e), 0.0))
        .collect()
}

/// `−f'' + q f = λ f` with `q` piecewise constant on every edge; zero for `H₀`.
/// `(α_e, β_e)` are `(f(0), f'(0))` on edge `e`.
#[derive(Debug, Clone)]
pub struct SecularProblem<'a> {
    g: &'a MetricGraph,
    bc: &'a BoundaryCondition,
    layers: Vec<EdgeLayers>,
}

impl<'a> SecularProblem<'a> {
    pub fn new(g: &'a MetricGraph, bc: &'a BoundaryCondition) -> Result<Self> {
        check_inputs(g, bc)?;
        Ok(SecularProblem {
            g,
            bc,
            layers: flat_layers(g),
        })
    }

    /// A constant `q_e` on every edge.
    pub fn with_shifts(self, shifts: Vec<f64>) -> Result<Self> {
        if shifts.len() != self.g.edge_count() || shifts.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidInput("need one finite shift per edge".into()));
        }
        let layers = shifts
            .iter()
            .enumerate()
            .map(|(e, &q)| EdgeLayers::flat(self.g.length(e), q))
            .collect();
        self.with_layers(layers)
    }

    pub fn with_layers(mut self, layers: Vec<EdgeLayers>) -> Result<Self> {
        if layers.len() != self.g.edge_count() {
            return Err(Error::InvalidInput("need layers for every edge".into()));
        }
        for (e, l) in layers.iter().enumerate() {
            let len = self.g.length(e);
            if (l.length - len).abs() > 1e-12 * len {
                return Err(Error::InvalidInput(format!(
                    "layers of edge {} span {} but the edge has length {len}",
                    self.g.edge(e).id,
                    l.length
                )));
            }
        }
        self.layers = layers;
        Ok(self)
    }

    pub fn graph(&self) -> &MetricGraph {
        self.g
    }

    pub fn layers(&self) -> &[EdgeLayers] {
        &self.layers
    }

    /// `min(0, min q)`.
    pub fn lowest_value(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.values.iter().copied())
            .fold(0.0, f64::min)
    }

    /// A point below the whole spectrum: `min q − C − 1` with the Heins constant `C`.
    pub fn lower_bound(&self) -> f64 {
        let s = validate_bc(self.g, self.bc, DEFAULT_TOL)
            .map(|r| r.s)
            .unwrap_or(0.0);
        self.lowest_value() - heins_constant(s, self.g.u()).c - 1.0
    }

    /// Grid density as for `H₀` at the energy above the lowest layer.
    pub fn scan_options(&self, lambda_min: f64, lambda_max: f64) -> ScanOptions {
        let mut opts = ScanOptions::new(self.g, lambda_min, lambda_max - self.lowest_value());
        opts.lambda_max = lambda_max;
        opts
    }

    pub fn matrix(&self, lambda: f64) -> CMatrix {
        build_matrix(self.g, self.bc, &self.layers, lambda)
    }

    pub fn relative_sigma_min(&self, lambda: f64) -> f64 {
        sigma_ratio(&self.matrix(lambda))
    }

    /// Eigenvalues in `[lambda_min, lambda_max]` by locating minima of the
    /// relative `σ_min(M(λ))` on a grid and refining them by golden-section search.
    pub fn eigenvalues(&self, opts: &ScanOptions) -> Result<Vec<SecularEigenvalue>> {
        if !(opts.lambda_max > opts.lambda_min) || opts.grid < 3 || !(opts.tol > 0.0) {
            return Err(Error::InvalidInput(
                "scan needs lambda_min < lambda_max, at least 3 points and tol > 0".into(),
            ));
        }
        let n = opts.grid;
        let step = (opts.lambda_max - opts.lambda_min) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| opts.lambda_min + i as f64 * step).collect();
        let sigma: Vec<f64> = grid
            .par_iter()
            .map(|&l| self.relative_sigma_min(l))
            .collect();

        let mut candidates: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .filter(|&i| {
                let left = if i == 0 { f64::INFINITY } else { sigma[i - 1] };
                let right = if i + 1 == n {
                    f64::INFINITY
                } else {
                    sigma[i + 1]
                };
                sigma[i] <= left && sigma[i] < right || sigma[i] < left && sigma[i] <= right
            })
            .map(|i| {
                let a = grid[i.saturating_sub(1)];
                let b = grid[(i + 1).min(n - 1)];
                golden_min(|l| self.relative_sigma_min(l), a, b)
            })
            .filter(|&(_, s)| s < opts.tol)
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut merged: Vec<(f64, f64)> = Vec::new();
        for cand in candidates {
            match merged.last_mut() {
                Some(last) if (cand.0 - last.0).abs() <= step => {
                    if cand.1 < last.1 {
                        *last = cand;
                    }
                }
                _ => merged.push(cand),
            }
        }
        Ok(merged
            .into_iter()
            .map(|(lambda, sigma_min)| {
                let m = self.matrix(lambda);
                let scale = fro(&m);
                let multiplicity = singular_values(&m)
                    .iter()
                    .filter(|&&s| s < opts.tol * scale)
                    .count();
                SecularEigenvalue {
                    lambda,
                    multiplicity,
                    sigma_min,
                }
            })
            .collect())
    }

    /// Eigenvalues from `lambda_min` (default [`lower_bound`](Self::lower_bound))
    /// upward until `count` of them, with multiplicity, are found. Without
    /// `lambda_max` the scan range doubles until the last one sits clear of its
    /// upper edge; with it, the result may hold fewer.
    pub fn lowest(
        &self,
        count: usize,
        lambda_min: Option<f64>,
        lambda_max: Option<f64>,
        tol: f64,
    ) -> Result<Vec<SecularEigenvalue>> {
        let low = lambda_min.unwrap_or_else(|| self.lower_bound());
        let scan = |top: f64| {
            let mut opts = self.scan_options(low, top);
            opts.tol = tol;
            self.eigenvalues(&opts)
        };
        let keep = |found: Vec<SecularEigenvalue>| {
            let mut total = 0;
            found
                .into_iter()
                .take_while(|v| {
                    let before = total;
                    total += v.multiplicity.max(1);
                    before < count
                })
                .collect::<Vec<_>>()
        };
        if let Some(top) = lambda_max {
            return Ok(keep(scan(top)?));
        }
        let l = self.g.total_length();
        let pi = std::f64::consts::PI;
        let mut top = low.max(0.0) + (pi * (count as f64 + 2.0) / l).powi(2) + 1.0;
        for _ in 0..12 {
            let found = scan(top)?;
            let total: usize = found.iter().map(|v| v.multiplicity.max(1)).sum();
            // stop once the last requested level sits clear of the scan edge
            let clear = found
                .last()
                .is_some_and(|v| v.lambda < top - 0.02 * (top - low));
            if total > count || (total == count && clear) {
                return Ok(keep(found));
            }
            let missing = (count + 1).saturating_sub(total) as f64;
            top = 2.0 * top.abs() + (pi * missing / l).powi(2);
        }
        Err(Error::InvalidInput(format!(
            "fewer than {count} eigenvalues found below {top}"
        )))
    }

    /// Orthonormal eigenfunctions of the levels returned by [`lowest`](Self::lowest).
    pub fn lowest_modes(
        &self,
        count: usize,
        lambda_min: Option<f64>,
        lambda_max: Option<f64>,
        tol: f64,
    ) -> Result<Vec<SecularSolution>> {
        let mut out = Vec::new();
        for v in self.lowest(count, lambda_min, lambda_max, tol)? {
            out.extend(self.eigenfunctions(v.lambda, tol)?);
        }
        Ok(out)
    }

    /// `L²`-orthonormal eigenfunctions at an accepted eigenvalue.
    pub fn eigenfunctions(&self, lambda: f64, tol: f64) -> Result<Vec<SecularSolution>> {
        let m = self.matrix(lambda);
        let scale = fro(&m);
        let (basis, sv) = null_space(&m, tol * scale);
        if basis.ncols() == 0 {
            return Err(Error::NotAnEigenvalue(lambda, sv[0] / scale));
        }
        self.orthonormalize(lambda, &basis)
    }

    /// Solutions at energy `λ` satisfying every vertex condition except the
    /// rows belonging to the star slots of `free_ends`.
    pub fn solve_at_energy(
        &self,
        lambda: f64,
        free_ends: &[EdgeEnd],
    ) -> Result<Vec<SecularSolution>> {
        let g = self.g;
        let m = self.matrix(lambda);
        let mut dropped = Vec::new();
        for fe in free_ends {
            if fe.edge >= g.edge_count() {
                return Err(Error::UnknownEdge(fe.edge.to_string()));
            }
            let v = g
                .end_vertex(*fe)
                .ok_or_else(|| Error::InvalidInput("free end has no vertex".into()))?;
            let offset: usize = (0..v).map(|w| g.degree(w)).sum();
            let slot = g
                .star(v)
                .slot(*fe)
                .expect("edge-end belongs to its vertex star");
            dropped.push(offset + slot);
        }
        let keep: Vec<usize> = (0..m.nrows()).filter(|r| !dropped.contains(r)).collect();
        let reduced = CMatrix::from_fn(keep.len(), m.ncols(), |i, j| m[(keep[i], j)]);
        let scale = fro(&m).max(f64::MIN_POSITIVE);
        let (basis, _) = null_space(&reduced, SINGULAR_TOL * scale);
        if basis.ncols() == 0 {
            return Ok(Vec::new());
        }
        self.orthonormalize(lambda, &basis)
    }

    /// Eigenvalues in a range with orthonormal eigenfunctions, one entry per mode.
    pub fn modes(&self, opts: &ScanOptions) -> Result<Vec<SecularSolution>> {
        let mut out = Vec::new();
        for v in self.eigenvalues(opts)? {
            out.extend(self.eigenfunctions(v.lambda, opts.tol)?);
        }
        Ok(out)
    }

    /// Turns coefficient columns into `L²`-orthonormal solutions.
    fn orthonormalize(&self, lambda: f64, basis: &CMatrix) -> Result<Vec<SecularSolution>> {
        let g = self.g;
        let cols: Vec<Vec<(Complex64, Complex64)>> = (0..basis.ncols())
            .map(|j| {
                (0..g.edge_count())
                    .map(|e| (basis[(2 * e, j)], basis[(2 * e + 1, j)]))
                    .collect()
            })
            .collect();
        let k = cols.len();
        let gram = CMatrix::from_fn(k, k, |i, j| inner(lambda, &self.layers, &cols[j], &cols[i]));
        let gram = (&gram + gram.adjoint()) * c(0.5);
        let chol = gram.cholesky().ok_or_else(|| {
            Error::LinearAlgebra("solution family has a degenerate Gram matrix".into())
        })?;
        // columns of basis · L^{-*} are orthonormal
        let mut w = CMatrix::identity(k, k);
        chol.l().adjoint().solve_upper_triangular_mut(&mut w);
        let mut out = Vec::with_capacity(k);
        for j in 0..k {
            let mut v = CVector::zeros(2 * g.edge_count());
            for i in 0..k {
                v += basis.column(i) * w[(i, j)];
            }
            fix_phase(&mut v);
            let coeffs = (0..g.edge_count())
                .map(|e| (v[2 * e], v[2 * e + 1]))
                .collect();
            let mut sol = SecularSolution::layered(lambda, coeffs, self.layers.clone());
            sol.index = j;
            out.push(sol);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecularEigenvalue {
    pub lambda: f64,
    pub multiplicity: usize,
    /// Relative smallest singular value at `lambda`.
    pub sigma_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Number of grid points.
    pub grid: usize,
    pub tol: f64,
}

impl ScanOptions {
    /// A grid fine enough that roots more than two steps apart are resolved
    /// on the fixtures: about 400 points per expected eigenvalue.
    pub fn new(g: &MetricGraph, lambda_min: f64, lambda_max: f64) -> Self {
        let expected =
            weyl_count(g, lambda_max.max(0.0)) + (g.vertex_count() + 2 * g.edge_count()) as f64;
        let grid = ((400.0 * expected) as usize).clamp(2000, 200_000);
        ScanOptions {
            lambda_min,
            lambda_max,
            grid,
            tol: SINGULAR_TOL,
        }
    }
}

/// `total length · √Λ / π`.
pub fn weyl_count(g: &MetricGraph, lambda: f64) -> f64 {
    g.total_length() * lambda.max(0.0).sqrt() / std::f64::consts::PI
}

/// Eigenvalues of `H₀` in `[lambda_min, lambda_max]`.
pub fn eigenvalues_scan(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    opts: &ScanOptions,
) -> Result<Vec<SecularEigenvalue>> {
    SecularProblem::new(g, bc)?.eigenvalues(opts)
}

/// Minimizes `f` on `[a, b]`; returns the argument and value.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a) <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

pub fn write_eigenvalues_csv(values: &[SecularEigenvalue], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["lambda", "multiplicity", "sigma_min"])?;
    for v in values {
        out.write_record([
            format!("{:e}", v.lambda),
            v.multiplicity.to_string(),
            format!("{:e}", v.sigma_min),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// On every edge the solution with `(f(0), f'(0)) = (α_e, β_e)`; without a
/// potential `f_e = α_e c(·; λ) + β_e s(·; λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecularSolution {
    pub lambda: f64,
    pub coeffs: Vec<(Complex64, Complex64)>,
    /// Position within its eigenspace or solution family.
    pub index: usize,
    lengths: Vec<f64>,
    layers: Vec<EdgeLayers>,
    /// Per edge, the transfer matrices to every layer start.
    states: Vec<Vec<Mat2>>,
}

impl SecularSolution {
    pub fn new(lambda: f64, coeffs: Vec<(Complex64, Complex64)>, lengths: Vec<f64>) -> Self {
        let layers = lengths.iter().map(|&l| EdgeLayers::flat(l, 0.0)).collect();
        Self::layered(lambda, coeffs, layers)
    }

    fn layered(lambda: f64, coeffs: Vec<(Complex64, Complex64)>, layers: Vec<EdgeLayers>) -> Self {
        let states = layers.iter().map(|l| l.transfers(lambda)).collect();
        SecularSolution {
            lambda,
            coeffs,
            index: 0,
            lengths: layers.iter().map(|l| l.length).collect(),
            layers,
            states,
        }
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn layers(&self) -> &[EdgeLayers] {
        &self.layers
    }

    /// `max |λ − q|` over all layers, the local oscillation scale.
    pub fn energy_scale(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.values.iter())
            .map(|q| (self.lambda - q).abs())
            .fold(0.0, f64::max)
    }

    /// `(f, f', λ − q)` at `t` on edge `e`.
    fn local(&self, e: usize, t: f64) -> (Complex64, Complex64, f64) {
        let layers = &self.layers[e];
        let k = layers.locate(t);
        let (f0, d0) = apply(&self.states[e][k], self.coeffs[e]);
        let mu = self.lambda - layers.values[k];
        let (cv, sv) = FundamentalBasis::new(mu).eval(t - layers.starts[k]);
        (f0 * cv + d0 * sv, -f0 * sv * mu + d0 * cv, mu)
    }

    pub fn eval(&self, e: usize, t: f64) -> Complex64 {
        self.local(e, t).0
    }

    pub fn deriv(&self, e: usize, t: f64) -> Complex64 {
        self.local(e, t).1
    }

    /// Exact `‖f‖²`.
    pub fn norm_sqr(&self) -> f64 {
        inner(self.lambda, &self.layers, &self.coeffs, &self.coeffs).re
    }

    pub fn to_grid(&self, mesh: &Mesh) -> GridFunction {
        GridFunction::from_fn(mesh, |e, t| self.eval(e, t))
    }

    /// Exact `f(v)` and `f'(v)`.
    pub fn traces(&self, g: &MetricGraph) -> TraceVector {
        let mut values = Vec::with_capacity(g.vertex_count());
        let mut derivs = Vec::with_capacity(g.vertex_count());
        for star in g.stars() {
            let val = CVector::from_iterator(
                star.degree(),
                star.ends.iter().map(|end| match end.end {
                    End::Init => self.eval(end.edge, 0.0),
                    End::Term => self.eval(end.edge, self.lengths[end.edge]),
                }),
            );
            let der = CVector::from_iterator(
                star.degree(),
                star.ends.iter().map(|end| match end.end {
                    End::Init => self.deriv(end.edge, 0.0),
                    End::Term => -self.deriv(end.edge, self.lengths[end.edge]),
                }),
            );
            values.push(val);
            derivs.push(der);
        }
        TraceVector { values, derivs }
    }

    /// Largest `‖P_v f(v)‖ + ‖L_v f(v) + (1 − P_v) f'(v)‖` over the vertices.
    pub fn vertex_residual(&self, g: &MetricGraph, bc: &BoundaryCondition) -> f64 {
        let tr = self.traces(g);
        (0..g.vertex_count())
            .map(|v| {
                let (a, b) = bc.vertex(v).residual(&tr.values[v], &tr.derivs[v]);
                a + b
            })
            .fold(0.0, f64::max)
    }
}

impl EdgeFunction for SecularSolution {
    fn value(&self, e: usize, t: f64) -> Complex64 {
        self.eval(e, t)
    }

    fn kinks(&self, e: usize) -> Vec<f64> {
        self.layers[e].starts[1..].to_vec()
    }
}

fn inner(
    lambda: f64,
    layers: &[EdgeLayers],
    x: &[(Complex64, Complex64)],
    y: &[(Complex64, Complex64)],
) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for (e, l) in layers.iter().enumerate() {
        for (k, t) in l.transfers(lambda).iter().take(l.values.len()).enumerate() {
            let (cc, cs, ss) = FundamentalBasis::new(lambda - l.values[k]).gram(l.width(k));
            let ((a, b), (p, q)) = (apply(t, x[e]), apply(t, y[e]));
            sum += a * p.conj() * cc + (a * q.conj() + b * p.conj()) * cs + b * q.conj() * ss;
        }
    }
    sum
}

/// `L²`-orthonormal eigenfunctions of `H₀` at an accepted eigenvalue.
pub fn eigenfunction(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    lambda: f64,
) -> Result<Vec<SecularSolution>> {
    eigenfunction_with_tol(g, bc, lambda, SINGULAR_TOL)
}

pub fn eigenfunction_with_tol(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    lambda: f64,
    tol: f64,
) -> Result<Vec<SecularSolution>> {
    SecularProblem::new(g, bc)?.eigenfunctions(lambda, tol)
}

/// See [`SecularProblem::solve_at_energy`].
pub fn solve_at_energy(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    lambda: f64,
    free_ends: &[EdgeEnd],
) -> Result<Vec<SecularSolution>> {
    SecularProblem::new(g, bc)?.solve_at_energy(lambda, free_ends)
}

pub fn modes(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    opts: &ScanOptions,
) -> Result<Vec<SecularSolution>> {
    SecularProblem::new(g, bc)?.modes(opts)
}
