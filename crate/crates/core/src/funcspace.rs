//! Functions on the graph sampled on uniform per-edge grids, their vertex
//! traces, norms, the one-edge Sobolev trace estimate and the cut-off
//! functions used to localize elements of the operator domain.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, Point};
use crate::linalg::{c, CVector, ZERO};

/// Uniform grid on every edge: edge `e` has `elements[e]` cells of width `lengths[e] / elements[e]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    elements: Vec<usize>,
    lengths: Vec<f64>,
    h_max: f64,
}

impl Mesh {
    /// At least two cells per edge and mesh width at most `h_max`.
    pub fn uniform(g: &MetricGraph, h_max: f64) -> Result<Mesh> {
        if !(h_max > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mesh width {h_max} must be positive"
            )));
        }
        let mut lengths = Vec::with_capacity(g.edge_count());
        let mut elements = Vec::with_capacity(g.edge_count());
        for e in 0..g.edge_count() {
            let l = g.numeric_length(e)?;
            lengths.push(l);
            elements.push(((l / h_max) * (1.0 - 1e-12)).ceil().max(2.0) as usize);
        }
        Ok(Mesh {
            elements,
            lengths,
            h_max,
        })
    }

    pub fn from_counts(lengths: Vec<f64>, elements: Vec<usize>) -> Result<Mesh> {
        if lengths.len() != elements.len() || elements.iter().any(|&n| n < 2) {
            return Err(Error::InvalidInput(
                "every edge needs at least two cells".into(),
            ));
        }
        let h_max = lengths
            .iter()
            .zip(&elements)
            .map(|(l, &n)| l / n as f64)
            .fold(0.0, f64::max);
        Ok(Mesh {
            elements,
            lengths,
            h_max,
        })
    }

    /// Each cell split in two.
    pub fn refined(&self) -> Mesh {
        Mesh {
            elements: self.elements.iter().map(|n| 2 * n).collect(),
            lengths: self.lengths.clone(),
            h_max: self.h_max / 2.0,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self, e: usize) -> usize {
        self.elements[e]
    }

    pub fn nodes(&self, e: usize) -> usize {
        self.elements[e] + 1
    }

    pub fn length(&self, e: usize) -> f64 {
        self.lengths[e]
    }

    pub fn step(&self, e: usize) -> f64 {
        self.lengths[e] / self.elements[e] as f64
    }

    /// Largest actual cell width.
    pub fn h_max(&self) -> f64 {
        (0..self.edge_count())
            .map(|e| self.step(e))
            .fold(0.0, f64::max)
    }

    pub fn node(&self, e: usize, k: usize) -> f64 {
        if k == self.elements[e] {
            self.lengths[e]
        } else {
            k as f64 * self.step(e)
        }
    }

    pub fn check_graph(&self, g: &MetricGraph) -> Result<()> {
        if self.edge_count() != g.edge_count() {
            return Err(Error::InvalidInput(format!(
                "grid has {} edges, graph has {}",
                self.edge_count(),
                g.edge_count()
            )));
        }
        for e in 0..g.edge_count() {
            let l = g.numeric_length(e)?;
            if (l - self.lengths[e]).abs() > 1e-9 * l.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "grid length {} does not match edge `{}` of length {l}",
                    self.lengths[e],
                    g.edge(e).id
                )));
            }
        }
        Ok(())
    }
}

/// Something that can be evaluated at `(edge, t)`.
pub trait EdgeFunction {
    fn value(&self, e: usize, t: f64) -> Complex64;

    /// Interior offsets on edge `e` where the function is not smooth;
    /// quadrature splits there.
    fn kinks(&self, _e: usize) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(usize, f64) -> Complex64> EdgeFunction for F {
    fn value(&self, e: usize, t: f64) -> Complex64 {
        self(e, t)
    }
}

/// Nodal values on a [`Mesh`]; between nodes the function is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Mesh,
    values: Vec<Vec<Complex64>>,
}

impl GridFunction {
    pub fn new(mesh: Mesh, values: Vec<Vec<Complex64>>) -> Result<Self> {
        if values.len() != mesh.edge_count() {
            return Err(Error::InvalidInput(
                "one value array per edge expected".into(),
            ));
        }
        for (e, v) in values.iter().enumerate() {
            if v.len() != mesh.nodes(e) {
                return Err(Error::InvalidInput(format!(
                    "edge {e}: {} values for {} nodes",
                    v.len(),
                    mesh.nodes(e)
                )));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInput(format!("edge {e}: non-finite value")));
            }
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        let values = (0..mesh.edge_count())
            .map(|e| vec![ZERO; mesh.nodes(e)])
            .collect();
        GridFunction {
            mesh: mesh.clone(),
            values,
        }
    }

    pub fn sample(mesh: &Mesh, f: &dyn EdgeFunction) -> Self {
        let values = (0..mesh.edge_count())
            .map(|e| {
                (0..mesh.nodes(e))
                    .map(|k| f.value(e, mesh.node(e, k)))
                    .collect()
            })
            .collect();
        GridFunction {
            mesh: mesh.clone(),
            values,
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(usize, f64) -> Complex64) -> Self {
        Self::sample(mesh, &f)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self, e: usize) -> &[Complex64] {
        &self.values[e]
    }

    pub fn values_mut(&mut self, e: usize) -> &mut [Complex64] {
        &mut self.values[e]
    }

    pub fn map(&self, f: impl Fn(usize, f64, Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(e, v)| {
                v.iter()
                    .enumerate()
                    .map(|(k, &z)| f(e, self.mesh.node(e, k), z))
                    .collect()
            })
            .collect();
        GridFunction {
            mesh: self.mesh.clone(),
            values,
        }
    }

    /// `self + a * other` on the same mesh.
    pub fn axpy(&self, a: Complex64, other: &GridFunction) -> Result<Self> {
        if self.mesh != other.mesh {
            return Err(Error::InvalidInput(
                "grid functions live on different meshes".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x + a * y).collect())
            .collect();
        Ok(GridFunction {
            mesh: self.mesh.clone(),
            values,
        })
    }

    /// Trapezoid `⟨self, other⟩ = Σ_e ∫ self · conj(other)`.
    pub fn inner(&self, other: &dyn EdgeFunction) -> Complex64 {
        let mut total = ZERO;
        for (e, v) in self.values.iter().enumerate() {
            let h = self.mesh.step(e);
            let n = v.len() - 1;
            let mut s = ZERO;
            for (k, z) in v.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += w * z * other.value(e, self.mesh.node(e, k)).conj();
            }
            total += s * h;
        }
        total
    }

    /// Trapezoid `‖self‖²`.
    pub fn norm_sqr(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(e, v)| trapezoid(v.iter().map(|z| z.norm_sqr()), self.mesh.step(e)))
            .sum()
    }

    /// Exact `‖self‖²` of the piecewise-linear interpolant.
    pub fn linear_norm_sqr(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(e, v)| {
                let h = self.mesh.step(e);
                v.windows(2)
                    .map(|p| {
                        h / 3.0 * (p[0].norm_sqr() + (p[0] * p[1].conj()).re + p[1].norm_sqr())
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Nodal derivative: centered in the interior, second-order one-sided at the ends.
    pub fn derivative(&self, e: usize) -> Vec<Complex64> {
        let v = &self.values[e];
        let h = self.mesh.step(e);
        let n = v.len() - 1;
        (0..=n)
            .map(|k| {
                if k == 0 {
                    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
                } else if k == n {
                    (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h)
                } else {
                    (v[k + 1] - v[k - 1]) / (2.0 * h)
                }
            })
            .collect()
    }

    pub fn write_csv(&self, g: &MetricGraph, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["edge_id", "t", "re", "im"])?;
        for (e, v) in self.values.iter().enumerate() {
            for (k, z) in v.iter().enumerate() {
                out.write_record([
                    g.edge(e).id.clone(),
                    format!("{:e}", self.mesh.node(e, k)),
                    format!("{:e}", z.re),
                    format!("{:e}", z.im),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads rows `(edge_id, t, re, im)`; every edge must carry a uniform grid on `[0, l(e)]`.
    pub fn read_csv(g: &MetricGraph, r: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut by_edge: BTreeMap<usize, Vec<(f64, Complex64)>> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Parse(format!(
                    "expected 4 columns, got {}",
                    rec.len()
                )));
            }
            let e = g.edge_by_id(rec[0].trim())?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number `{}`", &rec[i])))
            };
            by_edge
                .entry(e)
                .or_default()
                .push((num(1)?, Complex64::new(num(2)?, num(3)?)));
        }
        let mut lengths = Vec::new();
        let mut counts = Vec::new();
        let mut values = Vec::new();
        for e in 0..g.edge_count() {
            let l = g.numeric_length(e)?;
            let mut rows = by_edge.remove(&e).ok_or_else(|| {
                Error::InvalidInput(format!("no samples for edge `{}`", g.edge(e).id))
            })?;
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let n = rows.len() - 1;
            let h = l / n as f64;
            for (k, (t, _)) in rows.iter().enumerate() {
                if (t - k as f64 * h).abs() > 1e-6 * h {
                    return Err(Error::InvalidInput(format!(
                        "edge `{}`: samples are not a uniform grid on [0, {l}]",
                        g.edge(e).id
                    )));
                }
            }
            lengths.push(l);
            counts.push(n);
            values.push(rows.into_iter().map(|(_, z)| z).collect());
        }
        GridFunction::new(Mesh::from_counts(lengths, counts)?, values)
    }
}

impl EdgeFunction for GridFunction {
    fn value(&self, e: usize, t: f64) -> Complex64 {
        let v = &self.values[e];
        let h = self.mesh.step(e);
        let n = v.len() - 1;
        let x = (t / h).clamp(0.0, n as f64);
        let k = (x.floor() as usize).min(n - 1);
        let s = x - k as f64;
        v[k] * (1.0 - s) + v[k + 1] * s
    }

    fn kinks(&self, e: usize) -> Vec<f64> {
        (1..self.mesh.elements(e))
            .map(|k| self.mesh.node(e, k))
            .collect()
    }
}

fn trapezoid(vals: impl ExactSizeIterator<Item = f64>, h: f64) -> f64 {
    let n = vals.len() - 1;
    vals.enumerate()
        .map(|(k, x)| if k == 0 || k == n { 0.5 * x } else { x })
        .sum::<f64>()
        * h
}

/// Boundary values and signed inward derivatives gathered per vertex star.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceVector {
    pub values: Vec<CVector>,
    pub derivs: Vec<CVector>,
}

/// `f(v)` and `f'(v)`; at a terminal end the derivative changes sign.
pub fn traces(g: &MetricGraph, f: &GridFunction) -> Result<TraceVector> {
    f.mesh.check_graph(g)?;
    for e in 0..g.edge_count() {
        if f.mesh.nodes(e) < 3 {
            return Err(Error::InvalidInput(format!(
                "edge `{}` needs at least 3 nodes",
                g.edge(e).id
            )));
        }
    }
    let mut values = Vec::with_capacity(g.vertex_count());
    let mut derivs = Vec::with_capacity(g.vertex_count());
    for star in g.stars() {
        let d = star.degree();
        let mut val = CVector::zeros(d);
        let mut der = CVector::zeros(d);
        for (k, slot) in star.ends.iter().enumerate() {
            let v = &f.values[slot.edge];
            let h = f.mesh.step(slot.edge);
            let n = v.len() - 1;
            match slot.end {
                End::Init => {
                    val[k] = v[0];
                    der[k] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
                }
                End::Term => {
                    val[k] = v[n];
                    der[k] = -(3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
                }
            }
        }
        values.push(val);
        derivs.push(der);
    }
    Ok(TraceVector { values, derivs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub deriv_l2: f64,
    pub w12: f64,
    pub linf: f64,
}

/// Trapezoid `L²`, derivative `L²` from nodal differences, `W^{1,2}` and max-norm.
pub fn norms(f: &GridFunction) -> Norms {
    let l2sq = f.norm_sqr();
    let mut dsq = 0.0;
    let mut linf: f64 = 0.0;
    for e in 0..f.mesh.edge_count() {
        let d = f.derivative(e);
        dsq += trapezoid(d.iter().map(|z| z.norm_sqr()), f.mesh.step(e));
        linf = f.values[e].iter().map(|z| z.norm()).fold(linf, f64::max);
    }
    Norms {
        l2: l2sq.sqrt(),
        deriv_l2: dsq.sqrt(),
        w12: (l2sq + dsq).sqrt(),
        linf,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `|h(0)|² ≤ (2/a)‖h‖²_{L²(0,a)} + a‖h'‖²_{L²(0,a)}` for the piecewise-linear
/// function on edge `e`; both integrals are exact for that function.
pub fn sobolev_check(f: &GridFunction, e: usize, a: f64) -> Result<SobolevCheck> {
    let l = f.mesh.length(e);
    if !(a > 0.0) || a > l * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("a = {a} must lie in (0, {l}]")));
    }
    let a = a.min(l);
    let v = &f.values[e];
    let h = f.mesh.step(e);
    let mut l2 = 0.0;
    let mut d2 = 0.0;
    for k in 0..v.len() - 1 {
        let x0 = k as f64 * h;
        if x0 >= a {
            break;
        }
        let width = (a - x0).min(h);
        let slope = (v[k + 1] - v[k]) / h;
        let end = v[k] + slope * width;
        l2 += width / 3.0 * (v[k].norm_sqr() + (v[k] * end.conj()).re + end.norm_sqr());
        d2 += slope.norm_sqr() * width;
    }
    let lhs = v[0].norm_sqr();
    let rhs = 2.0 / a * l2 + a * d2;
    let holds = lhs <= rhs + 1e-12 * rhs.max(lhs).max(1e-300);
    Ok(SobolevCheck { lhs, rhs, holds })
}

/// Quintic smoothstep `10x³ − 15x⁴ + 6x⁵` and its first two derivatives.
fn smoothstep(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        [0.0; 3]
    } else if x >= 1.0 {
        [1.0, 0.0, 0.0]
    } else {
        let x2 = x * x;
        [
            x2 * x * (10.0 - 15.0 * x + 6.0 * x2),
            30.0 * x2 * (1.0 - x) * (1.0 - x),
            60.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CutoffEdge {
    One,
    Zero,
    /// Descends from 1 to 0 over `[start, start + width]`, measured from the inside end.
    Ramp {
        start: f64,
        width: f64,
        inside: End,
    },
}

/// The cut-off `ψₙ` around a point: 1 on edges inside the ball, 0 on edges
/// outside it, and a C² quintic transition of width `min(l(e), u)` placed where
/// the distance along a straddling edge crosses `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    bound: f64,
    lengths: Vec<f64>,
    edges: Vec<CutoffEdge>,
}

/// Builds `ψₙ` around `x` with radius `n`.
pub fn cutoff(g: &MetricGraph, x: &Point, n: f64) -> Result<Cutoff> {
    g.require_valid()?;
    let dist = g.vertex_distances_from(x)?;
    let u = g.u();
    let mut edges = Vec::with_capacity(g.edge_count());
    let mut lengths = Vec::with_capacity(g.edge_count());
    for e in 0..g.edge_count() {
        let l = g.numeric_length(e)?;
        lengths.push(l);
        let di = dist[g.init(e)];
        let dj = g.term(e).map_or(f64::INFINITY, |j| dist[j]);
        let center = match *x {
            Point::OnEdge { edge, t } if edge == e => Some(t),
            _ => None,
        };
        let kind = match (di < n, dj < n) {
            (true, true) => CutoffEdge::One,
            (false, false) if center.is_none() => CutoffEdge::Zero,
            (false, false) => {
                // ball lies inside this edge: keep the descending side towards the init end
                let t0 = center.unwrap_or(0.0);
                ramp(l, u, (t0 + n).min(l), End::Init)
            }
            (true, false) => {
                let cross = (n - di).max(center.map_or(f64::NEG_INFINITY, |t0| t0 + n));
                ramp(l, u, cross, End::Init)
            }
            (false, true) => {
                let cross = (n - dj).max(center.map_or(f64::NEG_INFINITY, |t0| l - t0 + n));
                ramp(l, u, cross, End::Term)
            }
        };
        edges.push(kind);
    }
    Ok(Cutoff {
        bound: (1.0 + 4.0 / u).powi(2),
        lengths,
        edges,
    })
}

fn ramp(l: f64, u: f64, cross: f64, inside: End) -> CutoffEdge {
    let width = l.min(u);
    let start = (cross - 0.5 * width).clamp(0.0, l - width);
    CutoffEdge::Ramp {
        start,
        width,
        inside,
    }
}

impl Cutoff {
    /// `(ψ, ψ', ψ'')` at offset `t` of edge `e`.
    pub fn eval(&self, e: usize, t: f64) -> [f64; 3] {
        match self.edges[e] {
            CutoffEdge::One => [1.0, 0.0, 0.0],
            CutoffEdge::Zero => [0.0; 3],
            CutoffEdge::Ramp {
                start,
                width,
                inside,
            } => {
                let tau = match inside {
                    End::Init => t,
                    End::Term => self.lengths[e] - t,
                };
                let [s, s1, s2] = smoothstep((tau - start) / width);
                let sign = if inside == End::Init { 1.0 } else { -1.0 };
                [1.0 - s, -sign * s1 / width, -s2 / (width * width)]
            }
        }
    }

    /// `(1 + 4/u)²`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn sample(&self, mesh: &Mesh) -> GridFunction {
        GridFunction::from_fn(mesh, |e, t| c(self.eval(e, t)[0]))
    }

    /// Largest `|ψ|`, `|ψ'|`, `|ψ''|` over the grid nodes.
    pub fn grid_sup(&self, mesh: &Mesh) -> [f64; 3] {
        let mut sup = [0.0f64; 3];
        for e in 0..mesh.edge_count() {
            for k in 0..mesh.nodes(e) {
                let v = self.eval(e, mesh.node(e, k));
                for i in 0..3 {
                    sup[i] = sup[i].max(v[i].abs());
                }
            }
        }
        sup
    }
}

impl EdgeFunction for Cutoff {
    fn value(&self, e: usize, t: f64) -> Complex64 {
        c(self.eval(e, t)[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::f64::consts::PI;

    #[test]
    fn trace_examples() {
        let g = fixtures::interval(2.0);
        let mesh = Mesh::uniform(&g, 0.1).unwrap();
        let f = GridFunction::from_fn(&mesh, |_, t| c(t));
        let tr = traces(&g, &f).unwrap();
        assert!((tr.values[0][0] - c(0.0)).norm() < 1e-14);
        assert!((tr.derivs[0][0] - c(1.0)).norm() < 1e-12);
        assert!((tr.values[1][0] - c(2.0)).norm() < 1e-14);
        assert!((tr.derivs[1][0] - c(-1.0)).norm() < 1e-12);

        let f = GridFunction::from_fn(&mesh, |_, _| c(3.0));
        let tr = traces(&g, &f).unwrap();
        assert!(tr.derivs.iter().all(|d| d[0].norm() < 1e-12));
        assert!(tr.values.iter().all(|v| (v[0] - c(3.0)).norm() < 1e-14));
    }

    #[test]
    fn sine_traces_flip_sign_and_converge() {
        let g = fixtures::interval(PI);
        let err = |h: f64| {
            let mesh = Mesh::uniform(&g, h).unwrap();
            let f = GridFunction::from_fn(&mesh, |_, t| c(t.sin()));
            let tr = traces(&g, &f).unwrap();
            assert!(tr.values[0][0].norm() < 1e-14 && tr.values[1][0].norm() < 1e-14);
            (tr.derivs[0][0] - c(1.0))
                .norm()
                .max((tr.derivs[1][0] - c(1.0)).norm())
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-3);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn too_coarse_for_traces() {
        let g = fixtures::interval(1.0);
        let mesh = Mesh::from_counts(vec![1.0], vec![2]).unwrap();
        assert!(traces(&g, &GridFunction::zeros(&mesh)).is_ok());
        assert!(Mesh::from_counts(vec![1.0], vec![1]).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = fixtures::interval(2.0);
        let mesh = Mesh::uniform(&g, 0.1).unwrap();
        let n = norms(&GridFunction::from_fn(&mesh, |_, _| c(1.0)));
        assert!((n.l2 - 2f64.sqrt()).abs() < 1e-14);
        assert!(n.deriv_l2.abs() < 1e-14);
        let n = norms(&GridFunction::zeros(&mesh));
        assert_eq!((n.l2, n.deriv_l2, n.w12, n.linf), (0.0, 0.0, 0.0, 0.0));

        let g = fixtures::interval(PI);
        let err = |h: f64| {
            let mesh = Mesh::uniform(&g, h).unwrap();
            let n = norms(&GridFunction::from_fn(&mesh, |_, t| c(t.sin())));
            (
                (n.l2 * n.l2 - PI / 2.0).abs(),
                (n.deriv_l2 * n.deriv_l2 - PI / 2.0).abs(),
            )
        };
        let (a1, b1) = err(0.02);
        let (a2, b2) = err(0.01);
        // trapezoid on a periodic-like integrand is spectrally accurate; the derivative is O(h²)
        assert!(a1 < 1e-10 && a2 < 1e-10);
        assert!(((b1 / b2).log2() - 2.0).abs() < 0.3);
    }

    #[test]
    fn sobolev_examples() {
        let g = fixtures::interval(2.0);
        let mesh = Mesh::uniform(&g, 0.1).unwrap();
        let one = GridFunction::from_fn(&mesh, |_, _| c(1.0));
        for a in [0.3, 1.0, 2.0] {
            let s = sobolev_check(&one, 0, a).unwrap();
            assert!((s.lhs - 1.0).abs() < 1e-15 && (s.rhs - 2.0).abs() < 1e-13 && s.holds);
        }
        assert!(sobolev_check(&one, 0, 2.5).is_err());

        let g = fixtures::interval(1.0);
        let mesh = Mesh::uniform(&g, 0.01).unwrap();
        let s = sobolev_check(&GridFunction::from_fn(&mesh, |_, t| c(t)), 0, 1.0).unwrap();
        assert_eq!(s.lhs, 0.0);
        assert!(s.holds);

        let g = fixtures::interval(PI);
        let mesh = Mesh::uniform(&g, 1e-3).unwrap();
        let s = sobolev_check(&GridFunction::from_fn(&mesh, |_, t| c(t.cos())), 0, PI).unwrap();
        assert!((s.lhs - 1.0).abs() < 1e-14);
        assert!((s.rhs - (1.0 + PI * PI / 2.0)).abs() < 1e-5);
    }

    #[test]
    fn cutoff_on_straddling_edge_respects_bound() {
        let g = fixtures::path(6, 1.0);
        let psi = cutoff(&g, &Point::Vertex(0), 2.5).unwrap();
        let mesh = Mesh::uniform(&g, 1e-3).unwrap();
        let sup = psi.grid_sup(&mesh);
        assert!(sup[0] <= 1.0 + 1e-15);
        assert!(sup[2] <= 25.0, "{sup:?}");
        // 10/sqrt(3) is the maximum of |S''| for a unit window
        assert!((sup[2] - 10.0 / 3f64.sqrt()).abs() < 1e-3);
        assert_eq!(psi.eval(0, 0.5), [1.0, 0.0, 0.0]);
        assert_eq!(psi.eval(5, 0.5), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn cutoff_derivatives_match_finite_differences() {
        let g = fixtures::star(&[1.0, 2.0, 3.0]);
        let psi = cutoff(&g, &Point::Vertex(1), 2.2).unwrap();
        let h = 1e-5;
        for e in 0..3 {
            for &t in &[0.3, 0.7, 1.1, 1.6, 2.4] {
                if t + h >= g.length(e) {
                    continue;
                }
                let [_, d1, d2] = psi.eval(e, t);
                let f = |s: f64| psi.eval(e, s)[0];
                assert!((d1 - (f(t + h) - f(t - h)) / (2.0 * h)).abs() < 1e-6);
                assert!((d2 - (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = fixtures::star(&[1.0, 1.5, 2.0]);
        let mesh = Mesh::uniform(&g, 0.1).unwrap();
        let f = GridFunction::from_fn(&mesh, |e, t| Complex64::new(t.sin() + e as f64, t * t));
        let mut buf = Vec::new();
        f.write_csv(&g, &mut buf).unwrap();
        let back = GridFunction::read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back.mesh().elements(2), mesh.elements(2));
        for e in 0..3 {
            for (a, b) in back.values(e).iter().zip(f.values(e)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
