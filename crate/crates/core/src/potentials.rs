//! Schrödinger perturbations `H = H₀ + V` with `V` real and piecewise linear
//! on every edge (jumps allowed): the uniform local `L²` norm `M_V`, the
//! perturbed discrete operator, the relative form bound and the weak
//! eigen-equation of the perturbed eigenfunctions.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::BoundaryCondition;
use crate::error::{Error, Result};
use crate::expansion::{
    genef_residual, standard_battery, weighted_norm_sqr_of, GenefReport, Weight,
};
use crate::fem::{eigensystem, FormAssembly};
use crate::funcspace::{EdgeFunction, GridFunction};
use crate::graph::{EdgeSegment, MetricGraph};
use crate::linalg::{c, generalized_eigen, quad, CMatrix, CVector};
use crate::secular::{EdgeLayers, SecularProblem};

/// `V` on `[t0, t1]` interpolating `v0` and `v1` linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl Piece {
    fn at(&self, t: f64) -> f64 {
        if self.t1 == self.t0 {
            return self.v0;
        }
        let s = (t - self.t0) / (self.t1 - self.t0);
        self.v0 + (self.v1 - self.v0) * s
    }

    fn is_constant(&self) -> bool {
        self.v0 == self.v1
    }

    /// `∫ V²` over `[a, b] ∩ [t0, t1]`.
    fn square_integral(&self, a: f64, b: f64) -> f64 {
        let (x0, x1) = (a.max(self.t0), b.min(self.t1));
        if x1 <= x0 {
            return 0.0;
        }
        let (p, q) = (self.at(x0), self.at(x1));
        (x1 - x0) * (p * p + p * q + q * q) / 3.0
    }
}

/// A real potential: on every edge, contiguous linear pieces covering `[0, l(e)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Potential {
    edges: Vec<Vec<Piece>>,
}

impl Potential {
    pub fn new(g: &MetricGraph, edges: Vec<Vec<Piece>>) -> Result<Self> {
        let p = Potential { edges };
        p.check_graph(g)?;
        Ok(p)
    }

    pub fn zero(g: &MetricGraph) -> Self {
        Self::constant(g, 0.0)
    }

    pub fn constant(g: &MetricGraph, value: f64) -> Self {
        let edges = (0..g.edge_count())
            .map(|e| {
                vec![Piece {
                    t0: 0.0,
                    t1: g.length(e),
                    v0: value,
                    v1: value,
                }]
            })
            .collect();
        Potential { edges }
    }

    /// `−depth` on `[t0, t1]` of one edge, zero elsewhere.
    pub fn well(g: &MetricGraph, edge: usize, t0: f64, t1: f64, depth: f64) -> Result<Self> {
        if edge >= g.edge_count() {
            return Err(Error::UnknownEdge(edge.to_string()));
        }
        let l = g.numeric_length(edge)?;
        if !(0.0 <= t0 && t0 < t1 && t1 <= l) || !depth.is_finite() {
            return Err(Error::InvalidInput(format!(
                "well [{t0}, {t1}] must lie inside [0, {l}]"
            )));
        }
        let mut p = Self::zero(g);
        let flat = |a: f64, b: f64, v: f64| Piece {
            t0: a,
            t1: b,
            v0: v,
            v1: v,
        };
        p.edges[edge] = [flat(0.0, t0, 0.0), flat(t0, t1, -depth), flat(t1, l, 0.0)]
            .into_iter()
            .filter(|q| q.t1 > q.t0)
            .collect();
        Ok(p)
    }

    /// Independent uniform values in `[−amplitude, amplitude]` on cells of
    /// width at most `cell`: a discontinuous `L²` potential.
    pub fn random(g: &MetricGraph, seed: u64, amplitude: f64, cell: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() || !(cell > 0.0) {
            return Err(Error::InvalidInput(
                "random potential needs amplitude ≥ 0 and cell > 0".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::with_capacity(g.edge_count());
        for e in 0..g.edge_count() {
            let l = g.numeric_length(e)?;
            let n = (l / cell).ceil().max(1.0) as usize;
            let h = l / n as f64;
            edges.push(
                (0..n)
                    .map(|k| {
                        let v = if amplitude > 0.0 {
                            rng.gen_range(-amplitude..=amplitude)
                        } else {
                            0.0
                        };
                        Piece {
                            t0: k as f64 * h,
                            t1: if k + 1 == n { l } else { (k + 1) as f64 * h },
                            v0: v,
                            v1: v,
                        }
                    })
                    .collect(),
            );
        }
        Ok(Potential { edges })
    }

    /// Linear interpolation of samples `(edge, t, value)`; a repeated `t` is a
    /// jump, values are held constant before the first and after the last sample.
    pub fn from_samples(g: &MetricGraph, samples: &[(usize, f64, f64)]) -> Result<Self> {
        let mut per_edge: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for &(e, t, v) in samples {
            if e >= g.edge_count() {
                return Err(Error::UnknownEdge(e.to_string()));
            }
            let l = g.numeric_length(e)?;
            if !(0.0..=l).contains(&t) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "sample ({t}, {v}) outside edge `{}`",
                    g.edge(e).id
                )));
            }
            per_edge.entry(e).or_default().push((t, v));
        }
        let mut edges = Vec::with_capacity(g.edge_count());
        for e in 0..g.edge_count() {
            let l = g.length(e);
            let mut pts = per_edge.remove(&e).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "potential has no samples on edge `{}`",
                    g.edge(e).id
                ))
            })?;
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let first = pts[0];
            let last = pts[pts.len() - 1];
            if first.0 > 0.0 {
                pts.insert(0, (0.0, first.1));
            }
            if last.0 < l {
                pts.push((l, last.1));
            }
            let mut pieces: Vec<Piece> = pts
                .windows(2)
                .filter(|w| w[1].0 > w[0].0)
                .map(|w| Piece {
                    t0: w[0].0,
                    t1: w[1].0,
                    v0: w[0].1,
                    v1: w[1].1,
                })
                .collect();
            if pieces.is_empty() {
                pieces.push(Piece {
                    t0: 0.0,
                    t1: l,
                    v0: first.1,
                    v1: first.1,
                });
            }
            edges.push(pieces);
        }
        Potential::new(g, edges)
    }

    /// CSV with header `edge_id,t,value`.
    pub fn read_csv(g: &MetricGraph, r: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["edge_id", "t", "value"] {
            return Err(Error::Parse(
                "potential CSV header must be edge_id,t,value".into(),
            ));
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let e = g.edge_by_id(&rec[0])?;
            let t: f64 = rec[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad offset `{}`", &rec[1])))?;
            let v: f64 = rec[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{}`", &rec[2])))?;
            samples.push((e, t, v));
        }
        Self::from_samples(g, &samples)
    }

    pub fn write_csv(&self, g: &MetricGraph, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["edge_id", "t", "value"])?;
        for (e, pieces) in self.edges.iter().enumerate() {
            for p in pieces {
                out.write_record([
                    g.edge(e).id.as_str(),
                    &format!("{:e}", p.t0),
                    &format!("{:e}", p.v0),
                ])?;
                out.write_record([
                    g.edge(e).id.as_str(),
                    &format!("{:e}", p.t1),
                    &format!("{:e}", p.v1),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn check_graph(&self, g: &MetricGraph) -> Result<()> {
        if self.edges.len() != g.edge_count() {
            return Err(Error::InvalidInput(format!(
                "potential has {} edges, graph has {}",
                self.edges.len(),
                g.edge_count()
            )));
        }
        for (e, pieces) in self.edges.iter().enumerate() {
            let l = g.numeric_length(e)?;
            let bad = |why: &str| {
                Err(Error::InvalidInput(format!(
                    "potential on edge `{}`: {why}",
                    g.edge(e).id
                )))
            };
            if pieces.is_empty() {
                return bad("no pieces");
            }
            if pieces
                .iter()
                .any(|p| !(p.v0.is_finite() && p.v1.is_finite() && p.t1 > p.t0))
            {
                return bad("non-finite value or empty piece");
            }
            if pieces[0].t0 != 0.0 || (pieces[pieces.len() - 1].t1 - l).abs() > 1e-12 * l.max(1.0) {
                return bad("pieces do not cover the edge");
            }
            if pieces.windows(2).any(|w| w[0].t1 != w[1].t0) {
                return bad("pieces are not contiguous");
            }
        }
        Ok(())
    }

    pub fn pieces(&self, e: usize) -> &[Piece] {
        &self.edges[e]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Right-continuous at jumps.
    pub fn value(&self, e: usize, t: f64) -> f64 {
        let pieces = &self.edges[e];
        let k = pieces.partition_point(|p| p.t1 <= t).min(pieces.len() - 1);
        pieces[k].at(t)
    }

    /// Interior piece boundaries on edge `e`.
    pub fn breaks(&self, e: usize) -> Vec<f64> {
        self.edges[e][1..].iter().map(|p| p.t0).collect()
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.edges.iter().flatten().all(Piece::is_constant)
    }

    pub fn sup_abs(&self) -> f64 {
        self.edges
            .iter()
            .flatten()
            .map(|p| p.v0.abs().max(p.v1.abs()))
            .fold(0.0, f64::max)
    }

    /// `∫ V²` over `[a, b]` on edge `e`.
    pub fn square_integral(&self, e: usize, a: f64, b: f64) -> f64 {
        self.edges[e].iter().map(|p| p.square_integral(a, b)).sum()
    }

    pub fn segment_norm(&self, s: &EdgeSegment) -> f64 {
        self.square_integral(s.edge, s.t0, s.t1).sqrt()
    }

    /// `V` plus a constant.
    /// The pieces as constant layers, equal neighbours merged.
    pub fn layers(&self, g: &MetricGraph) -> Result<Vec<EdgeLayers>> {
        if !self.is_piecewise_constant() {
            return Err(Error::Unsupported(
                "exact perturbed spectra need a piecewise constant potential".into(),
            ));
        }
        self.layers_with(g, f64::INFINITY)
    }

    /// Constant pieces as they are; sloped pieces cut into cells no wider
    /// than `width`, each carrying its midpoint value, the mean of `V` there.
    pub fn layers_with(&self, g: &MetricGraph, width: f64) -> Result<Vec<EdgeLayers>> {
        self.check_graph(g)?;
        if !(width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "layer width {width} must be positive"
            )));
        }
        (0..g.edge_count())
            .map(|e| {
                let mut starts = Vec::new();
                let mut values: Vec<f64> = Vec::new();
                let mut push = |t: f64, q: f64| {
                    if values.last() != Some(&q) {
                        starts.push(t);
                        values.push(q);
                    }
                };
                for p in self.pieces(e) {
                    if p.is_constant() {
                        push(p.t0, p.v0);
                        continue;
                    }
                    let n = ((p.t1 - p.t0) / width).ceil().max(1.0) as usize;
                    let h = (p.t1 - p.t0) / n as f64;
                    for k in 0..n {
                        let t = p.t0 + k as f64 * h;
                        push(t, p.at(t + 0.5 * h));
                    }
                }
                EdgeLayers::new(g.length(e), starts, values)
            })
            .collect()
    }

    pub fn shifted(&self, c: f64) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| Piece {
                        v0: p.v0 + c,
                        v1: p.v1 + c,
                        ..*p
                    })
                    .collect()
            })
            .collect();
        Potential { edges }
    }
}

/// Named potential constructors, selected by the prefix of `name:args`.
pub trait PotentialPreset: Send + Sync {
    fn name(&self) -> &'static str;
    fn usage(&self) -> &'static str;
    fn build(&self, g: &MetricGraph, args: &[&str]) -> Result<Potential>;
}

fn numbers(args: &[&str], n: usize, usage: &str) -> Result<Vec<f64>> {
    if args.len() != n {
        return Err(Error::Parse(format!("expected `{usage}`")));
    }
    args.iter()
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{a}` in `{usage}`")))
        })
        .collect()
}

struct ConstPreset;

impl PotentialPreset for ConstPreset {
    fn name(&self) -> &'static str {
        "const"
    }
    fn usage(&self) -> &'static str {
        "const:c"
    }
    fn build(&self, g: &MetricGraph, args: &[&str]) -> Result<Potential> {
        let v = numbers(args, 1, self.usage())?;
        if !v[0].is_finite() {
            return Err(Error::InvalidInput("constant must be finite".into()));
        }
        Ok(Potential::constant(g, v[0]))
    }
}

struct WellPreset;

impl PotentialPreset for WellPreset {
    fn name(&self) -> &'static str {
        "well"
    }
    fn usage(&self) -> &'static str {
        "well:edge,t0,t1,depth"
    }
    fn build(&self, g: &MetricGraph, args: &[&str]) -> Result<Potential> {
        if args.len() != 4 {
            return Err(Error::Parse(format!("expected `{}`", self.usage())));
        }
        let e = g.edge_by_id(args[0].trim())?;
        let v = numbers(&args[1..], 3, self.usage())?;
        Potential::well(g, e, v[0], v[1], v[2])
    }
}

struct RandomPreset;

impl PotentialPreset for RandomPreset {
    fn name(&self) -> &'static str {
        "random"
    }
    fn usage(&self) -> &'static str {
        "random:seed,amplitude"
    }
    fn build(&self, g: &MetricGraph, args: &[&str]) -> Result<Potential> {
        if args.len() != 2 {
            return Err(Error::Parse(format!("expected `{}`", self.usage())));
        }
        let seed: u64 = args[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad seed `{}`", args[0])))?;
        let amp = numbers(&args[1..], 1, self.usage())?[0];
        Potential::random(g, seed, amp, g.u() / 4.0)
    }
}

pub struct PotentialRegistry {
    presets: Vec<Box<dyn PotentialPreset>>,
}

impl Default for PotentialRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PotentialRegistry {
    pub fn empty() -> Self {
        PotentialRegistry {
            presets: Vec::new(),
        }
    }

    /// `const`, `well` and `random`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ConstPreset));
        r.register(Box::new(WellPreset));
        r.register(Box::new(RandomPreset));
        r
    }

    /// Replaces a preset of the same name.
    pub fn register(&mut self, preset: Box<dyn PotentialPreset>) {
        self.presets.retain(|p| p.name() != preset.name());
        self.presets.push(preset);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.presets.iter().map(|p| p.name()).collect()
    }

    /// Whether `spec` starts with a registered `name:`.
    pub fn recognizes(&self, spec: &str) -> bool {
        spec.split_once(':')
            .is_some_and(|(name, _)| self.presets.iter().any(|p| p.name() == name))
    }

    pub fn parse(&self, g: &MetricGraph, spec: &str) -> Result<Potential> {
        let (name, args) = spec
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("`{spec}` is not `name:args`")))?;
        let preset = self
            .presets
            .iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown potential `{name}`; known: {}",
                    self.names().join(", ")
                ))
            })?;
        let args: Vec<&str> = args.split(',').collect();
        preset.build(g, &args)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformL2Norm {
    /// Largest window norm found.
    pub m: f64,
    /// A window attaining it.
    pub segment: EdgeSegment,
    pub windows: usize,
}

/// `M_V = sup ‖V‖_{L²(I)}` over the windows of length `min(2u, l(e))` slid at `step`.
pub fn m_v(g: &MetricGraph, v: &Potential, step: f64) -> Result<UniformL2Norm> {
    v.check_graph(g)?;
    let u = g.u();
    if !(step > 0.0) || step > u / 10.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "window step {step} must lie in (0, u/10 = {}]",
            u / 10.0
        )));
    }
    let windows = g.segments(2.0 * u, step)?;
    let mut best: Option<(f64, EdgeSegment)> = None;
    for s in &windows {
        let n = v.segment_norm(s);
        if best.as_ref().is_none_or(|b| n > b.0) {
            best = Some((n, *s));
        }
    }
    let (m, segment) = best.ok_or_else(|| Error::InvalidGraph("graph has no edges".into()))?;
    Ok(UniformL2Norm {
        m,
        segment,
        windows: windows.len(),
    })
}

/// Each edge cut into `⌊l/a⌋` equal segments, all of length in `[a, 2a)`.
pub fn decomposition(g: &MetricGraph, a: f64) -> Vec<EdgeSegment> {
    let mut out = Vec::new();
    for e in 0..g.edge_count() {
        let l = g.length(e);
        let k = ((l / a).floor() as usize).max(1);
        let h = l / k as f64;
        for i in 0..k {
            out.push(EdgeSegment {
                edge: e,
                t0: i as f64 * h,
                t1: if i + 1 == k { l } else { (i + 1) as f64 * h },
            });
        }
    }
    out
}

/// Gauss–Legendre with three points, exact up to degree five.
const GL3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// `∫ q(t) φ_a φ_b` on the element `[x0, x0 + h]` with hat functions
/// `φ_0 = 1 − s`, `φ_1 = s`, split at the breaks of `q`.
fn element_weighted(q: impl Fn(f64) -> f64, x0: f64, h: f64, breaks: &[f64]) -> [[f64; 2]; 2] {
    let mut pts = vec![x0];
    pts.extend(breaks.iter().copied().filter(|&b| b > x0 && b < x0 + h));
    pts.push(x0 + h);
    let mut m = [[0.0; 2]; 2];
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        for &(x, wt) in &GL3 {
            let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
            // evaluate inside the sub-piece so jumps take the right side
            let qv = q(t);
            let s = (t - x0) / h;
            let phi = [1.0 - s, s];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += 0.5 * (b - a) * wt * qv * phi[i] * phi[j];
                }
            }
        }
    }
    m
}

fn check_mesh(fa: &FormAssembly, v: &Potential) -> Result<()> {
    let mesh = fa.mesh();
    if v.edge_count() != mesh.edge_count() {
        return Err(Error::InvalidInput(format!(
            "potential has {} edges, mesh has {}",
            v.edge_count(),
            mesh.edge_count()
        )));
    }
    for e in 0..mesh.edge_count() {
        let end = v.pieces(e).last().map_or(0.0, |p| p.t1);
        if (end - mesh.length(e)).abs() > 1e-12 * mesh.length(e).max(1.0) {
            return Err(Error::InvalidInput(format!(
                "potential and mesh disagree on the length of edge {e}"
            )));
        }
    }
    Ok(())
}

/// `∫ V f ḡ` on the discrete space; exact for piecewise linear `V`.
pub fn potential_matrix(fa: &FormAssembly, v: &Potential) -> Result<CMatrix> {
    check_mesh(fa, v)?;
    let breaks: Vec<Vec<f64>> = (0..v.edge_count()).map(|e| v.breaks(e)).collect();
    Ok(fa
        .element_matrix(|e, k, h| element_weighted(|t| v.value(e, t), k as f64 * h, h, &breaks[e])))
}

/// `∫ V² f ḡ`, so that `‖V f‖² = x* W x`; exact for piecewise linear `V`.
pub fn square_matrix(fa: &FormAssembly, v: &Potential) -> Result<CMatrix> {
    check_mesh(fa, v)?;
    let breaks: Vec<Vec<f64>> = (0..v.edge_count()).map(|e| v.breaks(e)).collect();
    Ok(fa.element_matrix(|e, k, h| {
        element_weighted(|t| v.value(e, t).powi(2), k as f64 * h, h, &breaks[e])
    }))
}

/// The discrete form of `H₀ + V`.
pub fn assemble_perturbed(fa: &FormAssembly, v: &Potential) -> Result<FormAssembly> {
    let m = potential_matrix(fa, v)?;
    fa.clone().with_potential(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeBoundReport {
    pub a: f64,
    /// `max(M_V, largest norm over the decomposition segments)`.
    pub m: f64,
    pub heins_c: f64,
    /// `M²(C + 4/a)`.
    pub c_a: f64,
    /// `min [M² a s₀(f,f) + C(a)‖f‖² − ‖Vf‖²]` over the samples scaled to `‖f‖ = 1`.
    pub worst_margin: f64,
    pub worst_sample: usize,
    /// The same minimum over the whole discrete space.
    pub extremal: f64,
    /// Smallest `(a/2)‖f'‖²_I + (4/a)‖f‖²_I − ‖f‖²_{∞,I}` over samples and
    /// decomposition segments, scaled like `worst_margin`.
    pub window_margin: f64,
    pub samples: usize,
}

/// `‖V f‖² ≤ M² a s₀(f,f) + M²(C + 4/a)‖f‖²` on random elements of the form domain.
pub fn check_relative_bound(
    g: &MetricGraph,
    fa: &FormAssembly,
    v: &Potential,
    a: f64,
    samples: &[CVector],
) -> Result<RelativeBoundReport> {
    let u = fa.heins().u;
    if !(a > 0.0) || a > u * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "a = {a} must lie in (0, u = {u}]"
        )));
    }
    let mv = m_v(g, v, u / 10.0)?;
    let segs = decomposition(g, a);
    let m = segs.iter().map(|s| v.segment_norm(s)).fold(mv.m, f64::max);
    let heins_c = fa.heins().c;
    let c_a = m * m * (heins_c + 4.0 / a);
    let w = square_matrix(fa, v)?;
    let op = (&fa.stiffness - &fa.boundary) * c(m * m * a) + &fa.mass * c(c_a) - &w;

    let mut worst_margin = f64::INFINITY;
    let mut worst_sample = 0;
    let mut window_margin = f64::INFINITY;
    for (i, x) in samples.iter().enumerate() {
        let n = fa.norm_sqr(x);
        if !(n > 0.0) || !n.is_finite() {
            continue;
        }
        let margin = quad(&op, x) / n;
        if margin < worst_margin {
            worst_margin = margin;
            worst_sample = i;
        }
        let f = fa.to_grid(x);
        for s in &segs {
            window_margin = window_margin.min(window_inequality(&f, s, a) / n);
        }
    }
    let extremal = if fa.dim() == 0 {
        f64::INFINITY
    } else {
        generalized_eigen(&op, &fa.mass, 1)?.0[0]
    };
    Ok(RelativeBoundReport {
        a,
        m,
        heins_c,
        c_a,
        worst_margin,
        worst_sample,
        extremal,
        window_margin,
        samples: samples.len(),
    })
}

/// `(a/2)‖f'‖²_I + (4/a)‖f‖²_I − sup_I |f|²` for the linear interpolant of `f`.
pub fn window_inequality(f: &GridFunction, s: &EdgeSegment, a: f64) -> f64 {
    let mesh = f.mesh();
    let vals = f.values(s.edge);
    let h = mesh.step(s.edge);
    let at = |t: f64| {
        let k = ((t / h).floor() as usize).min(vals.len() - 2);
        let r = (t - k as f64 * h) / h;
        vals[k] * (1.0 - r) + vals[k + 1] * r
    };
    let mut pts = vec![s.t0];
    let first = (s.t0 / h).floor() as usize + 1;
    pts.extend(
        (first..vals.len())
            .map(|k| k as f64 * h)
            .take_while(|&t| t < s.t1),
    );
    pts.push(s.t1);
    let (mut l2, mut d2, mut sup) = (0.0, 0.0, 0.0f64);
    for w in pts.windows(2) {
        let (p, q) = (at(w[0]), at(w[1]));
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        l2 += len / 3.0 * (p.norm_sqr() + (p * q.conj()).re + q.norm_sqr());
        d2 += ((q - p) / len).norm_sqr() * len;
        sup = sup.max(p.norm_sqr()).max(q.norm_sqr());
    }
    0.5 * a * d2 + 4.0 / a * l2 - sup
}

/// `H₀ + V` for a piecewise constant `V` as an exact secular problem: the
/// solutions are carried across the jumps by transfer matrices, so the matrix
/// stays `2|E| × 2|E|`.
pub fn perturbed_problem<'a>(
    g: &'a MetricGraph,
    bc: &'a BoundaryCondition,
    v: &Potential,
) -> Result<SecularProblem<'a>> {
    let layers = v.layers(g)?;
    SecularProblem::new(g, bc)?.with_layers(layers)
}

/// As [`perturbed_problem`], with sloped pieces replaced by midpoint layers of
/// the given width: the solutions are exact for that layered potential, which
/// differs from `V` by `O(width)` pointwise and `O(width²)` in the weak sense.
pub fn layered_problem<'a>(
    g: &'a MetricGraph,
    bc: &'a BoundaryCondition,
    v: &Potential,
    width: f64,
) -> Result<SecularProblem<'a>> {
    let layers = v.layers_with(g, width)?;
    SecularProblem::new(g, bc)?.with_layers(layers)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedMode {
    pub lambda: f64,
    pub interior: f64,
    pub vertex: f64,
    pub worst_test: String,
    /// `‖w⁻¹ φ‖²` when a weight is given.
    pub weighted_norm_sqr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedGenefReport {
    pub modes: Vec<PerturbedMode>,
    pub worst_interior: f64,
    pub worst_vertex: f64,
    pub tests: usize,
}

impl PerturbedGenefReport {
    pub fn worst(&self) -> f64 {
        self.worst_interior.max(self.worst_vertex)
    }
}

/// Weak residual of `−φ'' + Vφ = λφ` against the standard test battery for
/// every `(λ, φ)`: interior bumps and vertex tests carrying the unperturbed
/// conditions.
pub fn perturbed_genef_check(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    v: &Potential,
    modes: &[(f64, &dyn EdgeFunction)],
    weight: Option<&dyn Weight>,
) -> Result<PerturbedGenefReport> {
    v.check_graph(g)?;
    let tests = standard_battery(g, bc)?;
    let mut out = PerturbedGenefReport {
        modes: Vec::new(),
        worst_interior: 0.0,
        worst_vertex: 0.0,
        tests: tests.len(),
    };
    for &(lambda, phi) in modes {
        let r: GenefReport = genef_residual(g, bc, phi, lambda, &tests, Some(v))?;
        out.worst_interior = out.worst_interior.max(r.worst_interior);
        out.worst_vertex = out.worst_vertex.max(r.worst_vertex);
        let weighted_norm_sqr =
            weight.map(|w| weighted_norm_sqr_of(phi, g.edge_count(), lambda - v.sup_abs(), w));
        out.modes.push(PerturbedMode {
            lambda,
            interior: r.worst_interior,
            vertex: r.worst_vertex,
            worst_test: r.worst_test,
            weighted_norm_sqr,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub h: Vec<f64>,
    /// Eigenvalues per mesh, lowest first.
    pub values: Vec<Vec<f64>>,
    /// `log₂(|λ_h − λ_{h/2}| / |λ_{h/2} − λ_{h/4}|)` per mode for consecutive triples.
    pub orders: Vec<Vec<f64>>,
}

/// FEM eigenvalues of `H₀ + V` on `levels` successively halved meshes.
pub fn fem_convergence(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    v: &Potential,
    h: f64,
    levels: usize,
    k: usize,
) -> Result<ConvergenceStudy> {
    let mut hs = Vec::new();
    let mut values = Vec::new();
    let mut mesh = crate::funcspace::Mesh::uniform(g, h)?;
    for _ in 0..levels {
        let fa = assemble_perturbed(&crate::fem::assemble_on(g, bc, &mesh)?, v)?;
        values.push(eigensystem(&fa, k.min(fa.dim()))?.values);
        hs.push(mesh.h_max());
        mesh = mesh.refined();
    }
    let orders = values
        .windows(3)
        .map(|w| {
            (0..w[2].len().min(w[0].len()))
                .map(|j| ((w[0][j] - w[1][j]).abs() / (w[1][j] - w[2][j]).abs()).log2())
                .collect()
        })
        .collect();
    Ok(ConvergenceStudy {
        h: hs,
        values,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Preset;
    use crate::fem::assemble;
    use crate::fixtures;
    use crate::sampling::FormSampler;
    use std::f64::consts::PI;

    #[test]
    fn constant_window_norm() {
        let g = fixtures::interval(PI);
        let r = m_v(&g, &Potential::constant(&g, 3.0), 0.1).unwrap();
        assert!((r.m - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((r.segment.length() - 2.0).abs() < 1e-12);
        assert_eq!(m_v(&g, &Potential::zero(&g), 0.1).unwrap().m, 0.0);
        assert!(m_v(&g, &Potential::zero(&g), 0.2).is_err());
    }

    #[test]
    fn spike_lies_in_best_window() {
        let g = fixtures::path(3, 2.0);
        let v = Potential::well(&g, 1, 0.9, 1.0, -50.0).unwrap();
        let r = m_v(&g, &v, 0.05).unwrap();
        assert_eq!(r.segment.edge, 1);
        assert!(r.segment.t0 <= 0.9 && r.segment.t1 >= 1.0);
        assert!((r.m - 50.0 * 0.1f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn samples_round_trip_through_csv() {
        let g = fixtures::star(&[1.0, 2.0, 3.0]);
        let v = Potential::random(&g, 3, 2.0, 0.3).unwrap();
        let mut buf = Vec::new();
        v.write_csv(&g, &mut buf).unwrap();
        let back = Potential::read_csv(&g, buf.as_slice()).unwrap();
        for e in 0..3 {
            for k in 0..50 {
                let t = g.length(e) * (k as f64 + 0.37) / 50.0;
                assert!((back.value(e, t) - v.value(e, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn registry_parses_presets() {
        let g = fixtures::interval(2.0);
        let r = PotentialRegistry::builtin();
        assert_eq!(r.parse(&g, "const:1.5").unwrap().value(0, 0.3), 1.5);
        let w = r.parse(&g, "well:e,0.5,1,4").unwrap();
        assert_eq!(w.value(0, 0.7), -4.0);
        assert_eq!(w.value(0, 1.5), 0.0);
        assert!(r.parse(&g, "well:nope,0.5,1,4").is_err());
        assert!(r.parse(&g, "bogus:1").is_err());
        assert!(r.recognizes("random:1,2"));
        assert!(!r.recognizes("/tmp/v.csv"));
    }

    #[test]
    fn square_integral_of_linear_piece() {
        let g = fixtures::interval(1.0);
        let v = Potential::from_samples(&g, &[(0, 0.0, 0.0), (0, 1.0, 3.0)]).unwrap();
        // ∫₀¹ (3t)² = 3
        assert!((v.square_integral(0, 0.0, 1.0) - 3.0).abs() < 1e-14);
        assert!((v.square_integral(0, 0.5, 1.0) - 9.0 * 7.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn constant_potential_shifts_fem_spectrum() {
        let g = fixtures::star(&[1.0, 1.5, 2.0]);
        let bc = BoundaryCondition::uniform(&g, Preset::Kirchhoff);
        let fa = assemble(&g, &bc, 0.05).unwrap();
        let base = eigensystem(&fa, 8).unwrap();
        let shifted = eigensystem(
            &assemble_perturbed(&fa, &Potential::constant(&g, 2.5)).unwrap(),
            8,
        )
        .unwrap();
        for (a, b) in base.values.iter().zip(&shifted.values) {
            assert!((b - a - 2.5).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn nonnegative_potential_raises_eigenvalues() {
        let g = fixtures::interval(PI);
        let bc = BoundaryCondition::uniform(&g, Preset::Neumann);
        let fa = assemble(&g, &bc, 0.05).unwrap();
        let v = Potential::random(&g, 9, 2.0, 0.25).unwrap().shifted(2.0);
        let base = eigensystem(&fa, 6).unwrap();
        let up = eigensystem(&assemble_perturbed(&fa, &v).unwrap(), 6).unwrap();
        for (a, b) in base.values.iter().zip(&up.values) {
            assert!(b >= a);
        }
    }

    #[test]
    fn relative_bound_holds_for_unit_potential() {
        let g = fixtures::interval(PI);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let fa = assemble(&g, &bc, 0.05).unwrap();
        let samples = FormSampler::new(1).samples(&fa, 60);
        for a in [0.25, 0.5, 1.0] {
            let r =
                check_relative_bound(&g, &fa, &Potential::constant(&g, 1.0), a, &samples).unwrap();
            assert!(
                r.worst_margin >= -1e-8 && r.extremal >= -1e-8 && r.window_margin >= -1e-10,
                "{r:?}"
            );
        }
        assert!(check_relative_bound(&g, &fa, &Potential::zero(&g), 1.5, &samples).is_err());
    }

    #[test]
    fn layered_interval_matches_closed_form() {
        // Dirichlet on [0, 2] with V = 0 on [0, 1] and V = q on [1, 2]:
        // sin(k) cos(κ) ... matched at 1: k cot k = −κ cot κ, κ = √(λ − q)
        let g = fixtures::interval(2.0);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let q = 3.0;
        let v = Potential::from_samples(
            &g,
            &[(0, 0.0, 0.0), (0, 1.0, 0.0), (0, 1.0, q), (0, 2.0, q)],
        )
        .unwrap();
        let p = perturbed_problem(&g, &bc, &v).unwrap();
        assert_eq!(p.layers()[0].starts(), [0.0, 1.0]);
        let opts = p.scan_options(p.lower_bound(), 40.0);
        let vals = p.eigenvalues(&opts).unwrap();
        let f = |l: f64| {
            let k = l.sqrt();
            let kap = (l - q).sqrt();
            k.sin() * kap.cos() * kap + k.cos() * kap.sin() * k
        };
        assert!(!vals.is_empty());
        for ev in &vals {
            let h = 1e-6;
            // sign change of the matching function brackets every eigenvalue
            assert!(f(ev.lambda - h) * f(ev.lambda + h) <= 0.0, "{}", ev.lambda);
        }
        for phi in p.modes(&opts).unwrap() {
            assert!(phi.vertex_residual(&g, &bc) < 1e-8);
            assert!((phi.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn layered_constant_shift_is_exact() {
        let g = fixtures::interval(PI);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let p = perturbed_problem(&g, &bc, &Potential::constant(&g, 1.0)).unwrap();
        let vals = p
            .eigenvalues(&p.scan_options(p.lower_bound(), 40.0))
            .unwrap();
        for (n, ev) in vals.iter().enumerate() {
            let exact = ((n + 1) * (n + 1)) as f64 + 1.0;
            assert!((ev.lambda - exact).abs() < 1e-8, "{} vs {exact}", ev.lambda);
        }
    }
}
