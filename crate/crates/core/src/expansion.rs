//! Eigenfunction expansions on compact graphs: weights built from ball
//! volumes, the Hilbert–Schmidt sum `Σ (C+λ)⁻¹ ‖w⁻¹φ‖²`, Fourier
//! coefficients, reconstruction, Parseval, and the weak eigen-equation
//! `⟨H f, φ⟩ = λ ⟨f, φ⟩` tested against compactly supported domain functions.

use num_complex::Complex64;
use serde::Serialize;

use crate::boundary::BoundaryCondition;
use crate::error::{Error, Result};
use crate::funcspace::{EdgeFunction, GridFunction, Mesh};
use crate::graph::{Ball, End, MetricGraph, Point};
use crate::linalg::{c, null_space, CMatrix, CVector, ZERO};
use crate::potentials::Potential;
use crate::quadrature::{gl8, integrate_complex};
use crate::secular::SecularSolution;

/// A positive weight on the graph.
pub trait Weight: Sync {
    fn value(&self, e: usize, t: f64) -> f64;

    /// Offsets on edge `e`, including both ends, between which the weight is smooth.
    fn breaks(&self, e: usize) -> Vec<f64>;

    /// `sup w⁻²`.
    fn inv_sup_sqr(&self) -> f64;

    /// `∫ w⁻²`.
    fn inverse_l2_sqr(&self) -> f64;
}

/// `w ≡ value`.
#[derive(Debug, Clone)]
pub struct ConstantWeight {
    value: f64,
    lengths: Vec<f64>,
}

impl ConstantWeight {
    pub fn new(g: &MetricGraph, value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "weight {value} must be positive"
            )));
        }
        let lengths = (0..g.edge_count())
            .map(|e| g.numeric_length(e))
            .collect::<Result<_>>()?;
        Ok(ConstantWeight { value, lengths })
    }
}

impl Weight for ConstantWeight {
    fn value(&self, _e: usize, _t: f64) -> f64 {
        self.value
    }

    fn breaks(&self, e: usize) -> Vec<f64> {
        vec![0.0, self.lengths[e]]
    }

    fn inv_sup_sqr(&self) -> f64 {
        self.value.powi(-2)
    }

    fn inverse_l2_sqr(&self) -> f64 {
        self.lengths.iter().sum::<f64>() / (self.value * self.value)
    }
}

/// `w(x) = max(1, m(B_{d(x,x₀)+1}(x₀))^{1+ε})`.
#[derive(Debug, Clone)]
pub struct WeightFunction<'a> {
    graph: &'a MetricGraph,
    ball: Ball<'a>,
    eps: f64,
    radii: Vec<f64>,
}

/// Piece `[a, b]` of an edge on which `r ↦ m(B_{ρ+1})` runs linearly from `va` to `vb`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    a: f64,
    b: f64,
    va: f64,
    vb: f64,
}

pub fn weight<'a>(g: &'a MetricGraph, x0: &Point, eps: f64) -> Result<WeightFunction<'a>> {
    g.require_compact()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "weight exponent ε = {eps} must be positive"
        )));
    }
    if !g.is_connected() {
        return Err(Error::InvalidGraph(
            "the weight needs a connected graph".into(),
        ));
    }
    let ball = g.ball(x0)?;
    let radii = ball.breakpoints();
    Ok(WeightFunction {
        graph: g,
        ball,
        eps,
        radii,
    })
}

impl<'a> WeightFunction<'a> {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base(&self) -> Point {
        self.ball.center()
    }

    pub fn distance(&self, e: usize, t: f64) -> f64 {
        self.ball.distance_to(&Point::OnEdge { edge: e, t })
    }

    fn raw_volume(&self, e: usize, t: f64) -> f64 {
        self.ball.volume(self.distance(e, t) + 1.0)
    }

    fn pieces(&self, e: usize) -> Vec<Piece> {
        let g = self.graph;
        let l = g.length(e);
        let d = self.ball.vertex_distances();
        let di = d[g.init(e)];
        let dj = g.term(e).map_or(f64::INFINITY, |j| d[j]);
        let mut pts = vec![0.0, l, 0.5 * (dj + l - di)];
        if let Point::OnEdge { edge, t } = self.ball.center() {
            if edge == e {
                pts.extend([t, 0.5 * (t - di), 0.5 * (dj + l + t)]);
            }
        }
        let mut pts = clean(pts, l);
        // ρ is linear between the points; add the offsets where ρ + 1 hits a volume breakpoint
        let mut extra = Vec::new();
        for w in pts.windows(2) {
            let (ra, rb) = (self.distance(e, w[0]), self.distance(e, w[1]));
            if (rb - ra).abs() <= 1e-15 * (ra.abs() + rb.abs()) {
                continue;
            }
            for &r in &self.radii {
                let target = r - 1.0;
                if (target - ra) * (target - rb) < 0.0 {
                    extra.push(w[0] + (target - ra) / (rb - ra) * (w[1] - w[0]));
                }
            }
        }
        pts.extend(extra);
        pts = clean(pts, l);
        let mut out = Vec::with_capacity(pts.len());
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (va, vb) = (self.raw_volume(e, a), self.raw_volume(e, b));
            if (va - 1.0) * (vb - 1.0) < 0.0 {
                let m = a + (1.0 - va) / (vb - va) * (b - a);
                out.push(Piece {
                    a,
                    b: m,
                    va,
                    vb: 1.0,
                });
                out.push(Piece {
                    a: m,
                    b,
                    va: 1.0,
                    vb,
                });
            } else {
                out.push(Piece { a, b, va, vb });
            }
        }
        out
    }
}

fn clean(mut pts: Vec<f64>, l: f64) -> Vec<f64> {
    pts.retain(|x| x.is_finite() && *x >= 0.0 && *x <= l);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * l.max(1.0));
    pts
}

impl Weight for WeightFunction<'_> {
    fn value(&self, e: usize, t: f64) -> f64 {
        self.raw_volume(e, t).max(1.0).powf(1.0 + self.eps)
    }

    fn breaks(&self, e: usize) -> Vec<f64> {
        let pieces = self.pieces(e);
        let mut out: Vec<f64> = pieces.iter().map(|p| p.a).collect();
        out.push(pieces.last().map_or(0.0, |p| p.b));
        out
    }

    fn inv_sup_sqr(&self) -> f64 {
        1.0
    }

    /// Exact: on every piece `w⁻² = (linear)^{−2(1+ε)}` or 1.
    fn inverse_l2_sqr(&self) -> f64 {
        let p = 2.0 * (1.0 + self.eps);
        let mut total = 0.0;
        for e in 0..self.graph.edge_count() {
            for pc in self.pieces(e) {
                let len = pc.b - pc.a;
                let (va, vb) = (pc.va.max(1.0), pc.vb.max(1.0));
                total += if (vb - va).abs() <= 1e-12 * va {
                    len * (0.5 * (va + vb)).powf(-p)
                } else {
                    len * (va.powf(1.0 - p) - vb.powf(1.0 - p)) / ((p - 1.0) * (vb - va))
                };
            }
        }
        total
    }
}

/// Eigenvalues with their orthonormal eigenfunctions, grouped into levels.
#[derive(Debug, Clone)]
pub struct DiscreteSpectralRep {
    pub levels: Vec<Level>,
    total_length: f64,
}

#[derive(Debug, Clone)]
pub struct Level {
    pub lambda: f64,
    pub functions: Vec<SecularSolution>,
}

impl Level {
    pub fn multiplicity(&self) -> usize {
        self.functions.len()
    }
}

/// One term `φ_{j,λ}` of the representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeIndex {
    /// 1-based layer: `λ ∈ M_j`.
    pub j: usize,
    pub lambda: f64,
}

impl DiscreteSpectralRep {
    /// Groups modes whose eigenvalues agree to `1e-9` relative.
    pub fn new(g: &MetricGraph, modes: Vec<SecularSolution>) -> Self {
        let mut levels: Vec<Level> = Vec::new();
        for m in modes {
            match levels.last_mut() {
                Some(last)
                    if (last.lambda - m.lambda).abs() <= 1e-9 * last.lambda.abs().max(1.0) =>
                {
                    last.functions.push(m)
                }
                _ => levels.push(Level {
                    lambda: m.lambda,
                    functions: vec![m],
                }),
            }
        }
        levels.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        DiscreteSpectralRep {
            levels,
            total_length: g.total_length(),
        }
    }

    pub fn mode_count(&self) -> usize {
        self.levels.iter().map(Level::multiplicity).sum()
    }

    /// Number of layers `N`: the largest multiplicity.
    pub fn layers(&self) -> usize {
        self.levels
            .iter()
            .map(Level::multiplicity)
            .max()
            .unwrap_or(0)
    }

    /// `M_j = {λ : m(λ) ≥ j}` for `j = 1..N`.
    pub fn level_sets(&self) -> Vec<Vec<f64>> {
        (1..=self.layers())
            .map(|j| {
                self.levels
                    .iter()
                    .filter(|l| l.multiplicity() >= j)
                    .map(|l| l.lambda)
                    .collect()
            })
            .collect()
    }

    /// All modes in order of eigenvalue, then layer.
    pub fn modes(&self) -> impl Iterator<Item = (ModeIndex, &SecularSolution)> {
        self.levels.iter().flat_map(|l| {
            l.functions.iter().enumerate().map(move |(i, f)| {
                (
                    ModeIndex {
                        j: i + 1,
                        lambda: l.lambda,
                    },
                    f,
                )
            })
        })
    }

    pub fn lambda_min(&self) -> Option<f64> {
        self.levels.first().map(|l| l.lambda)
    }
}

fn cells_for(lambda: f64, len: f64) -> usize {
    ((len * (lambda.abs().sqrt() + 1.0) * 2.0).ceil() as usize).clamp(4, 100_000)
}

fn merge(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.extend(b);
    a.sort_by(f64::total_cmp);
    a.dedup();
    a
}

/// `∫_{t0}^{t1} f`, split at the given kinks; `cells` Gauss–Legendre cells
/// are shared out in proportion to the piece lengths.
pub(crate) fn integrate_edge(
    f: impl Fn(f64) -> Complex64,
    t0: f64,
    t1: f64,
    kinks: &[f64],
    cells: usize,
) -> Complex64 {
    let mut pts: Vec<f64> = kinks
        .iter()
        .copied()
        .filter(|&k| k > t0 && k < t1)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.insert(0, t0);
    pts.push(t1);
    let span = t1 - t0;
    pts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let n = ((cells as f64 * (w[1] - w[0]) / span).ceil() as usize).max(1);
            integrate_complex(&f, w[0], w[1], n)
        })
        .sum()
}

/// `‖w⁻¹ φ‖²` by Gauss–Legendre on the smooth pieces of `w`.
pub fn weighted_norm_sqr(phi: &SecularSolution, w: &dyn Weight) -> f64 {
    weighted_norm_sqr_of(phi, phi.coeffs.len(), phi.energy_scale(), w)
}

/// `‖w⁻¹ f‖²` for any function on `edges` edges oscillating at most like
/// energy `energy`.
pub fn weighted_norm_sqr_of(
    f: &dyn EdgeFunction,
    edges: usize,
    energy: f64,
    w: &dyn Weight,
) -> f64 {
    let mut total = 0.0;
    for e in 0..edges {
        let breaks = w.breaks(e);
        let (t0, t1) = (breaks[0], breaks[breaks.len() - 1]);
        let kinks = merge(breaks, f.kinks(e));
        total += integrate_edge(
            |t| c(f.value(e, t).norm_sqr() / w.value(e, t).powi(2)),
            t0,
            t1,
            &kinks,
            cells_for(energy, t1 - t0) * 2,
        )
        .re;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub j: usize,
    pub lambda: f64,
    /// `‖w⁻¹ φ_{j,λ}‖²`.
    pub weighted_norm_sqr: f64,
    /// `(C+λ)⁻¹ ‖w⁻¹ φ_{j,λ}‖²`.
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HsReport {
    /// Partial sum plus tail.
    pub hs_norm_sq: f64,
    pub partial_sum: f64,
    /// `sup w⁻² · Σ_{n>N} (C + λ̃_n)⁻¹` with Weyl eigenvalues `λ̃_n = (πn/L)²`.
    pub tail_bound: f64,
    pub c: f64,
    pub per_mode: Vec<ModeReport>,
}

/// `‖w⁻¹ γ(H₀)‖²_HS = Σ_{j,λ} (C+λ)⁻¹ ‖w⁻¹ φ_{j,λ}‖²`, truncated at the computed modes.
pub fn hs_norm(rep: &DiscreteSpectralRep, w: &dyn Weight, c_shift: f64) -> Result<HsReport> {
    if let Some(l0) = rep.lambda_min() {
        if !(c_shift + l0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "C = {c_shift} does not make C + λ_min = {} positive",
                c_shift + l0
            )));
        }
    }
    let per_mode: Vec<ModeReport> = rep
        .modes()
        .map(|(idx, phi)| {
            let weighted_norm_sqr = weighted_norm_sqr(phi, w);
            ModeReport {
                j: idx.j,
                lambda: idx.lambda,
                weighted_norm_sqr,
                term: weighted_norm_sqr / (c_shift + idx.lambda),
            }
        })
        .collect();
    let partial_sum: f64 = per_mode.iter().map(|m| m.term).sum();
    let tail_bound = w.inv_sup_sqr() * weyl_tail(rep.mode_count(), rep.total_length, c_shift)?;
    Ok(HsReport {
        hs_norm_sq: partial_sum + tail_bound,
        partial_sum,
        tail_bound,
        c: c_shift,
        per_mode,
    })
}

/// `∫_{N+½}^∞ dx / (C + (πx/L)²)`.
fn weyl_tail(n: usize, total_length: f64, c_shift: f64) -> Result<f64> {
    let a = std::f64::consts::PI / total_length;
    let x0 = n as f64 + 0.5;
    if c_shift > 0.0 {
        let r = c_shift.sqrt();
        Ok((std::f64::consts::FRAC_PI_2 - (a * x0 / r).atan()) / (a * r))
    } else if c_shift == 0.0 {
        Ok(1.0 / (a * a * x0))
    } else {
        let r = (-c_shift).sqrt();
        if a * x0 <= r {
            return Err(Error::InvalidInput(
                "too few modes for the tail estimate with negative C".into(),
            ));
        }
        Ok(((a * x0 + r) / (a * x0 - r)).ln() / (2.0 * a * r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficient {
    pub j: usize,
    pub lambda: f64,
    pub re: f64,
    pub im: f64,
}

impl Coefficient {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `∫ f conj(g)` over edge `e`, following the cells of `f` when it has them.
fn edge_inner(f: &dyn EdgeFunction, phi: &SecularSolution, e: usize) -> Complex64 {
    let l = phi.lengths()[e];
    integrate_edge(
        |t| f.value(e, t) * phi.eval(e, t).conj(),
        0.0,
        l,
        &merge(f.kinks(e), phi.kinks(e)),
        cells_for(phi.energy_scale(), l) * 4,
    )
}

/// `⟨f, φ⟩`; a grid function enters through its linear interpolant.
pub fn inner_with(f: &dyn EdgeFunction, phi: &SecularSolution) -> Complex64 {
    (0..phi.coeffs.len()).map(|e| edge_inner(f, phi, e)).sum()
}

/// `(U_j f)(λ) = ⟨f, φ_{j,λ}⟩` for every computed mode.
pub fn fourier(rep: &DiscreteSpectralRep, f: &dyn EdgeFunction) -> Vec<Coefficient> {
    rep.modes()
        .map(|(idx, phi)| {
            let z = inner_with(f, phi);
            Coefficient {
                j: idx.j,
                lambda: idx.lambda,
                re: z.re,
                im: z.im,
            }
        })
        .collect()
}

/// `Σ coeff · φ` sampled on `mesh`.
pub fn reconstruct(
    rep: &DiscreteSpectralRep,
    coeffs: &[Coefficient],
    mesh: &Mesh,
) -> Result<GridFunction> {
    if coeffs.len() != rep.mode_count() {
        return Err(Error::InvalidInput(format!(
            "{} coefficients for {} modes",
            coeffs.len(),
            rep.mode_count()
        )));
    }
    let modes: Vec<&SecularSolution> = rep.modes().map(|(_, f)| f).collect();
    Ok(GridFunction::from_fn(mesh, |e, t| {
        modes
            .iter()
            .zip(coeffs)
            .map(|(phi, k)| k.value() * phi.eval(e, t))
            .sum()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalReport {
    pub norm_sqr: f64,
    pub coeff_sqr: f64,
    pub gap: f64,
    pub relative_gap: f64,
    /// `‖f − Σ ⟨f,φ⟩ φ‖²`, the truncation tail seen directly.
    pub residual_norm_sqr: f64,
}

pub fn parseval(rep: &DiscreteSpectralRep, f: &dyn EdgeFunction) -> Result<ParsevalReport> {
    let modes: Vec<&SecularSolution> = rep.modes().map(|(_, f)| f).collect();
    let Some(first) = modes.first() else {
        return Err(Error::InvalidInput("no modes to expand in".into()));
    };
    let lengths = first.lengths().to_vec();
    let top = modes.last().map_or(0.0, |m| m.lambda);
    let coeffs = fourier(rep, f);
    let coeff_sqr: f64 = coeffs.iter().map(|k| k.value().norm_sqr()).sum();
    let mut norm_sqr = 0.0;
    let mut residual_norm_sqr = 0.0;
    for (e, &l) in lengths.iter().enumerate() {
        let cells = cells_for(top, l) * 4;
        let kinks = merge(f.kinks(e), modes.iter().flat_map(|m| m.kinks(e)).collect());
        norm_sqr += integrate_edge(|t| c(f.value(e, t).norm_sqr()), 0.0, l, &kinks, cells).re;
        residual_norm_sqr += integrate_edge(
            |t| {
                let rec: Complex64 = modes
                    .iter()
                    .zip(&coeffs)
                    .map(|(phi, k)| k.value() * phi.eval(e, t))
                    .sum();
                c((f.value(e, t) - rec).norm_sqr())
            },
            0.0,
            l,
            &kinks,
            cells,
        )
        .re;
    }
    let gap = (norm_sqr - coeff_sqr).abs();
    Ok(ParsevalReport {
        norm_sqr,
        coeff_sqr,
        gap,
        relative_gap: if norm_sqr > 0.0 { gap / norm_sqr } else { gap },
        residual_norm_sqr,
    })
}

/// Quintic smoothstep and its first two derivatives.
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

/// A compactly supported element of the operator domain with explicit second derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `64 (s(1−s))³` with `s = (t − a)/(b − a)` on `[a, b]` strictly inside edge `edge`.
    Bump { edge: usize, a: f64, b: f64 },
    /// `(a_k + b_k τ)(1 − S(τ/δ))` on the `k`-th edge-end of `vertex`, `τ` the
    /// distance from the vertex: trace `f(v) = a`, `f'(v) = b`.
    Vertex {
        vertex: usize,
        a: CVector,
        b: CVector,
        delta: f64,
    },
}

impl TestFunction {
    pub fn describe(&self, g: &MetricGraph) -> String {
        match self {
            TestFunction::Bump { edge, a, b } => {
                format!("bump on `{}` [{a}, {b}]", g.edge(*edge).id)
            }
            TestFunction::Vertex { vertex, .. } => {
                format!("vertex test at `{}`", g.vertex_ids()[*vertex])
            }
        }
    }

    /// `(edge, t0, t1)` intervals covering the support.
    pub fn support(&self, g: &MetricGraph) -> Vec<(usize, f64, f64)> {
        match self {
            TestFunction::Bump { edge, a, b } => vec![(*edge, *a, *b)],
            TestFunction::Vertex { vertex, delta, .. } => g
                .star(*vertex)
                .ends
                .iter()
                .map(|end| match end.end {
                    End::Init => (end.edge, 0.0, *delta),
                    End::Term => (end.edge, g.length(end.edge) - delta, g.length(end.edge)),
                })
                .collect(),
        }
    }

    /// `(f, f'')` at offset `t` of edge `e`.
    pub fn eval(&self, g: &MetricGraph, e: usize, t: f64) -> (Complex64, Complex64) {
        match self {
            TestFunction::Bump { edge, a, b } => {
                if *edge != e || t <= *a || t >= *b {
                    return (ZERO, ZERO);
                }
                let w = b - a;
                let s = (t - a) / w;
                let q = s * (1.0 - s);
                let dq = 1.0 - 2.0 * s;
                // d²/ds² q³ = 6 q q'² + 3 q² q''
                let f = 64.0 * q * q * q;
                let f2 = 64.0 * (6.0 * q * dq * dq - 6.0 * q * q) / (w * w);
                (c(f), c(f2))
            }
            TestFunction::Vertex {
                vertex,
                a,
                b,
                delta,
            } => {
                let mut f = ZERO;
                let mut f2 = ZERO;
                for (k, end) in g.star(*vertex).ends.iter().enumerate() {
                    if end.edge != e {
                        continue;
                    }
                    let tau = match end.end {
                        End::Init => t,
                        End::Term => g.length(e) - t,
                    };
                    if tau >= *delta {
                        continue;
                    }
                    let [s, s1, s2] = smoothstep(tau / delta);
                    let lin = a[k] + b[k] * tau;
                    f += lin * (1.0 - s);
                    f2 += -b[k] * (2.0 * s1 / delta) - lin * (s2 / (delta * delta));
                }
                (f, f2)
            }
        }
    }

    /// Checks the support and, for vertex tests, `P a = 0` and `L a + (1 − P) b = 0`.
    pub fn validate(&self, g: &MetricGraph, bc: &BoundaryCondition) -> Result<()> {
        match self {
            TestFunction::Bump { edge, a, b } => {
                if *edge >= g.edge_count() || !(*a > 0.0 && a < b && *b < g.length(*edge)) {
                    return Err(Error::InvalidInput(format!(
                        "{} is not strictly inside its edge",
                        self.describe(g)
                    )));
                }
            }
            TestFunction::Vertex {
                vertex,
                a,
                b,
                delta,
            } => {
                let star = g.star(*vertex);
                if a.len() != star.degree() || b.len() != star.degree() {
                    return Err(Error::InvalidInput(format!(
                        "{}: trace data has the wrong size",
                        self.describe(g)
                    )));
                }
                if star
                    .ends
                    .iter()
                    .any(|end| !(2.0 * delta < g.length(end.edge)))
                    || !(*delta > 0.0)
                {
                    return Err(Error::InvalidInput(format!(
                        "{}: δ = {delta} too large for the star",
                        self.describe(g)
                    )));
                }
                let (rp, rl) = bc.vertex(*vertex).residual(a, b);
                let scale = a.norm() + b.norm() + 1.0;
                if rp + rl > 1e-10 * scale {
                    return Err(Error::InvalidInput(format!(
                        "{} violates the vertex conditions: ‖P f(v)‖ = {rp:e}, ‖L f(v) + (1−P) f'(v)‖ = {rl:e}",
                        self.describe(g)
                    )));
                }
            }
        }
        Ok(())
    }

    fn norm(&self, g: &MetricGraph) -> f64 {
        self.support(g)
            .iter()
            .map(|&(e, t0, t1)| {
                integrate_complex(|t| c(self.eval(g, e, t).0.norm_sqr()), t0, t1, 16).re
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Two interior bumps per edge and, per vertex, one test for each basis
/// vector of the admissible trace data.
pub fn standard_battery(g: &MetricGraph, bc: &BoundaryCondition) -> Result<Vec<TestFunction>> {
    g.require_compact()?;
    let mut out = Vec::new();
    for e in 0..g.edge_count() {
        let l = g.length(e);
        out.push(TestFunction::Bump {
            edge: e,
            a: 0.1 * l,
            b: 0.6 * l,
        });
        out.push(TestFunction::Bump {
            edge: e,
            a: 0.4 * l,
            b: 0.9 * l,
        });
    }
    for (v, star) in g.stars().iter().enumerate() {
        let d = star.degree();
        if d == 0 {
            continue;
        }
        let vc = bc.vertex(v);
        let delta = 0.45
            * star
                .ends
                .iter()
                .map(|end| g.length(end.edge))
                .fold(f64::INFINITY, f64::min);
        // values: kernel of [P; P L], derivatives then fixed by the Robin part
        let mut stacked = CMatrix::zeros(2 * d, d);
        stacked.view_mut((0, 0), (d, d)).copy_from(&vc.p);
        stacked.view_mut((d, 0), (d, d)).copy_from(&(&vc.p * &vc.l));
        let (values, _) = null_space(&stacked, 1e-10 * (1.0 + crate::linalg::fro(&vc.l)));
        for k in 0..values.ncols() {
            let a = values.column(k).into_owned();
            let b = -(vc.complement() * &vc.l * &a);
            out.push(TestFunction::Vertex {
                vertex: v,
                a,
                b,
                delta,
            });
        }
        // free derivative directions: ran P
        let (range, _) = null_space(&vc.complement(), 0.5);
        for k in 0..range.ncols() {
            let b = range.column(k).into_owned();
            out.push(TestFunction::Vertex {
                vertex: v,
                a: CVector::zeros(d),
                b,
                delta,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenefReport {
    /// `max |⟨H f, φ⟩ − λ ⟨f, φ⟩| / ‖f‖` over all tests.
    pub worst: f64,
    pub worst_test: String,
    pub worst_interior: f64,
    pub worst_vertex: f64,
    pub tests: usize,
}

/// Weak eigen-equation residual of `φ` at `λ` against the given tests;
/// `potential` adds `V` to `H`.
pub fn genef_residual(
    g: &MetricGraph,
    bc: &BoundaryCondition,
    phi: &dyn EdgeFunction,
    lambda: f64,
    tests: &[TestFunction],
    potential: Option<&Potential>,
) -> Result<GenefReport> {
    let mut report = GenefReport {
        worst: 0.0,
        worst_test: String::new(),
        worst_interior: 0.0,
        worst_vertex: 0.0,
        tests: tests.len(),
    };
    for test in tests {
        test.validate(g, bc)?;
        let mut acc = ZERO;
        for (e, t0, t1) in test.support(g) {
            let cells = cells_for(
                lambda.abs() + potential.map_or(0.0, Potential::sup_abs),
                t1 - t0,
            )
            .max(32);
            acc += integrate_edge(
                |t| {
                    let (f, f2) = test.eval(g, e, t);
                    let v = potential.map_or(0.0, |p| p.value(e, t));
                    (-f2 + f * (v - lambda)) * phi.value(e, t).conj()
                },
                t0,
                t1,
                &merge(
                    phi.kinks(e),
                    potential.map_or_else(Vec::new, |p| p.breaks(e)),
                ),
                cells,
            );
        }
        let r = acc.norm() / test.norm(g);
        let slot = match test {
            TestFunction::Bump { .. } => &mut report.worst_interior,
            TestFunction::Vertex { .. } => &mut report.worst_vertex,
        };
        *slot = slot.max(r);
        if r > report.worst || report.worst_test.is_empty() {
            report.worst = r.max(report.worst);
            report.worst_test = test.describe(g);
        }
    }
    Ok(report)
}

/// `∫ w⁻²` by Gauss–Legendre on the smooth pieces, for cross-checks.
pub fn inverse_l2_sqr_quadrature(g: &MetricGraph, w: &dyn Weight, cells: usize) -> f64 {
    let (x, wt) = gl8();
    let mut total = 0.0;
    for e in 0..g.edge_count() {
        for seg in w.breaks(e).windows(2) {
            let h = (seg[1] - seg[0]) / cells as f64;
            for k in 0..cells {
                let mid = seg[0] + (k as f64 + 0.5) * h;
                for (xi, wi) in x.iter().zip(wt) {
                    total += 0.5 * h * wi * w.value(e, mid + 0.5 * h * xi).powi(-2);
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Preset;
    use crate::fixtures;
    use crate::secular::{modes, ScanOptions};
    use std::f64::consts::PI;

    fn g1_rep(n: usize) -> (MetricGraph, BoundaryCondition, DiscreteSpectralRep) {
        let g = fixtures::interval(PI);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let top = (n as f64 + 0.5).powi(2);
        let opts = ScanOptions::new(&g, 0.5, top);
        let rep = DiscreteSpectralRep::new(&g, modes(&g, &bc, &opts).unwrap());
        (g, bc, rep)
    }

    #[test]
    fn weight_at_midpoint() {
        let g = fixtures::interval(2.0);
        let w = weight(&g, &Point::OnEdge { edge: 0, t: 1.0 }, 1.0).unwrap();
        assert!((w.value(0, 1.0) - 4.0).abs() < 1e-14);
        assert!(w.value(0, 0.0) >= 1.0);
    }

    #[test]
    fn hs_norm_of_dirichlet_interval() {
        let (g, _, rep) = g1_rep(20);
        assert_eq!(rep.mode_count(), 20);
        let one = ConstantWeight::new(&g, 1.0).unwrap();
        let r = hs_norm(&rep, &one, 1.0).unwrap();
        let exact = (PI / PI.tanh() - 1.0) / 2.0;
        assert!(
            (r.hs_norm_sq - exact).abs() < 1e-3,
            "{} vs {exact}",
            r.hs_norm_sq
        );
        let two = ConstantWeight::new(&g, 2.0).unwrap();
        let r2 = hs_norm(&rep, &two, 1.0).unwrap();
        assert!((r2.hs_norm_sq * 4.0 - r.hs_norm_sq).abs() < 1e-12);
        assert!(hs_norm(&rep, &one, -1.0).is_err());
    }

    #[test]
    fn parseval_for_parabola() {
        let (g, _, rep) = g1_rep(20);
        let mesh = Mesh::uniform(&g, PI / 2000.0).unwrap();
        let f = GridFunction::from_fn(&mesh, |_, t| c(t * (PI - t)));
        let p = parseval(&rep, &f).unwrap();
        assert!(p.relative_gap < 1e-4, "{p:?}");
        let coeffs = fourier(&rep, &f);
        // ⟨t(π−t), √(2/π) sin nt⟩ = √(2/π) · 2(1 − (−1)^n)/n³
        for (n, k) in coeffs.iter().enumerate().map(|(i, k)| (i + 1, k)) {
            let exact =
                (2.0 / PI).sqrt() * 2.0 * (1.0 - (-1f64).powi(n as i32)) / (n as f64).powi(3);
            assert!((k.value() - c(exact)).norm() < 1e-5, "n={n} {k:?} {exact}");
        }
    }

    #[test]
    fn reconstruction_of_span() {
        let (g, _, rep) = g1_rep(6);
        let mesh = Mesh::uniform(&g, PI / 400.0).unwrap();
        let modes: Vec<&SecularSolution> = rep.modes().map(|(_, f)| f).collect();
        let exact =
            |e: usize, t: f64| modes[0].eval(e, t) * 2.0 - modes[3].eval(e, t) * Complex64::i();
        let coeffs = fourier(&rep, &exact);
        let rec = reconstruct(&rep, &coeffs, &mesh).unwrap();
        let diff = GridFunction::from_fn(&mesh, exact)
            .axpy(c(-1.0), &rec)
            .unwrap();
        assert!(diff.norm_sqr().sqrt() < 1e-12);
        let p = parseval(&rep, &exact).unwrap();
        assert!(p.gap < 1e-12 && p.residual_norm_sqr < 1e-12, "{p:?}");
        let zero = fourier(&rep, &GridFunction::zeros(&mesh));
        assert!(zero.iter().all(|k| k.value() == ZERO));
    }

    #[test]
    fn eigenfunctions_are_generalized_eigenfunctions() {
        let (g, bc, rep) = g1_rep(6);
        let tests = standard_battery(&g, &bc).unwrap();
        for (_, phi) in rep.modes() {
            let r = genef_residual(&g, &bc, phi, phi.lambda, &tests, None).unwrap();
            assert!(r.worst < 1e-10, "{r:?}");
            let off = genef_residual(&g, &bc, phi, phi.lambda + 1.0, &tests, None).unwrap();
            assert!(off.worst > 1e-2);
        }
    }

    #[test]
    fn kink_is_caught_by_vertex_tests_only() {
        let g = fixtures::star(&[1.5, 2.0, 2.5]);
        let bc = BoundaryCondition::from_presets(&g, |v| {
            if v == 0 {
                Preset::Kirchhoff
            } else {
                Preset::Neumann
            }
        });
        let lam = 2.0;
        let lens = vec![1.5, 2.0, 2.5];
        let phi = SecularSolution::new(
            lam,
            vec![(c(1.0), ZERO), (c(1.0), ZERO), (c(1.0), c(1.0))],
            lens,
        );
        let tests: Vec<TestFunction> = standard_battery(&g, &bc)
            .unwrap()
            .into_iter()
            .filter(|t| {
                matches!(
                    t,
                    TestFunction::Bump { .. } | TestFunction::Vertex { vertex: 0, .. }
                )
            })
            .collect();
        let r = genef_residual(&g, &bc, &phi, lam, &tests, None).unwrap();
        assert!(r.worst_interior < 1e-10);
        assert!(r.worst_vertex > 1e-2, "{r:?}");
    }

    #[test]
    fn invalid_tests_are_rejected() {
        let g = fixtures::interval(1.0);
        let bc = BoundaryCondition::uniform(&g, Preset::Dirichlet);
        let bad = TestFunction::Vertex {
            vertex: 0,
            a: CVector::from_element(1, c(1.0)),
            b: CVector::zeros(1),
            delta: 0.3,
        };
        let phi = |_: usize, _: f64| c(1.0);
        assert!(genef_residual(&g, &bc, &phi, 0.0, &[bad], None).is_err());
    }

    #[test]
    fn exact_inverse_weight_integral() {
        let g = fixtures::star(&[1.0, 2.5, 4.0]);
        for x0 in [
            Point::Vertex(0),
            Point::Vertex(2),
            Point::OnEdge { edge: 2, t: 1.3 },
        ] {
            let w = weight(&g, &x0, 0.5).unwrap();
            let exact = w.inverse_l2_sqr();
            let quad = inverse_l2_sqr_quadrature(&g, &w, 16);
            assert!((exact - quad).abs() < 1e-11, "{exact} {quad}");
        }
    }
}
