//! Metric graphs: combinatorics, edge lengths, the path metric and the edge
//! Lebesgue measure.
//!
//! Vertices and edges are addressed by their position in the graph description
//! (`usize` indices); the string ids from the input file are kept for reports.
//! The star of a vertex lists its edge-ends in edge order, the initial end of an
//! edge before its terminal end, so a loop occupies two slots.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which end of an edge a star slot refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Init,
    Term,
}

/// One slot of a vertex star.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeEnd {
    pub edge: usize,
    pub end: End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexStar {
    pub vertex: usize,
    pub ends: Vec<EdgeEnd>,
}

impl VertexStar {
    pub fn degree(&self) -> usize {
        self.ends.len()
    }

    /// Position of an edge-end inside this star.
    pub fn slot(&self, end: EdgeEnd) -> Option<usize> {
        self.ends.iter().position(|&e| e == end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    /// Positive length, `f64::INFINITY` for a half-line.
    pub length: f64,
    pub from: String,
    pub to: Option<String>,
    /// Length used when an infinite edge has to be cut for numerics.
    pub truncation: Option<f64>,
    init: Option<usize>,
    term: Option<usize>,
}

impl Edge {
    pub fn is_finite(&self) -> bool {
        self.length.is_finite()
    }
}

/// A point of the space X: either a vertex or an interior point of an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Vertex(usize),
    OnEdge { edge: usize, t: f64 },
}

/// A closed subinterval `[t0, t1]` of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeSegment {
    pub edge: usize,
    pub t0: f64,
    pub t1: f64,
}

impl EdgeSegment {
    pub fn length(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// A violated graph condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonPositiveLowerBound { u: f64 },
    DuplicateVertex { vertex: String },
    DuplicateEdge { edge: String },
    NonPositiveLength { edge: String, length: f64 },
    LowerBound { edge: String, length: f64, u: f64 },
    UnknownVertex { edge: String, vertex: String },
    MissingEndpoint { edge: String },
    InfiniteEdgeWithEndpoint { edge: String },
    IsolatedVertex { vertex: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveLowerBound { u } => {
                write!(f, "(LB) constant u = {u} is not positive")
            }
            Violation::DuplicateVertex { vertex } => write!(f, "vertex `{vertex}` listed twice"),
            Violation::DuplicateEdge { edge } => write!(f, "edge id `{edge}` listed twice"),
            Violation::NonPositiveLength { edge, length } => {
                write!(f, "edge `{edge}` has non-positive length {length}")
            }
            Violation::LowerBound { edge, length, u } => {
                write!(f, "(LB) edge `{edge}` has length {length} < u = {u}")
            }
            Violation::UnknownVertex { edge, vertex } => {
                write!(f, "edge `{edge}` references unknown vertex `{vertex}`")
            }
            Violation::MissingEndpoint { edge } => {
                write!(f, "finite edge `{edge}` has no end vertex")
            }
            Violation::InfiniteEdgeWithEndpoint { edge } => {
                write!(f, "infinite edge `{edge}` must not have an end vertex")
            }
            Violation::IsolatedVertex { vertex } => write!(f, "(F) vertex `{vertex}` has degree 0"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricGraph {
    u: f64,
    vertices: Vec<String>,
    edges: Vec<Edge>,
    vertex_index: HashMap<String, usize>,
    edge_index: HashMap<String, usize>,
    stars: Vec<VertexStar>,
}

/// Incremental construction of a [`MetricGraph`].
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    u: f64,
    vertices: Vec<String>,
    edges: Vec<(String, f64, String, Option<String>, Option<f64>)>,
}

impl GraphBuilder {
    pub fn vertex(mut self, id: impl Into<String>) -> Self {
        self.vertices.push(id.into());
        self
    }

    pub fn vertices<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.vertices.extend(ids.into_iter().map(Into::into));
        self
    }

    pub fn edge(
        mut self,
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        length: f64,
    ) -> Self {
        self.edges
            .push((id.into(), length, from.into(), Some(to.into()), None));
        self
    }

    /// An edge of infinite length attached at `from`.
    pub fn half_line(
        mut self,
        id: impl Into<String>,
        from: impl Into<String>,
        truncation: Option<f64>,
    ) -> Self {
        self.edges
            .push((id.into(), f64::INFINITY, from.into(), None, truncation));
        self
    }

    /// Raw edge record; no consistency is enforced here.
    pub fn raw_edge(
        mut self,
        id: impl Into<String>,
        length: f64,
        from: impl Into<String>,
        to: Option<String>,
    ) -> Self {
        self.edges.push((id.into(), length, from.into(), to, None));
        self
    }

    pub fn build(self) -> MetricGraph {
        MetricGraph::from_parts(self.u, self.vertices, self.edges)
    }
}

impl MetricGraph {
    pub fn builder(u: f64) -> GraphBuilder {
        GraphBuilder {
            u,
            ..Default::default()
        }
    }

    fn from_parts(
        u: f64,
        vertices: Vec<String>,
        raw_edges: Vec<(String, f64, String, Option<String>, Option<f64>)>,
    ) -> Self {
        let mut vertex_index = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            vertex_index.entry(v.clone()).or_insert(i);
        }
        let mut edge_index = HashMap::new();
        let edges: Vec<Edge> = raw_edges
            .into_iter()
            .enumerate()
            .map(|(k, (id, length, from, to, truncation))| {
                edge_index.entry(id.clone()).or_insert(k);
                let init = vertex_index.get(&from).copied();
                let term = to.as_ref().and_then(|t| vertex_index.get(t).copied());
                Edge {
                    id,
                    length,
                    from,
                    to,
                    truncation,
                    init,
                    term,
                }
            })
            .collect();
        let mut stars: Vec<VertexStar> = (0..vertices.len())
            .map(|vertex| VertexStar {
                vertex,
                ends: Vec::new(),
            })
            .collect();
        for (k, e) in edges.iter().enumerate() {
            if let Some(i) = e.init {
                stars[i].ends.push(EdgeEnd {
                    edge: k,
                    end: End::Init,
                });
            }
            if let (Some(j), true) = (e.term, e.is_finite()) {
                stars[j].ends.push(EdgeEnd {
                    edge: k,
                    end: End::Term,
                });
            }
        }
        MetricGraph {
            u,
            vertices,
            edges,
            vertex_index,
            edge_index,
            stars,
        }
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn length(&self, e: usize) -> f64 {
        self.edges[e].length
    }

    pub fn vertex(&self, id: &str) -> Result<usize> {
        self.vertex_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn edge_by_id(&self, id: &str) -> Result<usize> {
        self.edge_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownEdge(id.to_string()))
    }

    /// Initial vertex index of an edge (always present on a valid graph).
    pub fn init(&self, e: usize) -> usize {
        self.edges[e]
            .init
            .expect("edge with unresolved initial vertex")
    }

    /// Terminal vertex index; `None` for infinite edges.
    pub fn term(&self, e: usize) -> Option<usize> {
        if self.edges[e].is_finite() {
            self.edges[e].term
        } else {
            None
        }
    }

    pub fn end_vertex(&self, end: EdgeEnd) -> Option<usize> {
        match end.end {
            End::Init => self.edges[end.edge].init,
            End::Term => self.term(end.edge),
        }
    }

    pub fn star(&self, v: usize) -> &VertexStar {
        &self.stars[v]
    }

    pub fn stars(&self) -> &[VertexStar] {
        &self.stars
    }

    pub fn degree(&self, v: usize) -> usize {
        self.stars[v].degree()
    }

    /// Sum of the star sizes, i.e. the number of edge-ends attached to vertices.
    pub fn total_degree(&self) -> usize {
        self.stars.iter().map(VertexStar::degree).sum()
    }

    pub fn is_compact(&self) -> bool {
        self.edges.iter().all(Edge::is_finite)
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Length used for numerics: the edge length or, for an infinite edge, its truncation.
    pub fn numeric_length(&self, e: usize) -> Result<f64> {
        let edge = &self.edges[e];
        if edge.is_finite() {
            Ok(edge.length)
        } else {
            edge.truncation.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "infinite edge `{}` has no truncation length",
                    edge.id
                ))
            })
        }
    }

    /// Checks (F), (LB) and the endpoint structure. Violations are data.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.u > 0.0) {
            out.push(Violation::NonPositiveLowerBound { u: self.u });
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if self.vertex_index[v] != i {
                out.push(Violation::DuplicateVertex { vertex: v.clone() });
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            if self.edge_index[&e.id] != k {
                out.push(Violation::DuplicateEdge { edge: e.id.clone() });
            }
            if !(e.length > 0.0) {
                out.push(Violation::NonPositiveLength {
                    edge: e.id.clone(),
                    length: e.length,
                });
            } else if e.length < self.u {
                out.push(Violation::LowerBound {
                    edge: e.id.clone(),
                    length: e.length,
                    u: self.u,
                });
            }
            if e.init.is_none() {
                out.push(Violation::UnknownVertex {
                    edge: e.id.clone(),
                    vertex: e.from.clone(),
                });
            }
            match (&e.to, e.is_finite()) {
                (None, true) => out.push(Violation::MissingEndpoint { edge: e.id.clone() }),
                (Some(_), false) => {
                    out.push(Violation::InfiniteEdgeWithEndpoint { edge: e.id.clone() })
                }
                (Some(to), true) if e.term.is_none() => out.push(Violation::UnknownVertex {
                    edge: e.id.clone(),
                    vertex: to.clone(),
                }),
                _ => {}
            }
        }
        for star in &self.stars {
            if star.ends.is_empty() && self.vertex_index[&self.vertices[star.vertex]] == star.vertex
            {
                out.push(Violation::IsolatedVertex {
                    vertex: self.vertices[star.vertex].clone(),
                });
            }
        }
        out
    }

    pub fn require_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
            Err(Error::InvalidGraph(msg.join("; ")))
        }
    }

    pub fn require_compact(&self) -> Result<()> {
        self.require_valid()?;
        if let Some(e) = self.edges.iter().find(|e| !e.is_finite()) {
            return Err(Error::Unsupported(format!(
                "spectral computation on a graph with infinite edge `{}`",
                e.id
            )));
        }
        Ok(())
    }

    /// Builds a point from an edge and an offset; offsets at the edge ends
    /// become the corresponding vertex.
    pub fn point_on_edge(&self, e: usize, t: f64) -> Result<Point> {
        let edge = self
            .edges
            .get(e)
            .ok_or_else(|| Error::UnknownEdge(e.to_string()))?;
        if !(t >= 0.0 && t <= edge.length) || t.is_nan() {
            return Err(Error::InvalidPoint(format!(
                "offset {t} outside [0, {}] on edge `{}`",
                edge.length, edge.id
            )));
        }
        if t == 0.0 {
            Ok(Point::Vertex(self.init(e)))
        } else if t == edge.length {
            Ok(Point::Vertex(self.term(e).expect("finite edge")))
        } else {
            Ok(Point::OnEdge { edge: e, t })
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        match *p {
            Point::Vertex(v) if v < self.vertices.len() => Ok(()),
            Point::Vertex(v) => Err(Error::UnknownVertex(v.to_string())),
            Point::OnEdge { edge, t } => {
                let e = self
                    .edges
                    .get(edge)
                    .ok_or_else(|| Error::UnknownEdge(edge.to_string()))?;
                if t > 0.0 && t < e.length {
                    Ok(())
                } else {
                    Err(Error::InvalidPoint(format!(
                        "offset {t} not interior to edge `{}`",
                        e.id
                    )))
                }
            }
        }
    }

    /// Parses `"v"` (vertex id) or `"edge_id:t"` into a point.
    pub fn parse_point(&self, s: &str) -> Result<Point> {
        if let Some((e, t)) = s.rsplit_once(':') {
            if let Ok(e) = self.edge_by_id(e) {
                let t: f64 = t
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad offset in point `{s}`")))?;
                return self.point_on_edge(e, t);
            }
        }
        Ok(Point::Vertex(self.vertex(s)?))
    }

    /// Shortest-path distances from `x` to every vertex (`+inf` if unreachable).
    ///
    /// Parallel edges are relaxed separately, so the shortest one wins.
    pub fn vertex_distances_from(&self, x: &Point) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let n = self.vertices.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        let seed = |v: usize, d: f64, dist: &mut Vec<f64>, heap: &mut BinaryHeap<HeapItem>| {
            if d < dist[v] {
                dist[v] = d;
                heap.push(HeapItem(d, v));
            }
        };
        match *x {
            Point::Vertex(v) => seed(v, 0.0, &mut dist, &mut heap),
            Point::OnEdge { edge, t } => {
                seed(self.init(edge), t, &mut dist, &mut heap);
                if let Some(j) = self.term(edge) {
                    seed(j, self.edges[edge].length - t, &mut dist, &mut heap);
                }
            }
        }
        while let Some(HeapItem(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for slot in &self.stars[v].ends {
                let e = &self.edges[slot.edge];
                let other = match slot.end {
                    End::Init => self.term(slot.edge),
                    End::Term => e.init,
                };
                if let Some(w) = other {
                    let nd = d + e.length;
                    if nd < dist[w] {
                        dist[w] = nd;
                        heap.push(HeapItem(nd, w));
                    }
                }
            }
        }
        Ok(dist)
    }

    /// Path-metric distance between two points.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(y)?;
        let dist = self.vertex_distances_from(x)?;
        Ok(self.distance_with(&dist, x, y))
    }

    /// Distance to `y` given the vertex distances from `x`.
    pub fn distance_with(&self, dist: &[f64], x: &Point, y: &Point) -> f64 {
        match *y {
            Point::Vertex(w) => dist[w],
            Point::OnEdge { edge, t } => {
                let mut d = dist[self.init(edge)] + t;
                if let Some(j) = self.term(edge) {
                    d = d.min(dist[j] + self.edges[edge].length - t);
                }
                if let Point::OnEdge { edge: ex, t: tx } = *x {
                    if ex == edge {
                        d = d.min((t - tx).abs());
                    }
                }
                d
            }
        }
    }

    /// Precomputed data for measuring balls around `x0`.
    pub fn ball(&self, x0: &Point) -> Result<Ball<'_>> {
        let dist = self.vertex_distances_from(x0)?;
        Ok(Ball {
            graph: self,
            center: *x0,
            dist,
        })
    }

    /// Edge-Lebesgue measure of the closed ball of radius `r` around `x0`.
    pub fn ball_volume(&self, x0: &Point, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidInput(format!("negative radius {r}")));
        }
        Ok(self.ball(x0)?.volume(r))
    }

    /// Sliding windows `[k*step, k*step + w]`, `w = min(max_len, l(e))`, covering each edge.
    pub fn segments(&self, max_len: f64, step: f64) -> Result<Vec<EdgeSegment>> {
        if !(step > 0.0 && step <= max_len) {
            return Err(Error::InvalidInput(format!(
                "segment step {step} must lie in (0, max_len = {max_len}]"
            )));
        }
        let mut out = Vec::new();
        for e in 0..self.edges.len() {
            let l = self.numeric_length(e)?;
            out.extend(windows(e, l, max_len, step));
        }
        Ok(out)
    }

    /// Whether every vertex is reachable from the first one.
    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        match self.vertex_distances_from(&Point::Vertex(0)) {
            Ok(d) => d.iter().all(|x| x.is_finite()),
            Err(_) => false,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(s)?;
        Ok(file.into_graph())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let file = GraphFile {
            u: self.u,
            vertices: self.vertices.iter().cloned().map(Id::Str).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: Id::Str(e.id.clone()),
                    length: if e.is_finite() {
                        LengthValue::Num(e.length)
                    } else {
                        LengthValue::Text("inf".into())
                    },
                    from: Id::Str(e.from.clone()),
                    to: e.to.clone().map(Id::Str),
                    truncation: e.truncation,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serializes")
    }
}

pub(crate) fn windows(edge: usize, l: f64, max_len: f64, step: f64) -> Vec<EdgeSegment> {
    let w = max_len.min(l);
    let mut out = Vec::new();
    let mut start = 0.0;
    loop {
        if start + w >= l - 1e-12 * l.max(1.0) {
            out.push(EdgeSegment {
                edge,
                t0: l - w,
                t1: l,
            });
            break;
        }
        out.push(EdgeSegment {
            edge,
            t0: start,
            t1: start + w,
        });
        start += step;
    }
    out
}

/// Ball measure around a fixed center.
#[derive(Debug, Clone)]
pub struct Ball<'a> {
    graph: &'a MetricGraph,
    center: Point,
    dist: Vec<f64>,
}

impl<'a> Ball<'a> {
    pub fn center(&self) -> Point {
        self.center
    }

    pub fn vertex_distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn distance_to(&self, y: &Point) -> f64 {
        self.graph.distance_with(&self.dist, &self.center, y)
    }

    /// m(B_r) as a sum of closed-form per-edge sublevel sets.
    pub fn volume(&self, r: f64) -> f64 {
        (0..self.graph.edge_count())
            .map(|e| self.edge_volume(e, r))
            .sum()
    }

    fn edge_volume(&self, e: usize, r: f64) -> f64 {
        let g = self.graph;
        let l = g.length(e);
        let mut iv: Vec<(f64, f64)> = Vec::with_capacity(3);
        let di = self.dist[g.init(e)];
        if r >= di {
            iv.push((0.0, (r - di).min(l)));
        }
        if let Some(j) = g.term(e) {
            let dj = self.dist[j];
            if r >= dj {
                iv.push(((l - (r - dj)).max(0.0), l));
            }
        }
        if let Point::OnEdge { edge, t } = self.center {
            if edge == e {
                iv.push(((t - r).max(0.0), (t + r).min(l)));
            }
        }
        union_length(&mut iv)
    }

    /// Radii at which r -> m(B_r) may change slope.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let g = self.graph;
        let mut bp = vec![0.0];
        for e in 0..g.edge_count() {
            let l = g.length(e);
            let di = self.dist[g.init(e)];
            bp.push(di);
            bp.push(di + l);
            let dj = g.term(e).map(|j| self.dist[j]);
            if let Some(dj) = dj {
                bp.push(dj);
                bp.push(dj + l);
                bp.push(0.5 * (di + dj + l));
            }
            if let Point::OnEdge { edge, t } = self.center {
                if edge == e {
                    bp.extend([t, l - t, 0.5 * (t - di), 0.5 * (t + di)]);
                    if let Some(dj) = dj {
                        bp.extend([0.5 * (l - t - dj), 0.5 * (l - t + dj)]);
                    }
                }
            }
        }
        bp.retain(|x| x.is_finite() && *x >= 0.0);
        bp.sort_by(f64::total_cmp);
        bp.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
        bp
    }
}

fn union_length(iv: &mut [(f64, f64)]) -> f64 {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for &(a, b) in iv.iter() {
        if b <= a {
            continue;
        }
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    total
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Id {
    Str(String),
    Int(i64),
}

impl Id {
    fn into_string(self) -> String {
        match self {
            Id::Str(s) => s,
            Id::Int(i) => i.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LengthValue {
    Num(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    id: Id,
    length: LengthValue,
    from: Id,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<Id>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    u: f64,
    vertices: Vec<Id>,
    edges: Vec<EdgeRecord>,
}

impl GraphFile {
    fn into_graph(self) -> MetricGraph {
        let vertices = self.vertices.into_iter().map(Id::into_string).collect();
        let edges = self
            .edges
            .into_iter()
            .map(|e| {
                let length = match e.length {
                    LengthValue::Num(x) => x,
                    LengthValue::Text(s)
                        if matches!(s.as_str(), "inf" | "infinity" | "Infinity") =>
                    {
                        f64::INFINITY
                    }
                    // Unparseable text becomes NaN and is reported by `validate`.
                    LengthValue::Text(s) => s.parse().unwrap_or(f64::NAN),
                };
                (
                    e.id.into_string(),
                    length,
                    e.from.into_string(),
                    e.to.map(Id::into_string),
                    e.truncation,
                )
            })
            .collect();
        MetricGraph::from_parts(self.u, vertices, edges)
    }
}
