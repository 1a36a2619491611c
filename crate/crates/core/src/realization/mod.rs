//! Planar separatrix skeletons realizing a marked set in a disc, and the
//! disc, annulus, disc decomposition of the sphere realizing a pair.
//!
//! Construction in a disc with inward boundary flow:
//! 1. each 2-class `{i, j}` becomes a chord through a new saddle, whose two
//!    incoming separatrices start at the boundary marks `i` and `j`;
//! 2. every region cut out by the chords gets one attractor, and each chord
//!    saddle sends one outgoing separatrix into each adjacent region;
//! 3. each 1-class gets a gadget: a saddle fed by the boundary mark and by a
//!    repeller, with both outgoing separatrices running to the attractor of
//!    the region, enclosing the repeller.

mod svg;

pub use svg::{export_svg, SvgExport};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::circle::{
    is_non_synchronized, validate_marked_set, CharacteristicPair, CircleError, Coordinate, MarkClass, MarkedSet,
};
use crate::unfolding::Side;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VertexKind {
    Saddle,
    Attractor,
    /// Source inside a 1-class gadget.
    Repeller,
    /// Marked point `index` of the set, at `angle` turns counterclockwise.
    BoundaryMark { index: usize, angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vertex {
    pub id: usize,
    #[serde(flatten)]
    pub kind: VertexKind,
    #[serde(skip)]
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    IncomingSeparatrix,
    OutgoingSeparatrix,
    BoundaryArc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub id: usize,
    pub kind: EdgeKind,
    pub from: usize,
    pub to: usize,
}

/// A region of the disc cut out by the chords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    /// Edge ids of the bounding cycle, in walking order.
    pub cycle: Vec<usize>,
    /// Attractors placed in the region.
    pub attractors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    /// The disc is traversed in reverse time: attractors read as repellers and
    /// incoming separatrices as outgoing ones.
    pub time_reversed: bool,
}

#[derive(Serialize)]
struct SkeletonJson<'a> {
    vertices: &'a [Vertex],
    edges: &'a [Edge],
    faces: Vec<&'a [usize]>,
    time_reversed: bool,
}

impl SkeletonGraph {
    fn add_vertex(&mut self, kind: VertexKind) -> usize {
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, kind, position: None });
        id
    }

    fn add_edge(&mut self, kind: EdgeKind, from: usize, to: usize) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { id, kind, from, to });
        id
    }

    pub fn count(&self, pred: impl Fn(&VertexKind) -> bool) -> usize {
        self.vertices.iter().filter(|v| pred(&v.kind)).count()
    }

    pub fn saddle_count(&self) -> usize {
        self.count(|k| matches!(k, VertexKind::Saddle))
    }

    pub fn attractor_count(&self) -> usize {
        self.count(|k| matches!(k, VertexKind::Attractor))
    }

    pub fn separatrix_count(&self) -> usize {
        self.edges.iter().filter(|e| e.kind != EdgeKind::BoundaryArc).count()
    }

    /// Boundary marks sorted by their index in the set.
    pub fn boundary_marks(&self) -> Vec<(usize, usize, f64)> {
        let mut marks: Vec<(usize, usize, f64)> = self
            .vertices
            .iter()
            .filter_map(|v| match v.kind {
                VertexKind::BoundaryMark { index, angle } => Some((index, v.id, angle)),
                _ => None,
            })
            .collect();
        marks.sort_by_key(|m| m.0);
        marks
    }

    /// `{vertices:[{id,kind,..}], edges:[{id,kind,from,to}], faces:[[edgeId,..]]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SkeletonJson {
            vertices: &self.vertices,
            edges: &self.edges,
            faces: self.faces.iter().map(|f| f.cycle.as_slice()).collect(),
            time_reversed: self.time_reversed,
        })
        .expect("skeleton serializes")
    }
}

/// Builds the skeleton of a disc whose boundary carries `set`.
pub fn realize_disc<C: Coordinate>(set: &MarkedSet<C>) -> SkeletonGraph {
    let angles: Vec<f64> = set.coordinates().iter().map(|c| c.to_f64()).collect();
    let s = angles.len();
    let mut g = SkeletonGraph {
        vertices: Vec::new(),
        edges: Vec::new(),
        faces: Vec::new(),
        time_reversed: false,
    };
    let marks: Vec<usize> = angles
        .iter()
        .enumerate()
        .map(|(index, &angle)| g.add_vertex(VertexKind::BoundaryMark { index, angle }))
        .collect();
    let arcs: Vec<usize> = (0..s).map(|p| g.add_edge(EdgeKind::BoundaryArc, marks[p], marks[(p + 1) % s])).collect();

    // chords by left endpoint, with the innermost enclosing chord as parent
    let mut chords: Vec<(usize, usize)> = set
        .classes()
        .iter()
        .filter_map(|c| match *c {
            MarkClass::Pair(i, j) => Some((i, j)),
            MarkClass::Single(_) => None,
        })
        .collect();
    chords.sort();
    let mut chord_at = vec![None; s];
    for (c, &(i, _)) in chords.iter().enumerate() {
        chord_at[i] = Some(c);
    }
    let mut saddle = Vec::with_capacity(chords.len());
    let mut incoming = Vec::with_capacity(chords.len());
    for &(i, j) in &chords {
        let v = g.add_vertex(VertexKind::Saddle);
        let ei = g.add_edge(EdgeKind::IncomingSeparatrix, marks[i], v);
        let ej = g.add_edge(EdgeKind::IncomingSeparatrix, marks[j], v);
        saddle.push(v);
        incoming.push((ei, ej));
    }
    // face 0 is the outermost region, face c + 1 lies inside chord c
    let parent: Vec<usize> = chords
        .iter()
        .map(|&(i, j)| {
            chords
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| a < i && j < b)
                .max_by_key(|(_, &(a, _))| a)
                .map_or(0, |(c, _)| c + 1)
        })
        .collect();

    let walk = |from: usize, to: usize| -> Vec<usize> {
        let mut cycle = Vec::new();
        let mut p = from;
        while p < to {
            match chord_at[p] {
                Some(c) if p != from || to == s => {
                    cycle.push(incoming[c].0);
                    cycle.push(incoming[c].1);
                    p = chords[c].1;
                }
                _ => {
                    cycle.push(arcs[p]);
                    p += 1;
                }
            }
        }
        cycle
    };
    let mut faces = vec![Face {
        cycle: walk(0, s),
        attractors: Vec::new(),
    }];
    for (c, &(i, j)) in chords.iter().enumerate() {
        let mut cycle = walk(i, j);
        cycle.push(incoming[c].1);
        cycle.push(incoming[c].0);
        faces.push(Face {
            cycle,
            attractors: Vec::new(),
        });
    }
    let attractors: Vec<usize> = (0..faces.len()).map(|_| g.add_vertex(VertexKind::Attractor)).collect();
    for (f, face) in faces.iter_mut().enumerate() {
        face.attractors.push(attractors[f]);
    }
    for (c, &v) in saddle.iter().enumerate() {
        g.add_edge(EdgeKind::OutgoingSeparatrix, v, attractors[c + 1]);
        g.add_edge(EdgeKind::OutgoingSeparatrix, v, attractors[parent[c]]);
    }

    // region of the arc leaving each mark
    let mut region_of_arc = vec![0usize; s];
    for (c, &(i, j)) in chords.iter().enumerate() {
        for p in i..j {
            let inner = chords
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| a <= p && p < b)
                .max_by_key(|(_, &(a, _))| a)
                .map(|(d, _)| d);
            if inner == Some(c) {
                region_of_arc[p] = c + 1;
            }
        }
    }
    for class in set.classes() {
        if let MarkClass::Single(i) = *class {
            let v = g.add_vertex(VertexKind::Saddle);
            let r = g.add_vertex(VertexKind::Repeller);
            let a = attractors[region_of_arc[i]];
            g.add_edge(EdgeKind::IncomingSeparatrix, marks[i], v);
            g.add_edge(EdgeKind::IncomingSeparatrix, r, v);
            g.add_edge(EdgeKind::OutgoingSeparatrix, v, a);
            g.add_edge(EdgeKind::OutgoingSeparatrix, v, a);
        }
    }
    g.faces = faces;
    svg::assign_positions(&mut g);
    g
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// First offending cell, if any.
    pub counterexample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonReport {
    pub checks: Vec<Check>,
}

impl SkeletonReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &'static str, failure: Option<String>) -> Check {
    Check {
        name,
        passed: failure.is_none(),
        counterexample: failure,
    }
}

fn is_mark(g: &SkeletonGraph, v: usize) -> bool {
    matches!(g.vertices.get(v).map(|v| v.kind), Some(VertexKind::BoundaryMark { .. }))
}

/// `(mark, other end)` for a separatrix touching a boundary mark, in either
/// time direction.
fn mark_separatrix(g: &SkeletonGraph, e: &Edge) -> Option<(usize, usize)> {
    if e.kind == EdgeKind::BoundaryArc {
        None
    } else if is_mark(g, e.from) {
        Some((e.from, e.to))
    } else if is_mark(g, e.to) {
        Some((e.to, e.from))
    } else {
        None
    }
}

/// Pairs of boundary marks joined through a common saddle, as mark indices.
fn chord_pairs(g: &SkeletonGraph) -> Vec<(usize, usize, usize)> {
    let mut feeds: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (mark, saddle) in g.edges.iter().filter_map(|e| mark_separatrix(g, e)) {
        feeds.entry(saddle).or_default().push(mark);
    }
    let index = |v: usize| match g.vertices[v].kind {
        VertexKind::BoundaryMark { index, .. } => index,
        _ => unreachable!(),
    };
    feeds
        .into_iter()
        .filter(|(_, m)| m.len() == 2)
        .map(|(s, m)| {
            let (a, b) = (index(m[0]), index(m[1]));
            (a.min(b), a.max(b), s)
        })
        .collect()
}

/// Runs every invariant check; never fails.
pub fn validate_skeleton(g: &SkeletonGraph) -> SkeletonReport {
    let n = g.vertices.len();
    let mut checks = Vec::new();

    let dangling = g.edges.iter().find(|e| e.from >= n || e.to >= n);
    checks.push(check(
        "edge_endpoints",
        dangling.map(|e| format!("edge {} references a missing vertex", e.id)),
    ));
    if dangling.is_some() {
        return SkeletonReport { checks };
    }

    let mut bad = None;
    for v in g.vertices.iter().filter(|v| v.kind == VertexKind::Saddle) {
        let inc = g
            .edges
            .iter()
            .filter(|e| e.to == v.id && e.kind == EdgeKind::IncomingSeparatrix)
            .count();
        let out = g
            .edges
            .iter()
            .filter(|e| e.from == v.id && e.kind == EdgeKind::OutgoingSeparatrix)
            .count();
        let total = g
            .edges
            .iter()
            .filter(|e| e.kind != EdgeKind::BoundaryArc && (e.from == v.id || e.to == v.id))
            .count();
        if inc != 2 || out != 2 || total != 4 {
            bad = Some(format!("saddle {} has {inc} incoming, {out} outgoing, {total} separatrices", v.id));
            break;
        }
    }
    checks.push(check("saddle_degree", bad));

    let mut bad = None;
    for v in g.vertices.iter().filter(|v| matches!(v.kind, VertexKind::BoundaryMark { .. })) {
        let count = g
            .edges
            .iter()
            .filter(|e| e.kind != EdgeKind::BoundaryArc && (e.from == v.id || e.to == v.id))
            .count();
        if count != 1 {
            bad = Some(format!("boundary mark {} lies on {count} separatrices", v.id));
            break;
        }
    }
    checks.push(check("mark_on_one_separatrix", bad));

    // chord structure: marks, chord saddles, boundary arcs, chord separatrices
    let pairs = chord_pairs(g);
    let marks = g.boundary_marks().len();
    let arcs = g.edges.iter().filter(|e| e.kind == EdgeKind::BoundaryArc).count();
    let v = (marks + pairs.len()) as i64;
    let e = (arcs + 2 * pairs.len()) as i64;
    let f = g.faces.len() as i64 + 1;
    let mut bad = (v - e + f != 2).then(|| format!("V - E + F = {v} - {e} + {f} on the chord graph"));
    if bad.is_none() && g.faces.len() != pairs.len() + 1 {
        bad = Some(format!("{} faces for {} chords", g.faces.len(), pairs.len()));
    }
    if bad.is_none() {
        for (k, face) in g.faces.iter().enumerate() {
            if let Some(msg) = face_cycle_error(g, &face.cycle) {
                bad = Some(format!("face {k}: {msg}"));
                break;
            }
        }
    }
    checks.push(check("euler", bad));

    let mut bad = None;
    let mut seen = vec![0usize; n];
    for (k, face) in g.faces.iter().enumerate() {
        let count = face
            .attractors
            .iter()
            .filter(|&&a| a < n && g.vertices[a].kind == VertexKind::Attractor)
            .count();
        if count != 1 || face.attractors.len() != 1 {
            bad = Some(format!("face {k} holds {count} attractors"));
            break;
        }
        seen[face.attractors[0]] += 1;
    }
    if bad.is_none() {
        if let Some(a) = g
            .vertices
            .iter()
            .find(|v| v.kind == VertexKind::Attractor && seen[v.id] != 1)
        {
            bad = Some(format!("attractor {} lies in {} faces", a.id, seen[a.id]));
        }
    }
    if bad.is_none() {
        // a chord saddle feeds the attractors of the two regions it separates
        for &(_, _, s) in &pairs {
            let adjacent: Vec<usize> = g
                .faces
                .iter()
                .filter(|f| f.cycle.iter().any(|&e| g.edges[e].to == s || g.edges[e].from == s))
                .map(|f| f.attractors[0])
                .collect();
            let mut targets: Vec<usize> = g
                .edges
                .iter()
                .filter(|e| mark_separatrix(g, e).is_none() && (e.from == s || e.to == s))
                .map(|e| if e.from == s { e.to } else { e.from })
                .collect();
            let mut expected = adjacent.clone();
            targets.sort();
            expected.sort();
            if targets != expected {
                bad = Some(format!("saddle {s} feeds {targets:?}, adjacent attractors {expected:?}"));
                break;
            }
        }
    }
    checks.push(check("one_attractor_per_face", bad));

    let mut bad = None;
    'outer: for (x, &(a, b, _)) in pairs.iter().enumerate() {
        for &(c, d, _) in &pairs[x + 1..] {
            let inside = |p: usize| a < p && p < b;
            if inside(c) != inside(d) && ![a, b].contains(&c) && ![a, b].contains(&d) {
                bad = Some(format!("chords ({a}, {b}) and ({c}, {d}) cross"));
                break 'outer;
            }
        }
    }
    checks.push(check("non_crossing", bad));

    SkeletonReport { checks }
}

fn face_cycle_error(g: &SkeletonGraph, cycle: &[usize]) -> Option<String> {
    if cycle.is_empty() {
        return None;
    }
    if let Some(&e) = cycle.iter().find(|&&e| e >= g.edges.len()) {
        return Some(format!("missing edge {e}"));
    }
    let ends = |e: usize| [g.edges[e].from, g.edges[e].to];
    // consecutive edges share a vertex, including the closing pair
    for w in 0..cycle.len() {
        let (x, y) = (ends(cycle[w]), ends(cycle[(w + 1) % cycle.len()]));
        if !x.iter().any(|v| y.contains(v)) {
            return Some(format!("edges {} and {} are not adjacent", cycle[w], cycle[(w + 1) % cycle.len()]));
        }
    }
    None
}

/// The marked set recorded by the skeleton: boundary marks grouped by the
/// saddle their separatrix runs to.
pub fn read_back(g: &SkeletonGraph) -> Result<MarkedSet<f64>, CircleError> {
    let marks = g.boundary_marks();
    let position: BTreeMap<usize, usize> = marks.iter().enumerate().map(|(k, m)| (m.1, k)).collect();
    let mut by_saddle: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (mark, saddle) in g.edges.iter().filter_map(|e| mark_separatrix(g, e)) {
        by_saddle.entry(saddle).or_default().push(position[&mark]);
    }
    let points: Vec<f64> = marks.iter().map(|m| m.2).collect();
    let classes: Vec<Vec<usize>> = by_saddle.into_values().collect();
    validate_marked_set(&points, &classes, f64::default_tolerance())
}

/// The model annulus between the discs, with the loop angles of the marks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusDescriptor {
    pub a_coeff: f64,
    /// Angles on `C-`, in the order of `A^-`.
    pub minus_angles: Vec<f64>,
    /// Angles on `C+`, in the order of `A^+`.
    pub plus_angles: Vec<f64>,
}

impl AnnulusDescriptor {
    /// Loop points for the channel `(k, m)`.
    pub fn channel(&self, k: usize, m: usize) -> (crate::annulus::LoopPoint, crate::annulus::LoopPoint) {
        (
            crate::annulus::LoopPoint::new(Side::Minus, self.minus_angles[m]),
            crate::annulus::LoopPoint::new(Side::Plus, self.plus_angles[k]),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRealization {
    /// Disc bounded by `C+`, realized in reverse time.
    pub disc_plus: SkeletonGraph,
    /// Disc bounded by `C-`, with the flow entering through the boundary.
    pub disc_minus: SkeletonGraph,
    pub annulus: AnnulusDescriptor,
}

impl SphereRealization {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "disc_plus": self.disc_plus.to_json(),
            "disc_minus": self.disc_minus.to_json(),
            "annulus": self.annulus,
        })
    }
}

/// Realizes a non-synchronized pair on the sphere. With base points `±1` the
/// canonical coordinates on the loops are the loop angles themselves, so the
/// marks sit at their own coordinates.
pub fn realize_sphere<C: Coordinate>(pair: &CharacteristicPair<C>) -> Result<SphereRealization, CircleError> {
    let verdict = is_non_synchronized(pair, C::default_tolerance());
    if let Some(w) = verdict.witness {
        return Err(CircleError::SynchronizedInput {
            which: "the pair",
            first: w.0,
            second: w.1,
        });
    }
    let mut disc_plus = realize_disc(&pair.plus);
    disc_plus.time_reversed = true;
    // reverse time: separatrices through the marks leave the saddles
    for e in &mut disc_plus.edges {
        e.kind = match e.kind {
            EdgeKind::IncomingSeparatrix => {
                std::mem::swap(&mut e.from, &mut e.to);
                EdgeKind::OutgoingSeparatrix
            }
            EdgeKind::OutgoingSeparatrix => {
                std::mem::swap(&mut e.from, &mut e.to);
                EdgeKind::IncomingSeparatrix
            }
            EdgeKind::BoundaryArc => EdgeKind::BoundaryArc,
        };
    }
    let angles = |s: &MarkedSet<C>| s.coordinates().iter().map(|c| c.to_f64()).collect();
    Ok(SphereRealization {
        disc_minus: realize_disc(&pair.minus),
        annulus: AnnulusDescriptor {
            a_coeff: 0.0,
            minus_angles: angles(&pair.minus),
            plus_angles: angles(&pair.plus),
        },
        disc_plus,
    })
}
