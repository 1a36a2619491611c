//! Deterministic layout and SVG rendering of skeletons.
//!
//! Layout on the unit disc: boundary marks at their angles, chords as circular
//! arcs orthogonal to the boundary with the saddle at the arc midpoint,
//! attractors at the area centroid of their face, gadgets on the inward
//! radius of their mark.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::{EdgeKind, SkeletonGraph, SphereRealization, VertexKind};

const ARC_SAMPLES: usize = 32;
const PANEL: f64 = 240.0;
const RADIUS: f64 = 100.0;

fn on_circle(turns: f64) -> [f64; 2] {
    [(TAU * turns).cos(), (TAU * turns).sin()]
}

fn mark_angle(g: &SkeletonGraph, v: usize) -> Option<f64> {
    match g.vertices[v].kind {
        VertexKind::BoundaryMark { angle, .. } => Some(angle),
        _ => None,
    }
}

/// Circle orthogonal to the unit circle through the boundary points at
/// `a` and `b` turns; `None` for antipodal points, where the arc is a diameter.
fn geodesic(a: f64, b: f64) -> Option<([f64; 2], f64)> {
    let mut d = (b - a).rem_euclid(1.0);
    let mut mid = a + d / 2.0;
    if d > 0.5 {
        d = 1.0 - d;
        mid = b + d / 2.0;
    }
    let half = TAU * d / 2.0;
    if (half - TAU / 4.0).abs() < 1e-12 {
        return None;
    }
    let dir = on_circle(mid);
    let dist = 1.0 / half.cos();
    Some(([dir[0] * dist, dir[1] * dist], half.tan()))
}

/// Points along the chord from the mark at `a` to the mark at `b`.
fn chord_points(a: f64, b: f64) -> Vec<[f64; 2]> {
    let (p, q) = (on_circle(a), on_circle(b));
    match geodesic(a, b) {
        None => (0..=ARC_SAMPLES)
            .map(|k| {
                let t = k as f64 / ARC_SAMPLES as f64;
                [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
            })
            .collect(),
        Some((c, r)) => {
            let start = (p[1] - c[1]).atan2(p[0] - c[0]);
            let end = (q[1] - c[1]).atan2(q[0] - c[0]);
            let mut sweep = end - start;
            if sweep > TAU / 2.0 {
                sweep -= TAU;
            } else if sweep < -TAU / 2.0 {
                sweep += TAU;
            }
            (0..=ARC_SAMPLES)
                .map(|k| {
                    let phi = start + sweep * k as f64 / ARC_SAMPLES as f64;
                    [c[0] + r * phi.cos(), c[1] + r * phi.sin()]
                })
                .collect()
        }
    }
}

fn boundary_points(a: f64, b: f64, full: bool) -> Vec<[f64; 2]> {
    let span = if full { 1.0 } else { (b - a).rem_euclid(1.0) };
    (0..=ARC_SAMPLES)
        .map(|k| on_circle(a + span * k as f64 / ARC_SAMPLES as f64))
        .collect()
}

/// Polygon approximating the face bounded by `cycle`.
fn face_polygon(g: &SkeletonGraph, cycle: &[usize]) -> Vec<[f64; 2]> {
    if cycle.is_empty() {
        return boundary_points(0.0, 0.0, true);
    }
    let first = g.edges[cycle[0]];
    let mut current = first.from;
    let mut polygon = Vec::new();
    let mut k = 0;
    while k < cycle.len() {
        let e = g.edges[cycle[k]];
        if e.kind == EdgeKind::BoundaryArc {
            let (a, b) = (mark_angle(g, e.from).unwrap(), mark_angle(g, e.to).unwrap());
            polygon.extend(boundary_points(a, b, e.from == e.to));
            current = e.to;
            k += 1;
        } else {
            // two halves of a chord through its saddle
            let other = g.edges[cycle[(k + 1) % cycle.len()]].from;
            let (a, b) = (mark_angle(g, current).unwrap(), mark_angle(g, other).unwrap());
            polygon.extend(chord_points(a, b));
            current = other;
            k += 2;
        }
    }
    polygon
}

fn centroid(polygon: &[[f64; 2]]) -> Option<[f64; 2]> {
    let (mut area, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..polygon.len() {
        let (p, q) = (polygon[k], polygon[(k + 1) % polygon.len()]);
        let cross = p[0] * q[1] - q[0] * p[1];
        area += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    (area.abs() > 1e-12).then(|| [cx / (3.0 * area), cy / (3.0 * area)])
}

fn contains(polygon: &[[f64; 2]], x: [f64; 2]) -> bool {
    let mut inside = false;
    for k in 0..polygon.len() {
        let (p, q) = (polygon[k], polygon[(k + 1) % polygon.len()]);
        if (p[1] > x[1]) != (q[1] > x[1]) && x[0] < p[0] + (x[1] - p[1]) * (q[0] - p[0]) / (q[1] - p[1]) {
            inside = !inside;
        }
    }
    inside
}

fn distance_to_boundary(polygon: &[[f64; 2]], x: [f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..polygon.len() {
        let (p, q) = (polygon[k], polygon[(k + 1) % polygon.len()]);
        let d = [q[0] - p[0], q[1] - p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            (((x[0] - p[0]) * d[0] + (x[1] - p[1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        best = best.min((x[0] - p[0] - t * d[0]).hypot(x[1] - p[1] - t * d[1]));
    }
    best
}

/// Centroid when it lies inside the face, else the grid point farthest from
/// the face boundary.
fn interior_point(polygon: &[[f64; 2]]) -> [f64; 2] {
    if let Some(c) = centroid(polygon) {
        if contains(polygon, c) && distance_to_boundary(polygon, c) > 0.02 {
            return c;
        }
    }
    const GRID: usize = 60;
    let mut best = ([0.0, 0.0], -1.0);
    for i in 0..=GRID {
        for j in 0..=GRID {
            let x = [-1.0 + 2.0 * i as f64 / GRID as f64, -1.0 + 2.0 * j as f64 / GRID as f64];
            if contains(polygon, x) {
                let d = distance_to_boundary(polygon, x);
                if d > best.1 {
                    best = (x, d);
                }
            }
        }
    }
    best.0
}

/// Distance from the mark at `angle` along the inward radius to the first chord.
fn free_depth(chords: &[(f64, f64)], angle: f64) -> f64 {
    let u = on_circle(angle);
    let mut depth: f64 = 1.0;
    for &(a, b) in chords {
        match geodesic(a, b) {
            None => {
                // diameter: the radius meets it at the origin
                depth = depth.min(1.0);
            }
            Some((c, r)) => {
                // |t u - c| = r
                let bq = -2.0 * (u[0] * c[0] + u[1] * c[1]);
                let cq = c[0] * c[0] + c[1] * c[1] - r * r;
                let disc = bq * bq - 4.0 * cq;
                if disc >= 0.0 {
                    for t in [(-bq - disc.sqrt()) / 2.0, (-bq + disc.sqrt()) / 2.0] {
                        if t > 0.0 && t < 1.0 - 1e-12 {
                            depth = depth.min(1.0 - t);
                        }
                    }
                }
            }
        }
    }
    depth
}

pub(super) fn assign_positions(g: &mut SkeletonGraph) {
    let mut chords = Vec::new();
    let mut gadget_saddles = Vec::new();
    for v in 0..g.vertices.len() {
        match g.vertices[v].kind {
            VertexKind::BoundaryMark { angle, .. } => g.vertices[v].position = Some(on_circle(angle)),
            VertexKind::Saddle => {
                let feeders: Vec<f64> = g
                    .edges
                    .iter()
                    .filter(|e| e.to == v && e.kind == EdgeKind::IncomingSeparatrix)
                    .filter_map(|e| mark_angle(g, e.from))
                    .collect();
                if let [a, b] = feeders[..] {
                    let pts = chord_points(a, b);
                    g.vertices[v].position = Some(pts[ARC_SAMPLES / 2]);
                    chords.push((a, b));
                } else if let [a] = feeders[..] {
                    gadget_saddles.push((v, a));
                }
            }
            _ => {}
        }
    }
    for f in 0..g.faces.len() {
        let polygon = face_polygon(g, &g.faces[f].cycle);
        let p = interior_point(&polygon);
        for &a in &g.faces[f].attractors.clone() {
            g.vertices[a].position = Some(p);
        }
    }
    for (s, angle) in gadget_saddles {
        let depth = free_depth(&chords, angle);
        let u = on_circle(angle);
        let r = 1.0 - 0.3 * depth;
        let saddle = [r * u[0], r * u[1]];
        g.vertices[s].position = Some(saddle);
        let target = g
            .edges
            .iter()
            .find(|e| e.from == s && e.kind == EdgeKind::OutgoingSeparatrix)
            .map(|e| e.to);
        let repeller = g
            .edges
            .iter()
            .find(|e| e.to == s && g.vertices[e.from].kind == VertexKind::Repeller)
            .map(|e| e.from);
        if let (Some(a), Some(rep)) = (target, repeller) {
            let pa = g.vertices[a].position.unwrap_or([0.0, 0.0]);
            g.vertices[rep].position = Some([
                saddle[0] + 0.3 * (pa[0] - saddle[0]),
                saddle[1] + 0.3 * (pa[1] - saddle[1]),
            ]);
        }
    }
}

struct Panel {
    cx: f64,
    cy: f64,
}

impl Panel {
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (self.cx + RADIUS * p[0], self.cy - RADIUS * p[1])
    }

    fn points(&self, pts: &[[f64; 2]]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn star(out: &mut String, class: &str, x: f64, y: f64) {
    let mut d = String::new();
    for k in 0..10 {
        let r = if k % 2 == 0 { 7.0 } else { 3.0 };
        let phi = TAU * k as f64 / 10.0 - TAU / 4.0;
        let _ = write!(d, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, x + r * phi.cos(), y + r * phi.sin());
    }
    let _ = writeln!(out, r#"  <path class="{class}" d="{}Z"/>"#, d);
}

fn render_panel(out: &mut String, g: &SkeletonGraph, panel: &Panel) {
    let pos = |v: usize| g.vertices[v].position.unwrap_or([0.0, 0.0]);
    let _ = writeln!(
        out,
        r#"  <circle class="boundary" cx="{:.3}" cy="{:.3}" r="{RADIUS:.3}"/>"#,
        panel.cx, panel.cy
    );
    // the chord through each saddle fed by two marks
    let mut drawn_chords = Vec::new();
    for v in 0..g.vertices.len() {
        if g.vertices[v].kind != VertexKind::Saddle {
            continue;
        }
        let feeders: Vec<f64> = g
            .edges
            .iter()
            .filter(|e| e.kind != EdgeKind::BoundaryArc && (e.to == v || e.from == v))
            .filter_map(|e| mark_angle(g, if e.to == v { e.from } else { e.to }))
            .collect();
        if let [a, b] = feeders[..] {
            let _ = writeln!(out, r#"  <polyline class="chord" points="{}"/>"#, panel.points(&chord_points(a, b)));
            drawn_chords.push(v);
        }
    }
    let mut seen_pairs: Vec<(usize, usize)> = Vec::new();
    for e in &g.edges {
        if e.kind == EdgeKind::BoundaryArc {
            continue;
        }
        let (from, to) = (e.from, e.to);
        let touches_mark = mark_angle(g, from).is_some() || mark_angle(g, to).is_some();
        if touches_mark && (drawn_chords.contains(&from) || drawn_chords.contains(&to)) {
            continue;
        }
        let (x1, y1) = panel.map(pos(from));
        let (x2, y2) = panel.map(pos(to));
        let key = (from.min(to), from.max(to));
        let repeated = seen_pairs.contains(&key);
        let doubled = g
            .edges
            .iter()
            .filter(|f| f.kind == e.kind && (f.from.min(f.to), f.from.max(f.to)) == key)
            .count()
            > 1;
        if doubled {
            // the two separatrices of a gadget, bulging to either side
            let bend = if repeated { -0.35 } else { 0.35 };
            let (mx, my) = ((x1 + x2) / 2.0 - bend * (y2 - y1), (y1 + y2) / 2.0 + bend * (x2 - x1));
            let _ = writeln!(
                out,
                r#"  <path class="separatrix" d="M{x1:.3},{y1:.3} Q{mx:.3},{my:.3} {x2:.3},{y2:.3}"/>"#
            );
        } else {
            let _ = writeln!(
                out,
                r#"  <line class="separatrix" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#
            );
        }
        seen_pairs.push(key);
    }
    for v in &g.vertices {
        let (x, y) = panel.map(v.position.unwrap_or([0.0, 0.0]));
        match v.kind {
            VertexKind::BoundaryMark { .. } => {
                let _ = writeln!(out, r#"  <circle class="mark" cx="{x:.3}" cy="{y:.3}" r="4.000"/>"#);
            }
            VertexKind::Saddle => {
                let _ = writeln!(out, r#"  <circle class="saddle" cx="{x:.3}" cy="{y:.3}" r="3.500"/>"#);
            }
            VertexKind::Attractor => {
                star(out, if g.time_reversed { "attractor reversed" } else { "attractor" }, x, y)
            }
            VertexKind::Repeller => {
                let _ = writeln!(out, r#"  <circle class="repeller" cx="{x:.3}" cy="{y:.3}" r="3.500"/>"#);
            }
        }
    }
}

const STYLE: &str = "  <style>.boundary{fill:none;stroke:#333;stroke-width:1.5}.chord,.separatrix{fill:none;stroke:#1f5fa8;stroke-width:1.2}.mark{fill:#c0392b}.saddle{fill:#111}.attractor{fill:#e6a700}.reversed{fill:#7b3fa0}.repeller{fill:#fff;stroke:#111}.loop{fill:none;stroke:#555;stroke-width:1.2}.cycle{fill:none;stroke:#999;stroke-dasharray:4 3}text{font:12px sans-serif;text-anchor:middle}</style>\n";

fn header(width: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{PANEL:.0}\" viewBox=\"0 0 {width:.0} {PANEL:.0}\">\n{STYLE}"
    )
}

/// Anything that renders to a standalone SVG document.
pub trait SvgExport {
    fn to_svg(&self) -> String;
}

impl SvgExport for SkeletonGraph {
    fn to_svg(&self) -> String {
        let mut out = header(PANEL);
        render_panel(&mut out, self, &Panel { cx: PANEL / 2.0, cy: PANEL / 2.0 });
        out.push_str("</svg>\n");
        out
    }
}

impl SvgExport for SphereRealization {
    /// Three panels: the disc inside `C-`, the annulus between the loops with
    /// ticks at the marked loop angles, and the disc beyond `C+`.
    fn to_svg(&self) -> String {
        let mut out = header(3.0 * PANEL);
        let cy = PANEL / 2.0;
        render_panel(&mut out, &self.disc_minus, &Panel { cx: PANEL / 2.0, cy });
        let cx = 1.5 * PANEL;
        let (inner, outer) = (0.55 * RADIUS, RADIUS);
        let _ = writeln!(out, r#"  <circle class="loop" cx="{cx:.3}" cy="{cy:.3}" r="{inner:.3}"/>"#);
        let _ = writeln!(out, r#"  <circle class="cycle" cx="{cx:.3}" cy="{cy:.3}" r="{:.3}"/>"#, 0.5 * (inner + outer));
        let _ = writeln!(out, r#"  <circle class="loop" cx="{cx:.3}" cy="{cy:.3}" r="{outer:.3}"/>"#);
        for (angles, r) in [(&self.annulus.minus_angles, inner), (&self.annulus.plus_angles, outer)] {
            for &a in angles {
                let u = on_circle(a);
                let _ = writeln!(
                    out,
                    r#"  <circle class="mark" cx="{:.3}" cy="{:.3}" r="4.000"/>"#,
                    cx + r * u[0],
                    cy - r * u[1]
                );
            }
        }
        render_panel(&mut out, &self.disc_plus, &Panel { cx: 2.5 * PANEL, cy });
        for (x, label) in [(0.5, "C-"), (1.5, "annulus"), (2.5, "C+")] {
            let _ = writeln!(out, r#"  <text x="{:.3}" y="{:.3}">{label}</text>"#, x * PANEL, PANEL - 6.0);
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Writes the SVG rendering of `item` to `path`.
pub fn export_svg(item: &impl SvgExport, path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, item.to_svg())
}

#[cfg(test)]
mod tests {
    use super::super::realize_disc;
    use super::*;
    use crate::circle::{validate_marked_set, MarkedSet};

    #[test]
    fn empty_disc_has_one_marker() {
        let svg = realize_disc(&MarkedSet::<f64>::empty()).to_svg();
        assert_eq!(svg.matches("class=\"attractor\"").count(), 1);
        assert_eq!(svg.matches("class=\"mark\"").count(), 0);
    }

    #[test]
    fn one_pair_drawing() {
        let set = validate_marked_set(&[0.1, 0.6], &[vec![0, 1]], 1e-12).unwrap();
        let g = realize_disc(&set);
        let svg = g.to_svg();
        assert_eq!(svg.matches("class=\"chord\"").count(), 1);
        assert_eq!(svg.matches("class=\"saddle\"").count(), 1);
        assert_eq!(svg.matches("class=\"attractor\"").count(), 2);
        assert_eq!(svg, realize_disc(&set).to_svg());
    }

    #[test]
    fn attractors_lie_in_their_faces() {
        let set = validate_marked_set(
            &[0.0, 0.05, 0.1, 0.3, 0.5, 0.55, 0.9],
            &[vec![0, 3], vec![1, 2], vec![4, 5]],
            1e-12,
        )
        .unwrap();
        let g = realize_disc(&set);
        for face in &g.faces {
            let polygon = face_polygon(&g, &face.cycle);
            let p = g.vertices[face.attractors[0]].position.unwrap();
            assert!(contains(&polygon, p), "{p:?}");
        }
    }

    #[test]
    fn chord_ends_on_its_marks() {
        let pts = chord_points(0.1, 0.35);
        let (p, q) = (on_circle(0.1), on_circle(0.35));
        assert!((pts[0][0] - p[0]).hypot(pts[0][1] - p[1]) < 1e-12);
        let last = pts[ARC_SAMPLES];
        assert!((last[0] - q[0]).hypot(last[1] - q[1]) < 1e-12);
        // orthogonal circle stays inside the disc
        assert!(pts.iter().all(|p| p[0].hypot(p[1]) <= 1.0 + 1e-12));
    }
}
