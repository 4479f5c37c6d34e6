//! Intrinsic geometry of the dome: face charts in the upper half-plane,
//! gluing isometries, geodesics, closed geodesics and injectivity radius.
//!
//! Searches run in a Poincaré disk frame centred at the base point. Rays from
//! the centre are diameters, so the arc of directions crossing a developed
//! edge is the arc between its ideal endpoints and the chain of developed
//! faces is convex.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geom::{h2_distance, ExtPoint, H3Point, MobiusMap, C64};
use crate::hull::IdealPolyhedron;

pub const DEFAULT_BUDGET: usize = 100_000;

#[derive(Debug, Clone)]
pub struct Chart {
    /// Sends the support circle to the real line and the empty disk to the lower half-plane.
    pub map: MobiusMap,
    /// Real images of the face vertices, in face cycle order.
    pub verts: Vec<f64>,
    /// Edge ids, the k-th joining verts[k] and verts[k+1].
    pub edges: Vec<usize>,
    pub sorted: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DomeSurface {
    pub poly: IdealPolyhedron,
    pub charts: Vec<Chart>,
    /// Per edge and side (left, right): chart → standard frame with the edge on
    /// the imaginary axis from v[0] (at 0) to v[1] (at ∞) and the base point at i.
    pub frames: Vec<[MobiusMap; 2]>,
    /// Per edge: chart of the right face → chart of the left face.
    pub glue: Vec<MobiusMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomePoint {
    pub face: usize,
    /// Upper half-plane coordinates in the face chart.
    pub w: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub face: usize,
    pub from: C64,
    pub to: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub edge: usize,
    pub theta: f64,
    /// Angle between the path and the edge, in (0, π/2].
    pub angle: f64,
    /// Arclength along the path at the crossing.
    pub at: f64,
    /// False when the crossing sits at an endpoint of the path.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomePath {
    pub segments: Vec<Segment>,
    pub crossings: Vec<Crossing>,
    pub length: f64,
    pub intersection: f64,
}

impl DomePath {
    pub fn start(&self) -> DomePoint {
        let s = &self.segments[0];
        DomePoint { face: s.face, w: s.from }
    }

    pub fn end(&self) -> DomePoint {
        let s = self.segments.last().unwrap();
        DomePoint { face: s.face, w: s.to }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicResult {
    pub distance: f64,
    pub certified: bool,
    pub path: DomePath,
    pub expansions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedGeodesic {
    pub length: f64,
    pub intersection: f64,
    pub angles: Vec<f64>,
    pub edges: Vec<usize>,
    pub trace: f64,
    /// The axis crosses every developed edge of the cycle.
    pub realized: bool,
}

fn cx(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn unwrap_from(theta: f64, base: f64) -> f64 {
    base + (theta - base).rem_euclid(TAU)
}

/// Distance from the disk centre to the geodesic with ideal endpoints at the given angles.
pub(crate) fn centre_to_geodesic(a0: f64, a1: f64) -> f64 {
    let w = 0.5 * (a1 - a0);
    if w >= 0.5 * PI {
        0.0
    } else {
        w.cos().atanh()
    }
}

/// Distance from the centre along direction `phi` to that geodesic.
fn centre_to_geodesic_along(a0: f64, a1: f64, phi: f64) -> f64 {
    let w = 0.5 * (a1 - a0);
    let mid = 0.5 * (a0 + a1);
    let dl = (phi - mid).abs();
    if w >= 0.5 * PI - 1e-15 && dl < 1e-15 {
        return 0.0;
    }
    (w.cos() / dl.cos()).clamp(0.0, 1.0).atanh()
}

/// Angle in (0, π/2] between the diameter at `phi` and that geodesic.
fn crossing_angle(a0: f64, a1: f64, phi: f64) -> f64 {
    let w = 0.5 * (a1 - a0);
    let mid = 0.5 * (a0 + a1);
    if (w - 0.5 * PI).abs() < 1e-14 {
        // The edge is itself a diameter.
        return (phi - a0).sin().abs().asin();
    }
    let d = centre_to_geodesic_along(a0, a1, phi);
    let r = (0.5 * d).tanh();
    let p = C64::from_polar(r, phi);
    let centre = C64::from_polar(1.0 / w.cos(), mid);
    let nrm = (p - centre) / (p - centre).norm();
    let dir = C64::from_polar(1.0, phi);
    let s = (dir.re * nrm.re + dir.im * nrm.im).abs().min(1.0);
    s.asin()
}

/// Cross ratio (a−c)(b−d)/((a−d)(b−c)) of real or infinite points.
fn cross_ratio(a: ExtPoint, b: ExtPoint, c: ExtPoint, d: ExtPoint) -> f64 {
    let f = |p: ExtPoint| p.finite().map(|z| z.re);
    let (a, b, c, d) = (f(a), f(b), f(c), f(d));
    let diff = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    };
    let num = [diff(a, c), diff(b, d)];
    let den = [diff(a, d), diff(b, c)];
    // Factors containing ∞ cancel in pairs.
    let prod = |v: [Option<f64>; 2]| v.iter().flatten().product::<f64>();
    let ninf = num.iter().filter(|x| x.is_none()).count();
    let dinf = den.iter().filter(|x| x.is_none()).count();
    match ninf.cmp(&dinf) {
        Ordering::Equal => prod(num) / prod(den),
        Ordering::Greater => f64::INFINITY,
        Ordering::Less => 0.0,
    }
}

/// Distance between two geodesics of the upper half-plane given by endpoints; 0 if they meet.
pub fn geodesic_gap(g1: [ExtPoint; 2], g2: [ExtPoint; 2]) -> f64 {
    let r = cross_ratio(g1[0], g1[1], g2[0], g2[1]);
    let r = if r > 1.0 { 1.0 / r } else { r };
    if !(r > 0.0) {
        return 0.0;
    }
    ((1.0 + r) / (1.0 - r)).acosh()
}

/// Angle in (0, π/2] between two crossing geodesics; `None` when disjoint.
pub fn geodesic_angle(g1: [ExtPoint; 2], g2: [ExtPoint; 2]) -> Option<f64> {
    let r = cross_ratio(g1[0], g1[1], g2[0], g2[1]);
    if r < 0.0 {
        Some(((1.0 + r) / (1.0 - r)).abs().min(1.0).acos())
    } else {
        None
    }
}

fn ext(m: &MobiusMap, x: f64) -> ExtPoint {
    m.apply(ExtPoint::Finite(cx(x)))
}

fn interleaved(g1: [ExtPoint; 2], g2: [ExtPoint; 2]) -> bool {
    cross_ratio(g1[0], g1[1], g2[0], g2[1]) < 0.0
}

/// Real map of the upper half-plane sending α→0, β→∞ and the point p (on that geodesic) to i.
fn std_frame(alpha: f64, beta: f64, p: C64) -> MobiusMap {
    let w = (p - alpha) / (p - beta);
    let k = w.im.signum() / w.norm();
    MobiusMap::real(k, -k * alpha, 1.0, -beta).unwrap()
}

/// A point on the ambient geodesic between two ideal points.
fn edge_base(a: ExtPoint, b: ExtPoint) -> H3Point {
    match (a, b) {
        (ExtPoint::Finite(a), ExtPoint::Finite(b)) => H3Point::new(0.5 * (a + b), 0.5 * (b - a).norm()),
        (ExtPoint::Inf, ExtPoint::Finite(b)) | (ExtPoint::Finite(b), ExtPoint::Inf) => H3Point::new(b, 1.0),
        _ => unreachable!("edge with both ends at ∞"),
    }
}

fn chart_of(m: &MobiusMap, p: &H3Point) -> C64 {
    let q = m.apply_h3(p);
    C64::new(q.x.re, q.t)
}

pub fn develop(poly: &IdealPolyhedron) -> Result<DomeSurface> {
    let mut charts = Vec::with_capacity(poly.faces.len());
    for fi in 0..poly.faces.len() {
        let f = &poly.faces[fi];
        let v = |k: usize| poly.vertices[f.verts[k]];
        let mut m = MobiusMap::to_standard(v(0), v(1), v(2))?;
        let q = m.apply(f.cap.pole()).finite().unwrap_or(C64::new(0.0, 1.0));
        if q.im > 0.0 {
            let flip = MobiusMap::new(C64::i(), cx(0.0), cx(0.0), -C64::i())?;
            m = flip.compose(&m);
        }
        // v0 and v1 are adjacent on the circle; move a point of their gap to ∞.
        let c = 0.5 * (m.apply(v(0)).finite().unwrap().re + m.apply(v(1)).finite().unwrap().re);
        let t = MobiusMap::real(0.0, -1.0, 1.0, -c)?;
        m = t.compose(&m);
        let verts: Vec<f64> = f
            .verts
            .iter()
            .map(|&i| m.apply(poly.vertices[i]).finite().map(|z| z.re).ok_or(Error::Degenerate("chart vertex at ∞".into())))
            .collect::<Result<_>>()?;
        let mut sorted = verts.clone();
        sorted.sort_by(f64::total_cmp);
        charts.push(Chart { map: m, verts, edges: poly.face_edges(fi), sorted });
    }
    let mut frames = Vec::with_capacity(poly.edges.len());
    let mut glue = Vec::with_capacity(poly.edges.len());
    for e in &poly.edges {
        let (a, b) = (poly.vertices[e.v[0]], poly.vertices[e.v[1]]);
        let base = edge_base(a, b);
        let side = |f: usize| {
            let ch = &charts[f];
            let alpha = ch.map.apply(a).finite().unwrap().re;
            let beta = ch.map.apply(b).finite().unwrap().re;
            std_frame(alpha, beta, chart_of(&ch.map, &base))
        };
        let fl = side(e.left);
        let fr = side(e.right);
        glue.push(fl.inverse().compose(&fr));
        frames.push([fl, fr]);
    }
    Ok(DomeSurface { poly: poly.clone(), charts, frames, glue })
}

impl DomeSurface {
    pub fn n_faces(&self) -> usize {
        self.charts.len()
    }

    /// Chart of `to` → chart of `from`, for faces adjacent across `edge`.
    pub fn glue_into(&self, edge: usize, from: usize) -> MobiusMap {
        let e = &self.poly.edges[edge];
        if from == e.left {
            self.glue[edge]
        } else {
            self.glue[edge].inverse()
        }
    }

    pub fn ambient(&self, p: &DomePoint) -> H3Point {
        let inv = self.charts[p.face].map.inverse();
        inv.apply_h3(&H3Point::new(cx(p.w.re), p.w.im))
    }

    /// Chart coordinates of an ambient point lying on the plane of `face`.
    pub fn chart_coords(&self, face: usize, p: &H3Point) -> C64 {
        chart_of(&self.charts[face].map, p)
    }

    /// Positive when `w` is strictly inside the face polygon: the smallest
    /// signed "outside-ness" margin over the sides, in chart units.
    pub fn inside_margin(&self, face: usize, w: C64) -> f64 {
        let sorted = &self.charts[face].sorted;
        let (lo, hi) = (sorted[0], *sorted.last().unwrap());
        // inside the outer semicircle, outside the inner ones
        let mut m = 0.5 * (hi - lo) - (w - 0.5 * (lo + hi)).norm();
        for k in 0..sorted.len() - 1 {
            let (a, b) = (sorted[k], sorted[k + 1]);
            m = m.min((w - 0.5 * (a + b)).norm() - 0.5 * (b - a));
        }
        m
    }

    pub fn contains(&self, face: usize, w: C64, tol: f64) -> bool {
        w.im > 0.0 && self.inside_margin(face, w) >= -tol
    }

    /// A central point of a face: the centre of the ideal triangle on three spread vertices.
    pub fn face_centre(&self, face: usize) -> C64 {
        let vs = &self.charts[face].verts;
        let k = vs.len();
        let (a, b, c) = (vs[0], vs[k / 3], vs[(2 * k) / 3]);
        let to = MobiusMap::to_standard(ExtPoint::Finite(cx(a)), ExtPoint::Finite(cx(b)), ExtPoint::Finite(cx(c))).unwrap();
        // 0, 1, ∞ have centre ½ + i√3/2.
        let w = to.inverse().apply_c(C64::new(0.5, 0.75f64.sqrt()));
        if w.im > 0.0 {
            w
        } else {
            w.conj()
        }
    }

    /// Distance in the chart from `w` to the edge `e` (an edge of `face`).
    pub fn distance_to_edge(&self, face: usize, e: usize, w: C64) -> f64 {
        let side = if self.poly.edges[e].left == face { 0 } else { 1 };
        let s = self.frames[e][side].apply_c(w);
        // Distance to the imaginary axis: asinh(|Re|/Im).
        (s.re.abs() / s.im).asinh()
    }

    /// Arclength coordinate along an edge of a point on it, from the chart of `face`.
    pub fn edge_param(&self, face: usize, e: usize, w: C64) -> f64 {
        let side = if self.poly.edges[e].left == face { 0 } else { 1 };
        self.frames[e][side].apply_c(w).norm().ln()
    }

    /// Chart point of `face` at arclength `u` along edge `e`.
    pub fn edge_point(&self, face: usize, e: usize, u: f64) -> C64 {
        let side = if self.poly.edges[e].left == face { 0 } else { 1 };
        self.frames[e][side].inverse().apply_c(C64::new(0.0, u.exp()))
    }
}

/// Search node in the disk frame.
#[derive(Clone)]
pub(crate) struct Node {
    pub(crate) face: usize,
    /// Chart of `face` → disk frame.
    pub(crate) t: MobiusMap,
    /// Entry edge and its arc, as (angle, vertex id) pairs; None for the root.
    pub(crate) entry: Option<(usize, (f64, usize), (f64, usize))>,
    pub(crate) parent: usize,
    pub(crate) depth: usize,
}

pub(crate) type Arc = (usize, (f64, usize), (f64, usize));

struct Entry {
    key: f64,
    node: usize,
    goal: bool,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on key, goals first on ties
        o.key.total_cmp(&self.key).then(self.goal.cmp(&o.goal))
    }
}

pub(crate) struct Frame<'a> {
    s: &'a DomeSurface,
    pub(crate) nodes: Vec<Node>,
}

impl<'a> Frame<'a> {
    pub(crate) fn new(s: &'a DomeSurface, a: &DomePoint) -> Self {
        let t = MobiusMap::new(cx(1.0), -a.w, cx(1.0), -a.w.conj()).unwrap();
        Frame { s, nodes: vec![Node { face: a.face, t, entry: None, parent: usize::MAX, depth: 0 }] }
    }

    fn angle(&self, node: usize, x: f64) -> f64 {
        let p = self.nodes[node].t.apply(ExtPoint::Finite(cx(x)));
        match p {
            ExtPoint::Finite(z) => z.arg(),
            ExtPoint::Inf => 0.0,
        }
    }

    /// Outgoing edges of a node with their arcs: (edge, (a0, u0), (a1, u1)).
    pub(crate) fn children(&self, node: usize) -> Vec<Arc> {
        let n = &self.nodes[node];
        let f = &self.s.poly.faces[n.face];
        let ch = &self.s.charts[n.face];
        let k = f.verts.len();
        let mut out = Vec::new();
        match n.entry {
            None => {
                // Root: the face contains the centre, so vertex angles wind once around.
                let ang: Vec<f64> = (0..k).map(|i| self.angle(node, ch.verts[i])).collect();
                // Counterclockwise steps sum to 2π, clockwise ones to 2π(k − 1).
                let steps: f64 = (0..k).map(|i| (ang[(i + 1) % k] - ang[i]).rem_euclid(TAU)).sum();
                let forward = steps < 3.0 * PI;
                for i in 0..k {
                    let j = (i + 1) % k;
                    let (lo, hi, ulo, uhi) = if forward {
                        (ang[i], unwrap_from(ang[j], ang[i]), f.verts[i], f.verts[j])
                    } else {
                        (ang[j], unwrap_from(ang[i], ang[j]), f.verts[j], f.verts[i])
                    };
                    out.push((ch.edges[i], (lo, ulo), (hi, uhi)));
                }
            }
            Some((e_in, (a0, u0), (a1, u1))) => {
                let pos0 = f.verts.iter().position(|&v| v == u0).unwrap();
                let pos1 = f.verts.iter().position(|&v| v == u1).unwrap();
                // Walk from u0 away from u1 until u1.
                let dir: isize = if (pos0 + 1) % k == pos1 { -1 } else { 1 };
                let mut seq = vec![(a0, u0, pos0)];
                let mut p = pos0;
                loop {
                    p = ((p as isize + dir).rem_euclid(k as isize)) as usize;
                    if p == pos1 {
                        break;
                    }
                    let raw = unwrap_from(self.angle(node, ch.verts[p]), a0);
                    let prev = seq.last().unwrap().0;
                    seq.push((raw.clamp(prev, a1), f.verts[p], p));
                }
                seq.push((a1, u1, pos1));
                for w in seq.windows(2) {
                    let (pa, pb) = (w[0].2, w[1].2);
                    let idx = if (pa + 1) % k == pb { pa } else { pb };
                    let e = ch.edges[idx];
                    if e == e_in {
                        continue;
                    }
                    out.push((e, (w[0].0, w[0].1), (w[1].0, w[1].1)));
                }
            }
        }
        out
    }

    /// Whether the straight segment from the centre to chart point `w` of the node runs through its chain.
    fn sees(&self, node: usize, w: C64) -> bool {
        let n = &self.nodes[node];
        let Some((_, (a0, _), (a1, _))) = n.entry else { return true };
        let p = n.t.apply_c(w);
        if p.norm() < 1e-15 {
            return true;
        }
        unwrap_from(p.arg(), a0 - 1e-12) <= a1 + 1e-12
    }

    pub(crate) fn child(&mut self, node: usize, e: usize, a: (f64, usize), b: (f64, usize)) -> usize {
        let n = &self.nodes[node];
        let next = self.s.poly.edges[e].other_face(n.face);
        let t = n.t.compose(&self.s.glue_into(e, n.face));
        let depth = n.depth + 1;
        self.nodes.push(Node { face: next, t, entry: Some((e, a, b)), parent: node, depth });
        self.nodes.len() - 1
    }

    pub(crate) fn chain(&self, mut node: usize) -> Vec<usize> {
        let mut v = Vec::new();
        while node != usize::MAX {
            v.push(node);
            node = self.nodes[node].parent;
        }
        v.reverse();
        v
    }

    /// Straight path from the centre to `target` (disk coordinates) through the chain ending at `node`.
    pub(crate) fn path_to(&self, node: usize, target: C64) -> DomePath {
        let chain = self.chain(node);
        let total = 2.0 * target.norm().atanh();
        let phi = target.arg();
        let mut segments = Vec::new();
        let mut crossings = Vec::new();
        let mut prev_pt = C64::new(0.0, 0.0);
        for w in chain.windows(2) {
            let (na, nb) = (&self.nodes[w[0]], &self.nodes[w[1]]);
            let (e, (a0, _), (a1, _)) = nb.entry.unwrap();
            let phi_u = unwrap_from(phi, a0);
            let d = centre_to_geodesic_along(a0, a1, phi_u).min(total);
            let pt = C64::from_polar((0.5 * d).tanh(), phi);
            let ia = na.t.inverse();
            segments.push(Segment { face: na.face, from: ia.apply_c(prev_pt), to: ia.apply_c(pt) });
            let ed = &self.s.poly.edges[e];
            crossings.push(Crossing {
                edge: e,
                theta: ed.theta,
                angle: crossing_angle(a0, a1, phi_u),
                at: d,
                interior: d > 1e-12 && d < total - 1e-12,
            });
            prev_pt = pt;
        }
        let last = &self.nodes[*chain.last().unwrap()];
        let il = last.t.inverse();
        segments.push(Segment { face: last.face, from: il.apply_c(prev_pt), to: il.apply_c(target) });
        let intersection = crossings.iter().filter(|c| c.interior).map(|c| c.theta).sum();
        DomePath { segments, crossings, length: total, intersection }
    }
}

/// Intrinsic distance between two dome points with a realizing path.
pub fn geodesic_distance(s: &DomeSurface, a: &DomePoint, b: &DomePoint, budget: usize) -> GeodesicResult {
    search(s, a, Goal::Point(*b), budget)
}

#[derive(Clone, Copy)]
enum Goal {
    Point(DomePoint),
    /// Any nontrivial translate of the start point.
    Loop,
}

fn search(s: &DomeSurface, a: &DomePoint, goal: Goal, budget: usize) -> GeodesicResult {
    let mut fr = Frame::new(s, a);
    let mut heap = BinaryHeap::new();
    heap.push(Entry { key: 0.0, node: 0, goal: false });
    let mut best: Option<(f64, usize, C64)> = None;
    let mut expansions = 0;
    let mut certified = false;
    let goal_face = match goal {
        Goal::Point(b) => b.face,
        Goal::Loop => a.face,
    };
    let goal_w = match goal {
        Goal::Point(b) => b.w,
        Goal::Loop => a.w,
    };
    let mut targets: Vec<C64> = vec![C64::new(0.0, 0.0)];
    while let Some(Entry { key, node, goal: is_goal }) = heap.pop() {
        if is_goal {
            certified = true;
            if best.map_or(true, |(d, _, _)| key <= d) {
                best = Some((key, node, targets[node]));
            }
            break;
        }
        if let Some((d, _, _)) = best {
            if key >= d {
                certified = true;
                break;
            }
        }
        if expansions >= budget {
            break;
        }
        expansions += 1;
        let n = &fr.nodes[node];
        if n.face == goal_face && (n.depth > 0 || matches!(goal, Goal::Point(_))) && fr.sees(node, goal_w) {
            let p = n.t.apply_c(goal_w);
            let d = 2.0 * p.norm().min(1.0 - 1e-16).atanh();
            if best.map_or(true, |(bd, _, _)| d < bd) {
                best = Some((d, node, p));
            }
            while targets.len() <= node {
                targets.push(C64::new(0.0, 0.0));
            }
            targets[node] = p;
            heap.push(Entry { key: d, node, goal: true });
        }
        for (e, lo, hi) in fr.children(node) {
            if hi.0 - lo.0 < 1e-13 {
                continue;
            }
            let lb = key.max(centre_to_geodesic(lo.0, hi.0));
            if let Some((d, _, _)) = best {
                if lb >= d {
                    continue;
                }
            }
            let c = fr.child(node, e, lo, hi);
            heap.push(Entry { key: lb, node: c, goal: false });
        }
    }
    match best {
        Some((d, node, p)) => {
            let mut path = fr.path_to(node, p);
            path.length = d;
            GeodesicResult { distance: d, certified, path, expansions }
        }
        None => GeodesicResult {
            distance: f64::INFINITY,
            certified: false,
            path: DomePath { segments: vec![], crossings: vec![], length: f64::INFINITY, intersection: 0.0 },
            expansions,
        },
    }
}

/// Half the shortest nontrivial loop through `x`; `certified` when the search
/// finished inside the budget.
pub fn injectivity_radius(s: &DomeSurface, x: &DomePoint, budget: usize) -> (f64, bool) {
    let r = search(s, x, Goal::Loop, budget);
    (0.5 * r.distance, r.certified)
}

/// Shortest nontrivial loop through `x`, as a path from x to itself.
pub fn shortest_loop(s: &DomeSurface, x: &DomePoint, budget: usize) -> GeodesicResult {
    search(s, x, Goal::Loop, budget)
}

/// Geodesic of length `len` from `start` leaving in chart direction `dir` (radians).
pub fn shoot(s: &DomeSurface, start: &DomePoint, dir: f64, len: f64) -> DomePath {
    let mut fr = Frame::new(s, start);
    let d0 = fr.nodes[0].t.derivative(start.w);
    let phi = (d0.arg() + dir).rem_euclid(TAU);
    let mut node = 0;
    loop {
        let kids = fr.children(node);
        let mut next = None;
        for (e, lo, hi) in kids {
            let p = unwrap_from(phi, lo.0);
            if p <= hi.0 {
                let d = centre_to_geodesic_along(lo.0, hi.0, p);
                if d < len {
                    next = Some((e, lo, hi));
                }
                break;
            }
        }
        match next {
            Some((e, lo, hi)) => node = fr.child(node, e, lo, hi),
            None => break,
        }
        if fr.nodes[node].depth > 10_000 {
            break;
        }
    }
    let target = C64::from_polar((0.5 * len).tanh(), phi);
    fr.path_to(node, target)
}

/// Σθ over interior crossings; errors on a segment running inside an edge.
pub fn intersection_number(s: &DomeSurface, path: &DomePath) -> Result<f64> {
    for seg in &path.segments {
        for &e in &s.charts[seg.face].edges {
            let d0 = s.distance_to_edge(seg.face, e, seg.from);
            let d1 = s.distance_to_edge(seg.face, e, seg.to);
            if d0 < 1e-12 && d1 < 1e-12 && h2_distance(seg.from, seg.to) > 1e-12 {
                return Err(Error::NotTransverse);
            }
        }
    }
    Ok(path.crossings.iter().filter(|c| c.interior).map(|c| c.theta).sum())
}

/// Length of the chart segments of a path.
pub fn chart_length(path: &DomePath) -> f64 {
    path.segments.iter().map(|s| h2_distance(s.from, s.to)).sum()
}

/// Holonomy (chart of `start` → itself) of the closed edge walk, with the developed edges.
pub fn cycle_holonomy(s: &DomeSurface, start: usize, edges: &[usize]) -> Result<(MobiusMap, Vec<[ExtPoint; 2]>)> {
    let mut face = start;
    let mut u = MobiusMap::identity();
    let mut dev = Vec::with_capacity(edges.len());
    for &e in edges {
        let ed = &s.poly.edges[e];
        if ed.left != face && ed.right != face {
            return Err(Error::Config(format!("edge {e} is not on face {face}")));
        }
        let ch = &s.charts[face];
        let k = ch.edges.iter().position(|&x| x == e).unwrap();
        let (a, b) = (ch.verts[k], ch.verts[(k + 1) % ch.verts.len()]);
        dev.push([ext(&u, a), ext(&u, b)]);
        u = u.compose(&s.glue_into(e, face));
        face = ed.other_face(face);
    }
    if face != start {
        return Err(Error::Config("edge walk does not close up".into()));
    }
    Ok((u, dev))
}

fn fixed_points(m: &MobiusMap) -> Option<[ExtPoint; 2]> {
    // Real normalized matrix; fixed points of (az+b)/(cz+d).
    let ph = if m.a.norm() + m.d.norm() > 0.0 { (m.a + m.d) / (m.a + m.d).norm() } else { cx(1.0) };
    let (a, b, c, d) = ((m.a / ph).re, (m.b / ph).re, (m.c / ph).re, (m.d / ph).re);
    let tr = a + d;
    let disc = tr * tr - 4.0;
    if disc <= 0.0 {
        return None;
    }
    if c.abs() < 1e-300 {
        return Some([ExtPoint::Finite(cx(b / (d - a))), ExtPoint::Inf]);
    }
    let sq = disc.sqrt();
    Some([
        ExtPoint::Finite(cx((a - d - sq) / (2.0 * c))),
        ExtPoint::Finite(cx((a - d + sq) / (2.0 * c))),
    ])
}

/// Closed geodesic freely homotopic to a closed edge walk starting on `start`.
pub fn geodesic_of_cycle(s: &DomeSurface, start: usize, edges: &[usize]) -> Result<Option<ClosedGeodesic>> {
    let (h, dev) = cycle_holonomy(s, start, edges)?;
    // A walk around one vertex is peripheral: its holonomy is parabolic.
    let [a, b] = s.poly.edges[edges[0]].v;
    if [a, b].iter().any(|&v| edges.iter().all(|&e| s.poly.edges[e].v.contains(&v))) {
        return Ok(None);
    }
    let tr = h.trace().norm();
    if tr <= 2.0 + 1e-9 {
        return Ok(None);
    }
    let axis = fixed_points(&h).ok_or(Error::Degenerate("no real fixed points".into()))?;
    let mut angles = Vec::with_capacity(dev.len());
    let mut realized = true;
    for g in &dev {
        match geodesic_angle(axis, *g) {
            Some(a) if interleaved(axis, *g) => angles.push(a),
            _ => {
                realized = false;
                angles.push(f64::NAN);
            }
        }
    }
    let intersection = edges.iter().map(|&e| s.poly.edges[e].theta).sum();
    Ok(Some(ClosedGeodesic {
        length: 2.0 * (0.5 * tr).acosh(),
        intersection,
        angles,
        edges: edges.to_vec(),
        trace: tr,
        realized,
    }))
}

fn canonical(cycle: &[usize]) -> Vec<usize> {
    let n = cycle.len();
    let mut best: Option<Vec<usize>> = None;
    for rev in [false, true] {
        let base: Vec<usize> = if rev { cycle.iter().rev().cloned().collect() } else { cycle.to_vec() };
        for r in 0..n {
            let mut c = base.clone();
            c.rotate_left(r);
            if best.as_ref().map_or(true, |b| c < *b) {
                best = Some(c);
            }
        }
    }
    best.unwrap_or_default()
}

fn is_power(cycle: &[usize]) -> bool {
    let n = cycle.len();
    (1..n).any(|p| n % p == 0 && (0..n).all(|i| cycle[i] == cycle[i % p]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedSearch {
    pub geodesics: Vec<ClosedGeodesic>,
    /// True when the walk enumeration hit its depth or budget limits.
    pub truncated: bool,
}

/// Closed geodesics of length at most `cap` crossing at most `max_edges` edges.
pub fn closed_geodesics(s: &DomeSurface, cap: f64, max_edges: usize, budget: usize) -> ClosedSearch {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    let mut expansions = 0usize;
    let mut truncated = false;
    for f0 in 0..s.n_faces() {
        // Depth-first over walks e1..ej leaving f0, tracking the development into chart f0.
        struct St {
            face: usize,
            u: MobiusMap,
            edges: Vec<usize>,
            first: [ExtPoint; 2],
        }
        let mut stack: Vec<St> = Vec::new();
        let ch0 = &s.charts[f0];
        for (k, &e) in ch0.edges.iter().enumerate() {
            let first = [
                ExtPoint::Finite(cx(ch0.verts[k])),
                ExtPoint::Finite(cx(ch0.verts[(k + 1) % ch0.verts.len()])),
            ];
            stack.push(St {
                face: s.poly.edges[e].other_face(f0),
                u: s.glue_into(e, f0),
                edges: vec![e],
                first,
            });
        }
        while let Some(st) = stack.pop() {
            expansions += 1;
            if expansions > budget {
                truncated = true;
                break;
            }
            if st.face == f0 {
                let key = canonical(&st.edges);
                if !is_power(&st.edges) && !seen.contains(&key) {
                    if let Ok(Some(g)) = geodesic_of_cycle(s, f0, &st.edges) {
                        if g.realized && g.length <= cap {
                            seen.insert(key);
                            out.push(g);
                        }
                    }
                }
            }
            if st.edges.len() >= max_edges {
                if st.face != f0 {
                    truncated = true;
                }
                continue;
            }
            let ch = &s.charts[st.face];
            let last = *st.edges.last().unwrap();
            for (k, &e) in ch.edges.iter().enumerate() {
                if e == last {
                    continue;
                }
                let g = [ext(&st.u, ch.verts[k]), ext(&st.u, ch.verts[(k + 1) % ch.verts.len()])];
                if geodesic_gap(st.first, g) > cap {
                    continue;
                }
                let mut edges = st.edges.clone();
                edges.push(e);
                stack.push(St {
                    face: s.poly.edges[e].other_face(st.face),
                    u: st.u.compose(&s.glue_into(e, st.face)),
                    edges,
                    first: st.first,
                });
            }
        }
        if truncated && expansions > budget {
            break;
        }
    }
    out.sort_by(|a, b| a.length.total_cmp(&b.length));
    ClosedSearch { geodesics: out, truncated }
}

/// Largest residual |tr| − 2 of the holonomy around each vertex, and the
/// largest displacement of the developed vertex under it.
pub fn vertex_holonomy_residual(s: &DomeSurface) -> f64 {
    let mut worst: f64 = 0.0;
    for v in 0..s.poly.vertices.len() {
        // Faces around v in rotation order.
        let Some(f0) = s.poly.faces.iter().position(|f| f.verts.contains(&v)) else { continue };
        let mut face = f0;
        let mut edges = Vec::new();
        // Leave each face through the edge that follows v in its cycle.
        loop {
            let f = &s.poly.faces[face];
            let k = f.verts.iter().position(|&x| x == v).unwrap();
            let e = s.charts[face].edges[k];
            edges.push(e);
            face = s.poly.edges[e].other_face(face);
            if face == f0 || edges.len() > 4 * s.poly.edges.len() {
                break;
            }
        }
        let (h, _) = match cycle_holonomy(s, f0, &edges) {
            Ok(x) => x,
            Err(_) => return f64::INFINITY,
        };
        let tr = h.trace().norm();
        worst = worst.max((tr - 2.0).abs());
        let k = s.poly.faces[f0].verts.iter().position(|&x| x == v).unwrap();
        let x = s.charts[f0].verts[k];
        let y = h.apply_c(cx(x));
        worst = worst.max((y - x).norm() / (1.0 + x.abs()));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::{build_hull, PLANE_TOL};

    fn surf(x: Vec<ExtPoint>) -> DomeSurface {
        develop(&build_hull(&x, PLANE_TOL).unwrap()).unwrap()
    }

    fn tetra() -> DomeSurface {
        surf(vec![
            ExtPoint::new(0.0, 0.0),
            ExtPoint::new(1.0, 0.0),
            ExtPoint::Finite(C64::from_polar(1.0, PI / 3.0)),
            ExtPoint::Inf,
        ])
    }

    fn square() -> DomeSurface {
        surf(vec![ExtPoint::new(1.0, 0.0), ExtPoint::new(0.0, 1.0), ExtPoint::new(-1.0, 0.0), ExtPoint::new(0.0, -1.0)])
    }

    fn triangle() -> DomeSurface {
        surf(vec![ExtPoint::new(0.0, 0.0), ExtPoint::new(1.0, 0.0), ExtPoint::Inf])
    }

    #[test]
    fn charts_and_gluings() {
        for s in [triangle(), tetra(), square()] {
            assert_eq!(s.charts.len(), s.poly.faces.len());
            assert_eq!(s.glue.len(), s.poly.edges.len());
            for g in &s.glue {
                assert!(g.is_real(1e-9));
            }
            // Adjacent polygons land on opposite sides of the shared edge.
            for (k, e) in s.poly.edges.iter().enumerate() {
                let cl = s.face_centre(e.left);
                let cr = s.glue[k].apply_c(s.face_centre(e.right));
                let l = s.frames[k][0].apply_c(cl);
                let r = s.frames[k][0].apply_c(cr);
                assert!(l.re * r.re < 0.0, "edge {k}: {l} {r}");
            }
            assert!(vertex_holonomy_residual(&s) < 1e-8);
        }
    }

    #[test]
    fn same_face_distance() {
        let s = tetra();
        let c = s.face_centre(0);
        let a = DomePoint { face: 0, w: c };
        let b = DomePoint { face: 0, w: c * 1.2 + C64::new(0.01, 0.0) };
        let r = geodesic_distance(&s, &a, &b, DEFAULT_BUDGET);
        assert!(r.certified);
        assert!((r.distance - h2_distance(a.w, b.w)).abs() < 1e-12);
        assert!(r.path.crossings.is_empty());
    }

    #[test]
    fn mirror_distance_in_doubled_triangle() {
        let s = triangle();
        // A point of face 0 and its mirror image in face 1 share the ambient position.
        let a = DomePoint { face: 0, w: s.face_centre(0) * C64::new(1.0, 0.0) };
        let amb = s.ambient(&a);
        let b = DomePoint { face: 1, w: s.chart_coords(1, &amb) };
        let r = geodesic_distance(&s, &a, &b, DEFAULT_BUDGET);
        let near = s.charts[0].edges.iter().map(|&e| s.distance_to_edge(0, e, a.w)).fold(f64::INFINITY, f64::min);
        assert!(r.certified);
        assert!((r.distance - 2.0 * near).abs() < 1e-9, "{} vs {}", r.distance, 2.0 * near);
        assert_eq!(r.path.crossings.len(), 1);
        assert!((intersection_number(&s, &r.path).unwrap() - PI).abs() < 1e-12);
        assert!((r.path.crossings[0].angle - 0.5 * PI).abs() < 1e-6);
    }

    #[test]
    fn square_waist() {
        let s = square();
        let res = closed_geodesics(&s, 4.0, 6, 100_000);
        let waist = res.geodesics.first().expect("waist geodesic");
        let expect = 4.0 * crate::formulas::ASINH1;
        assert!((waist.length - expect).abs() < 1e-9, "{}", waist.length);
        assert_eq!(waist.edges.len(), 2);
        assert!((2.0 * (0.5 * waist.trace).acosh() - waist.length).abs() < 1e-12);
        assert!((waist.trace - 6.0).abs() < 1e-9);
        assert!((waist.intersection - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn shoot_matches_distance() {
        let s = tetra();
        let a = DomePoint { face: 0, w: s.face_centre(0) };
        for k in 0..12 {
            let dir = k as f64 * TAU / 12.0 + 0.1;
            let p = shoot(&s, &a, dir, 2.5);
            assert!((chart_length(&p) - 2.5).abs() < 1e-8);
            let r = geodesic_distance(&s, &a, &p.end(), DEFAULT_BUDGET);
            assert!(r.distance <= 2.5 + 1e-9);
        }
    }

    #[test]
    fn gap_and_angle_formulas() {
        let f = |x: f64| ExtPoint::new(x, 0.0);
        let r: f64 = 3.0;
        assert!((geodesic_gap([f(-1.0), f(1.0)], [f(-r), f(r)]) - r.ln()).abs() < 1e-12);
        assert!((geodesic_gap([f(-r), f(r)], [f(-1.0), f(1.0)]) - r.ln()).abs() < 1e-12);
        assert_eq!(geodesic_gap([f(-1.0), f(1.0)], [f(0.0), ExtPoint::Inf]), 0.0);
        let a = geodesic_angle([f(-1.0), f(1.0)], [f(0.0), ExtPoint::Inf]).unwrap();
        assert!((a - 0.5 * PI).abs() < 1e-12);
        // Lines through i at 60 degrees: geodesic (0,∞) and the one through i with endpoints -√3, 1/√3.
        let s3 = 3f64.sqrt();
        let a = geodesic_angle([f(0.0), ExtPoint::Inf], [f(-s3), f(1.0 / s3)]).unwrap();
        assert!((a - PI / 3.0).abs() < 1e-12, "{a}");
    }
}
