//! Nearest point retraction onto the dome, the Thurston density, the
//! face/bigon decomposition of Ω and pullback of dome paths.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::dome::{develop, DomePath, DomePoint, DomeSurface};
use crate::error::{Error, Result};
use crate::geom::{h2_distance, horoball_radius, ExtPoint, H3Point, MobiusMap, C64, POINT_EPS};
use crate::hull::FiniteDomain;
use crate::quad::simpson;

/// Tolerance of the face membership test for tangency feet, in chart units.
pub const MEMBER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    Face(usize),
    Edge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetractionResult {
    pub foot: DomePoint,
    pub ambient: H3Point,
    pub h: f64,
    pub support: Support,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceCell {
    pub face: usize,
    /// z ↦ conj(map(z)) sends the cell onto the chart polygon.
    pub map: MobiusMap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BigonCell {
    pub edge: usize,
    pub theta: f64,
    /// Sends v[0] to 0 and v[1] to ∞; the bigon becomes a sector.
    pub f: MobiusMap,
    /// Direction of the left face boundary ray.
    pub phi_left: f64,
    /// +1 when the sector opens counterclockwise from `phi_left`.
    pub turn: f64,
    /// Edge arclength coordinate of the point above |f| = 1.
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellDecomposition {
    pub faces: Vec<FaceCell>,
    pub bigons: Vec<BigonCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Face(usize),
    Bigon(usize),
}

/// A finite domain with its developed dome and cell decomposition.
#[derive(Debug, Clone)]
pub struct Domain {
    pub finite: FiniteDomain,
    pub surface: DomeSurface,
    pub cells: CellDecomposition,
}

impl Domain {
    pub fn new(points: Vec<ExtPoint>) -> Result<Self> {
        Self::from_finite(FiniteDomain::new(points)?)
    }

    pub fn from_finite(finite: FiniteDomain) -> Result<Self> {
        let surface = develop(&finite.hull)?;
        let cells = cell_decomposition(&surface);
        Ok(Domain { finite, surface, cells })
    }

    pub fn points(&self) -> &[ExtPoint] {
        &self.finite.points
    }

    pub fn retract(&self, z: ExtPoint) -> Result<RetractionResult> {
        retract(self, z)
    }

    pub fn tau(&self, z: C64) -> Result<f64> {
        Ok(1.0 / retract(self, ExtPoint::Finite(z))?.h)
    }
}

fn cell_decomposition(s: &DomeSurface) -> CellDecomposition {
    let p = &s.poly;
    let faces = s.charts.iter().enumerate().map(|(face, c)| FaceCell { face, map: c.map }).collect();
    let mut bigons = Vec::with_capacity(p.edges.len());
    for (k, e) in p.edges.iter().enumerate() {
        let (a, b) = (p.vertices[e.v[0]], p.vertices[e.v[1]]);
        let f = match (a, b) {
            (ExtPoint::Finite(a), ExtPoint::Finite(b)) => MobiusMap::new(C64::new(1.0, 0.0), -a, C64::new(1.0, 0.0), -b),
            (ExtPoint::Inf, ExtPoint::Finite(b)) => MobiusMap::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), -b),
            (ExtPoint::Finite(a), ExtPoint::Inf) => MobiusMap::new(C64::new(1.0, 0.0), -a, C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
            _ => unreachable!(),
        }
        .expect("distinct edge ends");
        // Inward normal of the face circle (a line through 0 after f) and a third-vertex direction.
        let normal = |face: usize| {
            let fc = &p.faces[face];
            let v = fc.verts.iter().find(|&&v| v != e.v[0] && v != e.v[1]).unwrap();
            let d = f.apply(p.vertices[*v]).finite().unwrap();
            let d = d / d.norm();
            let inner = f.apply(fc.cap.pole()).finite().unwrap_or(C64::new(0.0, 0.0));
            let mut n = d * C64::i();
            if (n.conj() * inner).re < 0.0 {
                n = -n;
            }
            (n, d)
        };
        let (nl, dl) = normal(e.left);
        // The face cell lies towards the third vertex; the bigon turns away from it.
        let turn = if (nl.conj() * dl).im > 0.0 { -1.0 } else { 1.0 };
        let base = f.inverse().apply_h3(&H3Point::new(C64::new(0.0, 0.0), 1.0));
        let offset = s.edge_param(e.left, k, s.chart_coords(e.left, &base));
        bigons.push(BigonCell { edge: k, theta: e.theta, f, phi_left: nl.arg(), turn, offset });
    }
    CellDecomposition { faces, bigons }
}

impl BigonCell {
    /// Sector coordinates (ψ from the left face, edge arclength) of a planar point.
    pub fn coords(&self, z: ExtPoint) -> Option<(f64, f64)> {
        let zeta = self.f.apply(z).finite()?;
        if zeta.norm() == 0.0 {
            return None;
        }
        let psi = (self.turn * (zeta.arg() - self.phi_left)).rem_euclid(TAU);
        Some((psi, zeta.norm().ln() + self.offset))
    }

    /// ψ of the boundary ray glued to `face`.
    pub fn side(&self, s: &DomeSurface, face: usize) -> f64 {
        if s.poly.edges[self.edge].left == face {
            0.0
        } else {
            self.theta
        }
    }

    pub fn contains(&self, z: ExtPoint) -> bool {
        self.coords(z).is_some_and(|(psi, _)| psi < self.theta)
    }

    /// Planar point with sector coordinates (ψ, v).
    pub fn point(&self, psi: f64, v: f64) -> C64 {
        let zeta = C64::from_polar((v - self.offset).exp(), self.phi_left + self.turn * psi);
        self.f.inverse().apply_c(zeta)
    }

    /// |dz/dψ| at (ψ, v).
    pub fn speed(&self, psi: f64, v: f64) -> f64 {
        let zeta = C64::from_polar((v - self.offset).exp(), self.phi_left + self.turn * psi);
        self.f.inverse().derivative(zeta).norm() * zeta.norm()
    }
}

/// Chart point of a planar point in a face cell (upper half-plane when z ∈ D_F).
pub fn face_chart_point(s: &DomeSurface, face: usize, z: ExtPoint) -> Option<C64> {
    s.charts[face].map.apply(z).finite().map(|w| w.conj())
}

/// Planar point of a face-cell chart point.
pub fn face_cell_point(s: &DomeSurface, face: usize, w: C64) -> ExtPoint {
    s.charts[face].map.inverse().apply(ExtPoint::Finite(w.conj()))
}

pub fn retract(d: &Domain, z: ExtPoint) -> Result<RetractionResult> {
    let zc = z.finite().ok_or(Error::Infinity)?;
    if d.finite.chordal_gap(z) <= POINT_EPS {
        return Err(Error::OnBoundary);
    }
    let s = &d.surface;
    let mut best: Option<RetractionResult> = None;
    for (fi, ch) in s.charts.iter().enumerate() {
        let Some(w) = face_chart_point(s, fi, z) else { continue };
        if w.im <= 0.0 || s.inside_margin(fi, w) <= MEMBER_TOL {
            continue;
        }
        let amb = ch.map.inverse().apply_h3(&H3Point::new(C64::new(w.re, 0.0), w.im));
        let h = horoball_radius(zc, &amb);
        if best.as_ref().map_or(true, |b| h < b.h) {
            best = Some(RetractionResult { foot: DomePoint { face: fi, w }, ambient: amb, h, support: Support::Face(fi) });
        }
    }
    for (ei, e) in s.poly.edges.iter().enumerate() {
        let (a, b) = (s.poly.vertices[e.v[0]], s.poly.vertices[e.v[1]]);
        let (h, amb) = match (a, b) {
            (ExtPoint::Finite(a), ExtPoint::Finite(b)) => {
                let m = 0.5 * (a + b);
                let rho = 0.5 * (b - a).norm();
                let dir = (b - a) / (2.0 * rho);
                let aa = (m - zc).norm_sqr() + rho * rho;
                let bb = 2.0 * rho * (dir.conj() * (m - zc)).re;
                let cos = (-bb / aa).clamp(-1.0, 1.0);
                let sin = (1.0 - cos * cos).max(0.0).sqrt();
                let h = ((aa - bb) * (aa + bb)).max(0.0).sqrt() / (2.0 * rho);
                (h, H3Point::new(m + dir * (rho * cos), rho * sin))
            }
            (ExtPoint::Inf, ExtPoint::Finite(a)) | (ExtPoint::Finite(a), ExtPoint::Inf) => {
                let h = (a - zc).norm();
                (h, H3Point::new(a, h))
            }
            _ => unreachable!(),
        };
        // Ties go to the edge.
        if best.as_ref().map_or(true, |bst| h <= bst.h * (1.0 + 1e-12)) {
            let w = s.chart_coords(e.left, &amb);
            best = Some(RetractionResult {
                foot: DomePoint { face: e.left, w: C64::new(w.re, w.im.abs()) },
                ambient: amb,
                h,
                support: Support::Edge(ei),
            });
        }
    }
    best.ok_or(Error::Degenerate("no support candidate".into()))
}

pub fn thurston_density(d: &Domain, z: ExtPoint) -> Result<f64> {
    Ok(1.0 / retract(d, z)?.h)
}

/// Every cell whose open interior contains z.
pub fn cells_containing(d: &Domain, z: ExtPoint) -> Vec<Cell> {
    let s = &d.surface;
    let mut out = Vec::new();
    for fi in 0..s.n_faces() {
        if let Some(w) = face_chart_point(s, fi, z) {
            if w.im > 0.0 && s.inside_margin(fi, w) > 0.0 {
                out.push(Cell::Face(fi));
            }
        }
    }
    for (k, b) in d.cells.bigons.iter().enumerate() {
        if b.contains(z) {
            out.push(Cell::Bigon(k));
        }
    }
    out
}

pub fn classify(d: &Domain, z: ExtPoint) -> Option<Cell> {
    cells_containing(d, z).first().copied()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Piece {
    /// Chart geodesic of a face, pulled back into its face cell.
    Face { face: usize, from: C64, to: C64 },
    /// Straight segment of a bigon in sector coordinates (ψ, v).
    Strip { edge: usize, from: [f64; 2], to: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pullback {
    pub pieces: Vec<Piece>,
    pub l_tau_structural: f64,
    pub l_tau_quadrature: f64,
}

impl Piece {
    pub fn param_len(&self) -> f64 {
        match *self {
            Piece::Face { from, to, .. } => h2_distance(from, to),
            Piece::Strip { from, to, .. } => (to[0] - from[0]).hypot(to[1] - from[1]),
        }
    }

    /// Planar point and |dz/ds| at parameter s ∈ [0, param_len].
    pub fn eval(&self, d: &Domain, s: f64) -> (C64, f64) {
        match *self {
            Piece::Face { face, from, to } => {
                let m = MobiusMap::h2_frame(from, to).inverse();
                let w = m.apply_c(C64::new(0.0, s.exp()));
                let dw = m.derivative(C64::new(0.0, s.exp())).norm() * s.exp();
                let inv = d.surface.charts[face].map.inverse();
                let z = inv.apply_c(w.conj());
                (z, inv.derivative(w.conj()).norm() * dw)
            }
            Piece::Strip { edge, from, to } => {
                let b = &d.cells.bigons[edge];
                let len = (to[0] - from[0]).hypot(to[1] - from[1]);
                let u = if len > 0.0 { s / len } else { 0.0 };
                let psi = from[0] + u * (to[0] - from[0]);
                let v = from[1] + u * (to[1] - from[1]);
                (b.point(psi, v), b.speed(psi, v))
            }
        }
    }

    /// Thurston length by adaptive quadrature of the retraction density.
    pub fn tau_length(&self, d: &Domain, tol: f64) -> Result<f64> {
        let len = self.param_len();
        let err = std::cell::RefCell::new(None);
        let val = simpson(
            |s| {
                let (z, sp) = self.eval(d, s);
                match d.tau(z) {
                    Ok(t) => t * sp,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            len,
            tol,
        );
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(val),
        }
    }
}

/// r⁻¹ of a transverse dome path: face pieces joined by bigon arcs.
pub fn pullback_path(d: &Domain, alpha: &DomePath) -> Result<Pullback> {
    let s = &d.surface;
    crate::dome::intersection_number(s, alpha)?;
    let mut pieces = Vec::new();
    for (i, seg) in alpha.segments.iter().enumerate() {
        if h2_distance(seg.from, seg.to) > 0.0 {
            pieces.push(Piece::Face { face: seg.face, from: seg.from, to: seg.to });
        }
        if let Some(c) = alpha.crossings.get(i) {
            if c.interior {
                let v = s.edge_param(seg.face, c.edge, seg.to);
                let b = &d.cells.bigons[c.edge];
                let side = b.side(s, seg.face);
                pieces.push(Piece::Strip { edge: c.edge, from: [side, v], to: [b.theta - side, v] });
            }
        }
    }
    let tol = 1e-9;
    let mut quad = 0.0;
    for p in &pieces {
        quad += p.tau_length(d, tol)?;
    }
    Ok(Pullback { pieces, l_tau_structural: alpha.length + alpha.intersection, l_tau_quadrature: quad })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    /// Output width in pixels.
    pub width: f64,
}

impl Default for Viewport {
    fn default() -> Self {
        Viewport { xmin: -3.0, xmax: 3.0, ymin: -3.0, ymax: 3.0, width: 600.0 }
    }
}

fn arc_samples(n: usize) -> impl Iterator<Item = f64> {
    // Points clustered towards both ends, where arcs run off to the vertices.
    (0..=n).map(move |k| {
        let t = k as f64 / n as f64;
        0.5 - 0.5 * (PI * t).cos()
    })
}

/// The decomposition as SVG: one closed path per cell.
pub fn svg_export(d: &Domain, vp: &Viewport) -> String {
    let s = &d.surface;
    let scale = vp.width / (vp.xmax - vp.xmin);
    let height = (vp.ymax - vp.ymin) * scale;
    let span = (vp.xmax - vp.xmin).max(vp.ymax - vp.ymin);
    let clamp = |z: C64| {
        let cx = z.re.clamp(vp.xmin - 10.0 * span, vp.xmax + 10.0 * span);
        let cy = z.im.clamp(vp.ymin - 10.0 * span, vp.ymax + 10.0 * span);
        ((cx - vp.xmin) * scale, (vp.ymax - cy) * scale)
    };
    let path = |pts: &[C64]| {
        let mut out = String::new();
        for (k, z) in pts.iter().filter(|z| z.re.is_finite() && z.im.is_finite()).enumerate() {
            let (x, y) = clamp(*z);
            let _ = write!(out, "{}{:.3} {:.3} ", if k == 0 { "M" } else { "L" }, x, y);
        }
        out.push('Z');
        out
    };
    let mut doc = String::new();
    let _ = writeln!(doc, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        doc,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
        vp.width, height, vp.width, height
    );
    let _ = writeln!(
        doc,
        "<style>.face{{fill:#cfe3f7;stroke:#24507a;stroke-width:0.8}} .bigon{{fill:#f7dcc0;stroke:#8a4b12;stroke-width:0.8}}</style>"
    );
    let n = 96;
    for fi in 0..s.n_faces() {
        let v = &s.charts[fi].sorted;
        let mut pts = Vec::new();
        // Inner sides left to right, then the outer side back.
        for k in 0..v.len() - 1 {
            let (c, r) = (0.5 * (v[k] + v[k + 1]), 0.5 * (v[k + 1] - v[k]));
            pts.extend(arc_samples(n).map(|t| C64::new(c, 0.0) + C64::from_polar(r, PI * (1.0 - t))));
        }
        let (c, r) = (0.5 * (v[0] + v[v.len() - 1]), 0.5 * (v[v.len() - 1] - v[0]));
        pts.extend(arc_samples(n).map(|t| C64::new(c, 0.0) + C64::from_polar(r, PI * t)));
        let planar: Vec<C64> = pts
            .into_iter()
            .map(|w| face_cell_point(s, fi, C64::new(w.re, w.im.max(1e-12))).finite().unwrap_or(C64::new(f64::NAN, 0.0)))
            .collect();
        let _ = writeln!(doc, r#"<path class="face" id="face-{}" d="{}"/>"#, fi, path(&planar));
    }
    for b in &d.cells.bigons {
        let ray = |psi: f64, rev: bool| -> Vec<C64> {
            let mut v: Vec<C64> = arc_samples(n)
                .map(|t| b.point(psi, b.offset + 12.0 * (2.0 * t - 1.0)))
                .collect();
            if rev {
                v.reverse();
            }
            v
        };
        let mut pts = ray(0.0, false);
        pts.extend(ray(b.theta, true));
        let _ = writeln!(doc, r#"<path class="bigon" id="bigon-{}" d="{}"/>"#, b.edge, path(&pts));
    }
    doc.push_str("</svg>\n");
    doc
}
