//! Quasihyperbolic, Beardon–Pommerenke and Poincaré quantities, conformal
//! path lengths, and brackets for the Thurston distance.
//!
//! The Thurston metric of a finite domain is the surface obtained from the
//! dome by inserting a flat strip [0, θ_e] × R along every edge. The bracket
//! computes distances on that surface exactly: edge sequences are enumerated
//! over the development of the dome, and each sequence is a convex problem in
//! the crossing positions.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use crate::dome::{centre_to_geodesic, geodesic_distance, DomePoint, Frame, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::formulas::bp_k;
use crate::geom::{h2_distance, ExtPoint, C64, POINT_EPS};
use crate::npr::{face_chart_point, Domain, Piece, Support};
use crate::quad::simpson;

pub fn delta(x: &[ExtPoint], z: C64) -> Result<f64> {
    let d = x.iter().filter_map(|p| p.finite()).map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
    if d <= POINT_EPS {
        return Err(Error::OnBoundary);
    }
    Ok(d)
}

pub fn qh_density(x: &[ExtPoint], z: C64) -> Result<f64> {
    Ok(1.0 / delta(x, z)?)
}

/// β(z): the infimum of |log(|z−a|/|z−b|)| over nearest points a and b ∈ X∖{a}.
pub fn beta(x: &[ExtPoint], z: C64) -> Result<f64> {
    let d = delta(x, z)?;
    let mut best = f64::INFINITY;
    for (i, a) in x.iter().enumerate() {
        let Some(a) = a.finite() else { continue };
        if (a - z).norm() > d * (1.0 + 1e-12) {
            continue;
        }
        for (j, b) in x.iter().enumerate() {
            if i == j {
                continue;
            }
            if let Some(b) = b.finite() {
                best = best.min(((a - z).norm() / (b - z).norm()).ln().abs());
            }
        }
    }
    Ok(best)
}

/// Beardon–Pommerenke bounds on ρ from q and β.
pub fn bp_envelope_from(q: f64, beta: f64) -> (f64, f64) {
    if beta.is_infinite() {
        return (0.0, 0.0);
    }
    let k = bp_k();
    let lower = q / (SQRT_2 * (k + beta));
    let upper = ((2.0 * k + 0.5 * PI) / (k + beta)).min(2.0) * q;
    (lower, upper)
}

pub fn bp_envelope(x: &[ExtPoint], z: C64) -> Result<(f64, f64)> {
    Ok(bp_envelope_from(qh_density(x, z)?, beta(x, z)?))
}

fn annulus_radius(s: f64, z: C64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("annulus modulus s = {s} must be positive")));
    }
    let r = z.norm();
    if !(r > 1.0 && r < s.exp()) {
        return Err(Error::Domain(format!("|z| = {r} outside the annulus 1 < |z| < e^{s}")));
    }
    Ok(r)
}

/// Poincaré density of {1 < |z| < e^s}.
pub fn annulus_poincare_density(s: f64, z: C64) -> Result<f64> {
    let r = annulus_radius(s, z)?;
    Ok((PI / s) / (r * (PI * r.ln() / s).sin()))
}

pub fn annulus_qh_density(s: f64, z: C64) -> Result<f64> {
    let r = annulus_radius(s, z)?;
    Ok(1.0 / (r - 1.0).min(s.exp() - r))
}

/// β on the annulus from the modulus form: π times the largest modulus of a
/// concentric round annulus with central circle through z.
pub fn annulus_beta(s: f64, z: C64) -> Result<f64> {
    let r = annulus_radius(s, z)?;
    Ok(r.ln().min(s - r.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusClosedForms {
    pub s: f64,
    pub rho_core: f64,
    pub dome_core: f64,
    pub tau_core: f64,
    /// Present when ν(s) = π²/s < asinh 1.
    pub t_s: Option<f64>,
}

pub fn annulus_closed_forms(s: f64) -> Result<AnnulusClosedForms> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("annulus modulus s = {s} must be positive")));
    }
    let dome_core = 2.0 * PI / (0.5 * s).sinh();
    let nu = PI * PI / s;
    let t_s = (nu < 1f64.asinh()).then(|| (1.0 / nu.asinh()).acosh());
    // The core crosses bending 2π coth(s/2), so l_h + i = 2π coth(s/4).
    let tau_core = 2.0 * PI / (0.25 * s).tanh();
    Ok(AnnulusClosedForms { s, rho_core: 2.0 * PI * PI / s, dome_core, tau_core, t_s })
}

/// ∫ density(γ(t))·|γ′(t)| dt for a curve given as t ↦ (γ(t), |γ′(t)|).
pub fn curve_length<D, G>(density: D, curve: G, a: f64, b: f64, tol: f64) -> Result<f64>
where
    D: Fn(C64) -> Result<f64>,
    G: Fn(f64) -> (C64, f64),
{
    let err = std::cell::RefCell::new(None);
    let v = simpson(
        |t| {
            let (z, sp) = curve(t);
            match density(z) {
                Ok(rho) => rho * sp,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        a,
        b,
        tol,
    );
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Length of a polyline in a conformal density.
pub fn path_length<D: Fn(C64) -> Result<f64>>(density: D, polyline: &[C64], tol: f64) -> Result<f64> {
    let n = polyline.len().saturating_sub(1).max(1) as f64;
    let mut total = 0.0;
    for w in polyline.windows(2) {
        let (p, q) = (w[0], w[1]);
        let len = (q - p).norm();
        total += curve_length(&density, |t| (p + (q - p) * t, len), 0.0, 1.0, tol / n)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmDemo {
    pub n: u32,
    pub d_rho_radial: f64,
    pub d_q_radial: f64,
}

/// Radial lengths from e^{−n} to e^{n} in {e^{−2n} < |z| < e^{2n}}.
pub fn mm_demo(n: u32) -> Result<MmDemo> {
    if n == 0 {
        return Err(Error::Config("mm_demo needs n ≥ 1".into()));
    }
    let nf = n as f64;
    let s = 4.0 * nf;
    let inner = (-2.0 * nf).exp();
    // Parametrize by x = ln|z| so both ends stay well scaled.
    let radial = |x: f64| (C64::new(x.exp(), 0.0), x.exp());
    let rho = |z: C64| annulus_poincare_density(s, z / inner);
    let d_rho = curve_length(|z| Ok(rho(z)? / inner), radial, -nf, nf, 1e-12)?;
    let q = |z: C64| {
        let r = z.norm();
        Ok(1.0 / (r - inner).min(1.0 / inner - r))
    };
    let d_q = curve_length(q, radial, -nf, nf, 1e-10)?;
    Ok(MmDemo { n, d_rho_radial: d_rho, d_q_radial: d_q })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBracket {
    pub lower: f64,
    pub upper: f64,
    /// Intrinsic dome distance between the retractions.
    pub dome: f64,
    pub dome_certified: bool,
    /// Number of refinement stages used.
    pub refined_to: usize,
    /// (upper − lower)/upper fell below the target gap.
    pub converged: bool,
    /// Planar path realizing `upper`.
    pub path: Vec<Piece>,
}

impl DistanceBracket {
    pub fn gap(&self) -> f64 {
        if self.upper > 0.0 {
            (self.upper - self.lower) / self.upper
        } else {
            0.0
        }
    }
}

pub const BRACKET_GAP: f64 = 0.05;
pub const DEFAULT_SCHEDULE: [usize; 3] = [40, 400, 4000];

#[derive(Debug, Clone, Copy)]
enum End {
    Face { face: usize, w: C64 },
    Bigon { edge: usize, psi: f64, v: f64 },
}

fn endpoint(d: &Domain, z: C64) -> Result<(End, crate::npr::RetractionResult)> {
    let r = d.retract(ExtPoint::Finite(z))?;
    let e = match r.support {
        Support::Face(face) => End::Face { face, w: r.foot.w },
        Support::Edge(edge) => {
            let b = &d.cells.bigons[edge];
            let (psi, v) = b.coords(ExtPoint::Finite(z)).ok_or(Error::Degenerate("bigon coordinates".into()))?;
            // Points on a boundary ray may land just outside the sector.
            let psi = if psi <= b.theta { psi } else if psi - b.theta < std::f64::consts::TAU - psi { b.theta } else { 0.0 };
            End::Bigon { edge, psi, v }
        }
    };
    Ok((e, r))
}

fn hyp(w: C64) -> [f64; 3] {
    let n = w.norm_sqr();
    [(n + 1.0) / (2.0 * w.im), w.re / w.im, (n - 1.0) / (2.0 * w.im)]
}

fn mink(a: [f64; 3], b: [f64; 3]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// A face-link endpoint on the hyperboloid: fixed, or moving along an edge at unit speed.
#[derive(Clone, Copy)]
enum Anchor {
    Point([f64; 3], C64),
    Edge { a: [f64; 3], b: [f64; 3], var: usize, edge: usize },
}

#[derive(Clone, Copy)]
enum V {
    Var(usize),
    Fixed(f64),
}

#[derive(Clone, Copy)]
enum Link {
    Face { face: usize, p: Anchor, q: Anchor },
    Strip { edge: usize, psi: [f64; 2], va: V, vb: V },
}

fn edge_anchor(d: &Domain, face: usize, edge: usize, var: usize) -> Anchor {
    let s = &d.surface;
    let a = hyp(s.edge_point(face, edge, 0.0));
    let p1 = hyp(s.edge_point(face, edge, 1.0));
    let (c, sh) = (1f64.cosh(), 1f64.sinh());
    let b = [(p1[0] - c * a[0]) / sh, (p1[1] - c * a[1]) / sh, (p1[2] - c * a[2]) / sh];
    Anchor::Edge { a, b, var, edge }
}

fn anchor_at(p: &Anchor, x: &[f64]) -> ([f64; 3], [f64; 3], Option<usize>) {
    match *p {
        Anchor::Point(h, _) => (h, [0.0; 3], None),
        Anchor::Edge { a, b, var, .. } => {
            let v = x[var];
            let (c, s) = (v.cosh(), v.sinh());
            let pos = [c * a[0] + s * b[0], c * a[1] + s * b[1], c * a[2] + s * b[2]];
            let vel = [s * a[0] + c * b[0], s * a[1] + c * b[1], s * a[2] + c * b[2]];
            (pos, vel, Some(var))
        }
    }
}

/// Value, gradient and tridiagonal Hessian (diagonal, super-diagonal) of the chain length.
fn chain_eval(links: &[Link], x: &[f64], want_derivs: bool) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = x.len();
    let (mut g, mut hd, mut ho) = (vec![0.0; n], vec![0.0; n], vec![0.0; n.saturating_sub(1)]);
    let mut total = 0.0;
    let add_h = |i: usize, j: usize, v: f64, hd: &mut Vec<f64>, ho: &mut Vec<f64>| {
        if i == j {
            hd[i] += v;
        } else {
            ho[i.min(j)] += v;
        }
    };
    for l in links {
        match *l {
            Link::Face { p, q, .. } => {
                let (pp, pv, pi) = anchor_at(&p, x);
                let (qp, qv, qi) = anchor_at(&q, x);
                let c = (-mink(pp, qp)).max(1.0);
                let dist = c.acosh();
                total += dist;
                if !want_derivs {
                    continue;
                }
                let s2 = (c * c - 1.0).max(1e-300);
                let s = s2.sqrt();
                let terms: [(Option<usize>, f64); 2] = [(pi, -mink(pv, qp)), (qi, -mink(pp, qv))];
                for (vi, cd) in terms {
                    if let Some(i) = vi {
                        g[i] += cd / s;
                        add_h(i, i, c / s - c * cd * cd / (s2 * s), &mut hd, &mut ho);
                    }
                }
                if let (Some(i), Some(j)) = (pi, qi) {
                    let cab = -mink(pv, qv);
                    let ca = -mink(pv, qp);
                    let cb = -mink(pp, qv);
                    add_h(i, j, cab / s - c * ca * cb / (s2 * s), &mut hd, &mut ho);
                }
            }
            Link::Strip { psi, va, vb, .. } => {
                let get = |v: V| match v {
                    V::Var(i) => (x[i], Some(i)),
                    V::Fixed(f) => (f, None),
                };
                let ((a, ai), (b, bi)) = (get(va), get(vb));
                let dpsi = psi[1] - psi[0];
                let dv = b - a;
                let len = (dpsi * dpsi + dv * dv + 1e-300).sqrt();
                total += len;
                if !want_derivs {
                    continue;
                }
                let h = (dpsi * dpsi + 1e-24) / (len * len * len);
                if let Some(i) = ai {
                    g[i] -= dv / len;
                    hd[i] += h;
                }
                if let Some(j) = bi {
                    g[j] += dv / len;
                    hd[j] += h;
                }
                if let (Some(i), Some(j)) = (ai, bi) {
                    add_h(i, j, -h, &mut hd, &mut ho);
                }
            }
        }
    }
    (total, g, hd, ho)
}

/// Solve (T + μI) y = r for symmetric tridiagonal T; None when not positive definite.
fn thomas(hd: &[f64], ho: &[f64], mu: f64, r: &[f64]) -> Option<Vec<f64>> {
    let n = hd.len();
    let mut c = vec![0.0; n];
    let mut dd = vec![0.0; n];
    let mut piv = hd[0] + mu;
    if piv <= 0.0 {
        return None;
    }
    dd[0] = r[0] / piv;
    for i in 1..n {
        c[i - 1] = ho[i - 1] / piv;
        piv = hd[i] + mu - ho[i - 1] * c[i - 1];
        if piv <= 0.0 {
            return None;
        }
        dd[i] = (r[i] - ho[i - 1] * dd[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        dd[i] -= c[i] * dd[i + 1];
    }
    Some(dd)
}

fn minimize_chain(links: &[Link], x: &mut [f64]) -> f64 {
    if x.is_empty() {
        return chain_eval(links, x, false).0;
    }
    let mut f = chain_eval(links, x, false).0;
    for _ in 0..200 {
        let (_, g, hd, ho) = chain_eval(links, x, true);
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < 1e-13 {
            break;
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut mu = 0.0;
        let step = loop {
            if let Some(s) = thomas(&hd, &ho, mu, &rhs) {
                break s;
            }
            mu = if mu == 0.0 { 1e-8 } else { mu * 10.0 };
        };
        // Backtracking line search; cap steps so cosh stays finite.
        let smax = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = if smax > 5.0 { 5.0 / smax } else { 1.0 };
        let mut improved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let ft = chain_eval(links, &trial, false).0;
            if ft <= f {
                x.copy_from_slice(&trial);
                improved = ft < f || t == 1.0;
                f = ft;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    f
}

fn links_to_pieces(d: &Domain, links: &[Link], x: &[f64]) -> Vec<Piece> {
    let s = &d.surface;
    let chart = |face: usize, p: &Anchor| match *p {
        Anchor::Point(_, w) => w,
        Anchor::Edge { var, edge, .. } => s.edge_point(face, edge, x[var]),
    };
    let val = |v: V| match v {
        V::Var(i) => x[i],
        V::Fixed(f) => f,
    };
    links
        .iter()
        .map(|l| match *l {
            Link::Face { face, p, q } => Piece::Face { face, from: chart(face, &p), to: chart(face, &q) },
            Link::Strip { edge, psi, va, vb } => Piece::Strip { edge, from: [psi[0], val(va)], to: [psi[1], val(vb)] },
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SurfaceDistance {
    pub value: f64,
    /// Valid lower bound on the Thurston distance.
    pub lower: f64,
    pub certified: bool,
    pub pieces: Vec<Piece>,
    pub expansions: usize,
}

struct Cand {
    key: f64,
    node: usize,
    s: f64,
}
impl PartialEq for Cand {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        o.key.total_cmp(&self.key)
    }
}

/// Exact Thurston distance between two points of Ω, by edge-sequence search.
pub fn tau_surface_distance(d: &Domain, z: C64, w: C64, budget: usize) -> Result<SurfaceDistance> {
    let s = &d.surface;
    let (ez, rz) = endpoint(d, z)?;
    let (ew, rw) = endpoint(d, w)?;
    let mut best = f64::INFINITY;
    let mut best_pieces: Vec<Piece> = Vec::new();
    if let (End::Bigon { edge: a, psi: pa, v: va }, End::Bigon { edge: b, psi: pb, v: vb }) = (ez, ew) {
        if a == b {
            best = (pb - pa).hypot(vb - va);
            best_pieces = vec![Piece::Strip { edge: a, from: [pa, va], to: [pb, vb] }];
        }
    }
    // Roots: the face holding z, or both faces beside z's bigon.
    let roots: Vec<(usize, Option<(usize, f64, f64)>)> = match ez {
        End::Face { face, .. } => vec![(face, None)],
        End::Bigon { edge, psi, v } => {
            let e = &s.poly.edges[edge];
            vec![(e.left, Some((edge, psi, v))), (e.right, Some((edge, psi, v)))]
        }
    };
    let goal_faces: Vec<usize> = match ew {
        End::Face { face, .. } => vec![face],
        End::Bigon { edge, .. } => vec![s.poly.edges[edge].left, s.poly.edges[edge].right],
    };
    let mut expansions = 0usize;
    let mut open_lower = f64::INFINITY;
    let mut certified = true;
    for (root_face, start) in roots {
        let centre = DomePoint { face: root_face, w: chart_pos(d, root_face, &rz.ambient) };
        let mut fr = Frame::new(s, &centre);
        let s0 = match start {
            Some((edge, psi, _)) => {
                let side = d.cells.bigons[edge].side(s, root_face);
                (psi - side).abs()
            }
            None => 0.0,
        };
        let mut heap = BinaryHeap::new();
        heap.push(Cand { key: s0, node: 0, s: s0 });
        while let Some(Cand { key, node, s: sacc }) = heap.pop() {
            if key >= best {
                heap.clear();
                break;
            }
            if expansions >= budget {
                certified = false;
                open_lower = open_lower.min(key);
                heap.clear();
                break;
            }
            expansions += 1;
            let face = fr.nodes[node].face;
            if goal_faces.contains(&face) {
                if let Some((val, pieces)) = eval_chain(d, &fr, node, start, &ew, &rw.ambient) {
                    if val < best {
                        best = val;
                        best_pieces = pieces;
                    }
                }
            }
            for (e, lo, hi) in fr.children(node) {
                if hi.0 - lo.0 < 1e-13 {
                    continue;
                }
                if node == 0 && start.is_some_and(|(ze, _, _)| ze == e) {
                    continue;
                }
                let sc = sacc + s.poly.edges[e].theta;
                let dd = centre_to_geodesic(lo.0, hi.0);
                let lb = (dd * dd + sc * sc).sqrt().max(key);
                if lb >= best {
                    continue;
                }
                let c = fr.child(node, e, lo, hi);
                heap.push(Cand { key: lb, node: c, s: sc });
            }
        }
    }
    if !best.is_finite() && !certified {
        return Ok(SurfaceDistance { value: f64::INFINITY, lower: open_lower, certified, pieces: vec![], expansions });
    }
    let lower = if certified { best } else { best.min(open_lower) };
    Ok(SurfaceDistance { value: best, lower, certified, pieces: best_pieces, expansions })
}

fn chart_pos(d: &Domain, face: usize, p: &crate::geom::H3Point) -> C64 {
    let w = d.surface.chart_coords(face, p);
    C64::new(w.re, w.im.abs())
}

/// Length-minimizing path for the edge sequence of a development node.
fn eval_chain(
    d: &Domain,
    fr: &Frame,
    node: usize,
    start: Option<(usize, f64, f64)>,
    end: &End,
    end_amb: &crate::geom::H3Point,
) -> Option<(f64, Vec<Piece>)> {
    let s = &d.surface;
    let chain = fr.chain(node);
    let last_face = fr.nodes[node].face;
    let target_chart = match *end {
        End::Face { w, .. } => w,
        End::Bigon { .. } => chart_pos(d, last_face, end_amb),
    };
    // Straight dome line for initial crossing positions.
    let guide = fr.path_to(node, fr.nodes[node].t.apply_c(target_chart));
    let mut x: Vec<f64> = Vec::new();
    let mut links: Vec<Link> = Vec::new();
    let root_face = fr.nodes[0].face;
    let mut anchor = match start {
        Some((edge, psi, v)) => {
            let side = d.cells.bigons[edge].side(s, root_face);
            x.push(v);
            links.push(Link::Strip { edge, psi: [psi, side], va: V::Fixed(v), vb: V::Var(0) });
            edge_anchor(d, root_face, edge, 0)
        }
        None => {
            let w = fr.nodes[0].t.inverse().apply_c(C64::new(0.0, 0.0));
            let w = C64::new(w.re, w.im.abs());
            Anchor::Point(hyp(w), w)
        }
    };
    let same_edge = |a: &Anchor, e: usize| matches!(a, Anchor::Edge { edge, .. } if *edge == e);
    for (j, pair) in chain.windows(2).enumerate() {
        let (fa, nb) = (fr.nodes[pair[0]].face, &fr.nodes[pair[1]]);
        let e = nb.entry.unwrap().0;
        if same_edge(&anchor, e) {
            return None;
        }
        let mut v0 = s.edge_param(fa, e, guide.segments[j].to);
        if !v0.is_finite() {
            // The straight line misses this window; start from the foot of the centre.
            let c = fr.nodes[pair[0]].t.inverse().apply_c(C64::new(0.0, 0.0));
            v0 = s.edge_param(fa, e, C64::new(c.re, c.im.abs()));
        }
        let t = x.len();
        x.push(v0);
        links.push(Link::Face { face: fa, p: anchor, q: edge_anchor(d, fa, e, t) });
        x.push(v0);
        let b = &d.cells.bigons[e];
        links.push(Link::Strip { edge: e, psi: [b.side(s, fa), b.side(s, nb.face)], va: V::Var(t), vb: V::Var(t + 1) });
        anchor = edge_anchor(d, nb.face, e, t + 1);
    }
    match *end {
        End::Face { w, .. } => links.push(Link::Face { face: last_face, p: anchor, q: Anchor::Point(hyp(w), w) }),
        End::Bigon { edge, psi, v } => {
            if same_edge(&anchor, edge) {
                return None;
            }
            let t = x.len();
            x.push(v);
            links.push(Link::Face { face: last_face, p: anchor, q: edge_anchor(d, last_face, edge, t) });
            let side = d.cells.bigons[edge].side(s, last_face);
            links.push(Link::Strip { edge, psi: [side, psi], va: V::Var(t), vb: V::Fixed(v) });
        }
    }
    let val = minimize_chain(&links, &mut x);
    if !val.is_finite() {
        return None;
    }
    Some((val, links_to_pieces(d, &links, &x)))
}

/// τ-length of a planar path by quadrature of the retraction density.
pub fn pieces_tau_length(d: &Domain, pieces: &[Piece], tol: f64) -> Result<f64> {
    let mut total = 0.0;
    for p in pieces {
        total += p.tau_length(d, tol)?;
    }
    Ok(total)
}

/// Bracket d_τ(z, w): the dome distance of the retractions is the first lower
/// bound; each stage of `schedule` runs the surface search with that many
/// expansions, raising the lower bound and measuring its path for the upper.
pub fn tau_distance_bracket(d: &Domain, z: C64, w: C64, schedule: &[usize]) -> Result<DistanceBracket> {
    let rz = d.retract(ExtPoint::Finite(z))?;
    let rw = d.retract(ExtPoint::Finite(w))?;
    if z == w {
        return Ok(DistanceBracket {
            lower: 0.0,
            upper: 0.0,
            dome: 0.0,
            dome_certified: true,
            refined_to: 0,
            converged: true,
            path: vec![],
        });
    }
    let g = geodesic_distance(&d.surface, &rz.foot, &rw.foot, DEFAULT_BUDGET);
    let mut lower = if g.certified { g.distance * (1.0 - 1e-12) } else { 0.0 };
    let mut upper = f64::INFINITY;
    let mut path = Vec::new();
    let mut refined_to = 0;
    let tol = 1e-10;
    let gap = |lo: f64, up: f64| if up > 0.0 { (up - lo) / up } else { 0.0 };
    for (k, &budget) in schedule.iter().enumerate() {
        let sd = tau_surface_distance(d, z, w, budget)?;
        refined_to = k + 1;
        // Newton converges far below this slack.
        lower = lower.max(sd.lower * (1.0 - 1e-9) - 1e-9);
        if sd.value.is_finite() {
            let up = pieces_tau_length(d, &sd.pieces, tol)?;
            if up < upper {
                upper = up;
                path = sd.pieces;
            }
        }
        if gap(lower, upper) < BRACKET_GAP {
            break;
        }
    }
    Ok(DistanceBracket {
        lower,
        upper,
        dome: g.distance,
        dome_certified: g.certified,
        refined_to,
        converged: gap(lower, upper) < BRACKET_GAP,
        path,
    })
}

/// A chart point inside the face cell of a face, mapped to the plane.
pub fn face_cell_sample(d: &Domain, face: usize, w: C64) -> Option<C64> {
    crate::npr::face_cell_point(&d.surface, face, w).finite()
}

/// Chart distance of two planar points of one face cell.
pub fn face_cell_distance(d: &Domain, face: usize, z: C64, w: C64) -> Option<f64> {
    let a = face_chart_point(&d.surface, face, ExtPoint::Finite(z))?;
    let b = face_chart_point(&d.surface, face, ExtPoint::Finite(w))?;
    Some(h2_distance(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::ASINH1;
    use crate::npr::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three() -> Vec<ExtPoint> {
        vec![ExtPoint::new(0.0, 0.0), ExtPoint::new(1.0, 0.0), ExtPoint::Inf]
    }

    #[test]
    fn quasihyperbolic_and_beta() {
        let x = three();
        assert!((qh_density(&x, C64::new(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((qh_density(&x, C64::new(0.5, 0.0)).unwrap() - 2.0).abs() < 1e-15);
        assert!((beta(&x, C64::new(0.0, 1.0)).unwrap() - 2f64.sqrt().ln()).abs() < 1e-15);
        assert_eq!(beta(&x, C64::new(0.5, 0.0)).unwrap(), 0.0);
        let y = vec![ExtPoint::new(0.0, 0.0), ExtPoint::Inf];
        assert!(beta(&y, C64::new(0.3, 0.7)).unwrap().is_infinite());
        let lam = 3.7;
        let xs: Vec<ExtPoint> = x.iter().map(|p| p.finite().map_or(ExtPoint::Inf, |z| ExtPoint::Finite(z * lam))).collect();
        let z = C64::new(0.3, 0.4);
        assert!((qh_density(&xs, z * lam).unwrap() * lam - qh_density(&x, z).unwrap()).abs() < 1e-12);
        assert!(matches!(qh_density(&x, C64::new(1.0, 0.0)), Err(Error::OnBoundary)));
    }

    #[test]
    fn envelope_at_beta_zero() {
        let (lo, up) = bp_envelope_from(1.0, 0.0);
        assert!((1.0 / lo - 8.1497).abs() < 1e-3);
        assert_eq!(up, 2.0);
        assert_eq!(bp_envelope_from(1.0, f64::INFINITY), (0.0, 0.0));
    }

    #[test]
    fn annulus_values() {
        let s = 2.0;
        let e = 1f64.exp();
        assert!((annulus_poincare_density(s, C64::new(e, 0.0)).unwrap() - PI / (2.0 * e)).abs() < 1e-15);
        let core = curve_length(
            |z| annulus_poincare_density(s, z),
            |t| (C64::from_polar(e, t), e),
            0.0,
            2.0 * PI,
            1e-12,
        )
        .unwrap();
        assert!((core - 2.0 * PI * PI / s).abs() < 1e-8);
        let r = 1.7f64;
        let mirrored = (s - r.ln()).exp();
        let a = annulus_poincare_density(s, C64::new(r, 0.0)).unwrap() * r;
        let b = annulus_poincare_density(s, C64::new(mirrored, 0.0)).unwrap() * mirrored;
        assert!((a - b).abs() < 1e-12);
        let cf = annulus_closed_forms(2.0).unwrap();
        assert!((cf.dome_core - 5.3464762810).abs() < 1e-9);
        assert!((cf.tau_core - 13.5965202946).abs() < 1e-9);
        // The disk tangent to both circles through e^{s/2} realizes the Thurston density there.
        for s in [0.5f64, 2.0, 6.0] {
            let (c, r, x) = ((s.exp() + 1.0) / 2.0, (s.exp() - 1.0) / 2.0, (0.5 * s).exp());
            let rho = 2.0 * r / (r * r - (c - x) * (c - x));
            assert!((2.0 * PI * x * rho - annulus_closed_forms(s).unwrap().tau_core).abs() < 1e-9 * rho);
        }
        assert!((cf.rho_core - PI * PI).abs() < 1e-12);
        assert!(cf.t_s.is_none());
        assert!(annulus_closed_forms(20.0).unwrap().t_s.is_some());
        let radial = path_length(|z| annulus_poincare_density(2.0, z), &[C64::new(0.5f64.exp(), 0.0), C64::new(1.5f64.exp(), 0.0)], 1e-12)
            .unwrap();
        assert!((radial - 2.0 * ASINH1).abs() < 1e-8);
    }

    #[test]
    fn q_length_on_imaginary_axis() {
        let l = path_length(|z| qh_density(&three(), z), &[C64::new(0.0, 1.0), C64::new(0.0, 2.0)], 1e-12).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn mm_demo_values() {
        let mut prev = 0.0;
        for n in 1..=8 {
            let m = mm_demo(n).unwrap();
            assert!((m.d_rho_radial - 2.0 * ASINH1).abs() < 1e-8, "{m:?}");
            assert!(m.d_q_radial >= n as f64);
            let ratio = m.d_q_radial / m.d_rho_radial;
            assert!(ratio > prev);
            prev = ratio;
        }
    }

    #[test]
    fn bracket_same_face_collapses() {
        let d = Domain::new(vec![ExtPoint::new(1.0, 0.0), ExtPoint::new(0.0, 1.0), ExtPoint::new(-1.0, 0.0), ExtPoint::new(0.0, -1.0)])
            .unwrap();
        let z = C64::new(0.1, 0.05);
        let w = C64::new(-0.2, 0.1);
        let b = tau_distance_bracket(&d, z, w, &DEFAULT_SCHEDULE).unwrap();
        let chart = face_cell_distance(&d, d.retract(ExtPoint::Finite(z)).unwrap().foot.face, z, w).unwrap();
        assert!((b.lower - chart).abs() < 1e-4 && (b.upper - chart).abs() < 1e-4, "{b:?} {chart}");
        let zero = tau_distance_bracket(&d, z, z, &DEFAULT_SCHEDULE).unwrap();
        assert_eq!((zero.lower, zero.upper), (0.0, 0.0));
    }

    #[test]
    fn bracket_orders_and_matches_mesh_path() {
        let d = Domain::new(vec![
            ExtPoint::new(0.0, 0.0),
            ExtPoint::new(1.0, 0.0),
            ExtPoint::new(0.3, 0.9),
            ExtPoint::new(-0.6, 0.4),
            ExtPoint::Inf,
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let z = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let w = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let b = tau_distance_bracket(&d, z, w, &DEFAULT_SCHEDULE).unwrap();
            assert!(b.lower <= b.upper + 1e-12);
            assert!(b.dome <= b.upper + 1e-9);
            assert!(b.converged, "{b:?}");
            // Any explicit polyline is at least as long as the distance.
            let straight = path_length(|p| d.tau(p), &[z, w], 1e-9).unwrap();
            assert!(b.lower <= straight + 1e-7, "{} {}", b.lower, straight);
        }
    }
}
