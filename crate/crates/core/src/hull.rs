//! Ideal convex hulls of finite subsets of the sphere.
//!
//! The hyperbolic hull of ideal points is, in the Klein model, the Euclidean
//! hull of their lifts to the unit sphere, so faces come from an incremental
//! 3D hull followed by merging of coplanar triangles.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{cross3, dot3, norm3, scale3, sub3, to_sphere, Cap, ExtPoint, GenCircle, POINT_EPS};

/// Absolute plane tolerance on unit-sphere data.
pub const PLANE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Vertex indices, counterclockwise seen from the empty side.
    pub verts: Vec<usize>,
    /// Plane of the face; the cap beyond it is the empty disk D_F.
    pub cap: Cap,
}

impl Face {
    pub fn support(&self) -> GenCircle {
        GenCircle::from_cap(&self.cap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// `left` traverses v[0] → v[1], `right` traverses v[1] → v[0].
    pub v: [usize; 2],
    pub left: usize,
    pub right: usize,
    pub theta: f64,
}

impl Edge {
    pub fn other_face(&self, f: usize) -> usize {
        if f == self.left { self.right } else { self.left }
    }
}

#[derive(Debug, Clone)]
pub struct IdealPolyhedron {
    pub vertices: Vec<ExtPoint>,
    pub faces: Vec<Face>,
    pub edges: Vec<Edge>,
    pub doubled: bool,
}

#[derive(Debug, Clone)]
pub struct FiniteDomain {
    pub points: Vec<ExtPoint>,
    pub hull: IdealPolyhedron,
}

impl FiniteDomain {
    pub fn new(points: Vec<ExtPoint>) -> Result<Self> {
        let hull = build_hull(&points, PLANE_TOL)?;
        Ok(FiniteDomain { points, hull })
    }

    /// Chordal distance from `z` to the nearest point of X.
    pub fn chordal_gap(&self, z: ExtPoint) -> f64 {
        self.points.iter().map(|p| p.chordal(&z)).fold(f64::INFINITY, f64::min)
    }
}

impl IdealPolyhedron {
    pub fn support_circle(&self, face: usize) -> Result<GenCircle> {
        self.faces.get(face).map(|f| f.support()).ok_or(Error::BadIndex(face))
    }

    pub fn lifts(&self) -> Vec<[f64; 3]> {
        self.vertices.iter().map(|&p| to_sphere(p)).collect()
    }

    pub fn edge_index(&self) -> HashMap<(usize, usize), usize> {
        let mut m = HashMap::new();
        for (k, e) in self.edges.iter().enumerate() {
            m.insert((e.v[0], e.v[1]), k);
            m.insert((e.v[1], e.v[0]), k);
        }
        m
    }

    /// Edges incident to each vertex.
    pub fn vertex_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (k, e) in self.edges.iter().enumerate() {
            out[e.v[0]].push(k);
            out[e.v[1]].push(k);
        }
        out
    }

    /// Edge ids of a face, in cycle order: the k-th joins verts[k] and verts[k+1].
    pub fn face_edges(&self, f: usize) -> Vec<usize> {
        let idx = self.edge_index();
        let vs = &self.faces[f].verts;
        (0..vs.len()).map(|k| idx[&(vs[k], vs[(k + 1) % vs.len()])]).collect()
    }
}

pub fn build_hull(points: &[ExtPoint], tol: f64) -> Result<IdealPolyhedron> {
    let n = points.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    for i in 0..n {
        if let ExtPoint::Finite(z) = points[i] {
            if !z.is_finite() {
                return Err(Error::Degenerate(format!("point {i} is not finite")));
            }
        }
        for j in 0..i {
            if points[i].chordal(&points[j]) < POINT_EPS {
                return Err(Error::Duplicate(j, i));
            }
        }
    }
    let lifts: Vec<[f64; 3]> = points.iter().map(|&p| to_sphere(p)).collect();

    // Pick a well spread initial simplex.
    let i0 = 0;
    let i1 = (0..n)
        .max_by(|&a, &b| dist2(lifts[a], lifts[i0]).total_cmp(&dist2(lifts[b], lifts[i0])))
        .unwrap();
    let i2 = (0..n)
        .max_by(|&a, &b| {
            tri_area2(lifts[i0], lifts[i1], lifts[a]).total_cmp(&tri_area2(lifts[i0], lifts[i1], lifts[b]))
        })
        .unwrap();
    let base_n = unit(cross3(sub3(lifts[i1], lifts[i0]), sub3(lifts[i2], lifts[i0])));
    let base_c = dot3(base_n, lifts[i0]);
    let i3 = (0..n)
        .max_by(|&a, &b| {
            (dot3(base_n, lifts[a]) - base_c).abs().total_cmp(&(dot3(base_n, lifts[b]) - base_c).abs())
        })
        .unwrap();
    if (dot3(base_n, lifts[i3]) - base_c).abs() <= tol {
        return doubled_hull(points, &lifts, base_n, base_c);
    }

    let interior = scale3(
        [
            lifts[i0][0] + lifts[i1][0] + lifts[i2][0] + lifts[i3][0],
            lifts[i0][1] + lifts[i1][1] + lifts[i2][1] + lifts[i3][1],
            lifts[i0][2] + lifts[i1][2] + lifts[i2][2] + lifts[i3][2],
        ],
        0.25,
    );
    let mut hull = TriHull { lifts: &lifts, interior, tris: Vec::new(), owner: HashMap::new() };
    for t in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        hull.add_oriented(t);
    }
    for p in 0..n {
        if p == i0 || p == i1 || p == i2 || p == i3 {
            continue;
        }
        hull.insert(p, tol)?;
    }
    let tris: Vec<Tri> = hull.tris.iter().filter(|t| t.alive).cloned().collect();
    assemble(points, &lifts, tris, tol)
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = sub3(a, b);
    dot3(d, d)
}

fn tri_area2(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let x = cross3(sub3(b, a), sub3(c, a));
    dot3(x, x)
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    scale3(v, 1.0 / norm3(v))
}

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    n: [f64; 3],
    c: f64,
    alive: bool,
}

struct TriHull<'a> {
    lifts: &'a [[f64; 3]],
    interior: [f64; 3],
    tris: Vec<Tri>,
    /// Directed edge → triangle owning it.
    owner: HashMap<(usize, usize), usize>,
}

impl<'a> TriHull<'a> {
    fn add_oriented(&mut self, t: [usize; 3]) {
        let [a, b, c] = t;
        let p = self.lifts;
        let mut nrm = unit(cross3(sub3(p[b], p[a]), sub3(p[c], p[a])));
        let mut v = [a, b, c];
        if dot3(nrm, self.interior) > dot3(nrm, p[a]) {
            nrm = scale3(nrm, -1.0);
            v = [a, c, b];
        }
        self.push(v, nrm);
    }

    fn push(&mut self, v: [usize; 3], nrm: [f64; 3]) {
        let id = self.tris.len();
        let c = dot3(nrm, self.lifts[v[0]]);
        self.tris.push(Tri { v, n: nrm, c, alive: true });
        for k in 0..3 {
            self.owner.insert((v[k], v[(k + 1) % 3]), id);
        }
    }

    fn insert(&mut self, p: usize, tol: f64) -> Result<()> {
        let q = self.lifts[p];
        let visible: Vec<usize> = (0..self.tris.len())
            .filter(|&i| self.tris[i].alive && dot3(self.tris[i].n, q) - self.tris[i].c > -tol)
            .collect();
        if visible.is_empty() {
            return Err(Error::Degenerate(format!("point {p} is not extreme")));
        }
        let is_vis: std::collections::HashSet<usize> = visible.iter().cloned().collect();
        let mut horizon = Vec::new();
        for &t in &visible {
            let v = self.tris[t].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let twin = self.owner.get(&(b, a)).copied();
                match twin {
                    Some(o) if !is_vis.contains(&o) => horizon.push((a, b)),
                    Some(_) => {}
                    None => return Err(Error::Degenerate("open triangulation".into())),
                }
            }
        }
        // The horizon has to be a single cycle.
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &(a, b) in &horizon {
            if next.insert(a, b).is_some() {
                return Err(Error::Degenerate(format!("pinched horizon inserting point {p}")));
            }
        }
        let start = horizon[0].0;
        let mut cur = start;
        let mut steps = 0;
        loop {
            cur = next[&cur];
            steps += 1;
            if cur == start || steps > horizon.len() {
                break;
            }
        }
        if steps != horizon.len() {
            return Err(Error::Degenerate(format!("horizon is not a simple cycle at point {p}")));
        }
        for &t in &visible {
            self.tris[t].alive = false;
            let v = self.tris[t].v;
            for k in 0..3 {
                let key = (v[k], v[(k + 1) % 3]);
                if self.owner.get(&key) == Some(&t) {
                    self.owner.remove(&key);
                }
            }
        }
        for (a, b) in horizon {
            let l = self.lifts;
            let nrm = unit(cross3(sub3(l[b], l[a]), sub3(q, l[a])));
            self.push([a, b, p], nrm);
        }
        Ok(())
    }
}

fn doubled_hull(points: &[ExtPoint], lifts: &[[f64; 3]], n: [f64; 3], c: f64) -> Result<IdealPolyhedron> {
    let order = circle_order(lifts, &(0..points.len()).collect::<Vec<_>>(), n);
    let cap = Cap { n, c };
    let mut rev = order.clone();
    rev.reverse();
    let faces = vec![Face { verts: order.clone(), cap }, Face { verts: rev, cap: cap.flipped() }];
    let k = order.len();
    let edges = (0..k)
        .map(|i| Edge { v: [order[i], order[(i + 1) % k]], left: 0, right: 1, theta: PI })
        .collect();
    Ok(IdealPolyhedron { vertices: points.to_vec(), faces, edges, doubled: true })
}

/// Sorts vertices on a common circle counterclockwise about the normal `n`.
fn circle_order(lifts: &[[f64; 3]], idx: &[usize], n: [f64; 3]) -> Vec<usize> {
    let mut ctr = [0.0; 3];
    for &i in idx {
        for d in 0..3 {
            ctr[d] += lifts[i][d] / idx.len() as f64;
        }
    }
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = unit(cross3(n, helper));
    let w = cross3(n, u);
    let mut keyed: Vec<(f64, usize)> = idx
        .iter()
        .map(|&i| {
            let d = sub3(lifts[i], ctr);
            (dot3(d, w).atan2(dot3(d, u)), i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, i)| i).collect()
}

fn assemble(points: &[ExtPoint], lifts: &[[f64; 3]], tris: Vec<Tri>, tol: f64) -> Result<IdealPolyhedron> {
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        for k in 0..3 {
            owner.insert((t.v[k], t.v[(k + 1) % 3]), i);
        }
    }
    // Union coplanar neighbours.
    let mut parent: Vec<usize> = (0..tris.len()).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    for (i, t) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t.v[k], t.v[(k + 1) % 3]);
            let j = owner[&(b, a)];
            if j <= i {
                continue;
            }
            let far = tris[j].v.iter().find(|&&x| x != a && x != b).copied().unwrap();
            if (dot3(t.n, lifts[far]) - t.c).abs() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..tris.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut roots: Vec<usize> = groups.keys().cloned().collect();
    roots.sort_by_key(|r| groups[r].iter().min().cloned());
    let mut faces = Vec::new();
    for r in roots {
        let members = &groups[&r];
        let mut vs: Vec<usize> = members.iter().flat_map(|&t| tris[t].v).collect();
        vs.sort();
        vs.dedup();
        // Average the member normals and refit the plane through all vertices.
        let mut nrm = [0.0; 3];
        for &t in members {
            for d in 0..3 {
                nrm[d] += tris[t].n[d];
            }
        }
        let nrm = unit(nrm);
        let c = vs.iter().map(|&v| dot3(nrm, lifts[v])).sum::<f64>() / vs.len() as f64;
        let mut order = circle_order(lifts, &vs, nrm);
        rotate_min_first(&mut order);
        faces.push(Face { verts: order, cap: Cap { n: nrm, c } });
    }
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        let k = f.verts.len();
        for i in 0..k {
            directed.insert((f.verts[i], f.verts[(i + 1) % k]), fi);
        }
    }
    let mut edges = Vec::new();
    for (fi, f) in faces.iter().enumerate() {
        let k = f.verts.len();
        for i in 0..k {
            let (a, b) = (f.verts[i], f.verts[(i + 1) % k]);
            let other = *directed
                .get(&(b, a))
                .ok_or_else(|| Error::Degenerate("unmatched hull edge".into()))?;
            if other < fi {
                continue;
            }
            if other == fi {
                return Err(Error::Degenerate("face glued to itself".into()));
            }
            let theta = f.cap.angle(&faces[other].cap);
            edges.push(Edge { v: [a, b], left: fi, right: other, theta });
        }
    }
    Ok(IdealPolyhedron { vertices: points.to_vec(), faces, edges, doubled: false })
}

fn rotate_min_first(v: &mut [usize]) {
    if let Some(pos) = v.iter().enumerate().min_by_key(|(_, &x)| x).map(|(i, _)| i) {
        v.rotate_left(pos);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub vertex_residuals: Vec<f64>,
    pub total_residual: f64,
    pub euler: i64,
    pub euler_ok: bool,
    pub theta_ok: bool,
    /// Largest distance of a face vertex from its support circle (chordal).
    pub circle_residual: f64,
    /// Largest intrusion of any point into an open disk D_F (chordal, ≤ 0 is good).
    pub emptiness: f64,
    pub max_vertex_residual: f64,
}

pub fn validate(p: &IdealPolyhedron) -> Diagnostics {
    let nv = p.vertices.len();
    let mut sums = vec![0.0; nv];
    let mut total = 0.0;
    let mut theta_ok = true;
    for e in &p.edges {
        sums[e.v[0]] += e.theta;
        sums[e.v[1]] += e.theta;
        total += e.theta;
        theta_ok &= e.theta > 0.0 && e.theta <= PI + 1e-12;
    }
    let vertex_residuals: Vec<f64> = sums.iter().map(|s| s - 2.0 * PI).collect();
    let euler = nv as i64 - p.edges.len() as i64 + p.faces.len() as i64;
    let euler_ok = if p.doubled {
        p.faces.len() == 2 && {
            let mut r = p.faces[1].verts.clone();
            r.reverse();
            same_cycle(&p.faces[0].verts, &r)
        } && p.edges.iter().all(|e| e.theta == PI)
    } else {
        euler == 2
    };
    let mut circle_residual: f64 = 0.0;
    let mut emptiness = f64::NEG_INFINITY;
    for f in &p.faces {
        for (i, &x) in p.vertices.iter().enumerate() {
            let m = f.cap.margin(x);
            if f.verts.contains(&i) {
                circle_residual = circle_residual.max(m.abs());
            } else {
                emptiness = emptiness.max(m);
            }
        }
    }
    if emptiness == f64::NEG_INFINITY {
        emptiness = 0.0;
    }
    let max_vertex_residual = vertex_residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Diagnostics {
        vertex_residuals,
        total_residual: total - PI * nv as f64,
        euler,
        euler_ok,
        theta_ok,
        circle_residual,
        emptiness,
        max_vertex_residual,
    }
}

fn same_cycle(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let Some(s) = b.iter().position(|&x| x == a[0]) else { return false };
    (0..a.len()).all(|i| a[i] == b[(s + i) % b.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::C64;

    fn pts(v: &[(f64, f64)]) -> Vec<ExtPoint> {
        v.iter().map(|&(a, b)| ExtPoint::new(a, b)).collect()
    }

    #[test]
    fn doubled_triangle() {
        let x = vec![ExtPoint::new(0.0, 0.0), ExtPoint::new(1.0, 0.0), ExtPoint::Inf];
        let h = build_hull(&x, PLANE_TOL).unwrap();
        assert!(h.doubled);
        assert_eq!(h.faces.len(), 2);
        assert_eq!(h.edges.len(), 3);
        assert!(h.edges.iter().all(|e| e.theta == PI));
        let d = validate(&h);
        assert!(d.euler_ok && d.max_vertex_residual == 0.0);
    }

    #[test]
    fn regular_tetrahedron() {
        let x = vec![
            ExtPoint::new(0.0, 0.0),
            ExtPoint::new(1.0, 0.0),
            ExtPoint::Finite(C64::from_polar(1.0, PI / 3.0)),
            ExtPoint::Inf,
        ];
        let h = build_hull(&x, PLANE_TOL).unwrap();
        assert!(!h.doubled);
        assert_eq!(h.faces.len(), 4);
        assert_eq!(h.edges.len(), 6);
        for e in &h.edges {
            assert!((e.theta - 2.0 * PI / 3.0).abs() < 1e-9, "{}", e.theta);
        }
        let d = validate(&h);
        assert!(d.max_vertex_residual < 1e-9 && d.euler_ok && d.emptiness < 0.0);
        // The face on 0, 1, ∞ is the real axis with the lower half-plane as disk side.
        let f = h.faces.iter().find(|f| !f.verts.contains(&2)).unwrap();
        match f.support() {
            GenCircle::Line { normal, offset } => {
                assert!(offset.abs() < 1e-12);
                assert!((normal - C64::new(0.0, -1.0)).norm() < 1e-12);
            }
            c => panic!("expected the real axis, got {c:?}"),
        }
    }

    #[test]
    fn doubled_square() {
        let x = pts(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]);
        let h = build_hull(&x, PLANE_TOL).unwrap();
        assert!(h.doubled);
        assert_eq!(h.edges.len(), 4);
        match h.support_circle(0).unwrap() {
            GenCircle::Circle { center, radius, .. } => {
                assert!(center.norm() < 1e-12 && (radius - 1.0).abs() < 1e-12)
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn octahedron_merges_nothing_and_cube_merges_squares() {
        // The six axis points form a regular ideal octahedron: 8 triangles, angles π/2.
        let x = vec![
            ExtPoint::new(0.0, 0.0),
            ExtPoint::Inf,
            ExtPoint::new(1.0, 0.0),
            ExtPoint::new(-1.0, 0.0),
            ExtPoint::new(0.0, 1.0),
            ExtPoint::new(0.0, -1.0),
        ];
        let h = build_hull(&x, PLANE_TOL).unwrap();
        assert_eq!(h.faces.len(), 8);
        assert!(h.edges.iter().all(|e| (e.theta - PI / 2.0).abs() < 1e-9));
        // Cube corners: six square faces.
        let s = 1.0 / 3f64.sqrt();
        let mut cube = Vec::new();
        for a in [-s, s] {
            for b in [-s, s] {
                for c in [-s, s] {
                    cube.push(crate::geom::from_sphere([a, b, c]));
                }
            }
        }
        let h = build_hull(&cube, PLANE_TOL).unwrap();
        assert_eq!(h.faces.len(), 6);
        assert!(h.faces.iter().all(|f| f.verts.len() == 4));
        assert!(validate(&h).max_vertex_residual < 1e-9);
    }

    #[test]
    fn errors() {
        assert_eq!(build_hull(&pts(&[(0.0, 0.0), (1.0, 0.0)]), PLANE_TOL).unwrap_err(), Error::TooFewPoints(2));
        assert!(matches!(
            build_hull(&pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]), PLANE_TOL),
            Err(Error::Duplicate(0, 2))
        ));
    }
}
