//! Numeric kernel: the extended plane, its sphere model, Möbius maps,
//! generalized circles and points of upper half-space.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Points of the Riemann sphere closer than this (chordally) are treated as equal.
pub const POINT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtPoint {
    Finite(C64),
    Inf,
}

impl ExtPoint {
    pub fn new(re: f64, im: f64) -> Self {
        ExtPoint::Finite(C64::new(re, im))
    }

    pub fn finite(&self) -> Option<C64> {
        match *self {
            ExtPoint::Finite(z) => Some(z),
            ExtPoint::Inf => None,
        }
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, ExtPoint::Inf)
    }

    /// Chordal distance on the unit sphere.
    pub fn chordal(&self, other: &ExtPoint) -> f64 {
        let a = to_sphere(*self);
        let b = to_sphere(*other);
        sub3(a, b).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl From<C64> for ExtPoint {
    fn from(z: C64) -> Self {
        ExtPoint::Finite(z)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointRepr {
    Finite { re: f64, im: f64 },
    Pair([f64; 2]),
    Tag(String),
}

impl Serialize for ExtPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtPoint::Finite(z) => PointRepr::Finite { re: z.re, im: z.im }.serialize(s),
            ExtPoint::Inf => PointRepr::Tag("inf".into()).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ExtPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match PointRepr::deserialize(d)? {
            PointRepr::Finite { re, im } | PointRepr::Pair([re, im]) => {
                if re.is_finite() && im.is_finite() {
                    Ok(ExtPoint::new(re, im))
                } else {
                    Err(serde::de::Error::custom("non-finite coordinate"))
                }
            }
            PointRepr::Tag(t) if t == "inf" => Ok(ExtPoint::Inf),
            PointRepr::Tag(t) => Err(serde::de::Error::custom(format!("unknown point tag {t:?}"))),
        }
    }
}

pub type SpherePoint = [f64; 3];

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Inverse stereographic projection: 0 to the south pole, ∞ to the north pole.
pub fn to_sphere(p: ExtPoint) -> SpherePoint {
    match p {
        ExtPoint::Inf => [0.0, 0.0, 1.0],
        ExtPoint::Finite(z) => {
            let r2 = z.norm_sqr();
            if !r2.is_finite() || r2 > 1e300 {
                return [0.0, 0.0, 1.0];
            }
            let d = r2 + 1.0;
            [2.0 * z.re / d, 2.0 * z.im / d, (r2 - 1.0) / d]
        }
    }
}

pub fn from_sphere(v: SpherePoint) -> ExtPoint {
    let n = norm3(v);
    let v = scale3(v, 1.0 / n);
    // Project from whichever pole is farther to keep the division well conditioned.
    if v[2] > 0.0 {
        let w = C64::new(v[0], -v[1]) / (1.0 + v[2]);
        if w.norm() == 0.0 {
            ExtPoint::Inf
        } else {
            ExtPoint::Finite(w.inv())
        }
    } else {
        ExtPoint::Finite(C64::new(v[0], v[1]) / (1.0 - v[2]))
    }
}

/// A round circle or a line in the plane, with a chosen complementary disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GenCircle {
    /// `inside` marks the bounded disk as the disk side.
    Circle { center: C64, radius: f64, inside: bool },
    /// Disk side is `{ Re(conj(normal) z) > offset }`.
    Line { normal: C64, offset: f64 },
}

/// The plane `n·v = c` cutting the unit sphere; the cap `n·v > c` is the disk side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cap {
    pub n: [f64; 3],
    pub c: f64,
}

impl Cap {
    pub fn contains(&self, p: ExtPoint) -> bool {
        dot3(self.n, to_sphere(p)) > self.c
    }

    pub fn margin(&self, p: ExtPoint) -> f64 {
        dot3(self.n, to_sphere(p)) - self.c
    }

    pub fn flipped(&self) -> Cap {
        Cap { n: scale3(self.n, -1.0), c: -self.c }
    }

    /// Inversive product of two caps: cosine of their intersection angle.
    pub fn inversive(&self, other: &Cap) -> f64 {
        (dot3(self.n, other.n) - self.c * other.c)
            / ((1.0 - self.c * self.c) * (1.0 - other.c * other.c)).sqrt()
    }

    /// Exterior dihedral angle between the hyperbolic planes over two caps.
    pub fn angle(&self, other: &Cap) -> f64 {
        self.inversive(other).clamp(-1.0, 1.0).acos()
    }

    /// A point of the open disk side (the pole of the cap).
    pub fn pole(&self) -> ExtPoint {
        from_sphere(self.n)
    }
}

impl GenCircle {
    pub fn to_cap(&self) -> Cap {
        match *self {
            GenCircle::Circle { center, radius, inside } => {
                // Points with |z-c|^2 < r^2; substitute z from the sphere model.
                // A|z|^2 + 2Re(conj(w) z) - (n3 + c) > 0 describes the cap.
                let a = 1.0;
                let w = -center;
                let k = center.norm_sqr() - radius * radius;
                // outside disk: |z|^2 - 2Re(conj(c) z) + k > 0
                let (a, w, k) = if inside { (-a, -w, -k) } else { (a, w, k) };
                // A = n3 - c, w = (n1, n2), -(n3 + c) = k
                let n3 = (a - k) / 2.0;
                let cc = (-k - a) / 2.0;
                let n = [w.re, w.im, n3];
                let s = norm3(n);
                Cap { n: scale3(n, 1.0 / s), c: cc / s }
            }
            GenCircle::Line { normal, offset } => {
                // 2Re(conj(u) z) - 2 offset > 0 with A = 0.
                let n = [normal.re, normal.im, offset];
                let s = norm3(n);
                Cap { n: scale3(n, 1.0 / s), c: offset / s }
            }
        }
    }

    pub fn from_cap(cap: &Cap) -> GenCircle {
        let [n1, n2, n3] = cap.n;
        let c = cap.c;
        let a = n3 - c;
        let w = C64::new(n1, n2);
        let wn = w.norm();
        if a.abs() <= 1e-13 * (1.0 + wn) {
            let normal = w / wn;
            GenCircle::Line { normal, offset: c / wn }
        } else {
            let center = -w / a;
            let radius = (1.0 - c * c).max(0.0).sqrt() / a.abs();
            GenCircle::Circle { center, radius, inside: a < 0.0 }
        }
    }

    /// Signed distance-like test; positive on the disk side.
    pub fn side(&self, z: C64) -> f64 {
        match *self {
            GenCircle::Circle { center, radius, inside } => {
                let s = radius - (z - center).norm();
                if inside { s } else { -s }
            }
            GenCircle::Line { normal, offset } => (normal.conj() * z).re - offset,
        }
    }

    pub fn contains(&self, p: ExtPoint) -> bool {
        self.to_cap().contains(p)
    }

    /// Chordal residual of a point from the circle on the unit sphere.
    pub fn residual(&self, p: ExtPoint) -> f64 {
        self.to_cap().margin(p).abs()
    }
}

/// Circle through three distinct points, oriented by their order.
pub fn circle_through(a: ExtPoint, b: ExtPoint, c: ExtPoint) -> Result<GenCircle> {
    Ok(GenCircle::from_cap(&cap_through(a, b, c)?))
}

pub fn cap_through(a: ExtPoint, b: ExtPoint, c: ExtPoint) -> Result<Cap> {
    if a.chordal(&b) < POINT_EPS || b.chordal(&c) < POINT_EPS || a.chordal(&c) < POINT_EPS {
        return Err(Error::Degenerate("coincident points".into()));
    }
    let (pa, pb, pc) = (to_sphere(a), to_sphere(b), to_sphere(c));
    let n = cross3(sub3(pb, pa), sub3(pc, pa));
    let s = norm3(n);
    if s < 1e-14 {
        return Err(Error::Degenerate("collinear sphere lifts".into()));
    }
    let n = scale3(n, 1.0 / s);
    Ok(Cap { n, c: dot3(n, pa) })
}

/// Intersection angle in (0, π) between the disk sides of two transverse circles.
pub fn circle_angle(c1: &GenCircle, c2: &GenCircle) -> Result<f64> {
    let i = c1.to_cap().inversive(&c2.to_cap());
    if !(i.abs() < 1.0 - 1e-12) {
        return Err(Error::Degenerate("circles are tangent or disjoint".into()));
    }
    Ok(i.acos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H3Point {
    pub x: C64,
    pub t: f64,
}

impl H3Point {
    pub fn new(x: C64, t: f64) -> Self {
        H3Point { x, t }
    }
}

pub fn h3_distance(p: &H3Point, q: &H3Point) -> f64 {
    let num = (p.x - q.x).norm_sqr() + (p.t - q.t).powi(2);
    let arg = num / (2.0 * p.t * q.t);
    // acosh(1 + a) written to keep precision for tiny a
    (arg + (arg * (arg + 2.0)).sqrt()).ln_1p()
}

/// Euclidean radius of the horoball at `z` whose boundary passes through `p`.
pub fn horoball_radius(z: C64, p: &H3Point) -> f64 {
    ((p.x - z).norm_sqr() + p.t * p.t) / (2.0 * p.t)
}

/// Hyperbolic distance in the upper half-plane.
pub fn h2_distance(p: C64, q: C64) -> f64 {
    let arg = (p - q).norm_sqr() / (2.0 * p.im * q.im);
    (arg + (arg * (arg + 2.0)).sqrt()).ln_1p()
}

/// Point at distance `s` from `p` along the upper half-plane geodesic towards `q`.
pub fn h2_along(p: C64, q: C64, s: f64) -> C64 {
    let d = h2_distance(p, q);
    if d == 0.0 {
        return p;
    }
    // Move p to i and q to the imaginary axis, walk, and move back.
    let m = MobiusMap::h2_frame(p, q);
    let inv = m.inverse();
    inv.apply_c(C64::new(0.0, s.exp()))
}

/// Orientation-preserving fractional linear map, stored with ad - bc = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl MobiusMap {
    pub fn identity() -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        MobiusMap { a: o, b: z, c: z, d: o }
    }

    /// Normalizes so the determinant is one.
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.norm() > 1e-300) || !det.is_finite() {
            return Err(Error::Degenerate("singular Möbius matrix".into()));
        }
        let s = det.sqrt().inv();
        Ok(MobiusMap { a: a * s, b: b * s, c: c * s, d: d * s })
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let r = |x: f64| C64::new(x, 0.0);
        Self::new(r(a), r(b), r(c), r(d))
    }

    /// The map sending a, b, c to 0, 1, ∞.
    pub fn to_standard(a: ExtPoint, b: ExtPoint, c: ExtPoint) -> Result<Self> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let m = match (a, b, c) {
            (ExtPoint::Finite(a), ExtPoint::Finite(b), ExtPoint::Finite(c)) => {
                // (z - a)(b - c) / ((z - c)(b - a))
                Self::new(b - c, -a * (b - c), b - a, -c * (b - a))?
            }
            (ExtPoint::Inf, ExtPoint::Finite(b), ExtPoint::Finite(c)) => {
                // (b - c) / (z - c)
                Self::new(zero, b - c, one, -c)?
            }
            (ExtPoint::Finite(a), ExtPoint::Inf, ExtPoint::Finite(c)) => {
                // (z - a) / (z - c)
                Self::new(one, -a, one, -c)?
            }
            (ExtPoint::Finite(a), ExtPoint::Finite(b), ExtPoint::Inf) => {
                // (z - a) / (b - a)
                Self::new(one, -a, zero, b - a)?
            }
            _ => return Err(Error::Degenerate("repeated ∞".into())),
        };
        Ok(m)
    }

    /// Unique map sending (a1, a2, a3) to (b1, b2, b3).
    pub fn from_triples(a: [ExtPoint; 3], b: [ExtPoint; 3]) -> Result<Self> {
        let ma = Self::to_standard(a[0], a[1], a[2])?;
        let mb = Self::to_standard(b[0], b[1], b[2])?;
        Ok(mb.inverse().compose(&ma))
    }

    /// Real map sending `p` to i and `q` onto the positive imaginary axis above i.
    pub fn h2_frame(p: C64, q: C64) -> Self {
        let (u, v) = geodesic_ends(p, q);
        match (u, v) {
            (Some(u), None) => MobiusMap::real(1.0, -u, 0.0, p.im).unwrap(),
            (None, Some(v)) => MobiusMap::real(0.0, -p.im, 1.0, -v).unwrap(),
            (Some(u), Some(v)) => {
                let w = (p - u) / (p - v);
                let k = w.im.signum() / w.norm();
                MobiusMap::real(k, -k * u, 1.0, -v).unwrap()
            }
            (None, None) => unreachable!(),
        }
    }

    pub fn inverse(&self) -> Self {
        MobiusMap { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// self ∘ other
    pub fn compose(&self, o: &MobiusMap) -> Self {
        let m = MobiusMap {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        };
        m.renormalized()
    }

    fn renormalized(self) -> Self {
        let det = self.a * self.d - self.b * self.c;
        let s = det.sqrt().inv();
        MobiusMap { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn apply(&self, p: ExtPoint) -> ExtPoint {
        match p {
            ExtPoint::Inf => {
                if self.c.norm() == 0.0 {
                    ExtPoint::Inf
                } else {
                    ExtPoint::Finite(self.a / self.c)
                }
            }
            ExtPoint::Finite(z) => {
                let den = self.c * z + self.d;
                if den.norm() == 0.0 {
                    ExtPoint::Inf
                } else {
                    let w = (self.a * z + self.b) / den;
                    if w.is_finite() { ExtPoint::Finite(w) } else { ExtPoint::Inf }
                }
            }
        }
    }

    /// Action on finite points; callers guarantee the image is finite.
    pub fn apply_c(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let den = self.c * z + self.d;
        (den * den).inv()
    }

    /// Poincaré extension to upper half-space.
    pub fn apply_h3(&self, p: &H3Point) -> H3Point {
        let cx = self.c * p.x + self.d;
        let den = cx.norm_sqr() + self.c.norm_sqr() * p.t * p.t;
        let num = (self.a * p.x + self.b) * cx.conj() + self.a * self.c.conj() * p.t * p.t;
        H3Point { x: num / den, t: p.t / den }
    }

    pub fn is_real(&self, tol: f64) -> bool {
        // Real up to a common unit scalar: normalize by the largest entry's phase.
        let entries = [self.a, self.b, self.c, self.d];
        let big = entries.iter().cloned().fold(C64::new(0.0, 0.0), |m, e| if e.norm() > m.norm() { e } else { m });
        let ph = big / big.norm();
        entries.iter().all(|e| (e / ph).im.abs() <= tol * (1.0 + e.norm()))
    }
}

/// Ideal endpoints of the geodesic through p and q, ordered from behind p to beyond q;
/// `None` stands for ∞.
pub fn geodesic_ends(p: C64, q: C64) -> (Option<f64>, Option<f64>) {
    let dx = q.re - p.re;
    if dx.abs() <= 1e-14 * (p.norm() + q.norm() + 1.0) {
        if q.im >= p.im {
            (Some(p.re), None)
        } else {
            (None, Some(p.re))
        }
    } else {
        let c = (q.norm_sqr() - p.norm_sqr()) / (2.0 * dx);
        let r = (p - c).norm();
        if dx > 0.0 {
            (Some(c - r), Some(c + r))
        } else {
            (Some(c + r), Some(c - r))
        }
    }
}

pub fn ext_close(a: ExtPoint, b: ExtPoint, tol: f64) -> bool {
    a.chordal(&b) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn f(re: f64, im: f64) -> ExtPoint {
        ExtPoint::new(re, im)
    }

    #[test]
    fn sphere_poles() {
        assert_eq!(to_sphere(f(0.0, 0.0)), [0.0, 0.0, -1.0]);
        assert_eq!(to_sphere(ExtPoint::Inf), [0.0, 0.0, 1.0]);
        let one = to_sphere(f(1.0, 0.0));
        assert!((one[0] - 1.0).abs() < 1e-15 && one[1].abs() < 1e-15 && one[2].abs() < 1e-15);
        assert!(from_sphere([0.0, 0.0, 1.0]).is_inf());
    }

    #[test]
    fn circles_through_points() {
        match circle_through(f(0.0, 0.0), f(1.0, 0.0), ExtPoint::Inf).unwrap() {
            GenCircle::Line { normal, offset } => {
                assert!(normal.re.abs() < 1e-12 && (normal.im.abs() - 1.0).abs() < 1e-12);
                assert!(offset.abs() < 1e-12);
            }
            c => panic!("expected a line, got {c:?}"),
        }
        match circle_through(f(1.0, 0.0), f(0.0, 1.0), f(-1.0, 0.0)).unwrap() {
            GenCircle::Circle { center, radius, .. } => {
                assert!(center.norm() < 1e-12 && (radius - 1.0).abs() < 1e-12);
            }
            c => panic!("expected a circle, got {c:?}"),
        }
        match circle_through(f(0.0, 0.0), f(1.0, 0.0), f(0.0, 1.0)).unwrap() {
            GenCircle::Circle { center, radius, .. } => {
                assert!((center - C64::new(0.5, 0.5)).norm() < 1e-12);
                assert!((radius - 0.5f64.sqrt()).abs() < 1e-12);
            }
            c => panic!("expected a circle, got {c:?}"),
        }
        assert!(circle_through(f(0.0, 0.0), f(0.0, 0.0), f(1.0, 0.0)).is_err());
    }

    #[test]
    fn angles_between_circles() {
        let real = GenCircle::Line { normal: C64::i(), offset: 0.0 };
        let slanted = GenCircle::Line { normal: C64::i() * C64::from_polar(1.0, PI / 3.0), offset: 0.0 };
        assert!((circle_angle(&real, &slanted).unwrap() - PI / 3.0).abs() < 1e-12);
        let unit = GenCircle::Circle { center: C64::new(0.0, 0.0), radius: 1.0, inside: true };
        assert!((circle_angle(&unit, &real).unwrap() - PI / 2.0).abs() < 1e-12);
        let other = GenCircle::Circle { center: C64::new(1.0, 0.0), radius: 1.0, inside: true };
        assert!((circle_angle(&unit, &other).unwrap() - PI / 3.0).abs() < 1e-12);
        let far = GenCircle::Circle { center: C64::new(5.0, 0.0), radius: 1.0, inside: true };
        assert!(circle_angle(&unit, &far).is_err());
    }

    #[test]
    fn cap_roundtrip() {
        let cs = [
            GenCircle::Circle { center: C64::new(0.3, -2.0), radius: 0.7, inside: true },
            GenCircle::Circle { center: C64::new(0.3, -2.0), radius: 0.7, inside: false },
            GenCircle::Line { normal: C64::from_polar(1.0, 0.4), offset: -1.5 },
        ];
        for c in cs {
            let back = GenCircle::from_cap(&c.to_cap());
            for z in [C64::new(0.1, -1.9), C64::new(4.0, 4.0), C64::new(-3.0, 0.2)] {
                assert_eq!(c.side(z) > 0.0, back.side(z) > 0.0);
                assert_eq!(c.side(z) > 0.0, c.contains(ExtPoint::Finite(z)));
            }
        }
    }

    #[test]
    fn h3_examples() {
        let o = C64::new(0.0, 0.0);
        let d = h3_distance(&H3Point::new(o, 1.0), &H3Point::new(o, std::f64::consts::E));
        assert!((d - 1.0).abs() < 1e-14);
        let d = h3_distance(&H3Point::new(o, 1.0), &H3Point::new(C64::new(1.0, 0.0), 1.0));
        assert!((d - 1.5f64.acosh()).abs() < 1e-14);
        assert_eq!(h3_distance(&H3Point::new(o, 2.0), &H3Point::new(o, 2.0)), 0.0);
        assert!((horoball_radius(o, &H3Point::new(o, 1.0)) - 0.5).abs() < 1e-15);
        assert!((horoball_radius(o, &H3Point::new(C64::new(1.0, 0.0), 1.0)) - 1.0).abs() < 1e-15);
        assert!((horoball_radius(C64::i(), &H3Point::new(o, 1.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mobius_examples() {
        let id = MobiusMap::identity();
        assert_eq!(id.apply(f(2.0, 3.0)), f(2.0, 3.0));
        let inv = MobiusMap::real(0.0, 1.0, 1.0, 0.0);
        // det = -1 is fine after complex normalization
        let inv = inv.unwrap();
        assert!(inv.apply(f(0.0, 0.0)).is_inf());
        let cay = MobiusMap::new(C64::new(1.0, 0.0), -C64::i(), C64::new(1.0, 0.0), C64::i()).unwrap();
        assert!(cay.apply(f(0.0, 1.0)).finite().unwrap().norm() < 1e-15);
    }

    #[test]
    fn h2_frame_places_points() {
        let p = C64::new(0.3, 0.8);
        let q = C64::new(-2.0, 0.1);
        let m = MobiusMap::h2_frame(p, q);
        assert!(m.is_real(1e-12));
        assert!((m.apply_c(p) - C64::i()).norm() < 1e-12);
        let mq = m.apply_c(q);
        assert!(mq.re.abs() < 1e-9 && mq.im > 1.0);
        assert!((mq.im.ln() - h2_distance(p, q)).abs() < 1e-9);
        let mid = h2_along(p, q, 0.5 * h2_distance(p, q));
        assert!((h2_distance(p, mid) - h2_distance(mid, q)).abs() < 1e-9);
    }
}
