//! Seeded configuration families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::dome::{closed_geodesics, develop};
use crate::error::{Error, Result};
use crate::formulas::F_SUP;
use crate::geom::{from_sphere, ExtPoint, C64};
use crate::hull::{validate, FiniteDomain};

/// Smallest chordal separation accepted between generated points.
pub const MIN_SEPARATION: f64 = 0.05;
const RESAMPLE_BUDGET: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// n points uniform on the sphere.
    RandomN { n: usize },
    /// Two clusters of `size` points of radius `radius`, around 0 and around ∞.
    TwoCluster { radius: f64, size: usize },
    /// n points on |z| = 1 and n on |z| = e^s, the outer ones turned by `twist`
    /// (π/n by default); `aligned` puts them on common rays instead.
    Annulus {
        s: f64,
        n: usize,
        #[serde(default)]
        twist: Option<f64>,
        #[serde(default)]
        aligned: bool,
    },
    Explicit { points: Vec<ExtPoint> },
}

fn rng_for(seed: u64, attempt: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(attempt as u64);
    r
}

fn uniform_sphere(rng: &mut ChaCha8Rng) -> ExtPoint {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..TAU);
    let r = (1.0 - z * z).sqrt();
    from_sphere([r * phi.cos(), r * phi.sin(), z])
}

fn separated(points: &[ExtPoint]) -> bool {
    points.iter().enumerate().all(|(i, p)| points[..i].iter().all(|q| p.chordal(q) >= MIN_SEPARATION))
}

fn cluster(rng: &mut ChaCha8Rng, radius: f64, size: usize) -> Vec<C64> {
    // Spread around a circle so cluster points stay apart.
    let phase: f64 = rng.gen_range(0.0..TAU);
    (0..size)
        .map(|k| {
            let ang = phase + TAU * (k as f64 + rng.gen_range(-0.3..0.3)) / size as f64;
            C64::from_polar(radius * rng.gen_range(0.6..1.0), ang)
        })
        .collect()
}

fn accept(points: Vec<ExtPoint>) -> Result<FiniteDomain> {
    let d = FiniteDomain::new(points)?;
    let diag = validate(&d.hull);
    if !diag.euler_ok || !diag.theta_ok || diag.max_vertex_residual > 1e-8 {
        return Err(Error::Degenerate("hull failed validation".into()));
    }
    Ok(d)
}

pub fn annulus_points(s: f64, n: usize, twist: Option<f64>, aligned: bool) -> Vec<ExtPoint> {
    let twist = if aligned { 0.0 } else { twist.unwrap_or(PI / n as f64) };
    let r = s.exp();
    let inner = (0..n).map(|k| ExtPoint::Finite(C64::from_polar(1.0, TAU * k as f64 / n as f64)));
    let outer = (0..n).map(|k| ExtPoint::Finite(C64::from_polar(r, TAU * k as f64 / n as f64 + twist)));
    inner.chain(outer).collect()
}

/// Whether the dome has a closed geodesic shorter than 2 asinh 1.
pub fn has_short_geodesic(d: &FiniteDomain, max_edges: usize) -> bool {
    let Ok(s) = develop(&d.hull) else { return false };
    closed_geodesics(&s, F_SUP, max_edges, 200_000).geodesics.iter().any(|g| g.length < F_SUP)
}

pub fn gen_config(family: &Family, seed: u64) -> Result<FiniteDomain> {
    match family {
        Family::Explicit { points } => accept(points.clone()),
        Family::Annulus { s, n, twist, aligned } => {
            if !(*s > 0.0) || *n < 3 {
                return Err(Error::Config("annulus needs s > 0 and n ≥ 3".into()));
            }
            accept(annulus_points(*s, *n, *twist, *aligned))
        }
        Family::RandomN { n } => {
            if *n < 3 {
                return Err(Error::Config("random-n needs n ≥ 3".into()));
            }
            for attempt in 0..RESAMPLE_BUDGET {
                let mut rng = rng_for(seed, attempt);
                let pts: Vec<ExtPoint> = (0..*n).map(|_| uniform_sphere(&mut rng)).collect();
                if !separated(&pts) {
                    continue;
                }
                if let Ok(d) = accept(pts) {
                    return Ok(d);
                }
            }
            Err(Error::Config(format!("random-{n}: resampling budget exhausted")))
        }
        Family::TwoCluster { radius, size } => {
            if !(*radius > 0.0 && *radius < 1.0) || !(2..=16).contains(size) {
                return Err(Error::Config("two-cluster needs 0 < radius < 1 and 2 ≤ size ≤ 16".into()));
            }
            for attempt in 0..RESAMPLE_BUDGET {
                let mut rng = rng_for(seed, attempt);
                let a = cluster(&mut rng, *radius, *size);
                // Antipodal copy z ↦ −1/z̄ of a second cluster sits around ∞.
                let b = cluster(&mut rng, *radius, *size);
                let pts: Vec<ExtPoint> = a
                    .into_iter()
                    .map(ExtPoint::Finite)
                    .chain(b.into_iter().map(|z| ExtPoint::Finite(-1.0 / z.conj())))
                    .collect();
                let Ok(d) = accept(pts) else { continue };
                if *radius > 0.03 + 1e-12 || has_short_geodesic(&d, 2 * size + 2) {
                    return Ok(d);
                }
            }
            Err(Error::Config("two-cluster: no short geodesic within the resampling budget".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_six() {
        let d = gen_config(&Family::RandomN { n: 6 }, 7).unwrap();
        assert_eq!(d.points.len(), 6);
        assert!(validate(&d.hull).euler_ok);
        let again = gen_config(&Family::RandomN { n: 6 }, 7).unwrap();
        assert_eq!(d.points, again.points);
    }

    #[test]
    fn two_cluster_is_thin() {
        let d = gen_config(&Family::TwoCluster { radius: 0.03, size: 5 }, 3).unwrap();
        assert!(has_short_geodesic(&d, 12));
    }

    #[test]
    fn annulus_antiprism() {
        let d = gen_config(&Family::Annulus { s: 2.0, n: 8, twist: Some(PI / 8.0), aligned: false }, 0).unwrap();
        assert_eq!(d.points.len(), 16);
        let h = &d.hull;
        let tri = h.faces.iter().filter(|f| f.verts.len() == 3).count();
        let caps = h.faces.iter().filter(|f| f.verts.len() == 8).count();
        assert_eq!((tri, caps, h.faces.len()), (16, 2, 18));
        assert_eq!(h.edges.len(), 32);
        // Aligned placement merges the lateral triangles into quadrilaterals.
        let d = gen_config(&Family::Annulus { s: 2.0, n: 8, twist: None, aligned: true }, 0).unwrap();
        assert_eq!(d.hull.faces.iter().filter(|f| f.verts.len() == 4).count(), 8);
    }

    #[test]
    fn serde_tags() {
        let f: Family = serde_json::from_str(r#"{"family":"two-cluster","radius":0.1,"size":4}"#).unwrap();
        assert_eq!(f, Family::TwoCluster { radius: 0.1, size: 4 });
        let f: Family = serde_json::from_str(r#"{"family":"annulus","s":2,"n":8}"#).unwrap();
        assert!(matches!(f, Family::Annulus { aligned: false, twist: None, .. }));
    }
}
