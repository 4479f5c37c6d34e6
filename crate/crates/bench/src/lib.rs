//! Shared fixtures for the benchmarks.

use domeforge::{gen_config, DomePoint, Domain, Family, C64};

pub fn random_domain(n: usize, seed: u64) -> Domain {
    Domain::from_finite(gen_config(&Family::RandomN { n }, seed).unwrap()).unwrap()
}

/// Two face centres on different faces of the dome.
pub fn two_points(d: &Domain) -> (DomePoint, DomePoint) {
    let s = &d.surface;
    let last = s.n_faces() - 1;
    (DomePoint { face: 0, w: s.face_centre(0) }, DomePoint { face: last, w: s.face_centre(last) })
}

/// Points of the plane away from the domain's punctures.
pub fn plane_samples(d: &Domain, k: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(k);
    let mut i = 0u32;
    while out.len() < k {
        i += 1;
        let z = C64::from_polar(0.3 + 0.05 * (i % 37) as f64, 2.399963 * i as f64);
        if d.finite.chordal_gap(domeforge::ExtPoint::Finite(z)) > 0.05 {
            out.push(z);
        }
    }
    out
}
