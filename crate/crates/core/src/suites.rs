//! Named verification suites and their machine-readable reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use crate::confmetric::{
    annulus_beta, annulus_closed_forms, annulus_poincare_density, annulus_qh_density, bp_envelope_from, curve_length,
    mm_demo, qh_density, tau_distance_bracket, DEFAULT_SCHEDULE,
};
use crate::dome::{
    closed_geodesics, develop, geodesic_of_cycle, injectivity_radius, intersection_number, shoot, DomePoint,
    DomeSurface, DEFAULT_BUDGET,
};
use crate::error::{Error, Result};
use crate::formulas::{arc_angle_lower, constants, g, isosceles_max_perimeter, r_bound, ASINH1, F_SUP};
use crate::gen::{annulus_points, gen_config, Family};
use crate::geom::{ExtPoint, C64};
use crate::hull::{validate, FiniteDomain};
use crate::npr::{pullback_path, Domain};

pub const SUITES: [&str; 10] = [
    "constants",
    "vertex-sums",
    "finiteptoh",
    "thick",
    "thin",
    "sandwich",
    "pointwise",
    "annulus",
    "mmdemo",
    "appendix",
];

/// Sampled dome points must have at least this injectivity radius.
pub const MIN_INJ: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub angle: f64,
    pub length_rel: f64,
    pub sandwich_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { angle: 1e-8, length_rel: 1e-5, sandwich_slack: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of configurations (hulls) the suite draws.
    #[serde(default)]
    pub configs: Option<usize>,
    /// Number of samples (per configuration where that applies).
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub family: Option<Family>,
    /// Vertex counts per circle for the annulus suite.
    #[serde(default)]
    pub n_schedule: Option<Vec<usize>>,
}

fn default_seed() -> u64 {
    1
}

impl SuiteConfig {
    pub fn new(suite: &str) -> Self {
        SuiteConfig {
            suite: suite.into(),
            seed: default_seed(),
            configs: None,
            samples: None,
            tolerances: Tolerances::default(),
            family: None,
            n_schedule: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub input: String,
    pub measured: f64,
    pub bound: f64,
    /// Signed slack; negative means violated.
    pub margin: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// measured ≤ bound.
    fn at_most(check: &str, input: String, measured: f64, bound: f64) -> Self {
        Self::with_margin(check, input, measured, bound, bound - measured)
    }

    /// measured ≥ bound.
    fn at_least(check: &str, input: String, measured: f64, bound: f64) -> Self {
        Self::with_margin(check, input, measured, bound, measured - bound)
    }

    /// |measured − target| ≤ tol.
    fn close(check: &str, input: String, measured: f64, target: f64, tol: f64) -> Self {
        Self::with_margin(check, input, measured, target, tol - (measured - target).abs())
    }

    fn with_margin(check: &str, input: String, measured: f64, bound: f64, margin: f64) -> Self {
        // NaN margins fail.
        let pass = margin >= 0.0;
        CheckRecord { check: check.into(), input, measured, bound, margin, pass }
    }

    fn failed(check: &str, input: String, why: &Error) -> Self {
        CheckRecord {
            check: check.into(),
            input: format!("{input}; error: {why}"),
            measured: f64::NAN,
            bound: f64::NAN,
            margin: f64::NAN,
            pass: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub records: Vec<CheckRecord>,
    pub notes: Vec<String>,
    /// Kept out of the JSON so reports are byte-identical across runs.
    #[serde(skip)]
    pub wall_time: f64,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Smallest margin over all records.
    pub fn worst_margin(&self) -> f64 {
        self.records.iter().map(|r| r.margin).fold(f64::INFINITY, |a, b| if b.is_nan() { f64::NAN } else { a.min(b) })
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Worker pool honouring DOMEFORGE_THREADS.
fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DOMEFORGE_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("DOMEFORGE_THREADS={v:?} is not a count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    if !SUITES.contains(&cfg.suite.as_str()) {
        return Err(Error::Config(format!("unknown suite {:?}; expected one of {}", cfg.suite, SUITES.join(", "))));
    }
    let t0 = Instant::now();
    let (records, notes) = pool()?.install(|| match cfg.suite.as_str() {
        "constants" => Ok(suite_constants()),
        "vertex-sums" => suite_vertex_sums(cfg),
        "finiteptoh" => suite_finiteptoh(cfg),
        "thick" => suite_thick(cfg),
        "thin" => suite_thin(cfg),
        "sandwich" => suite_sandwich(cfg),
        "pointwise" => suite_pointwise(cfg),
        "annulus" => suite_annulus(cfg),
        "mmdemo" => suite_mmdemo(),
        "appendix" => Ok(suite_appendix(cfg)),
        _ => unreachable!(),
    })?;
    Ok(VerifyReport {
        suite: cfg.suite.clone(),
        seed: cfg.seed,
        pass: records.iter().all(|r| r.pass),
        records,
        notes,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

type Outcome = (Vec<CheckRecord>, Vec<String>);

fn suite_constants() -> Outcome {
    let c = constants();
    let table = [
        ("G(asinh 1)", c.g_asinh1, 0.838682, 1e-5),
        ("K0", c.k0, 7.1219, 1e-3),
        ("K", c.k_qi, 8.49, 1e-2),
        ("K'", c.kp, 4.56, 1e-2),
        ("K0'", c.k0p, 8.05, 1e-2),
        ("Phi", c.phi, 0.4084, 1e-3),
        ("k", c.k, 5.76, 1e-2),
        ("m", c.m, 2.69, 1e-2),
    ];
    let records = table
        .iter()
        .map(|&(name, v, target, tol)| CheckRecord::close(name, format!("tol={tol:e}"), v, target, tol))
        .collect();
    (records, vec![])
}

/// Random-n family over n ∈ [4, 12], unless the config names a family.
fn hull_for(cfg: &SuiteConfig, i: usize) -> Result<FiniteDomain> {
    let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
    match &cfg.family {
        Some(f) => gen_config(f, seed),
        None => {
            let n = rng(cfg.seed, 1 << 32 | i as u64).gen_range(4..=12);
            gen_config(&Family::RandomN { n }, seed)
        }
    }
}

fn domains(cfg: &SuiteConfig, count: usize) -> Result<Vec<Domain>> {
    (0..count).into_par_iter().map(|i| Domain::from_finite(hull_for(cfg, i)?)).collect()
}

/// The same configuration up to a Möbius map, with its first point sent to ∞.
pub fn with_point_at_infinity(d: &FiniteDomain) -> Result<FiniteDomain> {
    let Some(p0) = d.points.iter().find_map(|p| p.finite()) else {
        return FiniteDomain::new(d.points.clone());
    };
    if d.points.iter().any(|p| p.is_inf()) {
        return FiniteDomain::new(d.points.clone());
    }
    let pts = d
        .points
        .iter()
        .map(|p| match p.finite() {
            Some(z) if z == p0 => ExtPoint::Inf,
            Some(z) => ExtPoint::Finite(1.0 / (z - p0)),
            None => ExtPoint::Finite(C64::new(0.0, 0.0)),
        })
        .collect();
    FiniteDomain::new(pts)
}

fn suite_vertex_sums(cfg: &SuiteConfig) -> Result<Outcome> {
    let count = cfg.configs.unwrap_or(50);
    let records: Vec<Vec<CheckRecord>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let d = match hull_for(cfg, i) {
                Ok(d) => d,
                Err(e) => return vec![CheckRecord::failed("hull", format!("config={i}"), &e)],
            };
            let diag = validate(&d.hull);
            let input = format!("config={i} n={}", d.points.len());
            let total: f64 = d.hull.edges.iter().map(|e| e.theta).sum();
            let n = d.points.len() as f64;
            vec![
                CheckRecord::at_most("vertex sum = 2π", input.clone(), diag.max_vertex_residual, cfg.tolerances.angle),
                CheckRecord::at_most("Σθ = π|X|", input, (total - PI * n).abs(), 10.0 * cfg.tolerances.angle),
            ]
        })
        .collect();
    Ok((records.into_iter().flatten().collect(), vec![]))
}

/// A dome point within hyperbolic distance 2 of a face centre, with injectivity radius ≥ MIN_INJ.
fn sample_point(s: &DomeSurface, r: &mut ChaCha8Rng) -> Option<(DomePoint, f64)> {
    for _ in 0..50 {
        let face = r.gen_range(0..s.n_faces());
        let centre = DomePoint { face, w: s.face_centre(face) };
        let x = shoot(s, &centre, r.gen_range(0.0..TAU), r.gen_range(0.0..2.0)).end();
        let (inj, certified) = injectivity_radius(s, &x, DEFAULT_BUDGET);
        if certified && inj >= MIN_INJ {
            return Some((x, inj));
        }
    }
    None
}

fn suite_finiteptoh(cfg: &SuiteConfig) -> Result<Outcome> {
    let hulls = cfg.configs.unwrap_or(10).max(1);
    let per = cfg.samples.unwrap_or(10);
    let ds = domains(cfg, hulls)?;
    let tol = cfg.tolerances.length_rel;
    let records = (0..hulls * per)
        .into_par_iter()
        .map(|k| {
            let (h, j) = (k / per, k % per);
            let d = &ds[h];
            let s = &d.surface;
            let mut r = rng(cfg.seed, k as u64);
            let input = format!("config={h} path={j}");
            for _ in 0..20 {
                let Some((x, _)) = sample_point(s, &mut r) else { break };
                let path = shoot(s, &x, r.gen_range(0.0..TAU), r.gen_range(0.5..4.0));
                if intersection_number(s, &path).is_err() {
                    continue;
                }
                return match pullback_path(d, &path) {
                    Ok(pb) => {
                        let rel = (pb.l_tau_quadrature - pb.l_tau_structural).abs() / pb.l_tau_structural;
                        CheckRecord::at_most(
                            "l_h + i = τ-length of pullback",
                            format!("{input} l_h={:.6} i={:.6}", path.length, path.intersection),
                            rel,
                            tol,
                        )
                    }
                    Err(e) => CheckRecord::failed("pullback", input, &e),
                };
            }
            CheckRecord::failed("sample", input, &Error::Degenerate("no transverse path sampled".into()))
        })
        .collect();
    Ok((records, vec![]))
}

fn suite_thick(cfg: &SuiteConfig) -> Result<Outcome> {
    let hulls = cfg.configs.unwrap_or(20).max(1);
    let total = cfg.samples.unwrap_or(500);
    let ds = domains(cfg, hulls)?;
    let records = (0..total)
        .into_par_iter()
        .map(|k| {
            let h = k % hulls;
            let s = &ds[h].surface;
            let mut r = rng(cfg.seed, k as u64);
            let input = format!("config={h} arc={k}");
            let Some((x, inj)) = sample_point(s, &mut r) else {
                return CheckRecord::failed("sample", input, &Error::Degenerate("no thick point sampled".into()));
            };
            // Arcs through x: part before and part after, total length ≤ G(inj(x)).
            let len = g(inj) * r.gen_range(0.5..1.0);
            let split = r.gen_range(0.0..1.0);
            let dir = r.gen_range(0.0..TAU);
            let fwd = shoot(s, &x, dir, len * split);
            let back = shoot(s, &x, dir + PI, len * (1.0 - split));
            let i = fwd.intersection + back.intersection;
            CheckRecord::at_most(
                "i(α) ≤ 2π",
                format!("{input} inj={inj:.6} l_h={:.6}", fwd.length + back.length),
                i,
                TAU + 1e-6,
            )
        })
        .collect();
    Ok((records, vec![]))
}

fn suite_thin(cfg: &SuiteConfig) -> Result<Outcome> {
    let seeds = cfg.configs.unwrap_or(4) as u64;
    let phi = constants().phi;
    let mut jobs = Vec::new();
    for (ri, radius) in [0.3, 0.1, 0.03].into_iter().enumerate() {
        for k in 0..seeds {
            let size = 3 + ((k as usize + ri) % 4);
            jobs.push((radius, size, cfg.seed.wrapping_mul(7919).wrapping_add(100 * ri as u64 + k)));
        }
    }
    let per: Vec<Result<Vec<CheckRecord>>> = jobs
        .par_iter()
        .map(|&(radius, size, seed)| {
            let d = gen_config(&Family::TwoCluster { radius, size }, seed)?;
            let s = develop(&d.hull)?;
            let found = closed_geodesics(&s, F_SUP, 2 * size + 2, 500_000);
            let mut out = Vec::new();
            for gd in found.geodesics.iter().filter(|gd| gd.length < F_SUP) {
                let input = format!("radius={radius} size={size} seed={seed} l={:.6} edges={:?}", gd.length, gd.edges);
                let i = gd.intersection;
                let upper = TAU + 2.0 * (0.5 * gd.length).sinh().atan();
                out.push(CheckRecord::at_least("i(γ) ≥ 2π", input.clone(), i, TAU - 1e-6));
                out.push(CheckRecord::at_most("i(γ) ≤ 2π + 2atan(sinh(l/2))", input.clone(), i, upper + 1e-6));
                let max = gd.angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = gd.angles.iter().cloned().fold(f64::INFINITY, f64::min);
                out.push(CheckRecord::at_least("max crossing angle ≥ asin(4/5)", input.clone(), max, 0.8f64.asin() - 1e-6));
                out.push(CheckRecord::at_least("crossing angles ≥ Φ", input, min, phi - 1e-6));
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per {
        records.extend(r?);
    }
    let found = records.len() / 4;
    let notes = vec![format!("{found} closed geodesics shorter than 2 asinh 1 over {} configurations", jobs.len())];
    records.push(CheckRecord::at_least("short geodesics found", format!("configs={}", jobs.len()), found as f64, 1.0));
    Ok((records, notes))
}

/// A planar point of the box [−2, 2]² at chordal distance ≥ 0.05 from X.
fn sample_plane(d: &Domain, r: &mut ChaCha8Rng, half: f64) -> C64 {
    loop {
        let z = C64::new(r.gen_range(-half..half), r.gen_range(-half..half));
        if d.finite.chordal_gap(ExtPoint::Finite(z)) >= 0.05 {
            return z;
        }
    }
}

fn suite_sandwich(cfg: &SuiteConfig) -> Result<Outcome> {
    let hulls = cfg.configs.unwrap_or(20).max(1);
    let per = cfg.samples.unwrap_or(50);
    let ds = domains(cfg, hulls)?;
    let c = constants();
    let slack = cfg.tolerances.sandwich_slack;
    let results: Vec<(Vec<CheckRecord>, bool)> = (0..hulls * per)
        .into_par_iter()
        .map(|k| {
            let (h, j) = (k / per, k % per);
            let d = &ds[h];
            let mut r = rng(cfg.seed, k as u64);
            let z = sample_plane(d, &mut r, 2.0);
            let w = sample_plane(d, &mut r, 2.0);
            let input = format!("config={h} pair={j} z={:.6}{:+.6}i w={:.6}{:+.6}i", z.re, z.im, w.re, w.im);
            match tau_distance_bracket(d, z, w, &DEFAULT_SCHEDULE) {
                Ok(b) => {
                    let input = format!("{input} dome_certified={}", b.dome_certified);
                    (
                        vec![
                            CheckRecord::at_most("lower ≤ upper", input.clone(), b.lower, b.upper),
                            CheckRecord::at_most("upper ≤ K·d_dome + K0", input, b.upper, c.k_qi * b.dome + c.k0 + slack),
                        ],
                        b.converged,
                    )
                }
                Err(e) => (vec![CheckRecord::failed("bracket", input, &e)], false),
            }
        })
        .collect();
    let total = results.len();
    let unconverged: Vec<usize> = results.iter().enumerate().filter(|(_, r)| !r.1).map(|(k, _)| k).collect();
    let mut records: Vec<CheckRecord> = results.into_iter().flat_map(|r| r.0).collect();
    let frac = unconverged.len() as f64 / total.max(1) as f64;
    records.push(CheckRecord::with_margin(
        "unrefined pairs < 10%",
        format!("pairs={total}"),
        frac,
        0.1,
        0.1 - frac - f64::EPSILON,
    ));
    let notes = vec![format!("pairs with gap above 5% after refinement: {unconverged:?}")];
    Ok((records, notes))
}

fn suite_pointwise(cfg: &SuiteConfig) -> Result<Outcome> {
    let hulls = cfg.configs.unwrap_or(20).max(1);
    let total = cfg.samples.unwrap_or(10_000);
    // The comparison holds for domains in the plane, so ∞ joins X.
    let ds: Vec<Domain> = (0..hulls)
        .into_par_iter()
        .map(|i| Domain::from_finite(with_point_at_infinity(&hull_for(cfg, i)?)?))
        .collect::<Result<_>>()?;
    let mut records: Vec<CheckRecord> = (0..total)
        .into_par_iter()
        .map(|k| {
            let h = k % hulls;
            let d = &ds[h];
            let mut r = rng(cfg.seed, k as u64);
            // Half the samples near a point of X, spread over scales.
            let z = if k % 2 == 0 {
                sample_plane(d, &mut r, 3.0)
            } else {
                let p = d.points()[r.gen_range(0..d.points().len())];
                match p.finite() {
                    Some(p) => p + C64::from_polar(10f64.powf(r.gen_range(-4.0..0.0)), r.gen_range(0.0..TAU)),
                    None => C64::from_polar(10f64.powf(r.gen_range(0.5..4.0)), r.gen_range(0.0..TAU)),
                }
            };
            let input = format!("config={h} z={:.9}{:+.9}i", z.re, z.im);
            let (tau, q) = match (d.tau(z), qh_density(d.points(), z)) {
                (Ok(t), Ok(q)) => (t, q),
                (Err(e), _) | (_, Err(e)) => return CheckRecord::failed("½τ ≤ q ≤ τ", input, &e),
            };
            let margin = (q - 0.5 * tau).min(tau - q) + 1e-9 * tau.max(1.0);
            CheckRecord::with_margin("½τ ≤ q ≤ τ", input, q, tau, margin)
        })
        .collect();
    let shells = [0.5, 1.0, 2.0, 4.0, 8.0];
    let per = 200;
    let ann: Vec<CheckRecord> = (0..shells.len() * per)
        .into_par_iter()
        .flat_map_iter(|k| {
            let s: f64 = shells[k / per];
            let mut r = rng(cfg.seed ^ 0xa5a5, k as u64);
            let z = C64::from_polar(r.gen_range(1e-3..s - 1e-3).exp(), r.gen_range(0.0..TAU));
            let input = format!("s={s} z={:.9}{:+.9}i", z.re, z.im);
            let vals = (|| Ok::<_, Error>((annulus_poincare_density(s, z)?, annulus_qh_density(s, z)?, annulus_beta(s, z)?)))();
            match vals {
                Ok((rho, q, beta)) => {
                    let (lo, up) = bp_envelope_from(q, beta);
                    let eps = 1e-9 * rho;
                    vec![
                        CheckRecord::with_margin(
                            "ρ within BP envelope",
                            input.clone(),
                            rho,
                            up,
                            (rho - lo).min(up - rho) + eps,
                        ),
                        CheckRecord::at_most("ρ ≤ 2q", input, rho, 2.0 * q + eps),
                    ]
                }
                Err(e) => vec![CheckRecord::failed("annulus densities", input, &e)],
            }
        })
        .collect();
    records.extend(ann);
    Ok((records, vec![]))
}

/// Closed edge walk through the faces meeting both circles of an annulus configuration.
pub fn annulus_core_cycle(s: &DomeSurface, inner_radius: f64, outer_radius: f64) -> Option<(usize, Vec<usize>)> {
    let mid = (inner_radius * outer_radius).sqrt();
    let inner = |v: usize| s.poly.vertices[v].finite().map_or(false, |z| z.norm() < mid);
    let band = |e: usize| {
        let [a, b] = s.poly.edges[e].v;
        inner(a) != inner(b)
    };
    let f0 = (0..s.n_faces()).find(|&f| s.charts[f].edges.iter().filter(|&&e| band(e)).count() == 2)?;
    let (mut face, mut last) = (f0, usize::MAX);
    let mut walk = Vec::new();
    loop {
        let e = *s.charts[face].edges.iter().find(|&&e| band(e) && e != last)?;
        walk.push(e);
        last = e;
        face = s.poly.edges[e].other_face(face);
        if face == f0 {
            return Some((f0, walk));
        }
        if walk.len() > s.poly.edges.len() {
            return None;
        }
    }
}

pub struct AnnulusRun {
    pub n: usize,
    pub dome_core: f64,
    pub tau_core: f64,
    pub intersection: f64,
}

pub fn annulus_run(s: f64, n: usize, twist: Option<f64>, aligned: bool) -> Result<AnnulusRun> {
    let d = Domain::new(annulus_points(s, n, twist, aligned))?;
    let (f0, walk) = annulus_core_cycle(&d.surface, 1.0, s.exp()).ok_or(Error::Degenerate("no core cycle".into()))?;
    let gd = geodesic_of_cycle(&d.surface, f0, &walk)?.ok_or(Error::Degenerate("core holonomy not hyperbolic".into()))?;
    let rad = (0.5 * s).exp();
    let tau_core = curve_length(|z| d.tau(z), |t| (C64::from_polar(rad, t), rad), 0.0, TAU, 1e-9)?;
    Ok(AnnulusRun { n, dome_core: gd.length, tau_core, intersection: gd.intersection })
}

fn suite_annulus(cfg: &SuiteConfig) -> Result<Outcome> {
    let (s, twist, aligned) = match &cfg.family {
        Some(Family::Annulus { s, twist, aligned, .. }) => (*s, *twist, *aligned),
        Some(_) => return Err(Error::Config("annulus suite needs an annulus family".into())),
        None => (2.0, None, false),
    };
    let ns = cfg.n_schedule.clone().unwrap_or_else(|| vec![8, 16, 32, 64]);
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("n_schedule must be nonempty and increasing".into()));
    }
    let cf = annulus_closed_forms(s)?;
    let stated_tau = TAU + cf.dome_core;
    let runs: Vec<AnnulusRun> = ns.par_iter().map(|&n| annulus_run(s, n, twist, aligned)).collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut notes = Vec::new();
    let err = |v: f64, t: f64| (v / t - 1.0).abs();
    for (k, r) in runs.iter().enumerate() {
        let input = format!("s={s} n={}", r.n);
        let de = err(r.dome_core, cf.dome_core);
        let te = err(r.tau_core, stated_tau);
        if k > 0 {
            let prev = &runs[k - 1];
            records.push(CheckRecord::at_most("dome-core error decreasing", input.clone(), de, err(prev.dome_core, cf.dome_core)));
            records.push(CheckRecord::at_most(
                "τ-core error vs 2π + 2π/sinh(s/2) decreasing",
                input.clone(),
                te,
                err(prev.tau_core, stated_tau),
            ));
        }
        records.push(CheckRecord::at_least("τ-core > 2π", input.clone(), r.tau_core, TAU));
        notes.push(format!(
            "n={}: dome core {:.6} (error {:.3e}), τ core {:.6} (error {:.3e} vs {:.6}; {:.3e} vs 2π coth(s/4) = {:.6}), i(core) {:.6}",
            r.n,
            r.dome_core,
            de,
            r.tau_core,
            te,
            stated_tau,
            err(r.tau_core, cf.tau_core),
            cf.tau_core,
            r.intersection
        ));
    }
    let last = runs.last().unwrap();
    let input = format!("s={s} n={}", last.n);
    records.push(CheckRecord::at_most("dome-core error < 2%", input.clone(), err(last.dome_core, cf.dome_core), 0.02));
    records.push(CheckRecord::at_most("τ-core error vs 2π + 2π/sinh(s/2) < 2%", input, err(last.tau_core, stated_tau), 0.02));
    Ok((records, notes))
}

fn suite_mmdemo() -> Result<Outcome> {
    let mut records = Vec::new();
    for n in 1..=8u32 {
        let m = mm_demo(n)?;
        let input = format!("n={n}");
        records.push(CheckRecord::close("radial ρ-length = 2 asinh 1", input.clone(), m.d_rho_radial, 2.0 * ASINH1, 1e-6));
        records.push(CheckRecord::at_least("radial q-length ≥ n", input, m.d_q_radial, n as f64));
    }
    Ok((records, vec![]))
}

/// Largest perimeter over triangles with side C opposite the angle γ, by
/// scanning the adjacent angle α and refining with golden-section search.
pub fn brute_max_perimeter(c: f64, gamma: f64) -> f64 {
    let perimeter = |alpha: f64| -> f64 {
        // cos γ = −cos α cos β + sin α sin β cosh C, solved for β.
        let (a, b) = (-alpha.cos(), alpha.sin() * c.cosh());
        let rr = a.hypot(b);
        let x = gamma.cos() / rr;
        if x.abs() > 1.0 {
            return f64::NEG_INFINITY;
        }
        let base = b.atan2(a);
        let mut best = f64::NEG_INFINITY;
        for beta in [base + x.acos(), base - x.acos()] {
            if beta > 0.0 && alpha + beta + gamma < PI {
                // sinh a / sin α = sinh C / sin γ
                let k = c.sinh() / gamma.sin();
                best = best.max(c + (k * alpha.sin()).asinh() + (k * beta.sin()).asinh());
            }
        }
        best
    };
    let hi = PI - gamma;
    let steps = 4000;
    let (mut arg, mut best) = (0, f64::NEG_INFINITY);
    for i in 1..steps {
        let v = perimeter(hi * i as f64 / steps as f64);
        if v > best {
            best = v;
            arg = i;
        }
    }
    let (mut lo, mut up) = (hi * (arg.max(1) - 1) as f64 / steps as f64, hi * (arg + 1).min(steps) as f64 / steps as f64);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = up - gr * (up - lo);
        let m2 = lo + gr * (up - lo);
        if perimeter(m1) < perimeter(m2) {
            lo = m1;
        } else {
            up = m2;
        }
    }
    best.max(perimeter(0.5 * (lo + up)))
}

fn suite_appendix(cfg: &SuiteConfig) -> Outcome {
    let total = cfg.samples.unwrap_or(1000);
    let mut records: Vec<CheckRecord> = (0..total)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut r = rng(cfg.seed, k as u64);
            let c = r.gen_range(0.01..5.0);
            let gamma = r.gen_range(0.01..PI - 0.01);
            let input = format!("C={c:.9} γ={gamma:.9}");
            let brute = brute_max_perimeter(c, gamma);
            match isosceles_max_perimeter(c, gamma) {
                Ok(iso) => vec![
                    CheckRecord::at_least("isosceles ≥ brute force", input.clone(), iso, brute - 1e-9),
                    CheckRecord::close("isosceles = brute force", input, iso, brute, 1e-4),
                ],
                Err(e) => vec![CheckRecord::failed("isosceles", input, &e)],
            }
        })
        .collect();
    let below = r_bound(PI / 2.0 - 1e-15);
    let above = r_bound(PI / 2.0 + 1e-15);
    match (below, above) {
        (Ok(b), Ok(a)) => records.push(CheckRecord::close("R continuous at π/2", "θ=π/2±1e-15".into(), a, b, 1e-12)),
        (Err(e), _) | (_, Err(e)) => records.push(CheckRecord::failed("R continuous at π/2", String::new(), &e)),
    }
    for (l, want) in [(0.0, PI), (F_SUP, 0.0)] {
        match arc_angle_lower(l) {
            Ok(v) => records.push(CheckRecord::close("arc angle endpoint exact", format!("L={l}"), v, want, 0.0)),
            Err(e) => records.push(CheckRecord::failed("arc angle endpoint exact", format!("L={l}"), &e)),
        }
    }
    (records, vec![])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_config_error() {
        assert!(matches!(run_suite(&SuiteConfig::new("nope")), Err(Error::Config(_))));
    }

    #[test]
    fn vertex_sums_small_and_deterministic() {
        let mut cfg = SuiteConfig::new("vertex-sums");
        cfg.configs = Some(6);
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert!(a.pass);
        assert!(a.records.iter().all(|r| r.margin > 0.0));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn brute_perimeter_matches_isosceles() {
        for (c, g) in [(1.0, 1.0), (0.2, 2.5), (3.0, 0.3)] {
            let b = brute_max_perimeter(c, g);
            assert!((b - isosceles_max_perimeter(c, g).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn config_defaults() {
        let c: SuiteConfig = serde_json::from_str(r#"{"suite":"thin"}"#).unwrap();
        assert_eq!(c, SuiteConfig::new("thin"));
        assert_eq!(c.tolerances.sandwich_slack, 0.05);
    }
}
