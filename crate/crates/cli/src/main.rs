use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use domeforge::confmetric::{
    annulus_beta, annulus_closed_forms, annulus_poincare_density, annulus_qh_density, beta, bp_envelope_from,
    qh_density, tau_distance_bracket, DEFAULT_SCHEDULE,
};
use domeforge::dome::{geodesic_distance, DEFAULT_BUDGET};
use domeforge::formulas::constants;
use domeforge::hull::validate;
use domeforge::npr::{svg_export, Support, Viewport};
use domeforge::suites::{annulus_run, run_suite, SuiteConfig, SUITES};
use domeforge::{gen_config, DomePoint, Domain, ExtPoint, Family, FiniteDomain, C64};

#[derive(Parser)]
#[command(name = "domeforge", version, about = "Domes, Thurston and quasihyperbolic metrics of finitely punctured spheres")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON input file (stdin when absent).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for generated configurations and suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ideal convex hull of the points.
    Hull,
    /// Nearest point retraction of z.
    Retract,
    /// Quasihyperbolic, β, Poincaré bounds and Thurston densities at z.
    Metric {
        /// Evaluate at every point of `zs` and write CSV.
        #[arg(long)]
        sweep: bool,
    },
    /// Intrinsic distance between two dome points.
    DomeDist,
    /// Bracket on the Thurston distance between z and w.
    TauDist,
    /// Round annulus closed forms and finite approximations.
    Annulus,
    /// Table of constants.
    Constants,
    /// SVG drawing of the cell decomposition.
    Svg,
    /// Run a verification suite.
    Verify {
        /// Suite name, used when no config file is given.
        #[arg(long)]
        suite: Option<String>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Input {
    points: Option<Vec<ExtPoint>>,
    family: Option<Family>,
    z: Option<ExtPoint>,
    w: Option<ExtPoint>,
    zs: Option<Vec<ExtPoint>>,
    a: Option<DomePoint>,
    b: Option<DomePoint>,
    budget: Option<usize>,
    schedule: Option<Vec<usize>>,
    annulus: Option<AnnulusInput>,
    viewport: Option<Viewport>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnulusInput {
    s: f64,
    #[serde(default)]
    n: Option<Vec<usize>>,
    #[serde(default)]
    twist: Option<f64>,
    #[serde(default)]
    aligned: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(String),
    Violation,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn bad(msg: &str) -> Failure {
    Failure::Input(msg.into())
}

fn read_text(path: &Option<PathBuf>) -> Res<String> {
    let mut s = String::new();
    match path {
        Some(p) => s = std::fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => {
            std::io::stdin().read_to_string(&mut s)?;
        }
    }
    Ok(s)
}

fn read_input(cli: &Cli) -> Res<Input> {
    Ok(serde_json::from_str(&read_text(&cli.config)?)?)
}

fn finite_domain(cli: &Cli, inp: &Input) -> Res<FiniteDomain> {
    match (&inp.points, &inp.family) {
        (Some(p), None) => Ok(FiniteDomain::new(p.clone())?),
        (None, Some(f)) => Ok(gen_config(f, cli.seed.unwrap_or(1))?),
        _ => Err(bad("give exactly one of \"points\" or \"family\"")),
    }
}

fn domain(cli: &Cli, inp: &Input) -> Res<Domain> {
    Ok(Domain::from_finite(finite_domain(cli, inp)?)?)
}

fn finite_z(p: Option<ExtPoint>, name: &str) -> Res<C64> {
    p.ok_or_else(|| bad(&format!("missing \"{name}\"")))?
        .finite()
        .ok_or_else(|| bad(&format!("\"{name}\" must be finite")))
}

fn emit(cli: &Cli, text: &str) -> Res<()> {
    match &cli.out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                o.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn cj(z: C64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn emit_json(cli: &Cli, v: &Value) -> Res<()> {
    emit(cli, &serde_json::to_string_pretty(v)?)
}

fn hull(cli: &Cli) -> Res<()> {
    let d = finite_domain(cli, &read_input(cli)?)?;
    let h = &d.hull;
    let faces: Vec<Value> = h.faces.iter().map(|f| json!({"verts": f.verts, "circle": f.support()})).collect();
    let edges: Vec<Value> =
        h.edges.iter().map(|e| json!({"v": e.v, "left": e.left, "right": e.right, "theta": e.theta})).collect();
    emit_json(
        cli,
        &json!({"vertices": h.vertices, "faces": faces, "edges": edges, "doubled": h.doubled, "diagnostics": validate(h)}),
    )
}

fn retract(cli: &Cli) -> Res<()> {
    let inp = read_input(cli)?;
    let d = domain(cli, &inp)?;
    let z = finite_z(inp.z, "z")?;
    let r = d.retract(ExtPoint::Finite(z))?;
    let support = match r.support {
        Support::Face(f) => json!({"face": f}),
        Support::Edge(e) => json!({"edge": e}),
    };
    emit_json(
        cli,
        &json!({
            "foot": {"face": r.foot.face, "coords": cj(r.foot.w)},
            "support": support,
            "ambient": {"x": cj(r.ambient.x), "t": r.ambient.t},
            "h": r.h,
            "tau": 1.0 / r.h,
        }),
    )
}

struct MetricRow {
    z: C64,
    q: f64,
    beta: f64,
    bounds: (f64, f64),
    rho_exact: Option<f64>,
    tau: Option<f64>,
}

fn metric_at(d: Option<&Domain>, s: Option<f64>, z: C64) -> Res<MetricRow> {
    match (d, s) {
        (Some(d), _) => {
            let (q, b) = (qh_density(d.points(), z)?, beta(d.points(), z)?);
            Ok(MetricRow { z, q, beta: b, bounds: bp_envelope_from(q, b), rho_exact: None, tau: Some(d.tau(z)?) })
        }
        (None, Some(s)) => {
            let (q, b) = (annulus_qh_density(s, z)?, annulus_beta(s, z)?);
            let rho = annulus_poincare_density(s, z)?;
            Ok(MetricRow { z, q, beta: b, bounds: bp_envelope_from(q, b), rho_exact: Some(rho), tau: None })
        }
        _ => unreachable!(),
    }
}

fn metric(cli: &Cli, sweep: bool) -> Res<()> {
    let inp = read_input(cli)?;
    let s = inp.annulus.as_ref().map(|a| a.s);
    let d = if s.is_some() {
        if inp.points.is_some() || inp.family.is_some() {
            return Err(bad("give either \"annulus\" or a point set, not both"));
        }
        None
    } else {
        Some(domain(cli, &inp)?)
    };
    if sweep {
        let zs = inp.zs.as_ref().ok_or_else(|| bad("--sweep needs \"zs\""))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["re", "im", "q", "beta", "rho_lower", "rho_upper", "rho_exact", "tau"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for (k, p) in zs.iter().enumerate() {
            let z = finite_z(Some(*p), &format!("zs[{k}]"))?;
            let r = metric_at(d.as_ref(), s, z)?;
            w.write_record([
                r.z.re.to_string(),
                r.z.im.to_string(),
                r.q.to_string(),
                r.beta.to_string(),
                r.bounds.0.to_string(),
                r.bounds.1.to_string(),
                opt(r.rho_exact),
                opt(r.tau),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Input(e.to_string()))?;
        return emit(cli, &String::from_utf8(bytes)?);
    }
    let r = metric_at(d.as_ref(), s, finite_z(inp.z, "z")?)?;
    let mut v = json!({"z": cj(r.z), "q": r.q, "beta": r.beta, "rho_bounds": [r.bounds.0, r.bounds.1]});
    if let Some(rho) = r.rho_exact {
        v["rho_exact"] = json!(rho);
    }
    if let Some(t) = r.tau {
        v["tau"] = json!(t);
    }
    emit_json(cli, &v)
}

fn dome_dist(cli: &Cli) -> Res<()> {
    let inp = read_input(cli)?;
    let d = domain(cli, &inp)?;
    let (a, b) = (inp.a.ok_or_else(|| bad("missing \"a\""))?, inp.b.ok_or_else(|| bad("missing \"b\""))?);
    let s = &d.surface;
    for p in [a, b] {
        if p.face >= s.n_faces() || !s.contains(p.face, p.w, 1e-9) {
            return Err(bad(&format!("dome point {p:?} is not in its face")));
        }
    }
    let g = geodesic_distance(s, &a, &b, inp.budget.unwrap_or(DEFAULT_BUDGET));
    let crossings: Vec<Value> =
        g.path.crossings.iter().map(|c| json!({"edge": c.edge, "theta": c.theta, "angle": c.angle})).collect();
    emit_json(
        cli,
        &json!({"distance": g.distance, "certified": g.certified, "expansions": g.expansions, "crossings": crossings}),
    )
}

fn tau_dist(cli: &Cli) -> Res<()> {
    let inp = read_input(cli)?;
    let d = domain(cli, &inp)?;
    let (z, w) = (finite_z(inp.z, "z")?, finite_z(inp.w, "w")?);
    let schedule = inp.schedule.clone().unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
    emit_json(cli, &serde_json::to_value(tau_distance_bracket(&d, z, w, &schedule)?)?)
}

fn annulus(cli: &Cli) -> Res<()> {
    let inp = read_input(cli)?;
    let a = inp.annulus.ok_or_else(|| bad("missing \"annulus\": {s, n}"))?;
    let cf = annulus_closed_forms(a.s)?;
    let mut runs = Vec::new();
    for n in a.n.unwrap_or_default() {
        let r = annulus_run(a.s, n, a.twist, a.aligned)?;
        runs.push(json!({"n": r.n, "dome_core": r.dome_core, "tau_core": r.tau_core, "intersection": r.intersection}));
    }
    emit_json(cli, &json!({"closed_forms": cf, "runs": runs}))
}

fn svg(cli: &Cli) -> Res<()> {
    let inp = read_input(cli)?;
    let d = domain(cli, &inp)?;
    emit(cli, &svg_export(&d, &inp.viewport.unwrap_or_default()))
}

fn verify(cli: &Cli, suite: &Option<String>) -> Res<()> {
    let mut cfg: SuiteConfig = match (&cli.config, suite) {
        (Some(_), _) => serde_json::from_str(&read_text(&cli.config)?)?,
        (None, Some(s)) => SuiteConfig::new(s),
        (None, None) => return Err(bad(&format!("give --config or --suite (one of {})", SUITES.join(", ")))),
    };
    if let Some(s) = suite {
        cfg.suite = s.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let rep = run_suite(&cfg)?;
    emit(cli, &serde_json::to_string_pretty(&rep)?)?;
    eprintln!(
        "{}: {} ({} records, {} violations, {:.2}s)",
        rep.suite,
        if rep.pass { "pass" } else { "FAIL" },
        rep.records.len(),
        rep.failures().count(),
        rep.wall_time
    );
    if rep.pass {
        Ok(())
    } else {
        Err(Failure::Violation)
    }
}

fn run(cli: &Cli) -> Res<()> {
    match &cli.cmd {
        Cmd::Hull => hull(cli),
        Cmd::Retract => retract(cli),
        Cmd::Metric { sweep } => metric(cli, *sweep),
        Cmd::DomeDist => dome_dist(cli),
        Cmd::TauDist => tau_dist(cli),
        Cmd::Annulus => annulus(cli),
        Cmd::Constants => emit_json(cli, &serde_json::to_value(constants())?),
        Cmd::Svg => svg(cli),
        Cmd::Verify { suite } => verify(cli, suite),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
