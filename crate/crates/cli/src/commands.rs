use std::fmt;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use metric_fractals::code_space::{
    build_numeric_lattice, is_ultrafractal, product_structure, CylinderLattice, ImageSet, Membership, ProductPoint,
};
use metric_fractals::formats::{points_to_csv, rational_points_to_csv, svg_scatter};
use metric_fractals::hilbert::{
    embedding_error, hilbert_embedding, negative_type_check, pair_family_check, PairVerdict, Verdict as HilbertVerdict, GRAM_TOL,
};
use metric_fractals::ifs::{attractor_approx, chaos_game, Attractor, AttractorOptions, Ifs};
use metric_fractals::kameyama::{exkam_lattice, exkam_p, kameyama_distance, kameyama_ultra_distance, ExkamPoint, Provenance};
use metric_fractals::line_embed::{ball_hierarchy, choose_alpha, interval_assignment};
use metric_fractals::metric::PointSet;
use metric_fractals::quotient::quotient_report;
use metric_fractals::realization::{Realization, VerifyOptions, ZSpace};
use metric_fractals::scalar::{format_rational, rational_to_f64, Rational};
use metric_fractals::Scalar;
use serde_json::{json, Value};

use crate::inputs::{self, Backend, SpaceExample, System, SystemExample};
use crate::manifest::{tagged, Run, RunManifest, Status};

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Contraction parameter of the Kameyama metric or the ball tree.
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    /// Target Lipschitz constant of conjugated maps.
    #[arg(long, global = true)]
    pub epsilon: Option<String>,
    /// Iterations, word length or tree depth, depending on the command.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Backend::Exact)]
    pub backend: Backend,
    /// Directory for report, manifest and artifacts; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn lambda(&self, default: &str) -> Result<Rational> {
        inputs::rational("lambda", self.lambda.as_deref().unwrap_or(default))
    }

    fn epsilon(&self, default: &str) -> Result<Rational> {
        inputs::rational("epsilon", self.epsilon.as_deref().unwrap_or(default))
    }
}

fn approx(r: &Rational) -> Value {
    json!({ "value": format_rational(r), "approx": rational_to_f64(r) })
}

fn exact_or_sampled<T: Scalar>() -> Provenance {
    if T::EXACT {
        Provenance::Exact
    } else {
        Provenance::Sampled
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct AttractorArgs {
    #[arg(long)]
    pub ifs: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub example: Option<SystemExample>,
    /// Also sample this many chaos-game points.
    #[arg(long)]
    pub chaos: Option<usize>,
    #[arg(long, default_value_t = 800.0)]
    pub size: f64,
}

fn iterate<T: Scalar>(ifs: &Ifs<T>, n: usize, tol: f64) -> Result<Attractor<T>> {
    let first = ifs.fixed_points(tol).points()[0].clone();
    Ok(attractor_approx(ifs, &PointSet::new(vec![first])?, n, &AttractorOptions::default())?)
}

fn attractor_json<T: Scalar>(a: &Attractor<T>, cloud: &PointSet<f64>) -> Value {
    let (lo, hi) = cloud.bounding_box();
    json!({
        "points": a.points.len(),
        "iterations": a.iterations,
        "requested": a.requested,
        "truncated": a.truncated,
        "initial_gap": tagged(a.initial_gap, exact_or_sampled::<T>()),
        "step_bound": tagged(a.certificate, Provenance::CertifiedBound),
        "attractor_bound": tagged(a.attractor_bound, Provenance::CertifiedBound),
        "bounding_box": tagged([lo, hi], exact_or_sampled::<T>()),
    })
}

pub fn attractor(c: &Common, a: &AttractorArgs) -> Result<Run> {
    let n = c.depth.unwrap_or(8);
    let tol = c.tol.unwrap_or(1e-12);
    let (system, label) = inputs::load_system(a.ifs.as_deref(), a.example, c.backend)?;
    let mut m = RunManifest::new("attractor", c.backend.name(), c.seed);
    m.inputs.push(label);
    m.param("depth", n).param("tol", tol);
    let mut files = Vec::new();
    let (mut report, cloud, steps) = match &system {
        System::Exact(ifs) => {
            let att = iterate(ifs, n, tol)?;
            files.push(("attractor_exact.csv".to_string(), rational_points_to_csv(att.points.points())));
            let cloud = att.points.to_f64();
            (attractor_json(&att, &cloud), cloud, att.iterations)
        }
        System::Numeric(ifs) => {
            let att = iterate(ifs, n, tol)?;
            (attractor_json(&att, &att.points), att.points.clone(), att.iterations)
        }
    };
    files.push(("attractor.csv".into(), points_to_csv(&cloud)));
    files.push(("attractor.svg".into(), svg_scatter(&cloud, a.size)));
    if let Some(k) = a.chaos {
        m.param("chaos", k);
        let ifs = system.numeric();
        let start = ifs.fixed_points(tol).points()[0].clone();
        let orbit = chaos_game(&ifs, &start, k, c.seed)?;
        files.push(("chaos.csv".into(), points_to_csv(&orbit)));
        report["chaos"] = json!({ "points": orbit.len(), "provenance": Provenance::Sampled });
    }
    let summary = format!("attractor: {} points after {steps} steps", cloud.len());
    Ok(Run { manifest: m, report, files, status: Status::Ok, summary })
}

#[derive(Args, Clone, Debug, Default)]
pub struct KameyamaArgs {
    #[arg(long)]
    pub ifs: Option<PathBuf>,
    /// `kameyama` uses the symbolic lattice of the complex example.
    #[arg(long, value_enum)]
    pub example: Option<SystemExample>,
    /// JSON list of point pairs, e.g. `[["0", "x_3,1"]]` or `[["(0)", "01(1)"]]`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
}

fn distance_rows<S, P>(
    lattice: &CylinderLattice<S>,
    lambda: &Rational,
    pairs: &[(String, String)],
    parse: impl Fn(&str) -> Result<P>,
    extra: impl Fn(&P, &P, &Rational) -> Result<Value>,
) -> Result<(Vec<Value>, Value, bool)>
where
    S: ImageSet + Membership<P>,
    P: fmt::Debug + PartialEq,
{
    let verdict = is_ultrafractal(lattice);
    let mut all_ok = true;
    let mut rows = Vec::new();
    for (xs, ys) in pairs {
        let (x, y) = (parse(xs)?, parse(ys)?);
        let mut row = json!({ "x": xs, "y": ys });
        match kameyama_distance(lattice, lambda, &x, &y) {
            Ok(d) => {
                row["distance"] = json!({
                    "value": format_rational(&d.value),
                    "approx": rational_to_f64(&d.value),
                    "provenance": d.provenance,
                });
                row["chain"] = json!(d.chain.words);
                if verdict.is_yes() {
                    let u = kameyama_ultra_distance(lattice, lambda, &x, &y)?;
                    row["agree"] = json!(u == d.value);
                    all_ok &= u == d.value;
                    row["ultra"] = tagged(format_rational(&u), Provenance::CertifiedBound);
                }
                let more = extra(&x, &y, &d.value)?;
                if let Value::Object(fields) = more {
                    for (k, v) in fields {
                        if k == "ok" {
                            all_ok &= v == json!(true);
                        }
                        row[k] = v;
                    }
                }
            }
            Err(e) => {
                all_ok = false;
                row["error"] = json!(e.to_string());
            }
        }
        rows.push(row);
    }
    Ok((rows, serde_json::to_value(verdict)?, all_ok))
}

fn no_extra<P>(_: &P, _: &P, _: &Rational) -> Result<Value> {
    Ok(Value::Null)
}

fn default_exkam_pairs() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for k in 0..=n {
            out.push(("0".to_string(), format!("x_{n},{k}")));
        }
    }
    for k in 1..=3 {
        out.push(("x_3,0".to_string(), format!("x_3,{k}")));
    }
    out
}

fn default_address_pairs(alphabet: usize) -> Vec<(String, String)> {
    let mut pts: Vec<String> = (0..alphabet).map(|i| format!("({i})")).collect();
    for i in 0..alphabet {
        for j in (0..alphabet).filter(|&j| j != i) {
            pts.push(format!("{i}({j})"));
        }
    }
    let mut out = Vec::new();
    for (a, x) in pts.iter().enumerate() {
        for y in &pts[a + 1..] {
            out.push((x.clone(), y.clone()));
        }
    }
    out
}

pub fn kameyama(c: &Common, a: &KameyamaArgs) -> Result<Run> {
    let lambda = c.lambda("1/2")?;
    let depth = c.depth.unwrap_or(8);
    let tol = c.tol.unwrap_or(1e-12);
    let symbolic = a.ifs.is_none() && a.example == Some(SystemExample::Kameyama);
    let backend = if symbolic { Backend::Exact } else { c.backend };
    let mut m = RunManifest::new("kameyama", backend.name(), c.seed);
    m.param("lambda", format_rational(&lambda)).param("depth", depth).param("tol", tol);
    let given = match &a.pairs {
        Some(p) => {
            m.inputs.push(p.display().to_string());
            Some(inputs::load_pairs(p)?)
        }
        None => None,
    };
    let (rows, verdict, ok, cylinders, lattice_kind) = if symbolic {
        m.inputs.insert(0, "example:kameyama".into());
        let lattice = exkam_lattice(depth)?;
        let pairs = given.unwrap_or_else(default_exkam_pairs);
        let bracket = |x: &ExkamPoint, y: &ExkamPoint, v: &Rational| -> Result<Value> {
            let (lo, hi) = exkam_p(&lambda, x, y)?;
            let ok = lo <= *v && *v <= hi;
            Ok(json!({ "closed_form": tagged([format_rational(&lo), format_rational(&hi)], Provenance::Exact), "ok": ok }))
        };
        let (r, v, ok) = distance_rows(&lattice, &lambda, &pairs, inputs::parse_exkam, bracket)?;
        (r, v, ok, lattice.len(), "symbolic")
    } else {
        let (system, label) = inputs::load_system(a.ifs.as_deref(), a.example, backend)?;
        m.inputs.insert(0, label);
        match &system {
            System::Exact(ifs) => {
                let lattice = product_structure(ifs, 1, tol)?.lattice(depth)?;
                let pairs = given.unwrap_or_else(|| default_address_pairs(ifs.len()));
                let parse = |s: &str| -> Result<ProductPoint> {
                    let (w, t) = inputs::parse_address(s, ifs.len())?;
                    Ok(ProductPoint::new(w, t, 0))
                };
                let (r, v, ok) = distance_rows(&lattice, &lambda, &pairs, parse, no_extra)?;
                (r, v, ok, lattice.len(), "exact-product")
            }
            System::Numeric(ifs) => {
                let lattice = build_numeric_lattice(ifs, depth, tol)?;
                let pairs = given.unwrap_or_else(|| default_address_pairs(ifs.len()));
                let parse = |s: &str| -> Result<Vec<f64>> {
                    let (w, t) = inputs::parse_address(s, ifs.len())?;
                    Ok(ifs.compose_word(&w).apply(&ifs.maps()[t].fixed_point(tol)))
                };
                let (r, v, ok) = distance_rows(&lattice, &lambda, &pairs, parse, no_extra)?;
                (r, v, ok, lattice.len(), "numeric")
            }
        }
    };
    let report = json!({
        "lambda": approx(&lambda),
        "depth": depth,
        "lattice": { "kind": lattice_kind, "cylinders": cylinders },
        "ultrafractal": verdict,
        "pairs": rows,
    });
    let summary = format!("kameyama: {} pairs on {cylinders} cylinders", report["pairs"].as_array().map_or(0, Vec::len));
    Ok(Run { manifest: m, report, files: Vec::new(), status: if ok { Status::Ok } else { Status::Failed }, summary })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Line,
    Hilbert,
}

#[derive(Args, Clone, Debug)]
pub struct EmbedArgs {
    #[arg(value_enum)]
    pub target: Target,
    /// Distance matrix as JSON: `{"labels": [...], "dist": [[...]]}`.
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub example: Option<SpaceExample>,
}

pub fn embed(c: &Common, a: &EmbedArgs) -> Result<Run> {
    match a.target {
        Target::Line => embed_line(c, a),
        Target::Hilbert => embed_hilbert(c, a),
    }
}

fn embed_line(c: &Common, a: &EmbedArgs) -> Result<Run> {
    let lambda = c.lambda("1/16")?;
    let epsilon = c.epsilon("3/4")?;
    let levels = c.depth.unwrap_or(64);
    let (space, label) = inputs::load_space(a.space.as_deref(), a.example, 0.0)?;
    let mut m = RunManifest::new("embed-line", "exact", c.seed);
    m.inputs.push(label);
    m.param("lambda", format_rational(&lambda)).param("epsilon", format_rational(&epsilon)).param("depth", levels);
    let tree = ball_hierarchy(&space, &lambda, levels)?;
    let alpha = choose_alpha(&lambda, &epsilon, tree.max_children())?;
    let assign = interval_assignment(&tree, alpha, &epsilon)?;
    let bounds = assign.verify_bounds(&space);
    let coords: Vec<Value> = space
        .labels()
        .iter()
        .zip(assign.phi_all())
        .map(|(l, p)| json!({ "label": l, "phi": tagged(format_rational(&p), Provenance::Exact), "approx": rational_to_f64(&p) }))
        .collect();
    let lower = assign.mu.clone() / &epsilon;
    let report = json!({
        "alpha": { "k": alpha.k, "value": format_rational(&alpha.value()) },
        "mu": tagged(format_rational(&assign.mu), Provenance::Exact),
        "bounds": {
            "lower_constant": tagged(format_rational(&lower), Provenance::Exact),
            "upper_constant": tagged(format_rational(&(Rational::from_integer(1.into()) / &assign.mu)), Provenance::Exact),
            "pairs": bounds.pairs,
            "violations": bounds.violations,
            "min_ratio": tagged(bounds.min_ratio, Provenance::Sampled),
            "max_ratio": tagged(bounds.max_ratio, Provenance::Sampled),
        },
        "tree_depth": tree.depth(),
        "intervals": assign.to_json(),
        "coordinates": coords,
    });
    let ok = bounds.violations.is_empty();
    let summary = format!("embed line: {} points, alpha = 1/2^{}, {} bound violations", space.len(), alpha.k, bounds.violations.len());
    Ok(Run { manifest: m, report, files: Vec::new(), status: if ok { Status::Ok } else { Status::Failed }, summary })
}

fn embed_hilbert(c: &Common, a: &EmbedArgs) -> Result<Run> {
    let tol = c.tol.unwrap_or(GRAM_TOL);
    let budget = c.depth.unwrap_or(3);
    let (space, label) = inputs::load_space(a.space.as_deref(), a.example, 0.0)?;
    let mut m = RunManifest::new("embed-hilbert", "numeric", c.seed);
    m.inputs.push(label);
    m.param("tol", tol).param("depth", budget);
    let f = space.to_f64();
    let check = negative_type_check(&f, tol)?;
    let pairs = pair_family_check(&f, budget, 0, c.seed);
    let mut report = json!({
        "verdict": check.verdict,
        "min_eigenvalue": tagged(check.min_eig, Provenance::Sampled),
        "eigenvalue_tol": check.tol,
        "pair_family": pairs,
    });
    let (status, summary) = match &check.verdict {
        HilbertVerdict::NotEmbeddable { .. } => {
            report["witness_value"] = tagged(check.witness_value, Provenance::Sampled);
            let family = if matches!(pairs, PairVerdict::Violation { .. }) { ", pair family found" } else { "" };
            (Status::Refused, format!("embed hilbert: refused, not of negative type{family}"))
        }
        _ => {
            let coords = hilbert_embedding(&f, tol)?;
            let err = embedding_error(&f, &coords);
            let rows: Vec<Value> = space.labels().iter().zip(&coords).map(|(l, x)| json!({ "label": l, "x": x })).collect();
            report["coordinates"] = tagged(rows, Provenance::Sampled);
            report["max_error"] = tagged(err, Provenance::Sampled);
            (Status::Ok, format!("embed hilbert: {} points in R^{}, max error {err:.1e}", space.len(), coords[0].len()))
        }
    };
    Ok(Run { manifest: m, report, files: Vec::new(), status, summary })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RealizeExample {
    /// Five extra points and four points of the unit square.
    Desk,
}

#[derive(Args, Clone, Debug, Default)]
pub struct RealizeArgs {
    /// `{"extras": [["first bits", "second bits"], ...]}`
    #[arg(long)]
    pub zspace: Option<PathBuf>,
    /// CSV of points in `[0,1]^d`.
    #[arg(long)]
    pub y: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub example: Option<RealizeExample>,
    #[arg(long)]
    pub probes: Option<usize>,
}

pub fn realize(c: &Common, a: &RealizeArgs) -> Result<Run> {
    let lambda = c.lambda("3/4")?;
    let mut m = RunManifest::new("realize", "exact", c.seed);
    let (z, y) = match (&a.zspace, &a.y, a.example) {
        (Some(zp), Some(yp), None) => {
            m.inputs.push(zp.display().to_string());
            m.inputs.push(yp.display().to_string());
            (inputs::load_zspace(zp)?, inputs::load_points(yp)?)
        }
        (None, None, Some(RealizeExample::Desk)) => {
            m.inputs.push("example:desk".into());
            (ZSpace::from_spec(&inputs::desk_zspace())?, metric_fractals::formats::parse_points_csv(inputs::DESK_Y)?)
        }
        _ => bail!("give --zspace and --y, or --example desk"),
    };
    let mut opts = VerifyOptions { seed: c.seed, ..VerifyOptions::default() };
    if let Some(d) = c.depth {
        opts.word_depth = d;
        opts.z_depth = d;
    }
    if let Some(p) = a.probes {
        opts.probes = p;
    }
    m.param("lambda", format_rational(&lambda)).param("options", &opts);
    let bundle = Realization::new(z, y, lambda)?.verify(&opts)?;
    let ok = bundle.all_ok();
    let failed: Vec<&str> = bundle.checks.iter().filter(|l| !l.ok).map(|l| l.name.as_str()).collect();
    let summary = if ok {
        format!("realize: all {} checks passed", bundle.checks.len())
    } else {
        format!("realize: failed {}", failed.join(", "))
    };
    let report = json!({
        "all_ok": ok,
        "provenance": {
            "y_distances": Provenance::CertifiedBound,
            "exponent": Provenance::Sampled,
            "covers": Provenance::Exact,
            "strict": Provenance::Exact,
        },
        "bundle": bundle,
    });
    Ok(Run { manifest: m, report, files: Vec::new(), status: if ok { Status::Ok } else { Status::Failed }, summary })
}

#[derive(Args, Clone, Debug)]
pub struct QuotientArgs {
    #[arg(long)]
    pub ifs: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub example: Option<SystemExample>,
    /// Weight of level `n` is `c^n`.
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    /// JSON list of code pairs, e.g. `[["0(1)", "1(0)"]]`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
}

fn pad(w: &[usize], n: usize) -> Vec<usize> {
    let last = w.last().copied().unwrap_or(0);
    (0..n).map(|i| w.get(i).copied().unwrap_or(last)).collect()
}

pub fn quotient(c: &Common, a: &QuotientArgs) -> Result<Run> {
    let depth = c.depth.unwrap_or(8);
    let tol = c.tol.unwrap_or(1e-12);
    let (system, label) = inputs::load_system(a.ifs.as_deref(), a.example, c.backend)?;
    let mut m = RunManifest::new("quotient", c.backend.name(), c.seed);
    m.inputs.push(label);
    m.param("c", a.c).param("depth", depth).param("tol", tol);
    let alphabet = match &system {
        System::Exact(ifs) => ifs.len(),
        System::Numeric(ifs) => ifs.len(),
    };
    let pairs = match &a.pairs {
        Some(p) => {
            m.inputs.push(p.display().to_string());
            inputs::load_pairs(p)?
        }
        None => [("(0)", "(1)"), ("0(1)", "1(0)"), ("00(1)", "01(0)")].iter().map(|(x, y)| (x.to_string(), y.to_string())).collect(),
    };
    let queries = pairs
        .iter()
        .map(|(x, y)| Ok((pad(&inputs::parse_word(x, alphabet)?, depth), pad(&inputs::parse_word(y, alphabet)?, depth))))
        .collect::<Result<Vec<_>>>()?;
    let r = match &system {
        System::Exact(ifs) => quotient_report(ifs, a.c, depth, tol, &queries)?,
        System::Numeric(ifs) => quotient_report(ifs, a.c, depth, tol, &queries)?,
    };
    let values: Vec<Value> = r
        .values
        .iter()
        .zip(&pairs)
        .map(|(v, (xs, ys))| {
            json!({
                "x": xs, "y": ys, "x_code": v.x, "y_code": v.y,
                "exact_only": tagged(v.exact_only, Provenance::Sampled),
                "with_candidates": tagged(v.with_candidates, Provenance::Sampled),
                "unglued": tagged(v.unglued, Provenance::Sampled),
            })
        })
        .collect();
    let glued: Vec<Value> = r
        .pairs
        .iter()
        .map(|p| json!({ "a": p.a, "b": p.b, "provenance": if p.exact { Provenance::Exact } else { Provenance::Sampled } }))
        .collect();
    let exact_pairs = r.pairs.iter().filter(|p| p.exact).count();
    let report = json!({
        "c": r.c,
        "depth": r.depth,
        "total_mass": r.total_mass,
        "rank_exact": r.rank_exact,
        "rank_candidates": r.rank_candidates,
        "glued": glued,
        "values": values,
    });
    let summary = format!("quotient: {} glued pairs ({exact_pairs} exact), {} queries", r.pairs.len(), values.len());
    Ok(Run { manifest: m, report, files: Vec::new(), status: Status::Ok, summary })
}
