//! End-to-end acceptance checks, one test per criterion. Each prints a single
//! PASS/FAIL line; run with `--nocapture` to see them.

mod common;

use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use metric_fractals::code_space::{is_ultrafractal, product_structure, CylinderLattice, ImageSet, Membership, ProductPoint};
use metric_fractals::hilbert::{embedding_error, hilbert_embedding, negative_type_check, pair_family_check, PairVerdict};
use metric_fractals::ifs::{examples, hutchinson_step};
use metric_fractals::kameyama::{
    cylinder_cover, exkam_lattice, exkam_level_set, kameyama_distance, to_metric_space, ExkamPoint,
};
use metric_fractals::line_embed::{ball_hierarchy, choose_alpha, conjugate_contraction, interval_assignment};
use metric_fractals::metric::{hausdorff_sq, BoundKind, FiniteMetricSpace, PointSet};
use metric_fractals::quotient::{closed_form, glue_relations, GluePolicy, QuotientMetric};
use metric_fractals::realization::{iterated_even, Realization, VerifyOptions, XPoint, ZSpace, ZSpaceSpec};
use metric_fractals::scalar::{format_rational, rat, rat_pow, Rational};
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Timings are per criterion, so the criteria run one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, name: &str, ok: bool, elapsed: Duration, detail: &str) {
    println!(
        "{} criterion {n} ({name}): {detail} [{:.2} s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_1_complex_example_golden_values() {
    let _serial = serial();
    let start = Instant::now();
    let lambda = rat(1, 2);
    let lattice = exkam_lattice(10).unwrap();
    let mut bad = Vec::new();
    let mut points = vec![ExkamPoint::Zero];
    for n in 0..=8 {
        for l in 0..=n {
            let x = ExkamPoint::x(n, l).unwrap();
            let d = kameyama_distance(&lattice, &lambda, &ExkamPoint::Zero, &x).unwrap().value;
            if d != rat_pow(&lambda, n) {
                bad.push(format!("p(0, x_{n},{l}) = {}", format_rational(&d)));
            }
            points.push(x);
        }
    }
    let mut pairs = 0;
    for a in &points[1..] {
        for b in &points[1..] {
            let (ExkamPoint::X { n, .. }, ExkamPoint::X { n: m, .. }) = (a, b) else { unreachable!() };
            if a >= b {
                continue;
            }
            pairs += 1;
            let d = kameyama_distance(&lattice, &lambda, a, b).unwrap().value;
            let (u, v) = (rat_pow(&lambda, *n), rat_pow(&lambda, *m));
            if d < u.clone().max(v.clone()) || d > u + v {
                bad.push(format!("p({a}, {b}) = {}", format_rational(&d)));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = bad.is_empty() && elapsed < Duration::from_secs(10);
    verdict(1, "complex example golden values", ok, elapsed, &format!("45 values from 0, {pairs} bracketed pairs, {} off", bad.len()));
    assert!(bad.is_empty(), "{bad:?}");
    assert!(elapsed < Duration::from_secs(10));
}

#[test]
fn criterion_2_non_doubling_witness() {
    let _serial = serial();
    let start = Instant::now();
    let lambda = rat(1, 2);
    let lattice = exkam_lattice(10).unwrap();
    let mut sizes = Vec::new();
    let mut ok = true;
    for n in 3..=8 {
        let space = to_metric_space(&lattice, &lambda, &exkam_level_set(n)).unwrap();
        let all: Vec<usize> = (0..space.len()).collect();
        let half = space.diameter() / rat(2, 1);
        let cover = space.min_cover(&all, &half);
        ok &= cover.bound == BoundKind::Exact && cover.size() > n;
        sizes.push(format!("n={n}: {}", cover.size()));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(30);
    verdict(2, "non-doubling witness", ok, elapsed, &sizes.join(", "));
    assert!(ok);
}

#[test]
fn criterion_3_hutchinson_contraction() {
    let _serial = serial();
    let start = Instant::now();
    let exact = examples::cantor();
    let float = examples::cantor_f64();
    let mut k = PointSet::new(vec![vec![rat(0, 1)]]).unwrap();
    let mut kf = PointSet::new(vec![vec![0.0]]).unwrap();
    let mut h0: Option<(Rational, f64)> = None;
    let mut ok = true;
    let mut worst = 0.0f64;
    for n in 0..=10 {
        let next = hutchinson_step(&exact, &k, 0.0);
        let nextf = hutchinson_step(&float, &kf, 0.0);
        let h2 = hausdorff_sq(&k, &next).unwrap();
        let hf = hausdorff_sq(&kf, &nextf).unwrap().sqrt();
        let (e0, f0) = h0.get_or_insert((h2.clone(), hf)).clone();
        let factor = rat_pow(&rat(1, 9), n);
        ok &= h2 <= factor * e0;
        let bound = (1.0f64 / 3.0).powi(n as i32) * f0;
        worst = worst.max(hf - bound);
        ok &= hf <= bound + 1e-12;
        k = next;
        kf = nextf;
    }
    let elapsed = start.elapsed();
    verdict(3, "Hutchinson contraction", ok, elapsed, &format!("n <= 10 exact, float excess {worst:.1e}"));
    assert!(ok);
}

#[test]
fn criterion_4_line_embedding_bounds() {
    let _serial = serial();
    let start = Instant::now();
    let lambda = rat(1, 16);
    let epsilon = rat(3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pairs = 0;
    let mut maps = 0;
    let mut failures = Vec::new();
    for trial in 0..50 {
        let space = common::random_ultrametric(&mut rng, &lambda, 64, 4, 5);
        let tree = ball_hierarchy(&space, &lambda, 64).unwrap();
        tree.verify(&space, 4).unwrap();
        let alpha = choose_alpha(&lambda, &epsilon, tree.max_children()).unwrap();
        let assign = interval_assignment(&tree, alpha, &epsilon).unwrap();
        let report = assign.verify_bounds(&space);
        pairs += report.pairs;
        if !report.violations.is_empty() {
            failures.push(format!("trial {trial}: {} bound violations", report.violations.len()));
        }
        for f in common::contraction_maps(&mut rng, &tree) {
            maps += 1;
            match conjugate_contraction(&assign, &space, &f) {
                Ok(g) => {
                    let mut knots = g.breakpoints();
                    knots.sort_by(|a, b| a.0.cmp(&b.0));
                    // piecewise linear: the steepest chord is one of the segments
                    if knots.windows(2).any(|w| (w[0].1.clone() - &w[1].1).abs() > epsilon.clone() * (w[1].0.clone() - &w[0].0)) {
                        failures.push(format!("trial {trial}: extension not Lipschitz"));
                    }
                }
                Err(e) => failures.push(format!("trial {trial}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(60);
    verdict(4, "line embedding bounds", ok, elapsed, &format!("50 spaces, {pairs} pairs, {maps} conjugated maps, {} failures", failures.len()));
    assert!(failures.is_empty(), "{failures:?}");
    assert!(elapsed < Duration::from_secs(60));
}

fn random_space(rng: &mut ChaCha8Rng) -> FiniteMetricSpace<f64> {
    let n = rng.gen_range(4..=8);
    match rng.gen_range(0..4) {
        0 => {
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            FiniteMetricSpace::from_fn(vec![String::new(); n], 1e-12, |i, j| {
                pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .unwrap()
        }
        1 => {
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            FiniteMetricSpace::from_fn(vec![String::new(); n], 1e-12, |i, j| {
                pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).abs()).sum::<f64>()
            })
            .unwrap()
        }
        _ => {
            // Shortest paths in a random weighted complete graph.
            let mut d = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let w = rng.gen_range(1..=4) as f64;
                    d[i][j] = w;
                    d[j][i] = w;
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        d[i][j] = f64::min(d[i][j], d[i][k] + d[k][j]);
                    }
                }
            }
            FiniteMetricSpace::from_matrix(d, 1e-12).unwrap()
        }
    }
}

#[test]
fn criterion_5_hilbert_coherence() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut disagreements = 0;
    let mut witnesses = 0;
    let mut embedded = 0;
    let mut worst = 0.0f64;
    for k in 0..200 {
        let space = random_space(&mut rng);
        let report = negative_type_check(&space, 1e-9).unwrap();
        if let PairVerdict::Violation { .. } = pair_family_check(&space, 3, 0, k) {
            witnesses += 1;
            if report.is_embeddable() {
                disagreements += 1;
            }
        }
        if report.is_embeddable() {
            embedded += 1;
            let coords = hilbert_embedding(&space, 1e-9).unwrap();
            worst = worst.max(embedding_error(&space, &coords) / space.diameter());
        }
    }
    let lambda = rat(1, 4);
    let mut ultra_failures = 0;
    for _ in 0..50 {
        let space = common::random_ultrametric(&mut rng, &lambda, 8, 3, 3).to_f64();
        let report = negative_type_check(&space, 1e-9).unwrap();
        if !report.is_embeddable() {
            ultra_failures += 1;
            continue;
        }
        if space.len() > 1 {
            let coords = hilbert_embedding(&space, 1e-9).unwrap();
            worst = worst.max(embedding_error(&space, &coords) / space.diameter());
        }
    }
    let elapsed = start.elapsed();
    let ok = disagreements == 0 && ultra_failures == 0 && worst <= 1e-9;
    verdict(
        5,
        "Hilbert coherence",
        ok,
        elapsed,
        &format!(
            "200 spaces, {witnesses} pair witnesses, {disagreements} disagreements, {embedded} embedded, \
             {ultra_failures} ultrametric failures, max relative error {worst:.1e}"
        ),
    );
    assert!(ok);
}

/// Strong triangle inequality on all triples and the cylinder cover of every
/// sampled subset; returns (triples, subsets, failures).
fn ultra_properties<S, P>(
    lattice: &CylinderLattice<S>,
    lambda: &Rational,
    points: &[P],
    rng: &mut ChaCha8Rng,
    subsets: usize,
) -> (usize, usize, Vec<String>)
where
    S: ImageSet + Membership<P>,
    P: std::fmt::Debug + PartialEq + Clone,
{
    let n = points.len();
    let mut d = vec![vec![Rational::from_integer(0.into()); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kameyama_distance(lattice, lambda, &points[i], &points[j]).unwrap().value;
            d[i][j] = v.clone();
            d[j][i] = v;
        }
    }
    let mut failures = Vec::new();
    let mut triples = 0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                triples += 1;
                if d[i][k] > d[i][j].clone().max(d[j][k].clone()) {
                    failures.push(format!("strong triangle at {:?}, {:?}, {:?}", points[i], points[j], points[k]));
                }
            }
        }
    }
    let deepest = rat_pow(lambda, lattice.depth - 1);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < subsets && attempts < subsets * 50 {
        attempts += 1;
        let size = rng.gen_range(2..=n.min(6));
        let mut idx: Vec<usize> = (0..size).map(|_| rng.gen_range(0..n)).collect();
        idx.sort_unstable();
        idx.dedup();
        let diam = idx.iter().flat_map(|&a| idx.iter().map(move |&b| (a, b))).map(|(a, b)| d[a][b].clone()).max().unwrap();
        if diam < deepest || idx.len() < 2 {
            continue;
        }
        checked += 1;
        let target = lambda.clone() * &diam;
        let sub: Vec<P> = idx.iter().map(|&i| points[i].clone()).collect();
        match cylinder_cover(lattice, lambda, &sub, &target) {
            Ok(cover) => {
                if cover.len() > lattice.alphabet {
                    failures.push(format!("{} cylinders for {sub:?}", cover.len()));
                }
                for (_, group) in &cover {
                    for &a in group {
                        for &b in group {
                            if d[idx[a]][idx[b]] > target {
                                failures.push(format!("group too wide in {sub:?}"));
                            }
                        }
                    }
                }
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    (triples, checked, failures)
}

fn desk_zspace() -> ZSpace {
    let extras = [("1", "11"), ("01", "0101"), ("", "101"), ("110", "0011"), ("0", "1101")];
    ZSpace::from_spec(&ZSpaceSpec { extras: extras.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect() }).unwrap()
}

fn desk_y() -> Vec<Vec<Rational>> {
    vec![vec![rat(0, 1), rat(0, 1)], vec![rat(1, 1), rat(1, 2)], vec![rat(1, 3), rat(1, 4)], vec![rat(3, 8), rat(1, 4)]]
}

fn random_code(rng: &mut ChaCha8Rng, alphabet: usize, max_len: usize) -> Vec<usize> {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| rng.gen_range(0..alphabet)).collect()
}

#[test]
fn criterion_6_kameyama_ultrafractal_properties() {
    let _serial = serial();
    let start = Instant::now();
    let lambda = rat(1, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lines = Vec::new();
    let mut ok = true;

    let cantor = product_structure(&examples::cantor(), 1, 0.0).unwrap().lattice(6).unwrap();
    ok &= is_ultrafractal(&cantor).is_yes();
    let mut pts: Vec<ProductPoint> = (0..24).map(|_| ProductPoint::new(random_code(&mut rng, 2, 8), rng.gen_range(0..2), 0)).collect();
    pts.sort();
    pts.dedup();
    let (t, s, f) = ultra_properties(&cantor, &lambda, &pts, &mut rng, 200);
    ok &= f.is_empty();
    lines.push(format!("Cantor {t} triples/{s} subsets/{} failures", f.len()));

    let real = Realization::new(desk_zspace(), desk_y(), rat(3, 4)).unwrap();
    let zl = real.z_lattice(6).unwrap();
    ok &= is_ultrafractal(&zl).is_yes();
    let zpts: Vec<_> = real.probe_points(24, 6).into_iter().map(XPoint::Z).collect();
    let (t, s, f) = ultra_properties(&zl, &lambda, &zpts, &mut rng, 200);
    ok &= f.is_empty();
    lines.push(format!("Z system {t}/{s}/{}", f.len()));

    for levels in [2, 3] {
        let sys = product_structure(&examples::cantor(), levels, 0.0).unwrap();
        let pl = sys.lattice(6).unwrap();
        ok &= is_ultrafractal(&pl).is_yes();
        let mut pts: Vec<ProductPoint> = (0..24)
            .map(|_| ProductPoint::new(random_code(&mut rng, 2, 6), rng.gen_range(0..2), rng.gen_range(0..levels)))
            .collect();
        pts.sort();
        pts.dedup();
        let (t, s, f) = ultra_properties(&pl, &lambda, &pts, &mut rng, 200);
        ok &= f.is_empty();
        lines.push(format!("product x{levels} {t}/{s}/{}", f.len()));
    }
    let elapsed = start.elapsed();
    verdict(6, "ultrafractal Kameyama properties", ok, elapsed, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_7_realization_invariants() {
    let _serial = serial();
    let start = Instant::now();
    let real = Realization::new(desk_zspace(), desk_y(), rat(3, 4)).unwrap();
    assert!(real.z.extras().len() <= 10);
    let report = real.verify(&VerifyOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let ok = report.all_ok() && elapsed < Duration::from_secs(300);
    let detail: Vec<String> =
        report.checks.iter().map(|c| format!("{} {}", c.name, if c.ok { "ok" } else { "FAILED" })).collect();
    verdict(7, "realization invariants", ok, elapsed, &detail.join(", "));
    for c in &report.checks {
        println!("    {}: {}", c.name, c.detail);
    }
    assert!(ok, "{:#?}", report.checks);
}

#[test]
fn criterion_8_even_odd_split_golden() {
    let _serial = serial();
    let start = Instant::now();
    let s = [1, 1, 0, 0, 1, 0, 0, 1, 1];
    let expected: [&[u8]; 3] = [&[1, 0, 1, 0, 1], &[1, 1, 1], &[1, 1]];
    let mut ok = true;
    for (i, e) in expected.iter().enumerate() {
        ok &= iterated_even(&s, i + 1) == *e;
    }
    for i in 4..=12 {
        ok &= iterated_even(&s, i) == [1];
    }
    verdict(8, "even/odd split golden", ok, start.elapsed(), "10101, 111, 11, then 1");
    assert!(ok);
}

#[test]
fn criterion_9_quotient_pseudometric() {
    let _serial = serial();
    let start = Instant::now();
    let (c, depth) = (0.5, 8);
    let cantor = QuotientMetric::for_ifs(&examples::cantor(), c, depth, 1e-12, GluePolicy::WithCandidates).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let code = |rng: &mut ChaCha8Rng| -> Vec<usize> { (0..depth).map(|_| rng.gen_range(0..2)).collect() };
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (x, y) = (code(&mut rng), code(&mut rng));
        let p = cantor.distance(&x, &y).unwrap();
        worst = worst.max((p * p - closed_form(c, &x, &y).powi(2)).abs());
    }
    let mut ok = cantor.rank() == 0 && worst <= 1e-10;

    let halves = examples::halves();
    let glued = glue_relations(&halves, depth, 1e-12).unwrap();
    let overlap = QuotientMetric::for_ifs(&halves, c, depth, 1e-12, GluePolicy::ExactOnly).unwrap();
    let mut glued_max = 0.0f64;
    for p in glued.iter().filter(|p| p.exact) {
        glued_max = glued_max.max(overlap.distance(&p.a, &p.b).unwrap());
    }
    ok &= glued.iter().any(|p| p.a == [0, 1, 1, 1, 1, 1, 1, 1] && p.b == [1, 0, 0, 0, 0, 0, 0, 0]);
    ok &= glued_max == 0.0;

    let mut axiom_failures = 0;
    for metric in [&cantor, &overlap] {
        for _ in 0..1000 {
            let (x, y, z) = (code(&mut rng), code(&mut rng), code(&mut rng));
            let (dxy, dyx) = (metric.distance(&x, &y).unwrap(), metric.distance(&y, &x).unwrap());
            let (dyz, dxz) = (metric.distance(&y, &z).unwrap(), metric.distance(&x, &z).unwrap());
            let scale = 1e-12 * (1.0 + dxy + dyz);
            if (dxy - dyx).abs() > scale || dxz > dxy + dyz + scale || metric.distance(&x, &x).unwrap() != 0.0 {
                axiom_failures += 1;
            }
        }
    }
    ok &= axiom_failures == 0;
    verdict(
        9,
        "quotient pseudometric",
        ok,
        start.elapsed(),
        &format!(
            "closed-form error {worst:.1e}, {} glued pairs with max distance {glued_max}, {axiom_failures} axiom failures in 2000 triples",
            glued.len()
        ),
    );
    assert!(ok);
}
