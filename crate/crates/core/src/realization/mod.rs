//! A fractal structure on `X = Z ⊔ Y` with `Z ⊂ K × K` zero-dimensional and
//! `Y ⊂ [0,1]^d` finite, whose Kameyama metric is doubling.
//!
//! `Z` is `K × S₀` plus finitely many isolated points. Maps `f₀, f₁, f₂` act on
//! `Z` through address manipulations and the retractions `r`, `r̲`, `r̲^γ`;
//! `f₃` sends `Z` onto `Y` through a dyadic cube tree. Images of words are
//! computed exactly as unions of product pieces and points.

pub mod address;
pub mod cube;
pub mod shape;
pub mod zspace;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::code_space::{
    format_word, is_strict_ultrafractal, words_of_length, CylinderLattice, ImageSet, Membership, Order, Relation, Verdict,
    Word,
};
use crate::kameyama::kameyama_distance;
use crate::scalar::{format_rational, rat_pow, rational_to_f64, Rational};
use crate::{Error, Result};

pub use address::{cantor_value, even_odd_split, interleave, iterated_even, Address};
pub use cube::CubeTree;
pub use shape::{Piece, Second, ZShape};
pub use zspace::{ZPoint, ZSpace, ZSpaceSpec};

/// A point of `X = Z ⊔ Y`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum XPoint {
    Z(ZPoint),
    /// Index into `Y`.
    Y(usize),
}

impl fmt::Debug for XPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XPoint::Z(p) => write!(f, "{p}"),
            XPoint::Y(i) => write!(f, "y{i}"),
        }
    }
}

/// A subset of `X`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct XImage {
    pub z: ZShape,
    pub y: BTreeSet<usize>,
}

impl XImage {
    pub fn is_empty(&self) -> bool {
        self.z.is_empty() && self.y.is_empty()
    }
}

impl ImageSet for XImage {
    fn key(&self) -> String {
        let ys: Vec<String> = self.y.iter().map(|i| format!("y{i}")).collect();
        format!("{}|{}", self.z.key(), ys.join(","))
    }

    fn is_singleton(&self) -> bool {
        (self.z.is_singleton() && self.y.is_empty()) || (self.z.is_empty() && self.y.len() == 1)
    }

    fn relation(&self, other: &Self) -> Relation {
        let sub = self.z.subset_of(&other.z) && self.y.is_subset(&other.y);
        let sup = other.z.subset_of(&self.z) && other.y.is_subset(&self.y);
        let meet = !self.y.is_disjoint(&other.y) || self.z.meets(&other.z);
        Relation::from_parts(sub, sup, meet)
    }
}

impl Membership<XPoint> for XImage {
    fn contains(&self, p: &XPoint) -> Option<bool> {
        Some(match p {
            XPoint::Z(q) => self.z.contains(q),
            XPoint::Y(i) => self.y.contains(i),
        })
    }
}

/// `F = {f̄₀, f̄₁, f̄₂, f̄₃}` on `X = Z ⊔ Y` with the Kameyama parameter `λ`.
#[derive(Clone, Debug)]
pub struct Realization {
    pub z: ZSpace,
    pub tree: CubeTree,
    pub lambda: Rational,
    /// Point of `Y` onto which `f̄₃` collapses `Y`.
    pub y3: usize,
}

/// Closed-form image of a word over `{0,1,2}`: `None` means a singleton.
pub fn predicted_image(z: &ZSpace, w: &[usize]) -> Option<ZShape> {
    let twos: Vec<usize> = w.iter().enumerate().filter(|(_, &a)| a == 2).map(|(i, _)| i).collect();
    let bits = |s: &[usize]| s.iter().map(|&a| a as u8).collect::<Vec<u8>>();
    match twos.as_slice() {
        [] => Some(ZShape::rect(z, &bits(w), &vec![0; w.len()])),
        [p] => {
            let alpha = bits(&w[..*p]);
            let b = iterated_even(&bits(&w[p + 1..]), alpha.len());
            let (even, odd) = even_odd_split(&b);
            let mut s = alpha.clone();
            s.extend(even);
            let mut t = vec![0; alpha.len()];
            t.push(1);
            t.extend(odd);
            Some(ZShape::rect(z, &s, &t))
        }
        _ => None,
    }
}

/// Report of one cube-family cover of a subset of `Y`.
#[derive(Clone, Debug, Serialize)]
pub struct CoverCheck {
    pub subset: Vec<usize>,
    /// Level `n` with `λ^{dn} <= sup_y p(x, y) < λ^{d(n-1)}`.
    pub level: usize,
    /// `|U_x|`, cubes of level `n` at max-distance `< 8/2^n` from `x`.
    pub family: u64,
    pub used: usize,
    pub bound: u64,
    pub max_piece_diameter: String,
    pub target: String,
    pub ok: bool,
}

impl Realization {
    /// Assembles the structure; requires `λ ∈ (0,1)` with `λ^d >= 1/2`.
    pub fn new(z: ZSpace, y: Vec<Vec<Rational>>, lambda: Rational) -> Result<Self> {
        let tree = CubeTree::new(y)?;
        if lambda <= Rational::zero() || lambda >= Rational::one() {
            return Err(Error::InvalidInput("lambda must lie in (0,1)".into()));
        }
        let half = Rational::new(1.into(), 2.into());
        if rat_pow(&lambda, tree.dim) < half {
            return Err(Error::InvalidInput(format!(
                "lambda^d = {} is below 1/2",
                format_rational(&rat_pow(&lambda, tree.dim))
            )));
        }
        let y3 = tree.smallest_point();
        Ok(Self { z, tree, lambda, y3 })
    }

    pub fn dim(&self) -> usize {
        self.tree.dim
    }

    /// `f₃ = ∂φ ∘ x^{-1} ∘ r̲`.
    pub fn f3(&self, p: &ZPoint) -> Result<usize> {
        Ok(self.tree.boundary_point(&self.z.retract_under(p)?.first))
    }

    /// `f̄_i` at a point of `X`.
    pub fn apply(&self, i: usize, p: &XPoint) -> Result<XPoint> {
        match (i, p) {
            (0..=2, XPoint::Z(q)) => Ok(XPoint::Z(self.z.apply(i, q)?)),
            (0..=2, XPoint::Y(_)) => Ok(XPoint::Z(self.z.fixed_point(i))),
            (3, XPoint::Z(q)) => Ok(XPoint::Y(self.f3(q)?)),
            (3, XPoint::Y(_)) => Ok(XPoint::Y(self.y3)),
            _ => Err(Error::InvalidInput(format!("no map with index {i}"))),
        }
    }

    pub fn apply_word(&self, w: &[usize], p: &XPoint) -> Result<XPoint> {
        let mut q = p.clone();
        for &i in w.iter().rev() {
            q = self.apply(i, &q)?;
        }
        Ok(q)
    }

    /// `f₃` of a subset of `Z`.
    pub fn f3_image(&self, s: &ZShape) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for piece in &s.pieces {
            let (full, finite) = shape::level_prefixes(piece)?;
            if let Some(prefix) = full {
                out.extend(self.tree.prefix_image(&prefix));
            }
            for g in finite {
                out.insert(self.tree.boundary_point(&Address::finite(&g)));
            }
        }
        for p in &s.points {
            out.insert(self.f3(p)?);
        }
        Ok(out)
    }

    pub fn whole(&self) -> XImage {
        XImage { z: ZShape::full(&self.z), y: (0..self.tree.len()).collect() }
    }

    /// `f̄_i` of a subset of `X`.
    pub fn image(&self, i: usize, s: &XImage) -> Result<XImage> {
        match i {
            0..=2 => {
                let mut z = shape::image(&self.z, i, &s.z)?;
                if !s.y.is_empty() {
                    z.points.insert(self.z.fixed_point(i));
                    z = z.normalize();
                }
                Ok(XImage { z, y: BTreeSet::new() })
            }
            3 => {
                let mut y = self.f3_image(&s.z)?;
                if !s.y.is_empty() {
                    y.insert(self.y3);
                }
                Ok(XImage { z: ZShape::empty(), y })
            }
            _ => Err(Error::InvalidInput(format!("no map with index {i}"))),
        }
    }

    /// `f̄_w(X)`.
    pub fn image_of_word(&self, w: &[usize]) -> Result<XImage> {
        let mut s = self.whole();
        for &i in w.iter().rev() {
            s = self.image(i, &s)?;
        }
        Ok(s)
    }

    /// `f_w(Z)` for a word over `{0,1,2}`.
    pub fn z_image_of_word(&self, w: &[usize]) -> Result<ZShape> {
        let mut s = ZShape::full(&self.z);
        for &i in w.iter().rev() {
            if i > 2 {
                return Err(Error::InvalidInput("words on Z use the letters 0, 1, 2".into()));
            }
            s = shape::image(&self.z, i, &s)?;
        }
        Ok(s)
    }

    /// Whether the exact image of `w` is a singleton or the closed-form set.
    pub fn classification_holds(&self, w: &[usize]) -> Result<bool> {
        let exact = self.z_image_of_word(w)?;
        if exact.is_singleton() {
            return Ok(true);
        }
        Ok(predicted_image(&self.z, w).is_some_and(|p| exact.relation(&p) == Relation::Equal))
    }

    /// Images of all words up to `depth`, built by prepending letters.
    fn word_images(&self, depth: usize, alphabet: usize, z_only: bool) -> Result<Vec<(Word, Order, XImage)>> {
        let root = if z_only { XImage { z: ZShape::full(&self.z), y: BTreeSet::new() } } else { self.whole() };
        let mut out = vec![(Vec::new(), Order::Finite(0), root.clone())];
        let mut frontier = vec![(Vec::new(), root)];
        for n in 1..=depth {
            let mut next = Vec::new();
            for (w, img) in &frontier {
                for a in 0..alphabet {
                    let mut aw = vec![a];
                    aw.extend_from_slice(w);
                    let im = self.image(a, img)?;
                    let order = if im.is_singleton() { Order::Omega } else { Order::Finite(n) };
                    out.push((aw.clone(), order, im.clone()));
                    next.push((aw, im));
                }
            }
            frontier = next;
        }
        Ok(out)
    }

    /// Lattice of `{f₀, f₁, f₂}` on `Z`.
    pub fn z_lattice(&self, depth: usize) -> Result<CylinderLattice<XImage>> {
        Ok(CylinderLattice::from_images(depth, 3, "realization-z", self.word_images(depth, 3, true)?))
    }

    /// Lattice of `F` on `X`: all words up to `depth`, plus every `3α` with
    /// `α ∈ {0,1}*` down to singletons.
    pub fn x_lattice(&self, depth: usize) -> Result<CylinderLattice<XImage>> {
        let mut items = self.word_images(depth, 4, false)?;
        let d = self.tree.dim;
        let mut seen = HashSet::new();
        let mut stack = vec![(0usize, 0usize, Vec::<u8>::new(), vec![3usize])];
        while let Some((level, cube, partial, word)) = stack.pop() {
            if !seen.insert((level, cube, partial.clone())) {
                continue;
            }
            let y = self.tree.partial_image(level, cube, &partial);
            let singleton = y.len() == 1;
            let order = if singleton { Order::Omega } else { Order::Finite(word.len()) };
            items.push((word.clone(), order, XImage { z: ZShape::empty(), y }));
            if singleton {
                continue;
            }
            for b in 0..2u8 {
                let mut p = partial.clone();
                p.push(b);
                let mut w = word.clone();
                w.push(b as usize);
                if p.len() == d {
                    let child = self.tree.successor(level, cube, &p);
                    stack.push((level + 1, child, Vec::new(), w));
                } else {
                    stack.push((level, cube, p, w));
                }
            }
        }
        Ok(CylinderLattice::from_images(depth, 4, "realization-x", items))
    }

    /// Kameyama distances between all points of `Y`.
    pub fn y_distances(&self, lattice: &CylinderLattice<XImage>) -> Result<Vec<Vec<Rational>>> {
        let n = self.tree.len();
        let mut m = vec![vec![Rational::zero(); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = kameyama_distance(lattice, &self.lambda, &XPoint::Y(i), &XPoint::Y(j))?.value;
                m[i][j] = d.clone();
                m[j][i] = d;
            }
        }
        Ok(m)
    }

    /// `s` with `λ^d = 2^{-s}`.
    pub fn exponent(&self) -> f64 {
        -(self.tree.dim as f64) * rational_to_f64(&self.lambda).log2()
    }

    /// Pairs of `Y` violating `p(x,y) >= λ^d ||x - y||^s` (max norm).
    pub fn lower_bound_violations(&self, dist: &[Vec<Rational>]) -> Vec<(usize, usize)> {
        let s = self.exponent();
        let ld = rational_to_f64(&rat_pow(&self.lambda, self.tree.dim));
        let n = self.tree.len();
        let mut bad = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let norm = self.max_norm(i, j);
                let rhs = ld * rational_to_f64(&norm).powf(s);
                if rational_to_f64(&dist[i][j]) < rhs * (1.0 - 1e-12) {
                    bad.push((i, j));
                }
            }
        }
        bad
    }

    fn max_norm(&self, i: usize, j: usize) -> Rational {
        let (a, b) = (&self.tree.points[i], &self.tree.points[j]);
        a.iter().zip(b).map(|(x, y)| num_traits::Signed::abs(&(x.clone() - y))).max().unwrap_or_else(Rational::zero)
    }

    /// Covers `S ⊂ Y` by the cube family `U_x` and checks the sizes exactly.
    pub fn cover_check(&self, subset: &[usize], dist: &[Vec<Rational>]) -> Result<CoverCheck> {
        let d = self.tree.dim;
        let x = *subset.first().ok_or_else(|| Error::InvalidInput("empty subset".into()))?;
        let diam = subset
            .iter()
            .flat_map(|&a| subset.iter().map(move |&b| (a, b)))
            .map(|(a, b)| dist[a][b].clone())
            .max()
            .unwrap_or_else(Rational::zero);
        let bound = 17u64.pow(d as u32);
        if subset.len() == 1 {
            return Ok(CoverCheck {
                subset: subset.to_vec(),
                level: 0,
                family: 1,
                used: 1,
                bound,
                max_piece_diameter: "0".into(),
                target: "0".into(),
                ok: true,
            });
        }
        let radius = subset.iter().map(|&y| dist[x][y].clone()).max().expect("non-empty");
        let step = rat_pow(&self.lambda, d);
        let mut n = 0;
        let mut scale = Rational::one();
        while scale > radius {
            scale *= &step;
            n += 1;
        }
        let side = Rational::new(1.into(), num_bigint::BigInt::one() << n);
        let reach = side.clone() * Rational::from_integer(8.into());
        let cells = 1u64 << n;
        let point = &self.tree.points[x];
        let mut family = 1u64;
        for xi in point {
            let count = (0..cells)
                .filter(|&c| {
                    let lo = side.clone() * Rational::from_integer(c.into());
                    let hi = lo.clone() + &side;
                    let gap = if *xi < lo { lo - xi } else if *xi > hi { xi.clone() - hi } else { Rational::zero() };
                    gap < reach
                })
                .count() as u64;
            family *= count;
        }
        let target = self.lambda.clone() * &diam;
        let mut used: BTreeSet<Vec<u64>> = BTreeSet::new();
        let mut ok = family <= bound;
        let mut max_piece = Rational::zero();
        for &y in subset {
            let py = &self.tree.points[y];
            let norm = self.max_norm(x, y);
            ok &= norm < reach;
            let coords: Vec<u64> = py
                .iter()
                .map(|v| {
                    let t = (v.clone() / &side).floor().to_integer();
                    let c: u64 = t.try_into().unwrap_or(0);
                    c.min(cells - 1)
                })
                .collect();
            used.insert(coords);
        }
        for coords in &used {
            let members: Vec<usize> = (0..self.tree.len())
                .filter(|&m| {
                    self.tree.points[m].iter().zip(coords).all(|(v, &c)| {
                        let lo = side.clone() * Rational::from_integer(c.into());
                        *v >= lo && *v <= lo.clone() + &side
                    })
                })
                .collect();
            for &a in &members {
                for &b in &members {
                    if dist[a][b] > max_piece {
                        max_piece = dist[a][b].clone();
                    }
                }
            }
        }
        ok &= max_piece <= target;
        Ok(CoverCheck {
            subset: subset.to_vec(),
            level: n,
            family,
            used: used.len(),
            bound,
            max_piece_diameter: format_rational(&max_piece),
            target: format_rational(&target),
            ok,
        })
    }

    /// Seeded sample of points of `Z`: base points, points of `K × S₀`, the
    /// extras and retractions of random points of `K × K`.
    pub fn probe_points(&self, count: usize, seed: u64) -> Vec<ZPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<ZPoint> = self.z.extras().to_vec();
        out.push(self.z.fixed_point(1));
        let bits = |rng: &mut ChaCha8Rng, max: usize| -> Vec<u8> {
            let n = rng.gen_range(0..=max);
            (0..n).map(|_| rng.gen_range(0..2u8)).collect()
        };
        while out.len() < count {
            let u = bits(&mut rng, 10);
            let p = match rng.gen_range(0..3) {
                0 => ZPoint::base(&u),
                1 => ZPoint::level(&u, rng.gen_range(0..5)),
                _ => {
                    let mut v = bits(&mut rng, 8);
                    v.push(1);
                    self.z.retract(&ZPoint::new(Address::finite(&u), Address::finite(&v)))
                }
            };
            out.push(p);
        }
        out.sort();
        out.dedup();
        out
    }

    /// Runs every check of the construction at the given sizes.
    pub fn verify(&self, opts: &VerifyOptions) -> Result<RealizationReport> {
        let probes = self.probe_points(opts.probes, opts.seed);

        let mut words = 0;
        let mut mismatches = Vec::new();
        let mut escapes = Vec::new();
        for n in 0..=opts.word_depth {
            for w in words_of_length(3, n) {
                words += 1;
                if !self.classification_holds(&w)? {
                    mismatches.push(format_word(&w));
                }
                let img = self.z_image_of_word(&w)?;
                for p in &probes {
                    if !img.contains(&self.z.apply_word(&w, p)?) {
                        escapes.push(format!("{} at {p}", format_word(&w)));
                    }
                }
            }
        }

        let zl = self.z_lattice(opts.z_depth)?;
        let strict = is_strict_ultrafractal(&zl);
        let xl = self.x_lattice(opts.x_depth)?;
        let dist = self.y_distances(&xl)?;

        let one = Rational::one();
        let mut yz_off = Vec::new();
        for (i, _) in self.tree.points.iter().enumerate() {
            for p in &probes {
                let d = kameyama_distance(&xl, &self.lambda, &XPoint::Y(i), &XPoint::Z(p.clone()))?.value;
                if d != one {
                    yz_off.push(format!("y{i}, {p}: {}", format_rational(&d)));
                }
            }
        }

        let zl_same = self.z_lattice(opts.x_depth)?;
        let mut restriction_off = Vec::new();
        for (k, a) in probes.iter().enumerate().take(opts.restriction_probes) {
            for b in probes.iter().skip(k + 1).take(opts.restriction_probes) {
                let (pa, pb) = (XPoint::Z(a.clone()), XPoint::Z(b.clone()));
                let dx = kameyama_distance(&xl, &self.lambda, &pa, &pb)?.value;
                let dz = kameyama_distance(&zl_same, &self.lambda, &pa, &pb)?.value;
                if dx != dz {
                    restriction_off.push(format!("{a}, {b}: {} vs {}", format_rational(&dx), format_rational(&dz)));
                }
            }
        }

        let lower = self.lower_bound_violations(&dist);
        let n = self.tree.len();
        let covers = (1u32..(1 << n))
            .map(|mask| {
                let subset: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                self.cover_check(&subset, &dist)
            })
            .collect::<Result<Vec<_>>>()?;

        let checks = vec![
            CheckLine::new("classification", mismatches.is_empty(), format!("{words} words, {} mismatches", mismatches.len())),
            CheckLine::new("pointwise images", escapes.is_empty(), format!("{} probes per word, {} escapes", probes.len(), escapes.len())),
            CheckLine::new("strict ultrafractal", strict.is_yes(), format!("{:?} at depth {}", strict.status, strict.depth)),
            CheckLine::new("p(y,z) = 1", yz_off.is_empty(), format!("{} pairs, {} off", n * probes.len(), yz_off.len())),
            CheckLine::new("restriction to Z", restriction_off.is_empty(), format!("{} differences", restriction_off.len())),
            CheckLine::new("lower bound", lower.is_empty(), format!("{} violations", lower.len())),
            CheckLine::new("cube covers", covers.iter().all(|c| c.ok), format!("{} subsets", covers.len())),
        ];
        Ok(RealizationReport {
            lambda: format_rational(&self.lambda),
            dim: self.dim(),
            exponent: self.exponent(),
            y: (0..n).map(|i| self.tree.format_point(i)).collect(),
            y3: self.y3,
            z_cylinders: zl.len(),
            x_cylinders: xl.len(),
            y_distances: dist.iter().map(|r| r.iter().map(format_rational).collect()).collect(),
            strict,
            mismatches,
            escapes,
            yz_off,
            restriction_off,
            lower_bound_violations: lower,
            covers,
            checks,
        })
    }
}

/// Sizes used by [`Realization::verify`].
#[derive(Clone, Debug, Serialize)]
pub struct VerifyOptions {
    /// Words over `{0,1,2}` up to this length are classified.
    pub word_depth: usize,
    pub z_depth: usize,
    pub x_depth: usize,
    pub probes: usize,
    /// Probe points whose pairwise distances are compared on `X` and on `Z`.
    pub restriction_probes: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { word_depth: 6, z_depth: 6, x_depth: 4, probes: 50, restriction_probes: 12, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: &str, ok: bool, detail: String) -> Self {
        Self { name: name.into(), ok, detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizationReport {
    pub lambda: String,
    pub dim: usize,
    pub exponent: f64,
    pub y: Vec<String>,
    pub y3: usize,
    pub z_cylinders: usize,
    pub x_cylinders: usize,
    pub y_distances: Vec<Vec<String>>,
    pub strict: Verdict,
    pub mismatches: Vec<String>,
    pub escapes: Vec<String>,
    pub yz_off: Vec<String>,
    pub restriction_off: Vec<String>,
    pub lower_bound_violations: Vec<(usize, usize)>,
    pub covers: Vec<CoverCheck>,
    pub checks: Vec<CheckLine>,
}

impl RealizationReport {
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}
