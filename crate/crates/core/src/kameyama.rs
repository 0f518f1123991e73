//! Kameyama pseudometrics: chain search over a cylinder lattice, the
//! ultrafractal formula, and closed forms for the complex example.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::code_space::{
    format_word, is_ultrafractal, CylinderLattice, ImageSet, Membership, Order, Relation, Word,
};
use crate::metric::FiniteMetricSpace;
use crate::scalar::{format_rational, rat_pow, Rational};
use crate::{Error, Result};

/// How a reported distance relates to the true infimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    /// Upper bound from chains inside the finite lattice.
    CertifiedBound,
    Sampled,
}

/// A chain of cylinders linking two points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainCertificate {
    pub words: Vec<String>,
    pub orders: Vec<Order>,
    #[serde(with = "rational_str")]
    pub total: Rational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    #[serde(with = "rational_str")]
    pub value: Rational,
    pub provenance: Provenance,
    pub chain: ChainCertificate,
}

pub(crate) mod rational_str {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::scalar::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

fn validate_lambda(lambda: &Rational) -> Result<()> {
    if *lambda <= Rational::zero() || *lambda >= Rational::one() {
        return Err(Error::InvalidInput("lambda must lie in (0,1)".into()));
    }
    Ok(())
}

/// `λ^o = p^o q^{D-o} / q^D` with `D` the largest finite order, so chain
/// lengths can be summed as integers.
fn scaled_weights<S: ImageSet>(lattice: &CylinderLattice<S>, lambda: &Rational) -> (Vec<BigInt>, BigInt) {
    let top = lattice
        .cylinders()
        .iter()
        .filter_map(|c| match c.order {
            Order::Finite(n) => Some(n),
            Order::Omega => None,
        })
        .max()
        .unwrap_or(0);
    let (p, q) = (lambda.numer(), lambda.denom());
    let weights = lattice
        .cylinders()
        .iter()
        .map(|c| match c.order {
            Order::Finite(n) => p.pow(n as u32) * q.pow((top - n) as u32),
            Order::Omega => BigInt::zero(),
        })
        .collect();
    (weights, q.pow(top as u32))
}

fn sources<S, P>(lattice: &CylinderLattice<S>, p: &P) -> Vec<usize>
where
    S: ImageSet + Membership<P>,
{
    (0..lattice.len()).filter(|&i| lattice.cylinders()[i].image.contains(p) == Some(true)).collect()
}

/// Shortest chain between two points in the intersection graph of `lattice`.
///
/// Nodes weigh `λ^o`; only certified intersections are edges. The value is an
/// upper bound on the infimum over all chains and never increases with depth.
/// Equal points get an exact `0` with an empty chain.
pub fn kameyama_distance<S, P>(lattice: &CylinderLattice<S>, lambda: &Rational, x: &P, y: &P) -> Result<Distance>
where
    S: ImageSet + Membership<P>,
    P: fmt::Debug + PartialEq,
{
    validate_lambda(lambda)?;
    let from = sources(lattice, x);
    if from.is_empty() {
        return Err(Error::UnresolvedMembership(format!("{x:?}")));
    }
    let to = sources(lattice, y);
    if to.is_empty() {
        return Err(Error::UnresolvedMembership(format!("{y:?}")));
    }
    if x == y {
        let chain = ChainCertificate { words: Vec::new(), orders: Vec::new(), total: Rational::zero() };
        return Ok(Distance { value: Rational::zero(), provenance: Provenance::Exact, chain });
    }
    let n = lattice.len();
    let (weights, denom) = scaled_weights(lattice, lambda);
    let graph = lattice.intersection_graph();
    let mut dist: Vec<Option<BigInt>> = vec![None; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    for &s in &from {
        dist[s] = Some(weights[s].clone());
        heap.push(Reverse((weights[s].clone(), s)));
    }
    let mut done = vec![false; n];
    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &v in &graph[u] {
            let nd = &d + &weights[v];
            if dist[v].as_ref().is_none_or(|cur| nd < *cur) {
                dist[v] = Some(nd.clone());
                prev[v] = Some(u);
                heap.push(Reverse((nd, v)));
            }
        }
    }
    let end = to
        .iter()
        .copied()
        .filter(|&t| dist[t].is_some())
        .min_by(|&a, &b| dist[a].cmp(&dist[b]).then(a.cmp(&b)))
        .ok_or_else(|| Error::Infeasible("points are not linked by any chain of the lattice".into()))?;
    let mut path = vec![end];
    while let Some(p) = prev[*path.last().expect("non-empty")] {
        path.push(p);
    }
    path.reverse();
    let value = Rational::new(dist[end].clone().expect("reached"), denom);
    let chain = ChainCertificate {
        words: path.iter().map(|&i| format_word(&lattice.cylinders()[i].word)).collect(),
        orders: path.iter().map(|&i| lattice.cylinders()[i].order).collect(),
        total: value.clone(),
    };
    let provenance = if value.is_zero() {
        Provenance::Exact
    } else {
        Provenance::CertifiedBound
    };
    Ok(Distance { value, provenance, chain })
}

/// `min λ^o(f)` over cylinders containing both points, for ultrafractal lattices.
pub fn kameyama_ultra_distance<S, P>(lattice: &CylinderLattice<S>, lambda: &Rational, x: &P, y: &P) -> Result<Rational>
where
    S: ImageSet + Membership<P>,
    P: fmt::Debug + PartialEq,
{
    validate_lambda(lambda)?;
    let verdict = is_ultrafractal(lattice);
    if !verdict.is_yes() {
        return Err(Error::NotUltrafractal(format!("{:?} at depth {}", verdict.status, verdict.depth)));
    }
    let mut best: Option<Rational> = None;
    let mut seen_x = false;
    let mut seen_y = false;
    for c in lattice.cylinders() {
        let (a, b) = (c.image.contains(x), c.image.contains(y));
        seen_x |= a == Some(true);
        seen_y |= b == Some(true);
        if a == Some(true) && b == Some(true) {
            let w = c.order.weight(lambda);
            if best.as_ref().is_none_or(|cur| w < *cur) {
                best = Some(w);
            }
        }
    }
    if !seen_x {
        return Err(Error::UnresolvedMembership(format!("{x:?}")));
    }
    if !seen_y {
        return Err(Error::UnresolvedMembership(format!("{y:?}")));
    }
    if x == y {
        return Ok(Rational::zero());
    }
    best.ok_or_else(|| Error::Infeasible("no cylinder contains both points".into()))
}

/// Distance matrix of `points` under the chain formula.
pub fn distance_matrix<S, P>(lattice: &CylinderLattice<S>, lambda: &Rational, points: &[P]) -> Result<Vec<Vec<Rational>>>
where
    S: ImageSet + Membership<P>,
    P: fmt::Debug + PartialEq,
{
    let n = points.len();
    let mut m = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = kameyama_distance(lattice, lambda, &points[i], &points[j])?.value;
            m[i][j] = d.clone();
            m[j][i] = d;
        }
    }
    Ok(m)
}

/// Distances between distinct points as a metric space; the diagonal is zero.
pub fn to_metric_space<S, P>(lattice: &CylinderLattice<S>, lambda: &Rational, points: &[P]) -> Result<FiniteMetricSpace<Rational>>
where
    S: ImageSet + Membership<P>,
    P: fmt::Debug + PartialEq,
{
    let labels = points.iter().map(|p| format!("{p:?}")).collect();
    FiniteMetricSpace::new(labels, distance_matrix(lattice, lambda, points)?, 0.0)
}

/// Cover of `points` by cylinders of weight at most `target`.
///
/// Each point takes the heaviest admissible cylinder containing it (the
/// largest one on ties); cylinders inside another chosen one are dropped.
/// Returns the cylinder indices with the points each one holds.
pub fn cylinder_cover<S, P>(
    lattice: &CylinderLattice<S>,
    lambda: &Rational,
    points: &[P],
    target: &Rational,
) -> Result<Vec<(usize, Vec<usize>)>>
where
    S: ImageSet + Membership<P>,
    P: fmt::Debug,
{
    validate_lambda(lambda)?;
    let weights: Vec<Rational> = lattice.cylinders().iter().map(|c| c.order.weight(lambda)).collect();
    let mut chosen: Vec<usize> = Vec::new();
    for p in points {
        let mut best: Option<usize> = None;
        for (i, c) in lattice.cylinders().iter().enumerate() {
            if weights[i] > *target || c.image.contains(p) != Some(true) {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if weights[i] > weights[b] => Some(i),
                Some(b) if weights[i] == weights[b] && lattice.relation(i, b) == Relation::Superset => Some(i),
                keep => keep,
            };
        }
        let b = best.ok_or_else(|| Error::Infeasible(format!("no cylinder of weight <= {} holds {p:?}", format_rational(target))))?;
        chosen.push(b);
    }
    let mut roots: Vec<usize> = chosen.clone();
    roots.sort_unstable();
    roots.dedup();
    let roots: Vec<usize> = roots
        .iter()
        .copied()
        .filter(|&a| !roots.iter().any(|&b| b != a && lattice.relation(a, b) == Relation::Subset))
        .collect();
    let mut out: Vec<(usize, Vec<usize>)> = roots.iter().map(|&r| (r, Vec::new())).collect();
    for (k, &c) in chosen.iter().enumerate() {
        let slot = out
            .iter_mut()
            .find(|(r, _)| *r == c || lattice.relation(c, *r) == Relation::Subset)
            .expect("every chosen cylinder lies in a root");
        slot.1.push(k);
    }
    Ok(out)
}

/// A point of the complex example: `0` or `x_{n,k} = c^k / 2^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExkamPoint {
    Zero,
    X { n: usize, k: usize },
}

impl ExkamPoint {
    pub fn x(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidInput(format!("x_({n},{k}) needs k <= n")));
        }
        Ok(ExkamPoint::X { n, k })
    }

    /// Coordinates in the plane for rotation angle `angle`.
    pub fn coords(&self, angle: f64) -> [f64; 2] {
        match *self {
            ExkamPoint::Zero => [0.0, 0.0],
            ExkamPoint::X { n, k } => {
                let r = 0.5f64.powi(n as i32);
                let (s, c) = (k as f64 * angle).sin_cos();
                [r * c, r * s]
            }
        }
    }

    fn level(&self) -> Option<usize> {
        match self {
            ExkamPoint::Zero => None,
            ExkamPoint::X { n, .. } => Some(*n),
        }
    }
}

impl fmt::Display for ExkamPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExkamPoint::Zero => write!(f, "0"),
            ExkamPoint::X { n, k } => write!(f, "x_{n},{k}"),
        }
    }
}

fn check_point(p: &ExkamPoint) -> Result<()> {
    match *p {
        ExkamPoint::X { n, k } if k > n => Err(Error::InvalidInput(format!("x_({n},{k}) needs k <= n"))),
        _ => Ok(()),
    }
}

/// Closed-form bracket `[lower, upper]` for `p_λ` on the complex example.
pub fn exkam_p(lambda: &Rational, a: &ExkamPoint, b: &ExkamPoint) -> Result<(Rational, Rational)> {
    validate_lambda(lambda)?;
    check_point(a)?;
    check_point(b)?;
    if a == b {
        return Ok((Rational::zero(), Rational::zero()));
    }
    Ok(match (a.level(), b.level()) {
        (None, Some(n)) | (Some(n), None) => {
            let v = rat_pow(lambda, n);
            (v.clone(), v)
        }
        (Some(n), Some(m)) => {
            let (u, v) = (rat_pow(lambda, n), rat_pow(lambda, m));
            (u.clone().max(v.clone()), u + v)
        }
        (None, None) => unreachable!("equal points handled above"),
    })
}

/// The ultrametric `u_λ` of the complex example.
pub fn exkam_u(lambda: &Rational, a: &ExkamPoint, b: &ExkamPoint) -> Result<Rational> {
    Ok(exkam_p(lambda, a, b)?.0)
}

/// Image of a word over `{f_1, f_2, f_3}` (letters `0, 1, 2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExkamImage {
    /// `X_{m,j} = {0} ∪ {x_{m+n,k+j} : 0 <= k <= n}`.
    Cylinder { m: usize, j: usize },
    Point(ExkamPoint),
}

impl ExkamImage {
    pub fn of_word(w: &[usize]) -> Result<Self> {
        let mut ones = 0;
        for (p, &letter) in w.iter().enumerate() {
            match letter {
                0 => {}
                1 => ones += 1,
                2 => return Ok(ExkamImage::Point(ExkamPoint::X { n: p, k: ones })),
                _ => return Err(Error::InvalidInput(format!("letter {letter} out of range"))),
            }
        }
        Ok(ExkamImage::Cylinder { m: w.len(), j: ones })
    }
}

fn cylinder_contains(m: usize, j: usize, p: &ExkamPoint) -> bool {
    match *p {
        ExkamPoint::Zero => true,
        ExkamPoint::X { n, k } => n >= m && j <= k && k <= j + n - m,
    }
}

impl ImageSet for ExkamImage {
    fn key(&self) -> String {
        format!("{self:?}")
    }

    fn is_singleton(&self) -> bool {
        matches!(self, ExkamImage::Point(_))
    }

    fn relation(&self, other: &Self) -> Relation {
        use ExkamImage::*;
        match (*self, *other) {
            (Cylinder { m, j }, Cylinder { m: m2, j: j2 }) => {
                let inside = |m: usize, j: usize, m2: usize, j2: usize| m >= m2 && j >= j2 && j - j2 <= m - m2;
                Relation::from_parts(inside(m, j, m2, j2), inside(m2, j2, m, j), true)
            }
            (Point(p), Cylinder { m, j }) => {
                if cylinder_contains(m, j, &p) {
                    Relation::Subset
                } else {
                    Relation::Disjoint
                }
            }
            (Cylinder { .. }, Point(_)) => other.relation(self).flip(),
            (Point(p), Point(q)) => {
                if p == q {
                    Relation::Equal
                } else {
                    Relation::Disjoint
                }
            }
        }
    }
}

impl Membership<ExkamPoint> for ExkamImage {
    fn contains(&self, p: &ExkamPoint) -> Option<bool> {
        Some(match self {
            ExkamImage::Cylinder { m, j } => cylinder_contains(*m, *j, p),
            ExkamImage::Point(q) => q == p,
        })
    }
}

/// Exact lattice of the complex example up to `depth`.
pub fn exkam_lattice(depth: usize) -> Result<CylinderLattice<ExkamImage>> {
    if depth < 1 {
        return Err(Error::InvalidInput("lattice depth must be at least 1".into()));
    }
    let mut items = Vec::new();
    let mut layer: Vec<Word> = vec![Vec::new()];
    items.push((Vec::new(), Order::Finite(0), ExkamImage::Cylinder { m: 0, j: 0 }));
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &layer {
            for letter in 0..3 {
                let mut v = w.clone();
                v.push(letter);
                let img = ExkamImage::of_word(&v)?;
                let order = if img.is_singleton() {
                    Order::Omega
                } else {
                    Order::Finite(v.len())
                };
                items.push((v.clone(), order, img));
                // words extending a constant map are constant with the same value
                if !img.is_singleton() {
                    next.push(v);
                }
            }
        }
        layer = next;
    }
    Ok(CylinderLattice::from_images(depth, 3, "exact-exkam", items))
}

/// The set `S_n = {x_{n,l} : 0 <= l <= n}`.
pub fn exkam_level_set(n: usize) -> Vec<ExkamPoint> {
    (0..=n).map(|l| ExkamPoint::X { n, k: l }).collect()
}

/// Rendering helper for reports.
pub fn describe(r: &Rational) -> String {
    format_rational(r)
}
