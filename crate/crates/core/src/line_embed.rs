//! Bi-Lipschitz embedding of a snowflaked doubling ultrametric space into the
//! line through nested intervals, and conjugation of contractions.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::metric::FiniteMetricSpace;
use crate::scalar::{format_rational, rat_pow, Rational};
use crate::{Error, Result};

/// A closed ball of radius `λ^n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    /// Sorted point indices.
    pub members: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// The closed balls of radius `λ^n` for `n = 0..=N`.
#[derive(Clone, Debug)]
pub struct BallTree {
    pub lambda: Rational,
    pub levels: Vec<Vec<Ball>>,
    /// Set when the level cap stopped the refinement before all balls were
    /// singletons.
    pub truncated: bool,
    points: usize,
}

impl BallTree {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Largest number of children of a ball.
    pub fn max_children(&self) -> usize {
        self.levels.iter().flatten().map(|b| b.children.len()).max().unwrap_or(0).max(1)
    }

    /// Index of the level-`n` ball containing `x`.
    pub fn ball_of(&self, level: usize, x: usize) -> usize {
        self.levels[level]
            .iter()
            .position(|b| b.members.binary_search(&x).is_ok())
            .expect("balls partition the points")
    }

    pub fn ball_id(level: usize, index: usize) -> String {
        format!("L{level}:{index}")
    }

    /// Checks separation of sibling balls, unique parents and the child bound.
    pub fn verify(&self, space: &FiniteMetricSpace<Rational>, max_children: usize) -> Result<()> {
        for (n, level) in self.levels.iter().enumerate() {
            let r = rat_pow(&self.lambda, n);
            for (i, a) in level.iter().enumerate() {
                for b in &level[i + 1..] {
                    for &x in &a.members {
                        for &y in &b.members {
                            if *space.d(x, y) <= r {
                                return Err(Error::InvalidInput(format!("balls at level {n} are not separated")));
                            }
                        }
                    }
                }
                if a.children.len() > max_children {
                    return Err(Error::InvalidInput(format!("ball L{n}:{i} has {} children", a.children.len())));
                }
                if n > 0 {
                    let p = a.parent.ok_or_else(|| Error::InvalidInput("missing parent".into()))?;
                    let parent = &self.levels[n - 1][p];
                    if !a.members.iter().all(|x| parent.members.binary_search(x).is_ok()) {
                        return Err(Error::InvalidInput(format!("ball L{n}:{i} escapes its parent")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Closed balls of radius `λ^n` down to the level where all balls are
/// singletons, or `max_levels`.
pub fn ball_hierarchy(space: &FiniteMetricSpace<Rational>, lambda: &Rational, max_levels: usize) -> Result<BallTree> {
    if *lambda <= Rational::zero() || *lambda >= Rational::one() {
        return Err(Error::InvalidInput("lambda must lie in (0,1)".into()));
    }
    if let Some((i, j, k)) = space.ultrametric_violation(0.0) {
        return Err(Error::NotUltrametric(i, j, k));
    }
    if space.diameter() > Rational::one() {
        return Err(Error::InvalidInput("the space must have diameter at most 1".into()));
    }
    let n = space.len();
    let mut levels = vec![vec![Ball { members: (0..n).collect(), parent: None, children: Vec::new() }]];
    let mut truncated = false;
    while levels.last().expect("non-empty").iter().any(|b| b.members.len() > 1) {
        let level = levels.len();
        if level > max_levels {
            truncated = true;
            break;
        }
        let r = rat_pow(lambda, level);
        let mut next = Vec::new();
        let prev = levels.last_mut().expect("non-empty");
        for (p, ball) in prev.iter_mut().enumerate() {
            let mut rest = ball.members.clone();
            while let Some(&first) = rest.first() {
                let (inside, outside): (Vec<usize>, Vec<usize>) = rest.iter().partition(|&&y| *space.d(first, y) <= r);
                ball.children.push(next.len());
                next.push(Ball { members: inside, parent: Some(p), children: Vec::new() });
                rest = outside;
            }
        }
        levels.push(next);
    }
    Ok(BallTree { lambda: lambda.clone(), levels, truncated, points: n })
}

/// Snowflake exponent `α = 1/2^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Alpha {
    pub k: u32,
}

impl Alpha {
    pub fn value(&self) -> Rational {
        Rational::new(BigInt::one(), BigInt::one() << self.k)
    }
}

/// Largest admissible `α <= 1` with `λ^α < ε / ((1 + ε) D)`.
///
/// `λ^α` grows as `α` shrinks, so `α = 1` is the only candidate worth testing.
pub fn choose_alpha(lambda: &Rational, epsilon: &Rational, d: usize) -> Result<Alpha> {
    if *epsilon <= Rational::zero() || d == 0 {
        return Err(Error::InvalidInput("epsilon must be positive and D at least 1".into()));
    }
    let bound = epsilon.clone() / ((Rational::one() + epsilon) * Rational::from_integer(d.into()));
    if *lambda < bound {
        Ok(Alpha { k: 0 })
    } else {
        Err(Error::Infeasible(format!(
            "lambda = {} is not below eps/((1+eps)D) = {}; raise epsilon or lower D",
            format_rational(lambda),
            format_rational(&bound)
        )))
    }
}

/// Exact `2^k`-th root, when it exists.
pub fn rational_root(r: &Rational, k: u32) -> Option<Rational> {
    let mut x = r.clone();
    for _ in 0..k {
        let (p, q) = (x.numer().clone(), x.denom().clone());
        if p.is_negative() {
            return None;
        }
        let (sp, sq) = (p.sqrt(), q.sqrt());
        if &sp * &sp != p || &sq * &sq != q {
            return None;
        }
        x = Rational::new(sp, sq);
    }
    Some(x)
}

/// Nested closed intervals `I_W` for every ball of a tree.
#[derive(Clone, Debug)]
pub struct IntervalAssignment {
    pub tree: BallTree,
    pub alpha: Alpha,
    pub epsilon: Rational,
    /// `λ^α`.
    pub mu: Rational,
    pub intervals: Vec<Vec<(Rational, Rational)>>,
    /// Balls whose children did not fit the equal-gap rule and were spread
    /// across the parent with gaps only between siblings.
    pub spread: Vec<(usize, usize)>,
}

/// Lays out child intervals left to right inside each parent.
///
/// Children come in order of their smallest point; the first child starts at
/// the parent's left end and consecutive children are separated by
/// `(W - sum w) / (k + 1)`. When that gap is too small for the separation
/// condition the `k - 1` inner gaps share the whole slack instead.
pub fn interval_assignment(tree: &BallTree, alpha: Alpha, epsilon: &Rational) -> Result<IntervalAssignment> {
    let mu = rational_root(&tree.lambda, alpha.k)
        .ok_or_else(|| Error::InvalidInput("lambda has no exact root for this alpha".into()))?;
    let mut intervals: Vec<Vec<(Rational, Rational)>> = vec![vec![(Rational::zero(), Rational::one())]];
    let mut spread = Vec::new();
    for n in 0..tree.depth() {
        let width = rat_pow(&mu, n);
        let child_width = rat_pow(&mu, n + 1);
        let need = mu.clone() / epsilon * &width;
        let mut next = vec![(Rational::zero(), Rational::zero()); tree.levels[n + 1].len()];
        for (p, ball) in tree.levels[n].iter().enumerate() {
            let k = ball.children.len();
            let (lo, _) = intervals[n][p].clone();
            let slack = width.clone() - child_width.clone() * Rational::from_integer(k.into());
            let mut gap = slack.clone() / Rational::from_integer((k + 1).into());
            if k > 1 && gap <= need {
                gap = slack.clone() / Rational::from_integer((k - 1).into());
                spread.push((n, p));
            }
            if k > 1 && gap <= need {
                return Err(Error::Infeasible(format!(
                    "ball {} has {k} children which do not fit with the required separation",
                    BallTree::ball_id(n, p)
                )));
            }
            let mut at = lo;
            for &c in &ball.children {
                let end = at.clone() + &child_width;
                next[c] = (at.clone(), end.clone());
                at = end + &gap;
            }
        }
        intervals.push(next);
    }
    Ok(IntervalAssignment { tree: tree.clone(), alpha, epsilon: epsilon.clone(), mu, intervals, spread })
}

/// Pairwise check of the two Hölder bounds.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub pairs: usize,
    pub violations: Vec<(usize, usize)>,
    /// Smallest and largest `|φx - φy| / d^α` (floating point, informative).
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl IntervalAssignment {
    /// `φ(x)`: left end of the deepest interval containing `x`.
    pub fn phi(&self, x: usize) -> Result<Rational> {
        if x >= self.tree.points() {
            return Err(Error::InvalidInput(format!("unknown point {x}")));
        }
        let n = self.tree.depth();
        Ok(self.intervals[n][self.tree.ball_of(n, x)].0.clone())
    }

    pub fn phi_all(&self) -> Vec<Rational> {
        (0..self.tree.points()).map(|x| self.phi(x).expect("valid index")).collect()
    }

    /// `{ball id: [lo, hi]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (n, level) in self.intervals.iter().enumerate() {
            for (i, (lo, hi)) in level.iter().enumerate() {
                m.insert(
                    BallTree::ball_id(n, i),
                    serde_json::json!([format_rational(lo), format_rational(hi)]),
                );
            }
        }
        serde_json::Value::Object(m)
    }

    /// `(λ^α/ε) d^α <= |φx - φy| <= λ^{-α} d^α` for every pair, exactly.
    ///
    /// With `α = 1/2^k` both sides are compared after raising to the power `2^k`.
    pub fn verify_bounds(&self, space: &FiniteMetricSpace<Rational>) -> BoundsReport {
        let phi = self.phi_all();
        let e = 1usize << self.alpha.k;
        let lower = rat_pow(&(self.mu.clone() / &self.epsilon), e);
        let alpha = 1.0 / e as f64;
        let mut report = BoundsReport { pairs: 0, violations: Vec::new(), min_ratio: f64::INFINITY, max_ratio: 0.0 };
        for x in 0..phi.len() {
            for y in (x + 1)..phi.len() {
                report.pairs += 1;
                let gap = (phi[x].clone() - &phi[y]).abs();
                let d = space.d(x, y);
                let gap_e = rat_pow(&gap, e);
                let ok_lower = lower.clone() * d <= gap_e;
                let ok_upper = rat_pow(&(self.mu.clone() * &gap), e) <= *d;
                if !(ok_lower && ok_upper) {
                    report.violations.push((x, y));
                }
                let ratio = crate::scalar::rational_to_f64(&gap) / crate::scalar::rational_to_f64(d).powf(alpha);
                report.min_ratio = report.min_ratio.min(ratio);
                report.max_ratio = report.max_ratio.max(ratio);
            }
        }
        report
    }
}

/// `t -> clamp(min_s [g(s) + ε |t - s|])` built from sample values `g(s)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    #[serde(serialize_with = "ser_pairs")]
    pub samples: Vec<(Rational, Rational)>,
    #[serde(serialize_with = "ser_rat")]
    pub epsilon: Rational,
    #[serde(serialize_with = "ser_rat")]
    pub lo: Rational,
    #[serde(serialize_with = "ser_rat")]
    pub hi: Rational,
}

fn ser_rat<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

fn ser_pairs<S: serde::Serializer>(v: &[(Rational, Rational)], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (a, b) in v {
        seq.serialize_element(&[format_rational(a), format_rational(b)])?;
    }
    seq.end()
}

impl PiecewiseLinear {
    pub fn eval(&self, t: &Rational) -> Rational {
        let v = self
            .samples
            .iter()
            .map(|(s, g)| g.clone() + self.epsilon.clone() * (t.clone() - s).abs())
            .min()
            .expect("non-empty");
        v.max(self.lo.clone()).min(self.hi.clone())
    }

    /// Kinks of the extension: the samples and the peaks between neighbours.
    pub fn breakpoints(&self) -> Vec<(Rational, Rational)> {
        let mut ts: Vec<Rational> = self.samples.iter().map(|(s, _)| s.clone()).collect();
        if !self.epsilon.is_zero() {
            for w in self.samples.windows(2) {
                let ((s0, g0), (s1, g1)) = (&w[0], &w[1]);
                let two = Rational::from_integer(2.into());
                ts.push((g1.clone() - g0 + self.epsilon.clone() * (s0.clone() + s1)) / (two * &self.epsilon));
            }
        }
        ts.sort();
        ts.dedup();
        ts.into_iter().map(|t| {
            let v = self.eval(&t);
            (t, v)
        }).collect()
    }
}

/// Conjugate `φ ∘ f ∘ φ^{-1}` of a `λ`-Lipschitz self-map of the point set,
/// checked `ε`-Lipschitz and extended to the line.
pub fn conjugate_contraction(
    assign: &IntervalAssignment,
    space: &FiniteMetricSpace<Rational>,
    f: &[usize],
) -> Result<PiecewiseLinear> {
    let n = space.len();
    if f.len() != n || f.iter().any(|&y| y >= n) {
        return Err(Error::InvalidInput("the map must send the point set into itself".into()));
    }
    let lambda = &assign.tree.lambda;
    for x in 0..n {
        for y in (x + 1)..n {
            if *space.d(f[x], f[y]) > lambda.clone() * space.d(x, y) {
                return Err(Error::LipschitzViolation(x, y));
            }
        }
    }
    let phi = assign.phi_all();
    for x in 0..n {
        for y in (x + 1)..n {
            let lhs = (phi[f[x]].clone() - &phi[f[y]]).abs();
            let rhs = assign.epsilon.clone() * (phi[x].clone() - &phi[y]).abs();
            if lhs > rhs {
                return Err(Error::LipschitzViolation(x, y));
            }
        }
    }
    let mut samples: Vec<(Rational, Rational)> = (0..n).map(|x| (phi[x].clone(), phi[f[x]].clone())).collect();
    samples.sort();
    samples.dedup_by(|a, b| a.0 == b.0);
    let lo = phi.iter().min().expect("non-empty").clone();
    let hi = phi.iter().max().expect("non-empty").clone();
    Ok(PiecewiseLinear { samples, epsilon: assign.epsilon.clone(), lo, hi })
}
