//! Finite metric spaces, ultrametric checks, snowflakes, Hausdorff distance and
//! doubling numbers.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest space for which `doubling_number` enumerates every subset.
pub const EXHAUSTIVE_LIMIT: usize = 15;

/// Largest set handed to the exact cover search; bigger sets get a greedy bound.
const EXACT_COVER_LIMIT: usize = 40;

/// Labeled points with a symmetric distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMetricSpace<T> {
    labels: Vec<String>,
    dist: Vec<Vec<T>>,
    tol: f64,
}

impl<T: Scalar> FiniteMetricSpace<T> {
    /// Validates shape, zero diagonal, symmetry and non-negativity.
    pub fn new(labels: Vec<String>, dist: Vec<Vec<T>>, tol: f64) -> Result<Self> {
        let n = labels.len();
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput(format!(
                "distance matrix must be {n}x{n} to match the labels"
            )));
        }
        for i in 0..n {
            if !dist[i][i].is_zero_tol(tol) {
                return Err(Error::InvalidInput(format!("d({i},{i}) is not zero")));
            }
            for j in 0..n {
                if !T::zero().le_tol(&dist[i][j], tol) {
                    return Err(Error::InvalidInput(format!("d({i},{j}) is negative")));
                }
                if !dist[i][j].eq_tol(&dist[j][i], tol) {
                    return Err(Error::InvalidInput(format!("d({i},{j}) != d({j},{i})")));
                }
            }
        }
        Ok(Self { labels, dist, tol })
    }

    /// Like `new` with labels `0..n`.
    pub fn from_matrix(dist: Vec<Vec<T>>, tol: f64) -> Result<Self> {
        let labels = (0..dist.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dist, tol)
    }

    /// Builds the matrix from a distance function on indices.
    pub fn from_fn(labels: Vec<String>, tol: f64, mut d: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let n = labels.len();
        let mut dist = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = d(i, j);
                dist[i][j] = v.clone();
                dist[j][i] = v;
            }
        }
        Self::new(labels, dist, tol)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &[Vec<T>] {
        &self.dist
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn d(&self, i: usize, j: usize) -> &T {
        &self.dist[i][j]
    }

    pub fn diameter(&self) -> T {
        self.subset_diameter(&(0..self.len()).collect::<Vec<_>>())
    }

    pub fn subset_diameter(&self, subset: &[usize]) -> T {
        let mut best = T::zero();
        for (a, &i) in subset.iter().enumerate() {
            for &j in &subset[a + 1..] {
                if self.dist[i][j] > best {
                    best = self.dist[i][j].clone();
                }
            }
        }
        best
    }

    /// Restriction to the given indices, in that order.
    pub fn subspace(&self, idx: &[usize]) -> Self {
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        let dist = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| self.dist[i][j].clone()).collect())
            .collect();
        Self { labels, dist, tol: self.tol }
    }

    /// First triple `(i, j, k)` with `d(i,k) > d(i,j) + d(j,k) + tol`.
    pub fn triangle_violation(&self, tol: f64) -> Option<(usize, usize, usize)> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let rhs = self.dist[i][j].clone() + self.dist[j][k].clone();
                    if !self.dist[i][k].le_tol(&rhs, tol) {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    pub fn is_metric(&self, tol: f64) -> bool {
        self.triangle_violation(tol).is_none()
    }

    /// First triple `(i, j, k)` breaking the strong triangle inequality.
    pub fn ultrametric_violation(&self, tol: f64) -> Option<(usize, usize, usize)> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                for k in (i + 1)..n {
                    let m = T::max_of(&self.dist[i][j], &self.dist[j][k]);
                    if !self.dist[i][k].le_tol(&m, tol) {
                        return Some((i, j, k));
                    }
                }
            }
        }
        None
    }

    pub fn is_ultrametric(&self, tol: f64) -> bool {
        self.ultrametric_violation(tol).is_none()
    }

    pub fn to_f64(&self) -> FiniteMetricSpace<f64> {
        FiniteMetricSpace {
            labels: self.labels.clone(),
            dist: self
                .dist
                .iter()
                .map(|r| r.iter().map(Scalar::to_f64).collect())
                .collect(),
            tol: self.tol,
        }
    }

    /// Minimum cover of `subset` by sets of diameter at most `radius`.
    pub fn min_cover(&self, subset: &[usize], radius: &T) -> Cover {
        min_cover_with(subset, |i, j| self.dist[i][j].le_tol(radius, self.tol))
    }

    /// Doubling number for the requested subset family.
    ///
    /// `shrink` is the ratio between the diameter of the covering sets and the
    /// diameter of the set being covered.
    pub fn doubling_number(&self, shrink: &T, family: SubsetFamily) -> Result<DoublingReport> {
        if self.is_empty() {
            return Err(Error::InvalidInput("doubling number of an empty space".into()));
        }
        if !(T::zero() < *shrink && *shrink < T::one()) {
            return Err(Error::InvalidInput("shrink must lie in (0,1)".into()));
        }
        let n = self.len();
        let family = match family {
            SubsetFamily::Auto if n <= EXHAUSTIVE_LIMIT => SubsetFamily::AllSubsets,
            SubsetFamily::Auto => SubsetFamily::Balls,
            f => f,
        };
        if family == SubsetFamily::AllSubsets && n > 20 {
            return Err(Error::InvalidInput("all-subsets enumeration is limited to 20 points".into()));
        }
        let mut report = DoublingReport {
            value: 1,
            family,
            bound: BoundKind::Exact,
            witness: vec![0],
            subsets_checked: 0,
        };
        let consider = |s: Vec<usize>, report: &mut DoublingReport| {
            report.subsets_checked += 1;
            if s.len() <= report.value {
                return;
            }
            let radius = shrink.clone() * self.subset_diameter(&s);
            let cover = self.min_cover(&s, &radius);
            if cover.bound == BoundKind::GreedyUpper {
                report.bound = BoundKind::GreedyUpper;
            }
            if cover.size() > report.value {
                report.value = cover.size();
                report.witness = s;
            }
        };
        match family {
            SubsetFamily::AllSubsets => {
                for mask in 1u64..(1u64 << n) {
                    let s: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                    consider(s, &mut report);
                }
            }
            _ => {
                for ball in self.closed_balls() {
                    consider(ball, &mut report);
                }
            }
        }
        Ok(report)
    }

    /// Every distinct closed ball `B(x, r)` with `r` a realized distance from `x`.
    pub fn closed_balls(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for x in 0..n {
            for r in 0..n {
                let radius = &self.dist[x][r];
                let ball: Vec<usize> = (0..n).filter(|&y| self.dist[x][y].le_tol(radius, self.tol)).collect();
                if !out.contains(&ball) {
                    out.push(ball);
                }
            }
        }
        out.sort();
        out
    }
}

impl FiniteMetricSpace<f64> {
    /// Euclidean distances between the points of a point set.
    pub fn euclidean<T: Scalar>(points: &PointSet<T>, tol: f64) -> Result<Self> {
        let labels = (0..points.len()).map(|i| i.to_string()).collect();
        Self::from_fn(labels, tol, |i, j| {
            euclid_sq(&points.points[i], &points.points[j]).to_f64().sqrt()
        })
    }

    /// Raises every distance to the power `alpha`.
    ///
    /// Non-ultrametric inputs are checked for the triangle inequality after the
    /// transformation and rejected with the offending triple.
    pub fn snowflake(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidInput("snowflake exponent must lie in (0,1]".into()));
        }
        if alpha == 1.0 {
            return Ok(self.clone());
        }
        let out = Self {
            labels: self.labels.clone(),
            dist: self.dist.iter().map(|r| r.iter().map(|d| d.powf(alpha)).collect()).collect(),
            tol: self.tol,
        };
        if !self.is_ultrametric(self.tol) {
            if let Some((i, j, k)) = out.triangle_violation(self.tol) {
                return Err(Error::TriangleViolation(i, j, k));
            }
        }
        Ok(out)
    }
}

/// Which subsets a doubling estimate ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetFamily {
    /// All subsets up to `EXHAUSTIVE_LIMIT` points, closed balls beyond.
    Auto,
    AllSubsets,
    Balls,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Exact,
    GreedyUpper,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoublingReport {
    pub value: usize,
    pub family: SubsetFamily,
    pub bound: BoundKind,
    /// A subset attaining `value`.
    pub witness: Vec<usize>,
    pub subsets_checked: usize,
}

/// A partition of a point subset into groups of bounded diameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub groups: Vec<Vec<usize>>,
    pub bound: BoundKind,
}

impl Cover {
    pub fn size(&self) -> usize {
        self.groups.len()
    }
}

/// Minimum number of pairwise-`close` groups covering `subset`.
///
/// Points are placed in ascending index order, each into the first compatible
/// group or a new one, so ties resolve lexicographically.
pub fn min_cover_with(subset: &[usize], close: impl Fn(usize, usize) -> bool) -> Cover {
    let mut pts = subset.to_vec();
    pts.sort_unstable();
    pts.dedup();
    let greedy = greedy_cover(&pts, &close);
    if pts.len() > EXACT_COVER_LIMIT {
        return Cover { groups: greedy, bound: BoundKind::GreedyUpper };
    }
    let mut search = CoverSearch { pts: &pts, close: &close, best: greedy, current: Vec::new() };
    search.run(0);
    Cover { groups: search.best, bound: BoundKind::Exact }
}

fn greedy_cover(pts: &[usize], close: &impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &p in pts {
        match groups.iter_mut().find(|g| g.iter().all(|&q| close(p, q))) {
            Some(g) => g.push(p),
            None => groups.push(vec![p]),
        }
    }
    groups
}

struct CoverSearch<'a, F> {
    pts: &'a [usize],
    close: &'a F,
    best: Vec<Vec<usize>>,
    current: Vec<Vec<usize>>,
}

impl<F: Fn(usize, usize) -> bool> CoverSearch<'_, F> {
    fn run(&mut self, k: usize) {
        if self.current.len() >= self.best.len() {
            return;
        }
        if k == self.pts.len() {
            self.best = self.current.clone();
            return;
        }
        let p = self.pts[k];
        for g in 0..self.current.len() {
            if self.current[g].iter().all(|&q| (self.close)(p, q)) {
                self.current[g].push(p);
                self.run(k + 1);
                self.current[g].pop();
            }
        }
        if self.current.len() + 1 < self.best.len() {
            self.current.push(vec![p]);
            self.run(k + 1);
            self.current.pop();
        }
    }
}

/// A non-empty finite list of points in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet<T> {
    dim: usize,
    points: Vec<Vec<T>>,
}

impl<T: Scalar> PointSet<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidInput("point set must be non-empty with dimension >= 1".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("points have mixed dimensions".into()));
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<T>> {
        self.points
    }

    pub fn to_f64(&self) -> PointSet<f64> {
        PointSet {
            dim: self.dim,
            points: self.points.iter().map(|p| p.iter().map(Scalar::to_f64).collect()).collect(),
        }
    }

    /// Smallest squared distance from `x` to the set.
    pub fn dist_sq_to(&self, x: &[T]) -> T {
        let mut best: Option<T> = None;
        for p in &self.points {
            let d = euclid_sq(p, x);
            if best.as_ref().is_none_or(|b| d < *b) {
                best = Some(d);
            }
        }
        best.expect("point sets are non-empty")
    }

    /// Axis-aligned bounding box as `(lo, hi)` corners.
    pub fn bounding_box(&self) -> (Vec<T>, Vec<T>) {
        let mut lo = self.points[0].clone();
        let mut hi = self.points[0].clone();
        for p in &self.points[1..] {
            for k in 0..self.dim {
                if p[k] < lo[k] {
                    lo[k] = p[k].clone();
                }
                if p[k] > hi[k] {
                    hi[k] = p[k].clone();
                }
            }
        }
        (lo, hi)
    }
}

pub fn euclid_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| {
        let d = x.clone() - y.clone();
        acc + d.clone() * d
    })
}

/// Squared Hausdorff distance, exact for the rational backend.
pub fn hausdorff_sq<T: Scalar>(a: &PointSet<T>, b: &PointSet<T>) -> Result<T> {
    if a.dim != b.dim {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.dim, b.dim
        )));
    }
    if a.dim == 1 {
        return Ok(hausdorff_sq_line(a, b));
    }
    let mut best = T::zero();
    for (x, other) in a.points.iter().map(|p| (p, b)).chain(b.points.iter().map(|p| (p, a))) {
        let d = other.dist_sq_to(x);
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

fn hausdorff_sq_line<T: Scalar>(a: &PointSet<T>, b: &PointSet<T>) -> T {
    let sorted = |s: &PointSet<T>| {
        let mut v: Vec<T> = s.points.iter().map(|p| p[0].clone()).collect();
        v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        v
    };
    let (xa, xb) = (sorted(a), sorted(b));
    let directed = |from: &[T], to: &[T]| {
        let mut best = T::zero();
        for x in from {
            let i = to.partition_point(|y| y < x);
            let mut d: Option<T> = None;
            for j in [i.wrapping_sub(1), i] {
                if let Some(y) = to.get(j) {
                    let gap = (x.clone() - y.clone()).abs();
                    if d.as_ref().is_none_or(|g| gap < *g) {
                        d = Some(gap);
                    }
                }
            }
            let d = d.expect("non-empty");
            if d > best {
                best = d;
            }
        }
        best
    };
    let h = T::max_of(&directed(&xa, &xb), &directed(&xb, &xa));
    h.clone() * h
}

/// Hausdorff distance under the Euclidean metric.
pub fn hausdorff_distance<T: Scalar>(a: &PointSet<T>, b: &PointSet<T>) -> Result<f64> {
    Ok(hausdorff_sq(a, b)?.to_f64().sqrt())
}
