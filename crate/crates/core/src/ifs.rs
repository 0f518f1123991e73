//! Affine and complex contractions, Hutchinson iteration and attractor
//! approximation.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metric::{hausdorff_distance, PointSet};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Steps discarded at the start of every chaos game orbit.
pub const CHAOS_BURN_IN: usize = 32;

/// Linear part of an affine map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Linear<T> {
    /// Row-major `d x d` matrix.
    Matrix(Vec<Vec<T>>),
    /// Multiplication by `re + i*im` on the plane.
    Complex { re: T, im: T },
}

/// `x -> A x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap<T> {
    pub linear: Linear<T>,
    pub offset: Vec<T>,
}

impl<T: Scalar> AffineMap<T> {
    pub fn new(matrix: Vec<Vec<T>>, offset: Vec<T>) -> Result<Self> {
        let d = offset.len();
        if d == 0 || matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("affine map needs a d x d matrix and a length-d offset".into()));
        }
        Ok(Self { linear: Linear::Matrix(matrix), offset })
    }

    /// `z -> a z + b` with `a = (a_re, a_im)`, `b = (b_re, b_im)`.
    pub fn complex(a: (T, T), b: (T, T)) -> Self {
        Self { linear: Linear::Complex { re: a.0, im: a.1 }, offset: vec![b.0, b.1] }
    }

    /// One-dimensional `x -> a x + b`.
    pub fn scalar(a: T, b: T) -> Self {
        Self { linear: Linear::Matrix(vec![vec![a]]), offset: vec![b] }
    }

    pub fn identity(dim: usize) -> Self {
        let m = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        Self { linear: Linear::Matrix(m), offset: vec![T::zero(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.linear, Linear::Complex { .. })
    }

    pub fn to_f64(&self) -> AffineMap<f64> {
        let linear = match &self.linear {
            Linear::Matrix(m) => Linear::Matrix(m.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect()),
            Linear::Complex { re, im } => Linear::Complex { re: re.to_f64(), im: im.to_f64() },
        };
        AffineMap { linear, offset: self.offset.iter().map(Scalar::to_f64).collect() }
    }

    pub fn matrix(&self) -> Vec<Vec<T>> {
        match &self.linear {
            Linear::Matrix(m) => m.clone(),
            Linear::Complex { re, im } => vec![
                vec![re.clone(), -im.clone()],
                vec![im.clone(), re.clone()],
            ],
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        match &self.linear {
            Linear::Complex { re, im } => vec![
                re.clone() * x[0].clone() - im.clone() * x[1].clone() + self.offset[0].clone(),
                im.clone() * x[0].clone() + re.clone() * x[1].clone() + self.offset[1].clone(),
            ],
            Linear::Matrix(m) => m
                .iter()
                .zip(&self.offset)
                .map(|(row, b)| {
                    row.iter().zip(x).fold(b.clone(), |acc, (a, v)| acc + a.clone() * v.clone())
                })
                .collect(),
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        let offset = self.apply(&inner.offset);
        let linear = match (&self.linear, &inner.linear) {
            (Linear::Complex { re: a, im: b }, Linear::Complex { re: c, im: d }) => Linear::Complex {
                re: a.clone() * c.clone() - b.clone() * d.clone(),
                im: a.clone() * d.clone() + b.clone() * c.clone(),
            },
            _ => {
                let (p, q) = (self.matrix(), inner.matrix());
                let n = p.len();
                Linear::Matrix(
                    (0..n)
                        .map(|i| {
                            (0..n)
                                .map(|j| (0..n).fold(T::zero(), |acc, k| acc + p[i][k].clone() * q[k][j].clone()))
                                .collect()
                        })
                        .collect(),
                )
            }
        };
        Self { linear, offset }
    }

    /// True when the linear part vanishes within `tol`.
    pub fn is_constant(&self, tol: f64) -> bool {
        self.matrix().iter().flatten().all(|a| a.is_zero_tol(tol))
    }

    /// Coefficient-wise equality within `tol` (exact for rationals).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim()
            && self.offset.iter().zip(&other.offset).all(|(a, b)| a.eq_tol(b, tol))
            && self
                .matrix()
                .iter()
                .flatten()
                .zip(other.matrix().iter().flatten())
                .all(|(a, b)| a.eq_tol(b, tol))
    }

    /// Operator 2-norm of the linear part; `|a|` for complex maps.
    pub fn lipschitz(&self) -> f64 {
        match &self.linear {
            Linear::Complex { re, im } => re.to_f64().hypot(im.to_f64()),
            Linear::Matrix(m) if m.len() == 1 => m[0][0].to_f64().abs(),
            Linear::Matrix(m) => {
                let n = m.len();
                let mat = DMatrix::from_fn(n, n, |i, j| m[i][j].to_f64());
                mat.singular_values().iter().cloned().fold(0.0, f64::max)
            }
        }
    }

    /// The unique fixed point, from `(I - A)^{-1} b` or Banach iteration.
    pub fn fixed_point(&self, tol: f64) -> Vec<T> {
        if let Some(p) = solve_fixed_point(&self.matrix(), &self.offset) {
            return p;
        }
        let mut x = vec![T::zero(); self.dim()];
        for _ in 0..10_000 {
            let next = self.apply(&x);
            let step = next
                .iter()
                .zip(&x)
                .map(|(a, b)| (a.clone() - b.clone()).to_f64().abs())
                .fold(0.0, f64::max);
            x = next;
            if step <= tol {
                break;
            }
        }
        x
    }
}

/// Gaussian elimination for `(I - A) p = b`; `None` when the system is singular.
fn solve_fixed_point<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let mut m: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut row: Vec<T> = (0..n)
                .map(|j| {
                    let id = if i == j { T::one() } else { T::zero() };
                    id - a[i][j].clone()
                })
                .collect();
            row.push(b[i].clone());
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].is_zero_tol(if T::EXACT { 0.0 } else { 1e-14 }) {
            return None;
        }
        m.swap(col, pivot);
        for i in 0..n {
            if i != col {
                let factor = m[i][col].clone() / m[col][col].clone();
                for j in col..=n {
                    let v = m[col][j].clone() * factor.clone();
                    m[i][j] = m[i][j].clone() - v;
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n].clone() / m[i][i].clone()).collect())
}

/// A finite family of affine contractions of a common space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ifs<T> {
    maps: Vec<AffineMap<T>>,
    dim: usize,
}

impl<T: Scalar> Ifs<T> {
    pub fn new(maps: Vec<AffineMap<T>>) -> Result<Self> {
        let dim = maps
            .first()
            .map(AffineMap::dim)
            .ok_or_else(|| Error::InvalidInput("an IFS needs at least one map".into()))?;
        for (i, f) in maps.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::InvalidInput(format!("map {i} has dimension {} not {dim}", f.dim())));
            }
            let lip = f.lipschitz();
            if lip >= 1.0 {
                return Err(Error::InvalidInput(format!("map {i} is not a contraction (Lip = {lip})")));
            }
        }
        Ok(Self { maps, dim })
    }

    pub fn maps(&self) -> &[AffineMap<T>] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest Lipschitz constant of the family.
    pub fn lipschitz(&self) -> f64 {
        self.maps.iter().map(AffineMap::lipschitz).fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> Ifs<f64> {
        Ifs { maps: self.maps.iter().map(AffineMap::to_f64).collect(), dim: self.dim }
    }

    pub fn fixed_points(&self, tol: f64) -> PointSet<T> {
        PointSet::new(self.maps.iter().map(|f| f.fixed_point(tol)).collect()).expect("non-empty")
    }

    /// `f_{w_0} ∘ ... ∘ f_{w_{n-1}}`.
    pub fn compose_word(&self, word: &[usize]) -> AffineMap<T> {
        match word.split_first() {
            None => AffineMap::identity(self.dim),
            Some((&first, rest)) => rest.iter().fold(self.maps[first].clone(), |acc, &i| acc.compose(&self.maps[i])),
        }
    }
}

/// Union of the images of `k`, with duplicates within `dedup_radius` merged.
pub fn hutchinson_step<T: Scalar>(ifs: &Ifs<T>, k: &PointSet<T>, dedup_radius: f64) -> PointSet<T> {
    let pts: Vec<Vec<T>> = ifs
        .maps
        .iter()
        .flat_map(|f| k.points().iter().map(move |p| f.apply(p)))
        .collect();
    PointSet::new(dedup_points(pts, dedup_radius)).expect("images of a non-empty set")
}

/// Sorts points lexicographically and merges points closer than `radius` in
/// every coordinate. Exact duplicates are always merged.
pub fn dedup_points<T: Scalar>(mut pts: Vec<Vec<T>>, radius: f64) -> Vec<Vec<T>> {
    pts.sort_by(|a, b| lex_cmp(a, b));
    pts.dedup();
    if radius <= 0.0 {
        return pts;
    }
    let cell = |p: &[T]| -> Vec<i64> { p.iter().map(|x| (x.to_f64() / radius).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut kept: Vec<Vec<T>> = Vec::new();
    for p in pts {
        let c = cell(&p);
        let near = neighbor_cells(&c).into_iter().any(|nc| {
            grid.get(&nc).is_some_and(|ids| {
                ids.iter().any(|&i| {
                    kept[i].iter().zip(&p).all(|(a, b)| (a.clone() - b.clone()).to_f64().abs() <= radius)
                })
            })
        });
        if !near {
            grid.entry(c).or_default().push(kept.len());
            kept.push(p);
        }
    }
    kept
}

fn neighbor_cells(c: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::with_capacity(c.len())];
    for &x in c {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-1..=1).map(move |dx| {
                    let mut v = prefix.clone();
                    v.push(x + dx);
                    v
                })
            })
            .collect();
    }
    out
}

pub fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Clone, Debug)]
pub struct AttractorOptions {
    /// Merge radius per step; `None` uses a quarter of the current step bound.
    /// Ignored (exact merging only) for the rational backend.
    pub dedup_radius: Option<f64>,
    /// Iteration stops early once a step would exceed this many points.
    pub max_points: usize,
}

impl Default for AttractorOptions {
    fn default() -> Self {
        Self { dedup_radius: None, max_points: 1 << 20 }
    }
}

/// An iterate `K_n` of the Hutchinson operator with error bounds.
#[derive(Clone, Debug)]
pub struct Attractor<T> {
    pub points: PointSet<T>,
    /// Iterations actually performed.
    pub iterations: usize,
    pub requested: usize,
    /// `h(K_0, K_1)`.
    pub initial_gap: f64,
    /// `Lip(F)^n h(K_0, K_1)`, a bound for `h(K_n, K_{n+1})`.
    pub certificate: f64,
    /// Bound on the Hausdorff distance from the returned set to the attractor,
    /// including the effect of merging.
    pub attractor_bound: f64,
    /// Set when `max_points` stopped the iteration early.
    pub truncated: bool,
}

/// Iterates the Hutchinson operator `n` times from `seed`.
pub fn attractor_approx<T: Scalar>(
    ifs: &Ifs<T>,
    seed: &PointSet<T>,
    n: usize,
    opts: &AttractorOptions,
) -> Result<Attractor<T>> {
    if seed.dim() != ifs.dim() {
        return Err(Error::InvalidInput("seed dimension differs from the IFS dimension".into()));
    }
    let lip = ifs.lipschitz();
    let k1 = hutchinson_step(ifs, seed, 0.0);
    let initial_gap = hausdorff_distance(seed, &k1)?;
    let mut current = seed.clone();
    let mut merge_error = 0.0;
    let mut done = 0;
    let mut truncated = false;
    for step in 1..=n {
        if current.len() * ifs.len() > opts.max_points {
            truncated = true;
            break;
        }
        let radius = if T::EXACT {
            0.0
        } else {
            opts.dedup_radius.unwrap_or(lip.powi(step as i32) * initial_gap / 4.0)
        };
        current = hutchinson_step(ifs, &current, radius);
        merge_error = merge_error * lip + radius * (current.dim() as f64).sqrt();
        done = step;
    }
    let certificate = lip.powi(done as i32) * initial_gap;
    let attractor_bound = certificate / (1.0 - lip) + merge_error;
    Ok(Attractor {
        points: current,
        iterations: done,
        requested: n,
        initial_gap,
        certificate,
        attractor_bound,
        truncated,
    })
}

/// Random-orbit sampling of the attractor, reproducible for a fixed seed.
pub fn chaos_game(ifs: &Ifs<f64>, start: &[f64], iterations: usize, seed: u64) -> Result<PointSet<f64>> {
    if iterations == 0 {
        return Err(Error::InvalidInput("chaos game needs at least one iteration".into()));
    }
    if start.len() != ifs.dim() {
        return Err(Error::InvalidInput("start point has the wrong dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = start.to_vec();
    for _ in 0..CHAOS_BURN_IN {
        x = ifs.maps[rng.gen_range(0..ifs.len())].apply(&x);
    }
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        x = ifs.maps[rng.gen_range(0..ifs.len())].apply(&x);
        out.push(x.clone());
    }
    PointSet::new(out)
}

/// One affine branch of a piecewise map, active when the last coordinate
/// equals `level` (or always, when `level` is `None`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch<T> {
    pub level: Option<T>,
    pub map: AffineMap<T>,
}

/// A map given by finitely many affine branches on disjoint level slabs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffine<T> {
    pub branches: Vec<Branch<T>>,
}

impl<T: Scalar> PiecewiseAffine<T> {
    pub fn apply(&self, x: &[T], tol: f64) -> Option<Vec<T>> {
        let last = x.last()?;
        self.branches
            .iter()
            .find(|b| b.level.as_ref().is_none_or(|l| l.eq_tol(last, tol)))
            .map(|b| b.map.apply(x))
    }
}

/// Standard examples.
pub mod examples {
    use super::*;
    use crate::scalar::{rat, Rational};

    /// `{x/3, x/3 + 2/3}` on the line.
    pub fn cantor() -> Ifs<Rational> {
        Ifs::new(vec![
            AffineMap::scalar(rat(1, 3), rat(0, 1)),
            AffineMap::scalar(rat(1, 3), rat(2, 3)),
        ])
        .expect("valid")
    }

    pub fn cantor_f64() -> Ifs<f64> {
        Ifs::new(vec![AffineMap::scalar(1.0 / 3.0, 0.0), AffineMap::scalar(1.0 / 3.0, 2.0 / 3.0)]).expect("valid")
    }

    /// `{x/2, x/2 + 1/2}`, whose images meet at 1/2.
    pub fn halves() -> Ifs<Rational> {
        Ifs::new(vec![
            AffineMap::scalar(rat(1, 2), rat(0, 1)),
            AffineMap::scalar(rat(1, 2), rat(1, 2)),
        ])
        .expect("valid")
    }

    /// Default rotation angle (radians) of the complex example.
    pub const KAMEYAMA_ANGLE: f64 = 1.0;

    /// `{z/2, c z/2, 1}` with `c = exp(i angle)`.
    pub fn kameyama(angle: f64) -> Ifs<f64> {
        let (s, c) = angle.sin_cos();
        Ifs::new(vec![
            AffineMap::complex((0.5, 0.0), (0.0, 0.0)),
            AffineMap::complex((0.5 * c, 0.5 * s), (0.0, 0.0)),
            AffineMap::complex((0.0, 0.0), (1.0, 0.0)),
        ])
        .expect("valid")
    }
}

#[cfg(test)]
mod tests {
    use super::examples::*;
    use super::*;
    use crate::scalar::{rat, Rational};

    #[test]
    fn lipschitz_constants() {
        let k = kameyama(KAMEYAMA_ANGLE);
        assert!((k.maps()[0].lipschitz() - 0.5).abs() < 1e-15);
        assert!((k.maps()[1].lipschitz() - 0.5).abs() < 1e-15);
        assert_eq!(k.maps()[2].lipschitz(), 0.0);
        let rot = AffineMap::new(vec![vec![0.0, -0.5], vec![0.25, 0.0]], vec![0.0, 0.0]).unwrap();
        assert!((rot.lipschitz() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fixed_points() {
        let k = kameyama(KAMEYAMA_ANGLE);
        assert_eq!(k.maps()[2].fixed_point(1e-12), vec![1.0, 0.0]);
        assert_eq!(k.maps()[0].fixed_point(1e-12), vec![0.0, 0.0]);
        assert_eq!(cantor().maps()[1].fixed_point(0.0), vec![rat(1, 1)]);
    }

    #[test]
    fn rejects_expanding_maps() {
        assert!(Ifs::new(vec![AffineMap::scalar(2.0, 0.0)]).is_err());
    }

    #[test]
    fn cantor_step() {
        let seed = PointSet::new(vec![vec![rat(0, 1)], vec![rat(1, 1)]]).unwrap();
        let k1 = hutchinson_step(&cantor(), &seed, 0.0);
        let expect: Vec<Vec<Rational>> = [rat(0, 1), rat(1, 3), rat(2, 3), rat(1, 1)].into_iter().map(|x| vec![x]).collect();
        assert_eq!(k1.points(), expect.as_slice());
    }

    #[test]
    fn kameyama_step_from_origin() {
        let seed = PointSet::new(vec![vec![0.0, 0.0]]).unwrap();
        let k1 = hutchinson_step(&kameyama(KAMEYAMA_ANGLE), &seed, 1e-12);
        assert_eq!(k1.points(), &[vec![0.0, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn zero_iterations_echo_seed() {
        let seed = PointSet::new(vec![vec![rat(1, 2)]]).unwrap();
        let a = attractor_approx(&cantor(), &seed, 0, &AttractorOptions::default()).unwrap();
        assert_eq!(a.points, seed);
    }

    #[test]
    fn chaos_game_is_reproducible() {
        let f = cantor_f64();
        let a = chaos_game(&f, &[0.5], 100, 7).unwrap();
        let b = chaos_game(&f, &[0.5], 100, 7).unwrap();
        assert_eq!(a, b);
        let one = chaos_game(&f, &[0.5], 1, 3).unwrap();
        assert!((0.0..=1.0).contains(&one.points()[0][0]));
    }

    #[test]
    fn complex_composition_stays_complex() {
        let k = kameyama(KAMEYAMA_ANGLE);
        let w = k.compose_word(&[0, 1]);
        assert!(w.is_complex());
        assert!((w.lipschitz() - 0.25).abs() < 1e-15);
    }
}
