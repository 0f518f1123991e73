//! Finite-depth quotient pseudometric on codes.
//!
//! Codes of length `N` are sent to indicator vectors of their prefixes in
//! `L₂(μ_c)`, where the coordinate `(n, w)` has weight `cⁿ`. Differences of
//! glued codes span a relation subspace `Z`; the distance of two codes is the
//! norm of their difference modulo `Z`.

use serde::Serialize;

use crate::code_space::{format_word, words_of_length, Word};
use crate::ifs::{attractor_approx, lex_cmp, AttractorOptions, Ifs};
use crate::metric::{euclid_sq, PointSet};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// `μ_c` restricted to prefixes of length at most `N`.
#[derive(Clone, Debug)]
pub struct TruncatedCodeMeasure {
    pub alphabet: usize,
    pub depth: usize,
    pub c: f64,
    offsets: Vec<usize>,
}

impl TruncatedCodeMeasure {
    pub fn new(alphabet: usize, depth: usize, c: f64) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::InvalidInput("alphabet must not be empty".into()));
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidInput(format!("c must lie in (0,1), got {c}")));
        }
        let mut offsets = vec![0usize];
        let mut size = 1usize;
        for _ in 0..=depth {
            let last = *offsets.last().expect("non-empty");
            offsets.push(last.checked_add(size).ok_or_else(|| Error::InvalidInput("depth too large".into()))?);
            size = size.checked_mul(alphabet).ok_or_else(|| Error::InvalidInput("depth too large".into()))?;
        }
        Ok(Self { alphabet, depth, c, offsets })
    }

    /// Number of coordinates `(n, w)`, `n <= N`.
    pub fn dim(&self) -> usize {
        self.offsets[self.depth + 1]
    }

    pub fn weight(&self, n: usize) -> f64 {
        self.c.powi(n as i32)
    }

    /// `Σ_{n<=N} (|F| c)ⁿ`.
    pub fn total_mass(&self) -> f64 {
        let q = self.alphabet as f64 * self.c;
        (0..=self.depth).map(|n| q.powi(n as i32)).sum()
    }

    /// Position of the coordinate `(|w|, w)`.
    pub fn index(&self, w: &[usize]) -> usize {
        self.offsets[w.len()] + w.iter().fold(0, |acc, &a| acc * self.alphabet + a)
    }

    /// Rank of a full-length code among all codes.
    fn leaf(&self, code: &[usize]) -> usize {
        self.index(code) - self.offsets[self.depth]
    }

    fn check(&self, code: &[usize]) -> Result<()> {
        if code.len() != self.depth {
            return Err(Error::InvalidInput(format!("code {} has length {}, expected {}", format_word(code), code.len(), self.depth)));
        }
        if let Some(&a) = code.iter().find(|&&a| a >= self.alphabet) {
            return Err(Error::InvalidInput(format!("letter {a} outside the alphabet")));
        }
        Ok(())
    }

    /// Indicator of the prefixes of `code`, as `(coordinate, value)` pairs.
    pub fn chi(&self, code: &[usize]) -> Result<Vec<(usize, f64)>> {
        self.check(code)?;
        Ok((0..=self.depth).map(|n| (self.index(&code[..n]), 1.0)).collect())
    }

    /// `⟨χ(a), χ(b)⟩ = Σ_{n<=L} cⁿ` with `L` the common prefix length.
    pub fn inner(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok((0..=common_prefix(a, b)).map(|n| self.weight(n)).sum())
    }

    /// `χ(a) - χ(b)` scaled by `√cⁿ`, so the plain dot product is the
    /// `μ_c` inner product.
    fn scaled_difference(&self, a: &[usize], b: &[usize]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim()];
        for (n, (i, x)) in self.chi(a)?.into_iter().enumerate() {
            v[i] += x * self.weight(n).sqrt();
        }
        for (n, (i, x)) in self.chi(b)?.into_iter().enumerate() {
            v[i] -= x * self.weight(n).sqrt();
        }
        Ok(v)
    }
}

pub fn common_prefix(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// `sqrt(2 Σ_{L<n<=N} cⁿ)`: the distance when there are no relations.
pub fn closed_form(c: f64, a: &[usize], b: &[usize]) -> f64 {
    let l = common_prefix(a, b);
    (2.0 * (l + 1..=a.len()).map(|n| c.powi(n as i32)).sum::<f64>()).sqrt()
}

/// Two codes of length `N` whose cylinders are glued.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GluedPair {
    pub a: Word,
    pub b: Word,
    /// `true` when a common attractor point was found exactly; otherwise the
    /// dilated cylinder samples merely come close.
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GluePolicy {
    ExactOnly,
    WithCandidates,
}

impl GluePolicy {
    fn admits(self, p: &GluedPair) -> bool {
        p.exact || self == GluePolicy::WithCandidates
    }
}

/// Pairs `a < b` of depth-`N` codes whose cylinder images meet.
///
/// Exact pairs share a point `f_a(e) = f_b(e')` with `e, e'` fixed points of
/// the maps; with an exact scalar this is decided without rounding. Candidate
/// pairs are those whose sampled cylinders come within the sampling
/// certificate plus `tol`, a superset of the true gluings.
pub fn glue_relations<T: Scalar>(ifs: &Ifs<T>, depth: usize, tol: f64) -> Result<Vec<GluedPair>> {
    let codes = words_of_length(ifs.len(), depth);
    let maps: Vec<_> = codes.iter().map(|w| ifs.compose_word(w)).collect();
    let fixed = ifs.fixed_points(tol);

    let mut hits: Vec<(Vec<T>, usize)> = Vec::new();
    for (i, f) in maps.iter().enumerate() {
        for e in fixed.points() {
            hits.push((f.apply(e), i));
        }
    }
    hits.sort_by(|x, y| lex_cmp(&x.0, &y.0).then(x.1.cmp(&y.1)));
    let same = |x: &[T], y: &[T]| if T::EXACT { x == y } else { x.iter().zip(y).all(|(p, q)| p.eq_tol(q, tol)) };
    let mut exact = std::collections::BTreeSet::new();
    let mut start = 0;
    while start < hits.len() {
        let mut end = start + 1;
        while end < hits.len() && same(&hits[start].0, &hits[end].0) {
            end += 1;
        }
        for x in start..end {
            for y in (x + 1)..end {
                let (i, j) = (hits[x].1, hits[y].1);
                if i != j {
                    exact.insert((i.min(j), i.max(j)));
                }
            }
        }
        start = end;
    }

    let sample_budget = 256usize.max(ifs.len());
    let mut iterations = 0;
    while ifs.len().pow(iterations as u32 + 1) * fixed.len() <= sample_budget {
        iterations += 1;
    }
    let approx = attractor_approx(
        &ifs.to_f64(),
        &fixed.to_f64(),
        iterations,
        &AttractorOptions { dedup_radius: Some(0.0), max_points: sample_budget * 4 },
    )?;
    let r = approx.attractor_bound;
    let pieces: Vec<(PointSet<f64>, f64, Vec<f64>, Vec<f64>)> = maps
        .iter()
        .map(|f| {
            let g = f.to_f64();
            let pts = PointSet::new(approx.points.points().iter().map(|p| g.apply(p)).collect()).expect("non-empty");
            let (lo, hi) = pts.bounding_box();
            (pts, g.lipschitz(), lo, hi)
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..codes.len() {
        for j in (i + 1)..codes.len() {
            let is_exact = exact.contains(&(i, j));
            let candidate = is_exact || {
                let (pa, la, loa, hia) = &pieces[i];
                let (pb, lb, lob, hib) = &pieces[j];
                let reach = (la + lb) * r + tol;
                let boxes = (0..loa.len()).all(|k| loa[k] <= hib[k] + reach && lob[k] <= hia[k] + reach);
                boxes
                    && pa.points().iter().any(|p| {
                        pb.points().iter().any(|q| euclid_sq(p, q).sqrt() <= reach)
                    })
            };
            if candidate {
                out.push(GluedPair { a: codes[i].clone(), b: codes[j].clone(), exact: is_exact });
            }
        }
    }
    Ok(out)
}

/// `p_c` on depth-`N` codes for a fixed relation set.
///
/// The orthonormal basis of `Z` is built once; queries only read it.
#[derive(Clone, Debug)]
pub struct QuotientMetric {
    pub measure: TruncatedCodeMeasure,
    pub relations: Vec<(Word, Word)>,
    basis: Vec<Vec<f64>>,
    component: Vec<usize>,
}

const RANK_TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_out(basis: &[Vec<f64>], v: &mut [f64]) {
    for _ in 0..2 {
        for q in basis {
            let t = dot(q, v);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= t * y;
            }
        }
    }
}

impl QuotientMetric {
    pub fn new(measure: TruncatedCodeMeasure, relations: Vec<(Word, Word)>) -> Result<Self> {
        let codes = measure.alphabet.checked_pow(measure.depth as u32).ok_or_else(|| Error::InvalidInput("depth too large".into()))?;
        let mut parent: Vec<usize> = (0..codes).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for (a, b) in &relations {
            let mut v = measure.scaled_difference(a, b)?;
            let (ra, rb) = (find(&mut parent, measure.leaf(a)), find(&mut parent, measure.leaf(b)));
            parent[ra] = rb;
            let norm0 = dot(&v, &v).sqrt();
            project_out(&basis, &mut v);
            let norm = dot(&v, &v).sqrt();
            if norm > RANK_TOL * norm0 {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
            }
        }
        let component = (0..codes).map(|i| find(&mut parent, i)).collect();
        Ok(Self { measure, relations, basis, component })
    }

    /// Relation set of `ifs` at the measure's depth under `policy`.
    pub fn for_ifs<T: Scalar>(ifs: &Ifs<T>, c: f64, depth: usize, tol: f64, policy: GluePolicy) -> Result<Self> {
        let measure = TruncatedCodeMeasure::new(ifs.len(), depth, c)?;
        let pairs = glue_relations(ifs, depth, tol)?;
        Self::new(measure, pairs.into_iter().filter(|p| policy.admits(p)).map(|p| (p.a, p.b)).collect())
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Whether `a` and `b` are linked by a chain of relations, so that
    /// `χ(a) - χ(b)` lies in `Z` exactly.
    pub fn linked(&self, a: &[usize], b: &[usize]) -> Result<bool> {
        self.measure.check(a)?;
        self.measure.check(b)?;
        Ok(self.component[self.measure.leaf(a)] == self.component[self.measure.leaf(b)])
    }

    pub fn distance(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        if self.linked(a, b)? {
            return Ok(0.0);
        }
        let mut v = self.measure.scaled_difference(a, b)?;
        project_out(&self.basis, &mut v);
        Ok(dot(&v, &v).max(0.0).sqrt())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientValue {
    pub x: String,
    pub y: String,
    pub exact_only: f64,
    pub with_candidates: f64,
    /// Value for the same prefixes of length `N` without any relation.
    pub unglued: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairRecord {
    pub a: String,
    pub b: String,
    pub exact: bool,
}

/// JSON report: relations found and `p_c` under both policies.
#[derive(Clone, Debug, Serialize)]
pub struct QuotientReport {
    pub c: f64,
    pub depth: usize,
    pub total_mass: f64,
    pub rank_exact: usize,
    pub rank_candidates: usize,
    pub pairs: Vec<PairRecord>,
    pub values: Vec<QuotientValue>,
}

pub fn quotient_report<T: Scalar>(ifs: &Ifs<T>, c: f64, depth: usize, tol: f64, queries: &[(Word, Word)]) -> Result<QuotientReport> {
    let measure = TruncatedCodeMeasure::new(ifs.len(), depth, c)?;
    let pairs = glue_relations(ifs, depth, tol)?;
    let select = |policy: GluePolicy| -> Vec<(Word, Word)> {
        pairs.iter().filter(|p| policy.admits(p)).map(|p| (p.a.clone(), p.b.clone())).collect()
    };
    let exact = QuotientMetric::new(measure.clone(), select(GluePolicy::ExactOnly))?;
    let loose = QuotientMetric::new(measure.clone(), select(GluePolicy::WithCandidates))?;
    let values = queries
        .iter()
        .map(|(x, y)| {
            Ok(QuotientValue {
                x: format_word(x),
                y: format_word(y),
                exact_only: exact.distance(x, y)?,
                with_candidates: loose.distance(x, y)?,
                unglued: closed_form(c, x, y),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuotientReport {
        c,
        depth,
        total_mass: measure.total_mass(),
        rank_exact: exact.rank(),
        rank_candidates: loose.rank(),
        pairs: pairs.iter().map(|p| PairRecord { a: format_word(&p.a), b: format_word(&p.b), exact: p.exact }).collect(),
        values,
    })
}

/// `p_c` between the depth-`N` truncations of two eventually constant codes,
/// for each `N` in `depths`. Codes shorter than `N` are padded with their last
/// letter.
pub fn stabilization_probe<T: Scalar>(
    ifs: &Ifs<T>,
    c: f64,
    depths: &[usize],
    tol: f64,
    x: &[usize],
    y: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let pad = |w: &[usize], n: usize| -> Word {
        let last = w.last().copied().unwrap_or(0);
        (0..n).map(|i| w.get(i).copied().unwrap_or(last)).collect()
    };
    depths
        .iter()
        .map(|&n| {
            let m = QuotientMetric::for_ifs(ifs, c, n, tol, GluePolicy::ExactOnly)?;
            Ok((n, m.distance(&pad(x, n), &pad(y, n))?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::examples;

    #[test]
    fn chi_norm_is_geometric() {
        let m = TruncatedCodeMeasure::new(2, 5, 0.5).unwrap();
        let a = vec![0, 1, 1, 0, 1];
        assert!((m.inner(&a, &a).unwrap() - (1.0 - 0.5f64.powi(6)) / 0.5).abs() < 1e-15);
        assert_eq!(m.chi(&a).unwrap().len(), 6);
        assert!(m.chi(&[0, 1]).is_err());
    }

    #[test]
    fn inner_counts_shared_prefixes() {
        let m = TruncatedCodeMeasure::new(2, 4, 0.25).unwrap();
        let v = m.inner(&[0, 1, 0, 0], &[0, 1, 1, 1]).unwrap();
        assert!((v - (1.0 + 0.25 + 0.0625)).abs() < 1e-15);
    }

    #[test]
    fn cantor_has_no_gluings() {
        assert!(glue_relations(&examples::cantor(), 5, 1e-12).unwrap().is_empty());
    }

    #[test]
    fn halves_glue_neighbours() {
        let pairs = glue_relations(&examples::halves(), 4, 1e-12).unwrap();
        assert_eq!(pairs.len(), 15);
        assert!(pairs.iter().all(|p| p.exact && p.a != p.b));
        assert!(pairs.contains(&GluedPair { a: vec![0, 1, 1, 1], b: vec![1, 0, 0, 0], exact: true }));
    }

    #[test]
    fn glued_codes_collapse() {
        let m = QuotientMetric::for_ifs(&examples::halves(), 0.5, 4, 1e-12, GluePolicy::ExactOnly).unwrap();
        assert_eq!(m.distance(&[0, 1, 1, 1], &[1, 0, 0, 0]).unwrap(), 0.0);
        assert_eq!(m.distance(&[0, 0, 0, 0], &[1, 1, 1, 1]).unwrap(), 0.0);
    }
}
