//! Exact subsets of `Z`: finite unions of pieces `K_s × P` with `P ⊂ S₀`,
//! together with finitely many points. Images of such sets under the maps of
//! `Z` are again of this form.

use std::collections::BTreeSet;
use std::fmt;

use super::address::{format_bits, Address};
use super::zspace::{level_bits, meets_s0, s0_level, ZPoint, ZSpace};
use crate::code_space::Relation;
use crate::{Error, Result};

/// A subset of `S₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Second {
    /// `{0}`.
    Zero,
    /// `{2/3^{k+1}}`.
    Level(usize),
    /// `{0} ∪ {2/3^{k+1} : k ≥ m}`.
    Tail(usize),
}

impl Second {
    pub fn contains(&self, v: &Address) -> bool {
        match (*self, s0_level(v)) {
            (Second::Zero, _) => v.is_zero(),
            (Second::Level(k), l) => l == Some(k),
            (Second::Tail(m), l) => v.is_zero() || l.is_some_and(|l| l >= m),
        }
    }

    fn subset_of(&self, other: &Second) -> bool {
        match (*self, *other) {
            (Second::Zero, Second::Zero | Second::Tail(_)) => true,
            (Second::Level(k), Second::Level(l)) => k == l,
            (Second::Level(k), Second::Tail(m)) => k >= m,
            (Second::Tail(m), Second::Tail(n)) => m >= n,
            _ => false,
        }
    }

    fn meets(&self, other: &Second) -> bool {
        self.subset_of(other)
            || other.subset_of(self)
            || matches!((*self, *other), (Second::Tail(_), Second::Tail(_)))
    }

    fn index(&self) -> usize {
        match *self {
            Second::Zero => 0,
            Second::Level(k) | Second::Tail(k) => k,
        }
    }
}

/// `K_s × P`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Piece {
    pub s: Vec<u8>,
    pub second: Second,
}

impl Piece {
    pub fn contains(&self, p: &ZPoint) -> bool {
        p.first.starts_with(&self.s) && self.second.contains(&p.second)
    }

    fn subset_of(&self, other: &Piece) -> bool {
        self.s.starts_with(&other.s) && self.second.subset_of(&other.second)
    }

    fn meets(&self, other: &Piece) -> bool {
        (self.s.starts_with(&other.s) || other.s.starts_with(&self.s)) && self.second.meets(&other.second)
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format_bits(&self.s);
        match self.second {
            Second::Zero => write!(f, "K[{s}]x0"),
            Second::Level(k) => write!(f, "K[{s}]xL{k}"),
            Second::Tail(m) => write!(f, "K[{s}]xT{m}"),
        }
    }
}

/// A subset of `Z` kept in a normalized form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ZShape {
    pub pieces: BTreeSet<Piece>,
    pub points: BTreeSet<ZPoint>,
}

/// Cap on the number of prefixes expanded when a piece is split by hand.
const MAX_EXPANSION: usize = 1 << 16;

fn completions(s: &[u8], k: usize) -> Result<Vec<Vec<u8>>> {
    if s.len() >= k {
        return Ok(vec![s[..k].to_vec()]);
    }
    let free = k - s.len();
    if free > 16 || (1usize << free) > MAX_EXPANSION {
        return Err(Error::Infeasible(format!("too many completions of {} to length {k}", format_bits(s))));
    }
    Ok((0..(1usize << free))
        .map(|m| {
            let mut w = s.to_vec();
            w.extend((0..free).rev().map(|i| ((m >> i) & 1) as u8));
            w
        })
        .collect())
}

fn comparable(a: &[u8], b: &[u8]) -> bool {
    a.starts_with(b) || b.starts_with(a)
}

/// `K_s ⊆ ∪ K_q`.
fn cylinders_cover(s: &[u8], qs: &[&[u8]]) -> bool {
    if qs.iter().any(|q| s.starts_with(q)) {
        return true;
    }
    if !qs.iter().any(|q| q.starts_with(s)) {
        return false;
    }
    let mut s0 = s.to_vec();
    s0.push(0);
    let mut s1 = s.to_vec();
    s1.push(1);
    cylinders_cover(&s0, qs) && cylinders_cover(&s1, qs)
}

impl ZShape {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn point(p: ZPoint) -> Self {
        Self { pieces: BTreeSet::new(), points: BTreeSet::from([p]) }
    }

    /// `Z ∩ (K_s × K_t)`.
    pub fn rect(z: &ZSpace, s: &[u8], t: &[u8]) -> Self {
        let mut out = Self::empty();
        if meets_s0(t) {
            let second = match t.iter().position(|&b| b == 1) {
                None => Second::Tail(t.len()),
                Some(k) => Second::Level(k),
            };
            out.pieces.insert(Piece { s: s.to_vec(), second });
        }
        out.points.extend(z.extras_in(s, t).cloned());
        out.normalize()
    }

    /// The whole of `Z`.
    pub fn full(z: &ZSpace) -> Self {
        Self::rect(z, &[], &[])
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty() && self.points.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.pieces.is_empty() && self.points.len() == 1
    }

    pub fn union(mut self, other: ZShape) -> Self {
        self.pieces.extend(other.pieces);
        self.points.extend(other.points);
        self
    }

    pub fn contains(&self, p: &ZPoint) -> bool {
        self.points.contains(p) || self.pieces.iter().any(|q| q.contains(p))
    }

    /// Drops redundant pieces and points and merges siblings.
    pub fn normalize(mut self) -> Self {
        loop {
            let pieces: Vec<Piece> = self.pieces.iter().cloned().collect();
            let mut next: BTreeSet<Piece> = BTreeSet::new();
            let mut changed = false;
            for (i, p) in pieces.iter().enumerate() {
                let covered = pieces.iter().enumerate().any(|(j, q)| j != i && p.subset_of(q) && (p != q || j < i));
                if covered {
                    changed = true;
                } else {
                    next.insert(p.clone());
                }
            }
            let snapshot: Vec<Piece> = next.iter().cloned().collect();
            for p in &snapshot {
                if !next.contains(p) {
                    continue;
                }
                if let Some((&last, head)) = p.s.split_last() {
                    let mut sib = head.to_vec();
                    sib.push(1 - last);
                    let sibling = Piece { s: sib, second: p.second };
                    if next.contains(&sibling) {
                        next.remove(p);
                        next.remove(&sibling);
                        next.insert(Piece { s: head.to_vec(), second: p.second });
                        changed = true;
                        continue;
                    }
                }
                if let Second::Tail(m) = p.second {
                    if m > 0 {
                        let lower = Piece { s: p.s.clone(), second: Second::Level(m - 1) };
                        if next.contains(&lower) {
                            next.remove(p);
                            next.remove(&lower);
                            next.insert(Piece { s: p.s.clone(), second: Second::Tail(m - 1) });
                            changed = true;
                        }
                    }
                }
            }
            self.pieces = next;
            if !changed {
                break;
            }
        }
        let pieces = &self.pieces;
        self.points.retain(|p| !pieces.iter().any(|q| q.contains(p)));
        self
    }

    fn piece_covered_by(&self, piece: &Piece) -> bool {
        let bound = self.pieces.iter().map(|q| q.second.index()).max().unwrap_or(0) + 1;
        let classes: Vec<Second> = match piece.second {
            Second::Tail(m) => {
                let mut v = vec![Second::Zero];
                v.extend((m..bound.max(m + 1)).map(Second::Level));
                v
            }
            c => vec![c],
        };
        classes.iter().all(|c| {
            let qs: Vec<&[u8]> = self
                .pieces
                .iter()
                .filter(|q| c.subset_of(&q.second))
                .map(|q| q.s.as_slice())
                .collect();
            cylinders_cover(&piece.s, &qs)
        })
    }

    pub fn subset_of(&self, other: &ZShape) -> bool {
        self.points.iter().all(|p| other.contains(p)) && self.pieces.iter().all(|q| other.piece_covered_by(q))
    }

    pub fn meets(&self, other: &ZShape) -> bool {
        self.points.iter().any(|p| other.contains(p))
            || other.points.iter().any(|p| self.contains(p))
            || self.pieces.iter().any(|a| other.pieces.iter().any(|b| a.meets(b)))
    }

    pub fn relation(&self, other: &ZShape) -> Relation {
        Relation::from_parts(self.subset_of(other), other.subset_of(self), self.meets(other))
    }

    pub fn key(&self) -> String {
        let mut parts: Vec<String> = self.pieces.iter().map(|p| p.to_string()).collect();
        parts.extend(self.points.iter().map(|p| p.to_string()));
        format!("{{{}}}", parts.join(" "))
    }

    /// Some point of the set, preferring the smallest one.
    pub fn sample_point(&self) -> Option<ZPoint> {
        let from_pieces = self.pieces.iter().map(|q| {
            let second = match q.second {
                Second::Zero | Second::Tail(_) => Address::zero(),
                Second::Level(k) => Address::finite(&level_bits(k)),
            };
            ZPoint::new(Address::finite(&q.s), second)
        });
        from_pieces.chain(self.points.iter().cloned()).min()
    }
}

/// `r(K_a × K_b)` for a rectangle off `K × {0}` (`b` contains a `1`).
pub fn retract_rect(z: &ZSpace, a: &[u8], b: &[u8]) -> Result<ZShape> {
    let k = b
        .iter()
        .position(|&x| x == 1)
        .ok_or_else(|| Error::InvalidInput("rectangle must avoid K x {0}".into()))?;
    let mut out = ZShape::rect(z, a, b);
    let b_rest = &b[k + 1..];
    let a_rest: &[u8] = if a.len() > k { &a[k..] } else { &[] };
    for gamma in completions(a, k)? {
        let mut reps = Vec::new();
        visit_pairs(z, &gamma, a_rest, b_rest, &mut Vec::new(), &mut Vec::new(), &mut reps);
        out.points.extend(reps);
    }
    Ok(out.normalize())
}

fn visit_pairs(
    z: &ZSpace,
    gamma: &[u8],
    a: &[u8],
    b: &[u8],
    alpha: &mut Vec<u8>,
    beta: &mut Vec<u8>,
    reps: &mut Vec<ZPoint>,
) {
    if alpha.starts_with(a) && beta.starts_with(b) {
        return;
    }
    let split_alpha = alpha.len() == beta.len();
    let mut rep_needed = false;
    for bit in 0..2u8 {
        if split_alpha {
            alpha.push(bit);
        } else {
            beta.push(bit);
        }
        if comparable(alpha, a) && comparable(beta, b) {
            if z.pair_nonempty(gamma, alpha, beta) {
                visit_pairs(z, gamma, a, b, alpha, beta, reps);
            } else {
                rep_needed = true;
            }
        }
        if split_alpha {
            alpha.pop();
        } else {
            beta.pop();
        }
    }
    if rep_needed {
        reps.push(z.representative(gamma, alpha, beta).expect("visited pairs are non-empty"));
    }
}

/// `f₀` or `f₁` image of one piece.
fn piece_image_fi(z: &ZSpace, i: u8, p: &Piece) -> Result<ZShape> {
    let mut is = vec![i];
    is.extend_from_slice(&p.s);
    match p.second {
        Second::Zero => Ok(ZShape { pieces: BTreeSet::from([Piece { s: is, second: Second::Zero }]), points: BTreeSet::new() }),
        Second::Level(k) => level_image_fi(z, i, &p.s, k),
        Second::Tail(m) => {
            let k0 = m.max(p.s.len());
            let mut out = ZShape::rect(z, &is, &vec![0; k0 + 1]);
            for k in m..k0 {
                out = out.union(level_image_fi(z, i, &p.s, k)?);
            }
            Ok(out)
        }
    }
}

fn level_image_fi(z: &ZSpace, i: u8, s: &[u8], k: usize) -> Result<ZShape> {
    let mut a = vec![i];
    let mut b = vec![0; k + 1];
    b.push(1);
    if s.len() <= k {
        a.extend_from_slice(s);
    } else {
        a.extend_from_slice(&s[..k]);
        let rest = &s[k..];
        a.extend(rest.iter().step_by(2));
        b.extend(rest.iter().skip(1).step_by(2));
    }
    retract_rect(z, &a, &b)
}

fn piece_image_f2(z: &ZSpace, p: &Piece) -> Result<ZShape> {
    let zero_part = || {
        let a: Vec<u8> = p.s.iter().step_by(2).copied().collect();
        let mut b = vec![1];
        b.extend(p.s.iter().skip(1).step_by(2));
        retract_rect(z, &a, &b)
    };
    let level_points = |k: usize| -> Result<ZShape> {
        let mut out = ZShape::empty();
        for g in completions(&p.s, k)? {
            out.points.insert(z.f2(&ZPoint::base(&g))?);
        }
        Ok(out)
    };
    match p.second {
        Second::Zero => zero_part(),
        Second::Level(k) => level_points(k),
        Second::Tail(m) => {
            let mut out = zero_part()?;
            for k in m..p.s.len() {
                out = out.union(level_points(k)?);
            }
            Ok(out)
        }
    }
}

/// Image of a subset of `Z` under `f_i`, `i ∈ {0, 1, 2}`.
pub fn image(z: &ZSpace, i: usize, shape: &ZShape) -> Result<ZShape> {
    let mut out = ZShape::empty();
    for p in &shape.pieces {
        out = out.union(match i {
            0 | 1 => piece_image_fi(z, i as u8, p)?,
            2 => piece_image_f2(z, p)?,
            _ => return Err(Error::InvalidInput(format!("no map f_{i} on Z"))),
        });
    }
    for p in &shape.points {
        out.points.insert(z.apply(i, p)?);
    }
    Ok(out.normalize())
}

/// Prefixes `s` and `s↾k` used when `f₃` or `r̲` acts on a piece.
pub(crate) fn level_prefixes(p: &Piece) -> Result<(Option<Vec<u8>>, Vec<Vec<u8>>)> {
    match p.second {
        Second::Zero => Ok((Some(p.s.clone()), Vec::new())),
        Second::Level(k) => Ok((None, completions(&p.s, k)?)),
        Second::Tail(m) => Ok((Some(p.s.clone()), (m..p.s.len()).map(|k| p.s[..k].to_vec()).collect())),
    }
}
