//! Address words, composed maps, orders, cylinder lattices and the
//! ultrafractal checks, plus the product construction on `X x {levels}`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::ifs::{attractor_approx, AffineMap, AttractorOptions, Branch, Ifs, PiecewiseAffine};
use crate::metric::PointSet;
use crate::scalar::{rat_pow, Rational, Scalar};
use crate::{Error, Result};

/// Letters are map indices; `f_w = f_{w_0} ∘ ... ∘ f_{w_{n-1}}`.
pub type Word = Vec<usize>;

/// All words of length `<= depth` over `alphabet` letters, shortest first.
pub fn words_up_to(alphabet: usize, depth: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..depth {
        let next: Vec<Word> = layer
            .iter()
            .flat_map(|w: &Word| {
                (0..alphabet).map(move |i| {
                    let mut v = w.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// All words of length `n` over `alphabet` letters.
pub fn words_of_length(alphabet: usize, n: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..alphabet).map(move |a| {
                    let mut v = w.clone();
                    v.push(a);
                    v
                })
            })
            .collect();
    }
    out
}

pub fn format_word(w: &[usize]) -> String {
    if w.is_empty() {
        "ε".to_string()
    } else {
        w.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
    }
}

/// `o(f)`: a finite composition depth, or `ω` when `f` factors through a
/// constant map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Order {
    Finite(usize),
    Omega,
}

impl Order {
    /// `λ^o`, exactly zero for `ω`.
    pub fn weight(&self, lambda: &Rational) -> Rational {
        match self {
            Order::Finite(n) => rat_pow(lambda, *n),
            Order::Omega => Rational::from_integer(0.into()),
        }
    }
}

/// Set relation between two cylinder images.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Equal,
    Disjoint,
    /// The first image lies strictly inside the second.
    Subset,
    Superset,
    ProperOverlap,
    Unknown,
}

impl Relation {
    pub fn flip(self) -> Self {
        match self {
            Relation::Subset => Relation::Superset,
            Relation::Superset => Relation::Subset,
            r => r,
        }
    }

    /// Whether the two images meet; `None` when unresolved.
    pub fn intersects(self) -> Option<bool> {
        match self {
            Relation::Disjoint => Some(false),
            Relation::Unknown => None,
            _ => Some(true),
        }
    }

    /// Relation from the two inclusion tests and an intersection test.
    pub fn from_parts(a_in_b: bool, b_in_a: bool, meet: bool) -> Self {
        match (a_in_b, b_in_a) {
            (true, true) => Relation::Equal,
            (true, false) => Relation::Subset,
            (false, true) => Relation::Superset,
            (false, false) if meet => Relation::ProperOverlap,
            _ => Relation::Disjoint,
        }
    }
}

/// Symbolic description of an image `f_w(X)` for one backend.
pub trait ImageSet: Clone + Debug {
    /// Key identifying equal images; images with equal keys are merged.
    fn key(&self) -> String;
    fn is_singleton(&self) -> bool;
    fn relation(&self, other: &Self) -> Relation;
}

/// Point membership in an image; `None` when the backend cannot decide.
pub trait Membership<P> {
    fn contains(&self, p: &P) -> Option<bool>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageKind {
    FullImage,
    Singleton,
    Symbolic(String),
}

/// Composed map of a word together with its image kind and order candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderDescriptor<T> {
    pub word: Word,
    pub map: AffineMap<T>,
    pub image_kind: ImageKind,
    pub order: Order,
}

/// Composes the word; the order candidate is `|w|`, or `ω` for constants.
pub fn compose<T: Scalar>(ifs: &Ifs<T>, w: &[usize], tol: f64) -> Result<CylinderDescriptor<T>> {
    if let Some(&bad) = w.iter().find(|&&i| i >= ifs.len()) {
        return Err(Error::InvalidInput(format!("letter {bad} out of range")));
    }
    let map = ifs.compose_word(w);
    let constant = map.is_constant(tol);
    Ok(CylinderDescriptor {
        word: w.to_vec(),
        image_kind: if constant {
            ImageKind::Singleton
        } else {
            ImageKind::FullImage
        },
        order: if constant {
            Order::Omega
        } else {
            Order::Finite(w.len())
        },
        map,
    })
}

/// `o(f_w)` with an exactness flag.
///
/// Constant compositions have order `ω`. Otherwise the longest word of length
/// `<= depth` composing to the same affine map is returned; it is exact when
/// `Lip(f_w) <= Lip(F)^m` rules out every representation longer than `depth`.
pub fn order_of<T: Scalar>(ifs: &Ifs<T>, w: &[usize], depth: usize, tol: f64) -> Result<(Order, bool)> {
    if depth < w.len() {
        return Err(Error::InvalidInput("depth must be at least the word length".into()));
    }
    let target = compose(ifs, w, tol)?;
    if target.order == Order::Omega {
        return Ok((Order::Omega, true));
    }
    let rho = target.map.lipschitz();
    let lips: Vec<f64> = ifs.maps().iter().map(AffineMap::lipschitz).collect();
    let lip_f = ifs.lipschitz();
    let mut best = w.len();
    let mut stack: Vec<(Word, AffineMap<T>, f64)> = vec![(Vec::new(), AffineMap::identity(ifs.dim()), 1.0)];
    while let Some((word, map, bound)) = stack.pop() {
        if word.len() > best && map.approx_eq(&target.map, tol) {
            best = word.len();
        }
        if word.len() == depth {
            continue;
        }
        for (i, f) in ifs.maps().iter().enumerate() {
            let b = bound * lips[i];
            if b < rho * (1.0 - 1e-9) - tol {
                continue;
            }
            let mut next = word.clone();
            next.push(i);
            stack.push((next, map.compose(f), b));
        }
    }
    let exact = if rho <= 0.0 {
        false
    } else if lip_f <= 0.0 {
        true
    } else {
        let max_len = (rho.ln() / lip_f.ln() + 1e-9).floor();
        max_len <= depth as f64
    };
    Ok((Order::Finite(best), exact))
}

/// One merged cylinder of a lattice.
#[derive(Clone, Debug)]
pub struct Cylinder<S> {
    /// Representative word of maximal order.
    pub word: Word,
    pub order: Order,
    pub image: S,
    /// Lengths of all words producing this image.
    pub lengths: BTreeSet<usize>,
    pub merged_words: usize,
}

/// Images of all words up to a depth with their pairwise relations.
#[derive(Clone, Debug)]
pub struct CylinderLattice<S> {
    pub depth: usize,
    pub alphabet: usize,
    pub backend: String,
    cylinders: Vec<Cylinder<S>>,
    relations: Vec<Relation>,
}

impl<S: ImageSet> CylinderLattice<S> {
    /// Merges equal images (keeping the largest order) and resolves every pair.
    pub fn from_images(
        depth: usize,
        alphabet: usize,
        backend: &str,
        items: impl IntoIterator<Item = (Word, Order, S)>,
    ) -> Self {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut cylinders: Vec<Cylinder<S>> = Vec::new();
        for (word, order, image) in items {
            let key = image.key();
            match index.get(&key) {
                Some(&i) => {
                    let c = &mut cylinders[i];
                    c.lengths.insert(word.len());
                    c.merged_words += 1;
                    if order > c.order {
                        c.order = order;
                        c.word = word;
                    }
                }
                None => {
                    index.insert(key, cylinders.len());
                    cylinders.push(Cylinder {
                        lengths: BTreeSet::from([word.len()]),
                        word,
                        order,
                        image,
                        merged_words: 1,
                    });
                }
            }
        }
        let n = cylinders.len();
        let mut relations = vec![Relation::Equal; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let r = cylinders[i].image.relation(&cylinders[j].image);
                relations[i * n + j] = r;
                relations[j * n + i] = r.flip();
            }
        }
        Self { depth, alphabet, backend: backend.to_string(), cylinders, relations }
    }

    pub fn cylinders(&self) -> &[Cylinder<S>] {
        &self.cylinders
    }

    pub fn len(&self) -> usize {
        self.cylinders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cylinders.is_empty()
    }

    pub fn relation(&self, i: usize, j: usize) -> Relation {
        self.relations[i * self.cylinders.len() + j]
    }

    /// Index of the cylinder produced by `word`, if that word was merged into it
    /// or is its representative.
    pub fn find_word(&self, word: &[usize]) -> Option<usize> {
        self.cylinders.iter().position(|c| c.word == word)
    }

    pub fn unknown_pairs(&self) -> usize {
        let n = self.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.relation(i, j) == Relation::Unknown)
            .count()
    }

    /// Adjacency list of certified intersections.
    pub fn intersection_graph(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i && self.relation(i, j).intersects() == Some(true)).collect())
            .collect()
    }

    /// JSON adjacency export with relation labels.
    pub fn to_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .cylinders
            .iter()
            .enumerate()
            .map(|(i, c)| {
                serde_json::json!({
                    "id": i,
                    "word": format_word(&c.word),
                    "order": match c.order { Order::Finite(n) => serde_json::json!(n), Order::Omega => serde_json::json!("omega") },
                    "singleton": c.image.is_singleton(),
                    "image": c.image.key(),
                })
            })
            .collect();
        let n = self.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let r = self.relation(i, j);
                if r != Relation::Disjoint {
                    edges.push(serde_json::json!({"a": i, "b": j, "relation": r}));
                }
            }
        }
        serde_json::json!({"depth": self.depth, "backend": self.backend, "nodes": nodes, "edges": edges})
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    Yes,
    No,
    Unknown,
}

/// Machine-readable outcome of a lattice check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub witness: Option<(String, String)>,
    pub depth: usize,
    pub unknown_pairs: usize,
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        self.status == VerdictStatus::Yes
    }
}

/// Every pair of cylinders is disjoint or nested.
pub fn is_ultrafractal<S: ImageSet>(lattice: &CylinderLattice<S>) -> Verdict {
    check_pairs(lattice, |_, _, r| r != Relation::ProperOverlap)
}

/// Same-length cylinders are equal, disjoint, or one of them is a singleton.
pub fn is_strict_ultrafractal<S: ImageSet>(lattice: &CylinderLattice<S>) -> Verdict {
    check_pairs(lattice, |a, b, r| {
        if a.lengths.is_disjoint(&b.lengths) {
            return true;
        }
        matches!(r, Relation::Equal | Relation::Disjoint) || a.image.is_singleton() || b.image.is_singleton()
    })
}

fn check_pairs<S: ImageSet>(
    lattice: &CylinderLattice<S>,
    ok: impl Fn(&Cylinder<S>, &Cylinder<S>, Relation) -> bool,
) -> Verdict {
    let n = lattice.len();
    let mut unknown = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&lattice.cylinders[i], &lattice.cylinders[j]);
            let r = lattice.relation(i, j);
            if r == Relation::Unknown {
                let singleton = a.image.is_singleton() || b.image.is_singleton();
                if !(singleton && ok(a, b, Relation::ProperOverlap)) {
                    unknown += 1;
                }
                continue;
            }
            if !ok(a, b, r) {
                return Verdict {
                    status: VerdictStatus::No,
                    witness: Some((format_word(&a.word), format_word(&b.word))),
                    depth: lattice.depth,
                    unknown_pairs: unknown,
                };
            }
        }
    }
    Verdict {
        status: if unknown == 0 {
            VerdictStatus::Yes
        } else {
            VerdictStatus::Unknown
        },
        witness: None,
        depth: lattice.depth,
        unknown_pairs: unknown,
    }
}

/// Image of an affine word on a certified attractor sample.
#[derive(Clone, Debug)]
pub struct NumericImage {
    pub word: Word,
    pub map: AffineMap<f64>,
    /// `f_w(A)` for the sample `A ⊂ X`.
    pub sample: Vec<Vec<f64>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Upper bound on `h(f_w(A), f_w(X))`.
    pub slack: f64,
    pub constant: bool,
    tol: f64,
}

impl NumericImage {
    fn box_gap(&self, other: &Self) -> f64 {
        let mut g2 = 0.0;
        for k in 0..self.lo.len() {
            let g = (other.lo[k] - self.hi[k]).max(self.lo[k] - other.hi[k]).max(0.0);
            g2 += g * g;
        }
        g2.sqrt()
    }

    fn dist_to(&self, p: &[f64]) -> f64 {
        self.sample
            .iter()
            .map(|q| q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// A sample point of `self` provably outside `other`.
    fn escapes(&self, other: &Self) -> bool {
        self.sample.iter().any(|p| other.dist_to(p) > other.slack + self.tol)
    }

    fn meets(&self, other: &Self) -> bool {
        self.sample.iter().any(|p| other.sample.iter().any(|q| {
            q.iter().zip(p).all(|(a, b)| (a - b).abs() <= self.tol)
        }))
    }
}

impl ImageSet for NumericImage {
    fn key(&self) -> String {
        let coeffs: Vec<String> = self
            .map
            .matrix()
            .iter()
            .flatten()
            .chain(&self.map.offset)
            .map(|x| format!("{:.12e}", if x.abs() < 1e-300 { 0.0 } else { *x }))
            .collect();
        coeffs.join(",")
    }

    fn is_singleton(&self) -> bool {
        self.constant
    }

    fn relation(&self, other: &Self) -> Relation {
        if self.map.approx_eq(&other.map, self.tol) {
            return Relation::Equal;
        }
        if self.box_gap(other) > self.slack + other.slack + self.tol {
            return Relation::Disjoint;
        }
        match (self.constant, other.constant) {
            (true, true) => {
                return if self.meets(other) { Relation::Equal } else { Relation::Disjoint };
            }
            (true, false) => {
                return match other.contains(&self.sample[0]) {
                    Some(true) => Relation::Subset,
                    Some(false) => Relation::Disjoint,
                    None => Relation::Unknown,
                };
            }
            (false, true) => return other.relation(self).flip(),
            _ => {}
        }
        if other.word.len() <= self.word.len() && self.word.starts_with(&other.word) {
            return Relation::Subset;
        }
        if self.word.len() <= other.word.len() && other.word.starts_with(&self.word) {
            return Relation::Superset;
        }
        let separated = self
            .sample
            .iter()
            .all(|p| other.dist_to(p) > self.slack + other.slack + self.tol);
        if separated {
            return Relation::Disjoint;
        }
        if self.meets(other) && self.escapes(other) && other.escapes(self) {
            return Relation::ProperOverlap;
        }
        Relation::Unknown
    }
}

impl Membership<Vec<f64>> for NumericImage {
    fn contains(&self, p: &Vec<f64>) -> Option<bool> {
        let d = self.dist_to(p);
        if d <= self.tol {
            Some(true)
        } else if d > self.slack + self.tol {
            Some(false)
        } else {
            None
        }
    }
}

/// Points of the attractor used as the sample for the numeric backend.
pub fn attractor_sample(ifs: &Ifs<f64>, max_points: usize) -> Result<(PointSet<f64>, f64)> {
    let seed = ifs.fixed_points(1e-15);
    let mut n = 0;
    let mut size = seed.len();
    while size * ifs.len() <= max_points && n < 64 {
        size *= ifs.len();
        n += 1;
    }
    let opts = AttractorOptions { dedup_radius: Some(1e-13), max_points };
    let a = attractor_approx(ifs, &seed, n, &opts)?;
    Ok((a.points, a.attractor_bound))
}

/// Numeric backend: relations from a certified attractor sample.
///
/// Inclusions are only asserted for prefix-related words or equal maps;
/// anything the sample cannot separate or certify is `Unknown`.
pub fn build_numeric_lattice(ifs: &Ifs<f64>, depth: usize, tol: f64) -> Result<CylinderLattice<NumericImage>> {
    if depth < 1 {
        return Err(Error::InvalidInput("lattice depth must be at least 1".into()));
    }
    let (sample, bound) = attractor_sample(ifs, 2048)?;
    let items = words_up_to(ifs.len(), depth)
        .into_iter()
        .map(|w| {
            let desc = compose(ifs, &w, tol)?;
            let pts: Vec<Vec<f64>> = sample.points().iter().map(|p| desc.map.apply(p)).collect();
            let ps = PointSet::new(pts.clone())?;
            let (lo, hi) = ps.bounding_box();
            let img = NumericImage {
                slack: desc.map.lipschitz() * bound,
                constant: desc.order == Order::Omega,
                map: desc.map,
                sample: pts,
                lo,
                hi,
                word: w.clone(),
                tol,
            };
            Ok((w, desc.order, img))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CylinderLattice::from_images(depth, ifs.len(), "numeric", items))
}

/// A point of a product attractor: the base point with address
/// `prefix · tail^ω` at the given level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductPoint {
    pub prefix: Vec<usize>,
    pub tail: usize,
    pub level: usize,
}

impl ProductPoint {
    pub fn new(mut prefix: Vec<usize>, tail: usize, level: usize) -> Self {
        while prefix.last() == Some(&tail) {
            prefix.pop();
        }
        Self { prefix, tail, level }
    }

    fn address_starts_with(&self, w: &[usize]) -> bool {
        w.iter().enumerate().all(|(k, &c)| self.prefix.get(k).copied().unwrap_or(self.tail) == c)
    }
}

/// Image of a product word: cylinders `f_u(X) x {level}` and single points.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductImage {
    pub pieces: BTreeSet<(Vec<usize>, usize)>,
    pub points: BTreeSet<ProductPoint>,
}

impl ProductImage {
    fn piece_contains(piece: &(Vec<usize>, usize), p: &ProductPoint) -> bool {
        piece.1 == p.level && p.address_starts_with(&piece.0)
    }

    fn normalize(mut self) -> Self {
        let pieces = self.pieces.clone();
        self.points.retain(|p| !pieces.iter().any(|c| Self::piece_contains(c, p)));
        let keep: BTreeSet<_> = pieces
            .iter()
            .filter(|(u, l)| !pieces.iter().any(|(v, m)| m == l && v.len() < u.len() && u.starts_with(v)))
            .cloned()
            .collect();
        self.pieces = keep;
        self
    }

    fn covers_piece(&self, u: &[usize], level: usize, alphabet: usize) -> bool {
        let same: Vec<&Vec<usize>> = self.pieces.iter().filter(|(_, l)| *l == level).map(|(v, _)| v).collect();
        if same.iter().any(|v| u.starts_with(v)) {
            return true;
        }
        if !same.iter().any(|v| v.starts_with(u)) {
            return false;
        }
        (0..alphabet).all(|i| {
            let mut next = u.to_vec();
            next.push(i);
            self.covers_piece(&next, level, alphabet)
        })
    }

    fn contains_point(&self, p: &ProductPoint) -> bool {
        self.points.contains(p) || self.pieces.iter().any(|c| Self::piece_contains(c, p))
    }

    fn subset_of(&self, other: &Self, alphabet: usize) -> bool {
        self.pieces.iter().all(|(u, l)| other.covers_piece(u, *l, alphabet))
            && self.points.iter().all(|p| other.contains_point(p))
    }

    fn meets(&self, other: &Self) -> bool {
        let piece_meet = self.pieces.iter().any(|(u, l)| {
            other.pieces.iter().any(|(v, m)| l == m && (u.starts_with(v) || v.starts_with(u)))
        });
        piece_meet
            || self.points.iter().any(|p| other.contains_point(p))
            || other.points.iter().any(|p| self.contains_point(p))
    }
}

/// `ProductImage` tagged with the base alphabet size.
#[derive(Clone, Debug)]
pub struct ProductCylinder {
    pub image: ProductImage,
    alphabet: usize,
}

impl ImageSet for ProductCylinder {
    fn key(&self) -> String {
        format!("{:?}", self.image)
    }

    fn is_singleton(&self) -> bool {
        self.image.pieces.is_empty() && self.image.points.len() == 1
    }

    fn relation(&self, other: &Self) -> Relation {
        let a_in_b = self.image.subset_of(&other.image, self.alphabet);
        let b_in_a = other.image.subset_of(&self.image, self.alphabet);
        Relation::from_parts(a_in_b, b_in_a, self.image.meets(&other.image))
    }
}

impl Membership<ProductPoint> for ProductCylinder {
    fn contains(&self, p: &ProductPoint) -> Option<bool> {
        Some(self.image.contains_point(p))
    }
}

/// The system `{g_0, ..., g_m}` on `X x {0, ..., n-1}`.
///
/// Level `0` plays the role of the distinguished element `y_1`. For `n = 1`
/// the maps are the base maps unchanged.
#[derive(Clone, Debug)]
pub struct ProductSystem<T> {
    pub base: Ifs<T>,
    pub levels: usize,
    pub maps: Vec<PiecewiseAffine<T>>,
    /// Fixed points `x_i` of the base maps.
    pub fixed: Vec<Vec<T>>,
    /// Base images were certified pairwise disjoint and the maps injective,
    /// which the symbolic lattice relies on.
    pub separated: bool,
}

/// Builds the product structure of a system with pairwise disjoint images.
pub fn product_structure<T: Scalar>(ifs: &Ifs<T>, n: usize, tol: f64) -> Result<ProductSystem<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("the discrete factor needs at least one point".into()));
    }
    let fixed: Vec<Vec<T>> = ifs.maps().iter().map(|f| f.fixed_point(tol)).collect();
    if n == 1 {
        let maps = ifs
            .maps()
            .iter()
            .map(|f| PiecewiseAffine { branches: vec![Branch { level: None, map: f.clone() }] })
            .collect();
        let separated = check_separated(ifs, tol).is_ok();
        return Ok(ProductSystem { base: ifs.clone(), levels: 1, maps, fixed, separated });
    }
    if ifs.len() < 2 {
        return Err(Error::InvalidInput("product structure needs at least two base maps".into()));
    }
    check_separated(ifs, tol)?;
    let d = ifs.dim();
    let lift = |m: &AffineMap<T>, last_coeff: T, last_offset: T| -> AffineMap<T> {
        let a = m.matrix();
        let mut rows: Vec<Vec<T>> = a
            .into_iter()
            .map(|mut r| {
                r.push(T::zero());
                r
            })
            .collect();
        let mut last = vec![T::zero(); d];
        last.push(last_coeff);
        rows.push(last);
        let mut b = m.offset.clone();
        b.push(last_offset);
        AffineMap::new(rows, b).expect("square")
    };
    let constant_at = |x: &[T], level: usize| -> AffineMap<T> {
        let zero = AffineMap::new(vec![vec![T::zero(); d]; d], x.to_vec()).expect("square");
        lift(&zero, T::zero(), T::from_i64(level as i64))
    };
    let mut maps = Vec::with_capacity(ifs.len() + 1);
    let mut shift = Vec::new();
    for j in 0..n - 1 {
        shift.push(Branch {
            level: Some(T::from_i64(j as i64)),
            map: lift(&AffineMap::identity(d), T::zero(), T::from_i64(j as i64 + 1)),
        });
    }
    shift.push(Branch { level: None, map: constant_at(&fixed[0], n - 1) });
    maps.push(PiecewiseAffine { branches: shift });
    for (i, f) in ifs.maps().iter().enumerate() {
        maps.push(PiecewiseAffine {
            branches: vec![
                Branch { level: Some(T::zero()), map: lift(f, T::zero(), T::zero()) },
                Branch { level: None, map: constant_at(&fixed[i], 0) },
            ],
        });
    }
    Ok(ProductSystem { base: ifs.clone(), levels: n, maps, fixed, separated: true })
}

/// Images pairwise certified disjoint and every map injective.
fn check_separated<T: Scalar>(ifs: &Ifs<T>, tol: f64) -> Result<()> {
    let f64_ifs = Ifs::new(
        ifs.maps()
            .iter()
            .map(|f| AffineMap::new(
                f.matrix().iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect(),
                f.offset.iter().map(Scalar::to_f64).collect(),
            ))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let lat = build_numeric_lattice(&f64_ifs, 1, 1e-12)?;
    for i in 0..ifs.len() {
        for j in (i + 1)..ifs.len() {
            let (a, b) = (lat.find_word(&[i]), lat.find_word(&[j]));
            let disjoint = matches!((a, b), (Some(a), Some(b)) if lat.relation(a, b) == Relation::Disjoint);
            if !disjoint {
                return Err(Error::InvalidInput(format!("images of maps {i} and {j} are not certified disjoint")));
            }
        }
    }
    if ifs.maps().iter().any(|f| f.is_constant(tol) || !invertible(&f.matrix())) {
        return Err(Error::InvalidInput("product structure needs injective base maps".into()));
    }
    Ok(())
}

fn invertible<T: Scalar>(a: &[Vec<T>]) -> bool {
    let n = a.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j].to_f64());
    m.determinant().abs() > 1e-14
}

impl<T: Scalar> ProductSystem<T> {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// One Hutchinson step with the guarded maps.
    pub fn hutchinson_step(&self, k: &PointSet<T>, tol: f64) -> Result<PointSet<T>> {
        let pts = self
            .maps
            .iter()
            .flat_map(|g| k.points().iter().filter_map(move |p| g.apply(p, tol)))
            .collect();
        PointSet::new(crate::ifs::dedup_points(pts, 0.0))
    }

    /// Starts from `{x_1} x levels` and applies `n` Hutchinson steps.
    pub fn attractor_approx(&self, n: usize, tol: f64) -> Result<PointSet<T>> {
        let seed: Vec<Vec<T>> = if self.levels == 1 {
            vec![self.fixed[0].clone()]
        } else {
            (0..self.levels)
                .map(|l| {
                    let mut p = self.fixed[0].clone();
                    p.push(T::from_i64(l as i64));
                    p
                })
                .collect()
        };
        let mut k = PointSet::new(seed)?;
        for _ in 0..n {
            k = self.hutchinson_step(&k, tol)?;
        }
        Ok(k)
    }

    /// Symbolic image of a word over `{g_0, ..., g_m}`.
    pub fn image_of_word(&self, w: &[usize]) -> ProductImage {
        let n = self.levels;
        if n == 1 {
            return ProductImage { pieces: BTreeSet::from([(w.to_vec(), 0)]), points: BTreeSet::new() };
        }
        let mut pieces: BTreeSet<(Vec<usize>, usize)> = (0..n).map(|l| (Vec::new(), l)).collect();
        let mut points: BTreeSet<ProductPoint> = BTreeSet::new();
        for &g in w.iter().rev() {
            let mut np = BTreeSet::new();
            let mut npts = BTreeSet::new();
            for (u, l) in pieces {
                match (g, l) {
                    (0, l) if l + 1 < n => {
                        np.insert((u, l + 1));
                    }
                    (0, _) => {
                        npts.insert(ProductPoint::new(Vec::new(), 0, n - 1));
                    }
                    (i, 0) => {
                        let mut v = vec![i - 1];
                        v.extend(u);
                        np.insert((v, 0));
                    }
                    (i, _) => {
                        npts.insert(ProductPoint::new(Vec::new(), i - 1, 0));
                    }
                }
            }
            for p in points {
                npts.insert(self.apply_point(g, &p));
            }
            pieces = np;
            points = npts;
        }
        ProductImage { pieces, points }.normalize()
    }

    /// `g_i` on a symbolic point.
    pub fn apply_point(&self, g: usize, p: &ProductPoint) -> ProductPoint {
        let n = self.levels;
        if n == 1 {
            let mut v = vec![g];
            v.extend(p.prefix.iter().copied());
            return ProductPoint::new(v, p.tail, 0);
        }
        match (g, p.level) {
            (0, l) if l + 1 < n => ProductPoint { level: l + 1, ..p.clone() },
            (0, _) => ProductPoint::new(Vec::new(), 0, n - 1),
            (i, 0) => {
                let mut v = vec![i - 1];
                v.extend(p.prefix.iter().copied());
                ProductPoint::new(v, p.tail, 0)
            }
            (i, _) => ProductPoint::new(Vec::new(), i - 1, 0),
        }
    }

    /// Exact lattice of the product system.
    pub fn lattice(&self, depth: usize) -> Result<CylinderLattice<ProductCylinder>> {
        if !self.separated {
            return Err(Error::InvalidInput("the symbolic lattice needs disjoint images and injective maps".into()));
        }
        let alphabet = self.base.len();
        let items = words_up_to(self.maps.len(), depth).into_iter().map(|w| {
            let image = self.image_of_word(&w);
            let c = ProductCylinder { image, alphabet };
            let order = if c.is_singleton() {
                Order::Omega
            } else {
                Order::Finite(w.len())
            };
            (w, order, c)
        });
        Ok(CylinderLattice::from_images(depth, self.maps.len(), "exact-product", items))
    }

    /// Coordinates of a symbolic point.
    pub fn realize_point(&self, p: &ProductPoint) -> Vec<T> {
        let x = p
            .prefix
            .iter()
            .rev()
            .fold(self.fixed[p.tail].clone(), |acc, &i| self.base.maps()[i].apply(&acc));
        let mut out = x;
        if self.levels > 1 {
            out.push(T::from_i64(p.level as i64));
        }
        out
    }
}

/// Counts words per merged image; useful for diagnostics.
pub fn image_histogram<S: ImageSet>(lattice: &CylinderLattice<S>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for c in lattice.cylinders() {
        *h.entry(c.merged_words).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::examples::{cantor, cantor_f64, kameyama, KAMEYAMA_ANGLE};
    use crate::scalar::rat;

    #[test]
    fn empty_word_is_identity() {
        let d = compose(&cantor(), &[], 0.0).unwrap();
        assert_eq!(d.map, AffineMap::identity(1));
        assert_eq!(d.order, Order::Finite(0));
        assert_eq!(order_of(&cantor(), &[], 3, 0.0).unwrap(), (Order::Finite(0), true));
    }

    #[test]
    fn kameyama_orders() {
        let k = kameyama(KAMEYAMA_ANGLE);
        let d = compose(&k, &[0, 1], 1e-12).unwrap();
        assert!((d.map.lipschitz() - 0.25).abs() < 1e-15);
        assert_eq!(order_of(&k, &[0, 0, 1], 4, 1e-12).unwrap(), (Order::Finite(3), true));
        assert_eq!(order_of(&k, &[2], 3, 1e-12).unwrap(), (Order::Omega, true));
        assert_eq!(compose(&k, &[2, 0, 1], 1e-12).unwrap().image_kind, ImageKind::Singleton);
    }

    #[test]
    fn cantor_is_strict() {
        let lat = build_numeric_lattice(&cantor_f64(), 3, 1e-12).unwrap();
        assert!(is_ultrafractal(&lat).is_yes());
        assert!(is_strict_ultrafractal(&lat).is_yes());
    }

    #[test]
    fn halves_are_not_strict() {
        let f = Ifs::new(vec![AffineMap::scalar(0.5, 0.0), AffineMap::scalar(0.5, 0.5)]).unwrap();
        let lat = build_numeric_lattice(&f, 2, 1e-12).unwrap();
        let v = is_strict_ultrafractal(&lat);
        assert_eq!(v.status, VerdictStatus::No);
        assert_eq!(v.witness, Some(("0".into(), "1".into())));
    }

    #[test]
    fn single_map_is_ultrafractal() {
        let f = Ifs::new(vec![AffineMap::scalar(0.5, 0.25)]).unwrap();
        let lat = build_numeric_lattice(&f, 3, 1e-12).unwrap();
        assert!(is_ultrafractal(&lat).is_yes());
    }

    #[test]
    fn product_with_one_level_is_unchanged() {
        let p = product_structure(&cantor(), 1, 0.0).unwrap();
        assert_eq!(p.maps.len(), 2);
        assert_eq!(p.maps[1].apply(&[rat(1, 1)], 0.0), Some(vec![rat(1, 1)]));
    }

    #[test]
    fn product_maps_follow_the_case_split() {
        let p = product_structure(&cantor(), 3, 0.0).unwrap();
        assert_eq!(p.maps.len(), 3);
        let g0 = &p.maps[0];
        assert_eq!(g0.apply(&[rat(1, 3), rat(0, 1)], 0.0), Some(vec![rat(1, 3), rat(1, 1)]));
        assert_eq!(g0.apply(&[rat(1, 3), rat(2, 1)], 0.0), Some(vec![rat(0, 1), rat(2, 1)]));
        let g2 = &p.maps[2];
        assert_eq!(g2.apply(&[rat(1, 3), rat(0, 1)], 0.0), Some(vec![rat(7, 9), rat(0, 1)]));
        assert_eq!(g2.apply(&[rat(1, 3), rat(1, 1)], 0.0), Some(vec![rat(1, 1), rat(0, 1)]));
    }

    #[test]
    fn product_rejects_overlaps() {
        assert!(product_structure(&crate::ifs::examples::halves(), 2, 0.0).is_err());
    }
}
