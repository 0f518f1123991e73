//! Negative type tests and isometric embeddings of finite metric spaces into
//! Euclidean space.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metric::FiniteMetricSpace;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Relative eigenvalue tolerance: `tol = GRAM_TOL * ||G||_1`.
pub const GRAM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Verdict {
    Embeddable,
    NotEmbeddable { witness: Vec<f64> },
    /// Smallest eigenvalue negative but within the tolerance band.
    Borderline { tol: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddabilityReport {
    pub verdict: Verdict,
    pub min_eig: f64,
    /// Absolute eigenvalue tolerance used.
    pub tol: f64,
    /// `sum d^2(x_i, x_j) c_i c_j` for the witness, when there is one.
    pub witness_value: Option<f64>,
}

impl EmbeddabilityReport {
    pub fn is_embeddable(&self) -> bool {
        !matches!(self.verdict, Verdict::NotEmbeddable { .. })
    }
}

fn squared(space: &FiniteMetricSpace<f64>) -> DMatrix<f64> {
    let n = space.len();
    DMatrix::from_fn(n, n, |i, j| space.d(i, j).powi(2))
}

/// `G_ij = (d(x_0,x_i)^2 + d(x_0,x_j)^2 - d(x_i,x_j)^2) / 2` over points `1..n`.
pub fn gram_matrix(space: &FiniteMetricSpace<f64>, base: usize) -> DMatrix<f64> {
    let d2 = squared(space);
    let others: Vec<usize> = (0..space.len()).filter(|&i| i != base).collect();
    let m = others.len();
    DMatrix::from_fn(m, m, |a, b| {
        let (i, j) = (others[a], others[b]);
        0.5 * (d2[(base, i)] + d2[(base, j)] - d2[(i, j)])
    })
}

/// `sum_{i,j} d^2(x_i,x_j) c_i c_j`.
pub fn negative_type_form(space: &FiniteMetricSpace<f64>, c: &[f64]) -> f64 {
    let n = space.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += space.d(i, j).powi(2) * c[i] * c[j];
        }
    }
    s
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Positive semidefiniteness of the Gram matrix, with a witness vector
/// `c = (-sum v, v)` from the most negative eigenvector otherwise.
///
/// Eigenvalues below `-tol` give a witness. Eigenvalues in `(-tol, -noise)`,
/// where `noise` is the floating point resolution of the eigensolver, are
/// reported as borderline.
pub fn negative_type_check_at(space: &FiniteMetricSpace<f64>, base: usize, rel_tol: f64) -> Result<EmbeddabilityReport> {
    if base >= space.len() {
        return Err(Error::InvalidInput("base point out of range".into()));
    }
    if space.len() == 1 {
        return Ok(EmbeddabilityReport { verdict: Verdict::Embeddable, min_eig: 0.0, tol: 0.0, witness_value: None });
    }
    let g = gram_matrix(space, base);
    let norm = one_norm(&g);
    let tol = rel_tol * norm;
    let noise = 64.0 * f64::EPSILON * norm * g.nrows() as f64;
    let eig = SymmetricEigen::new(g);
    let (idx, min_eig) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    if min_eig >= -noise {
        return Ok(EmbeddabilityReport { verdict: Verdict::Embeddable, min_eig, tol, witness_value: None });
    }
    if min_eig > -tol {
        return Ok(EmbeddabilityReport { verdict: Verdict::Borderline { tol }, min_eig, tol, witness_value: None });
    }
    let v = eig.eigenvectors.column(idx);
    let others: Vec<usize> = (0..space.len()).filter(|&i| i != base).collect();
    let mut c = vec![0.0; space.len()];
    for (a, &i) in others.iter().enumerate() {
        c[i] = v[a];
    }
    c[base] = -v.iter().sum::<f64>();
    let value = negative_type_form(space, &c);
    Ok(EmbeddabilityReport {
        verdict: Verdict::NotEmbeddable { witness: c },
        min_eig,
        tol,
        witness_value: Some(value),
    })
}

/// Negative type check with base point 0 and the default tolerance.
pub fn negative_type_check(space: &FiniteMetricSpace<f64>, rel_tol: f64) -> Result<EmbeddabilityReport> {
    negative_type_check_at(space, 0, rel_tol)
}

/// A violating family `(x^+, x^-)` of equal size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFamily {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

impl PairFamily {
    /// `c_i` = multiplicity in `plus` minus multiplicity in `minus`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n];
        for &i in &self.plus {
            c[i] += 1.0;
        }
        for &i in &self.minus {
            c[i] -= 1.0;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PairVerdict {
    Violation { family: PairFamily, value: f64 },
    NoViolationFound { exhaustive_up_to: usize, random_trials: usize },
}

/// `sum d^2(x+_i,x+_j) + sum d^2(x-_i,x-_j) - 2 sum d^2(x+_i,x-_j)`.
pub fn pair_family_value(space: &FiniteMetricSpace<f64>, f: &PairFamily) -> f64 {
    pair_family_terms(space, f).0
}

/// The value and the sum of the absolute values of its terms.
fn pair_family_terms(space: &FiniteMetricSpace<f64>, f: &PairFamily) -> (f64, f64) {
    let d2 = |a: usize, b: usize| space.d(a, b).powi(2);
    let (mut same, mut cross) = (0.0, 0.0);
    for &a in &f.plus {
        for &b in &f.plus {
            same += d2(a, b);
        }
    }
    for &a in &f.minus {
        for &b in &f.minus {
            same += d2(a, b);
        }
    }
    for &a in &f.plus {
        for &b in &f.minus {
            cross += 2.0 * d2(a, b);
        }
    }
    (same - cross, same + cross)
}

/// Multisets of size `k` from `0..n` as sorted index vectors.
fn multisets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

/// Search for a family violating the pair inequality.
///
/// Families of size up to `min(max_n, 3)` are enumerated exhaustively with
/// repetition; larger sizes up to `max_n` are sampled. A value counts as a
/// violation when it exceeds `2 ||c||^2 GRAM_TOL ||G||_1`, which matches the
/// eigenvalue tolerance of [`negative_type_check`], plus the rounding error of
/// the sum itself (families with cancelling points have `c = 0`).
pub fn pair_family_check(space: &FiniteMetricSpace<f64>, max_n: usize, random_trials: usize, seed: u64) -> PairVerdict {
    let n = space.len();
    let scale = if n > 1 { one_norm(&gram_matrix(space, 0)) } else { 0.0 };
    let threshold = |f: &PairFamily, magnitude: f64| {
        let c = f.coefficients(n);
        2.0 * c.iter().map(|x| x * x).sum::<f64>() * GRAM_TOL * scale + 16.0 * f64::EPSILON * magnitude
    };
    let exhaustive = max_n.min(3);
    for k in 1..=exhaustive {
        let sets = multisets(n, k);
        for plus in &sets {
            for minus in &sets {
                let f = PairFamily { plus: plus.clone(), minus: minus.clone() };
                let (value, magnitude) = pair_family_terms(space, &f);
                if value > threshold(&f, magnitude) {
                    return PairVerdict::Violation { family: f, value };
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = 0;
    if max_n > exhaustive && n > 0 {
        for _ in 0..random_trials {
            trials += 1;
            let k = rng.gen_range(exhaustive + 1..=max_n);
            let f = PairFamily {
                plus: (0..k).map(|_| rng.gen_range(0..n)).collect(),
                minus: (0..k).map(|_| rng.gen_range(0..n)).collect(),
            };
            let (value, magnitude) = pair_family_terms(space, &f);
            if value > threshold(&f, magnitude) {
                return PairVerdict::Violation { family: f, value };
            }
        }
    }
    PairVerdict::NoViolationFound { exhaustive_up_to: exhaustive, random_trials: trials }
}

/// Coordinates in `R^{n-1}` reproducing the distances, from `G = U Λ U^T`.
pub fn hilbert_embedding(space: &FiniteMetricSpace<f64>, rel_tol: f64) -> Result<Vec<Vec<f64>>> {
    let n = space.len();
    if n == 1 {
        return Ok(vec![vec![0.0]]);
    }
    let report = negative_type_check(space, rel_tol)?;
    if let Verdict::NotEmbeddable { witness } = &report.verdict {
        return Err(Error::NotEmbeddable(format!("negative type witness {witness:?}")));
    }
    let eig = SymmetricEigen::new(gram_matrix(space, 0));
    let m = n - 1;
    let mut coords = vec![vec![0.0; m]; n];
    for a in 0..m {
        for k in 0..m {
            let lam = eig.eigenvalues[k].max(0.0);
            coords[a + 1][k] = eig.eigenvectors[(a, k)] * lam.sqrt();
        }
    }
    Ok(coords)
}

/// Largest deviation between the input distances and the embedded ones.
pub fn embedding_error(space: &FiniteMetricSpace<f64>, coords: &[Vec<f64>]) -> f64 {
    let n = space.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let e = coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max((e - space.d(i, j)).abs());
        }
    }
    worst
}

/// Converts an exact space before checking.
pub fn negative_type_check_exact<T: Scalar>(space: &FiniteMetricSpace<T>, rel_tol: f64) -> Result<EmbeddabilityReport> {
    negative_type_check(&space.to_f64(), rel_tol)
}
