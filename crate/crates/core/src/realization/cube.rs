//! Dyadic cubes meeting a finite set `Y ⊂ [0,1]^d` and the tree morphism
//! `φ` from blocks of `d` bits onto them.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::address::Address;
use crate::scalar::{format_rational, Rational};
use crate::{Error, Result};

/// Closed cube `2^{-n}(c + [0,1]^d)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cube {
    pub level: usize,
    pub coords: Vec<u64>,
    /// Indices of the points of `Y` in the cube.
    pub members: Vec<usize>,
    /// Children meeting `Y`, in lexicographic order of coordinates.
    pub children: Vec<usize>,
}

/// The subtree of dyadic cubes meeting `Y`, down to the level where every
/// cube holds a single point.
#[derive(Clone, Debug)]
pub struct CubeTree {
    pub dim: usize,
    pub points: Vec<Vec<Rational>>,
    pub levels: Vec<Vec<Cube>>,
}

fn in_closed_cube(x: &[Rational], level: usize, coords: &[u64]) -> bool {
    let scale = Rational::from_integer(BigInt::one() << level);
    x.iter().zip(coords).all(|(xi, &c)| {
        let t = xi.clone() * &scale;
        t >= Rational::from_integer(c.into()) && t <= Rational::from_integer((c + 1).into())
    })
}

impl CubeTree {
    pub fn new(points: Vec<Vec<Rational>>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or_else(|| Error::InvalidInput("Y must not be empty".into()))?;
        if dim == 0 || dim > 8 {
            return Err(Error::InvalidInput("dimension must lie in 1..=8".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::InvalidInput("points of Y have different dimensions".into()));
            }
            if p.iter().any(|x| *x < Rational::zero() || *x > Rational::one()) {
                return Err(Error::InvalidInput("points of Y must lie in the unit cube".into()));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(Error::InvalidInput(format!("points {i} and {j} of Y coincide")));
                }
            }
        }
        let root = Cube { level: 0, coords: vec![0; dim], members: (0..points.len()).collect(), children: Vec::new() };
        let mut levels = vec![vec![root]];
        while levels.last().expect("non-empty").iter().any(|c| c.members.len() > 1) {
            let n = levels.len();
            let mut next: Vec<Cube> = Vec::new();
            let prev = levels.last_mut().expect("non-empty");
            for cube in prev.iter_mut() {
                for j in 0..(1u64 << dim) {
                    let coords: Vec<u64> = (0..dim).map(|i| 2 * cube.coords[i] + ((j >> (dim - 1 - i)) & 1)).collect();
                    let members: Vec<usize> =
                        cube.members.iter().copied().filter(|&m| in_closed_cube(&points[m], n, &coords)).collect();
                    if !members.is_empty() {
                        cube.children.push(next.len());
                        next.push(Cube { level: n, coords, members, children: Vec::new() });
                    }
                }
            }
            levels.push(next);
        }
        Ok(Self { dim, points, levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `φ` on one block: block value `j` goes to child `j mod (#children)`.
    pub fn successor(&self, level: usize, cube: usize, block: &[u8]) -> usize {
        let c = &self.levels[level][cube];
        let j = block.iter().fold(0usize, |acc, &b| 2 * acc + b as usize);
        c.children[j % c.children.len()]
    }

    /// `∂φ(α)`: the point of `Y` addressed by an infinite sequence.
    pub fn boundary_point(&self, a: &Address) -> usize {
        let (mut level, mut cube, mut pos) = (0, 0, 0);
        loop {
            let c = &self.levels[level][cube];
            if c.members.len() == 1 {
                return c.members[0];
            }
            let block: Vec<u8> = (pos..pos + self.dim).map(|i| a.bit(i)).collect();
            cube = self.successor(level, cube, &block);
            level += 1;
            pos += self.dim;
        }
    }

    /// Cube reached by the full blocks of `s` and the leftover partial block.
    pub fn descend(&self, s: &[u8]) -> (usize, usize, Vec<u8>) {
        let (mut level, mut cube) = (0, 0);
        let mut chunks = s.chunks_exact(self.dim);
        for block in chunks.by_ref() {
            if self.levels[level][cube].members.len() == 1 {
                return (level, cube, Vec::new());
            }
            cube = self.successor(level, cube, block);
            level += 1;
        }
        (level, cube, chunks.remainder().to_vec())
    }

    /// `∂φ(↑s)`: points reachable from sequences extending `s`.
    pub fn prefix_image(&self, s: &[u8]) -> BTreeSet<usize> {
        let (level, cube, partial) = self.descend(s);
        self.partial_image(level, cube, &partial)
    }

    /// Points under `cube` reachable through blocks starting with `partial`.
    pub fn partial_image(&self, level: usize, cube: usize, partial: &[u8]) -> BTreeSet<usize> {
        let c = &self.levels[level][cube];
        if partial.is_empty() || c.members.len() == 1 {
            return c.members.iter().copied().collect();
        }
        let free = self.dim - partial.len();
        let mut out = BTreeSet::new();
        for m in 0..(1usize << free) {
            let mut block = partial.to_vec();
            block.extend((0..free).rev().map(|i| ((m >> i) & 1) as u8));
            let child = self.successor(level, cube, &block);
            out.extend(self.levels[level + 1][child].members.iter().copied());
        }
        out
    }

    /// Index of the lexicographically smallest point.
    pub fn smallest_point(&self) -> usize {
        (0..self.points.len()).min_by(|&a, &b| self.points[a].cmp(&self.points[b])).expect("non-empty")
    }

    pub fn format_point(&self, i: usize) -> String {
        let coords: Vec<String> = self.points[i].iter().map(format_rational).collect();
        format!("({})", coords.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn two_points_on_the_line() {
        let t = CubeTree::new(vec![vec![rat(0, 1)], vec![rat(1, 1)]]).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.boundary_point(&Address::finite(&[0, 1])), 0);
        assert_eq!(t.boundary_point(&Address::finite(&[1])), 1);
    }

    #[test]
    fn single_point_is_constant() {
        let t = CubeTree::new(vec![vec![rat(1, 3), rat(1, 2)]]).unwrap();
        assert_eq!(t.depth(), 0);
        assert_eq!(t.boundary_point(&Address::new(vec![], 1)), 0);
    }

    #[test]
    fn surjective_on_successors() {
        let pts = vec![vec![rat(1, 8), rat(1, 8)], vec![rat(7, 8), rat(1, 8)], vec![rat(1, 2), rat(3, 4)]];
        let t = CubeTree::new(pts).unwrap();
        for (n, level) in t.levels.iter().enumerate().take(t.depth()) {
            for (i, c) in level.iter().enumerate() {
                let hit: BTreeSet<usize> =
                    (0..4u8).map(|j| t.successor(n, i, &[(j >> 1) & 1, j & 1])).collect();
                assert_eq!(hit.len(), c.children.len());
            }
        }
    }
}
