#![allow(dead_code)]

pub mod systems;

use std::collections::HashMap;

use metric_fractals::line_embed::BallTree;
use metric_fractals::metric::FiniteMetricSpace;
use metric_fractals::scalar::{rat, rat_pow, Rational};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random ultrametric from a tree: the node at depth `h` gets weight
/// `λ^h t` with `t ∈ {1/2, 3/4, 1}`, and `d(x, y)` is the weight of the
/// deepest common node. Needs `λ < 1/2`.
pub fn random_ultrametric(
    rng: &mut ChaCha8Rng,
    lambda: &Rational,
    max_points: usize,
    max_children: usize,
    max_depth: usize,
) -> FiniteMetricSpace<Rational> {
    let mut leaves: Vec<Vec<usize>> = Vec::new();
    let mut weights: HashMap<Vec<usize>, Rational> = HashMap::new();
    let mut stack = vec![Vec::<usize>::new()];
    while let Some(path) = stack.pop() {
        let h = path.len();
        let room = max_points.saturating_sub(leaves.len() + stack.len());
        let kids = if h >= max_depth || room < 2 || (h > 0 && rng.gen_bool(0.3)) {
            0
        } else {
            rng.gen_range(1..=max_children.min(room))
        };
        if kids == 0 {
            leaves.push(path);
            continue;
        }
        let t = [rat(1, 2), rat(3, 4), rat(1, 1)][rng.gen_range(0..3)].clone();
        weights.insert(path.clone(), rat_pow(lambda, h) * t);
        for k in 0..kids {
            let mut p = path.clone();
            p.push(k);
            stack.push(p);
        }
    }
    leaves.sort();
    let labels = leaves.iter().map(|p| format!("{p:?}")).collect();
    FiniteMetricSpace::from_fn(labels, 0.0, |i, j| {
        let l = leaves[i].iter().zip(&leaves[j]).take_while(|(a, b)| a == b).count();
        weights[&leaves[i][..l]].clone()
    })
    .expect("valid ultrametric")
}

/// `λ`-Lipschitz self-maps of a tree's points: for each level `k`, the
/// level-`k` balls are sent to random points of one level-`k+1` ball.
pub fn contraction_maps(rng: &mut ChaCha8Rng, tree: &BallTree) -> Vec<Vec<usize>> {
    let n = tree.points();
    let mut maps = vec![vec![0; n]];
    for k in 0..tree.depth() {
        let targets_pool = &tree.levels[k + 1][rng.gen_range(0..tree.levels[k + 1].len())].members;
        let choice: Vec<usize> =
            (0..tree.levels[k].len()).map(|_| targets_pool[rng.gen_range(0..targets_pool.len())]).collect();
        maps.push((0..n).map(|x| choice[tree.ball_of(k, x)]).collect());
    }
    maps
}
