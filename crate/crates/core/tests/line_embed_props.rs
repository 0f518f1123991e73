mod common;

use std::collections::BTreeSet;

use metric_fractals::line_embed::{ball_hierarchy, choose_alpha, conjugate_contraction, interval_assignment, IntervalAssignment};
use metric_fractals::metric::FiniteMetricSpace;
use metric_fractals::scalar::{rat, rat_pow, Rational};
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64) -> (FiniteMetricSpace<Rational>, IntervalAssignment, ChaCha8Rng) {
    let lambda = rat(1, 16);
    let epsilon = rat(3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = common::random_ultrametric(&mut rng, &lambda, 24, 3, 3);
    let tree = ball_hierarchy(&space, &lambda, 64).unwrap();
    let alpha = choose_alpha(&lambda, &epsilon, tree.max_children()).unwrap();
    let assign = interval_assignment(&tree, alpha, &epsilon).unwrap();
    (space, assign, rng)
}

/// `max |a_x - a_y| / |b_x - b_y|` over pairs with `b_x != b_y`.
fn lipschitz(a: &[Rational], b: &[Rational]) -> Rational {
    let mut best = Rational::zero();
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let den = (b[i].clone() - &b[j]).abs();
            if !den.is_zero() {
                best = best.max((a[i].clone() - &a[j]).abs() / den);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn phi_is_injective(seed in any::<u64>()) {
        let (space, assign, _) = setup(seed);
        let phi: BTreeSet<Rational> = assign.phi_all().into_iter().collect();
        prop_assert_eq!(phi.len(), space.len());
    }

    #[test]
    fn conjugated_system_has_the_embedded_set_as_attractor(seed in any::<u64>()) {
        let (space, assign, mut rng) = setup(seed);
        let n = space.len();
        let phi = assign.phi_all();
        let maps: Vec<Vec<usize>> = common::contraction_maps(&mut rng, &assign.tree)
            .into_iter()
            .chain((0..n).map(|x| vec![x; n]))
            .collect();
        let conj: Vec<_> = maps.iter().map(|f| conjugate_contraction(&assign, &space, f).unwrap()).collect();
        let target: BTreeSet<Rational> = phi.iter().cloned().collect();
        let step = |k: &BTreeSet<Rational>| -> BTreeSet<Rational> {
            conj.iter().flat_map(|g| k.iter().map(|t| g.eval(t))).collect()
        };
        prop_assert_eq!(step(&target), target.clone());
        let hausdorff = |a: &BTreeSet<Rational>, b: &BTreeSet<Rational>| -> Rational {
            let dir = |a: &BTreeSet<Rational>, b: &BTreeSet<Rational>| {
                a.iter().map(|x| b.iter().map(|y| (x.clone() - y).abs()).min().unwrap()).max().unwrap()
            };
            dir(a, b).max(dir(b, a))
        };
        let mut k: BTreeSet<Rational> = [rat(1, 2)].into_iter().collect();
        let start = hausdorff(&k, &target);
        for m in 1..4 {
            k = step(&k);
            prop_assert!(hausdorff(&k, &target) <= rat_pow(&assign.epsilon, m) * &start);
        }
    }

    #[test]
    fn conjugation_obeys_the_lipschitz_law(seed in any::<u64>()) {
        let (space, assign, mut rng) = setup(seed);
        let n = space.len();
        prop_assume!(n >= 2);
        let phi = assign.phi_all();
        let e = 1u32 << assign.alpha.k;
        let c = assign.epsilon.clone() / (assign.mu.clone() * &assign.mu);
        for _ in 0..8 {
            let f: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let fd: Vec<Vec<Rational>> = (0..n).map(|i| (0..n).map(|j| space.d(f[i], f[j]).clone()).collect()).collect();
            let mut lip_f = Rational::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    lip_f = lip_f.max(fd[i][j].clone() / space.d(i, j));
                }
            }
            let image: Vec<Rational> = f.iter().map(|&y| phi[y].clone()).collect();
            let lip_conj = lipschitz(&image, &phi);
            prop_assert!(rat_pow(&(lip_conj / &c), e as usize) <= lip_f);
        }
    }
}
