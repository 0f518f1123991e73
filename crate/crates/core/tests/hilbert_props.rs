mod common;

use metric_fractals::hilbert::{
    embedding_error, hilbert_embedding, negative_type_check, negative_type_form, pair_family_check, PairVerdict, GRAM_TOL,
};
use metric_fractals::metric::{FiniteMetricSpace, PointSet};
use metric_fractals::scalar::rat;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn euclidean() -> impl Strategy<Value = FiniteMetricSpace<f64>> {
    (1usize..4).prop_flat_map(|d| {
        proptest::collection::vec(proptest::collection::vec(-10i32..10, d), 2..9).prop_map(|pts| {
            let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect();
            FiniteMetricSpace::euclidean(&PointSet::new(pts).unwrap(), 1e-9).unwrap()
        })
    })
}

/// Shortest paths on a random connected graph with weights in `1..4`.
fn graph_metric() -> impl Strategy<Value = FiniteMetricSpace<f64>> {
    (4usize..8).prop_flat_map(|n| {
        let edges = proptest::collection::vec((0..n, 0..n, 1u32..4), n..3 * n);
        (Just(n), edges, proptest::collection::vec(1u32..4, n - 1))
    })
    .prop_map(|(n, edges, path)| {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        let mut link = |a: usize, b: usize, w: f64| {
            if a != b && w < d[a][b] {
                d[a][b] = w;
                d[b][a] = w;
            }
        };
        for (i, w) in path.into_iter().enumerate() {
            link(i, i + 1, w as f64);
        }
        for (a, b, w) in edges {
            link(a, b, w as f64);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        FiniteMetricSpace::from_matrix(d, 1e-9).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pair_witnesses_are_plus_minus_one_witnesses(space in graph_metric()) {
        if let PairVerdict::Violation { family, value } = pair_family_check(&space, 3, 0, 0) {
            prop_assert_eq!(family.plus.len(), family.minus.len());
            let c = family.coefficients(space.len());
            prop_assert!(c.iter().sum::<f64>().abs() < 1e-12);
            let form = negative_type_form(&space, &c);
            prop_assert!((form - value).abs() <= 1e-9 * value.abs().max(1.0));
            prop_assert!(form > 0.0);
            prop_assert!(!negative_type_check(&space, GRAM_TOL).unwrap().is_embeddable());
        }
    }

    #[test]
    fn embedding_reproduces_euclidean_distances(space in euclidean()) {
        prop_assert!(negative_type_check(&space, GRAM_TOL).unwrap().is_embeddable());
        let coords = hilbert_embedding(&space, GRAM_TOL).unwrap();
        let err = embedding_error(&space, &coords);
        prop_assert!(err <= GRAM_TOL.sqrt() * space.diameter().max(1.0), "{err}");
        let back = FiniteMetricSpace::euclidean(&PointSet::new(coords).unwrap(), 1e-6).unwrap();
        prop_assert_eq!(back.len(), space.len());
    }

    #[test]
    fn ultrametrics_have_negative_type(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = common::random_ultrametric(&mut rng, &rat(1, 3), 12, 3, 4).to_f64();
        prop_assume!(space.len() >= 4);
        prop_assert!(negative_type_check(&space, GRAM_TOL).unwrap().is_embeddable());
        let found = matches!(pair_family_check(&space, 3, 0, seed), PairVerdict::Violation { .. });
        prop_assert!(!found);
    }
}
