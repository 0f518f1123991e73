use metric_fractals::metric::{hausdorff_distance, BoundKind, FiniteMetricSpace, PointSet, SubsetFamily};
use metric_fractals::scalar::{rat, Rational};
use proptest::prelude::*;

fn line_space(xs: &[i64]) -> FiniteMetricSpace<Rational> {
    let labels = (0..xs.len()).map(|i| i.to_string()).collect();
    FiniteMetricSpace::from_fn(labels, 0.0, |i, j| rat((xs[i] - xs[j]).abs(), 1)).unwrap()
}

fn ultra_from_tree(split: &[u8]) -> FiniteMetricSpace<f64> {
    // Points are leaves of a binary tree; `split[k]` is the height of the
    // lowest common ancestor of leaves k and k+1.
    let n = split.len() + 1;
    let labels = (0..n).map(|i| i.to_string()).collect();
    FiniteMetricSpace::from_fn(labels, 1e-12, |i, j| {
        if i == j {
            return 0.0;
        }
        let (a, b) = (i.min(j), i.max(j));
        let h = split[a..b].iter().copied().max().unwrap();
        0.5f64.powi(8 - h as i32)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adding_points_never_lowers_the_doubling_number(
        xs in proptest::collection::btree_set(0i64..200, 2..9),
        extra in proptest::collection::btree_set(200i64..400, 1..3),
    ) {
        let small: Vec<i64> = xs.iter().copied().collect();
        let big: Vec<i64> = small.iter().chain(extra.iter()).copied().collect();
        let half = rat(1, 2);
        let a = line_space(&small).doubling_number(&half, SubsetFamily::AllSubsets).unwrap();
        let b = line_space(&big).doubling_number(&half, SubsetFamily::AllSubsets).unwrap();
        prop_assert_eq!(a.bound, BoundKind::Exact);
        prop_assert!(a.value <= b.value, "{} > {}", a.value, b.value);
    }

    #[test]
    fn snowflake_keeps_ultrametricity(split in proptest::collection::vec(0u8..8, 1..10), alpha in 0.05f64..=1.0) {
        let u = ultra_from_tree(&split);
        prop_assert!(u.is_ultrametric(1e-12));
        prop_assert!(u.snowflake(alpha).unwrap().is_ultrametric(1e-12));
    }

    #[test]
    fn snowflake_of_a_line_is_not_ultrametric(xs in proptest::collection::btree_set(0i64..100, 3..7), alpha in 0.05f64..=1.0) {
        let v: Vec<i64> = xs.into_iter().collect();
        let f = line_space(&v).to_f64();
        prop_assert!(!f.is_ultrametric(1e-12));
        prop_assert!(!f.snowflake(alpha).unwrap().is_ultrametric(1e-12));
    }

    #[test]
    fn hausdorff_is_a_metric(
        a in proptest::collection::vec((-50i32..50, -50i32..50), 1..6),
        b in proptest::collection::vec((-50i32..50, -50i32..50), 1..6),
        c in proptest::collection::vec((-50i32..50, -50i32..50), 1..6),
    ) {
        let set = |v: &[(i32, i32)]| PointSet::new(v.iter().map(|&(x, y)| vec![x as f64, y as f64]).collect()).unwrap();
        let (a, b, c) = (set(&a), set(&b), set(&c));
        let h = |x: &PointSet<f64>, y: &PointSet<f64>| hausdorff_distance(x, y).unwrap();
        prop_assert_eq!(h(&a, &a), 0.0);
        prop_assert_eq!(h(&a, &b), h(&b, &a));
        prop_assert!(h(&a, &c) <= h(&a, &b) + h(&b, &c) + 1e-9);
    }
}
