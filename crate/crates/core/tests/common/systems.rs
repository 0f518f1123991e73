use metric_fractals::ifs::{AffineMap, Ifs};
use metric_fractals::scalar::{rat, Rational};
use proptest::prelude::*;

/// Maps `x -> a x + b` with `a = ±1/k`, `b = p/12`; images may overlap.
pub fn line_ifs() -> impl Strategy<Value = Ifs<Rational>> {
    proptest::collection::vec((2i64..7, any::<bool>(), 0i64..=12), 2..4).prop_map(|maps| {
        Ifs::new(
            maps.into_iter()
                .map(|(k, neg, p)| AffineMap::scalar(rat(if neg { -1 } else { 1 }, k), rat(p, 12)))
                .collect(),
        )
        .unwrap()
    })
}

/// `m` maps of `[0,1]`, map `i` landing strictly inside `[i/m, (i+1)/m]`, so
/// the images are pairwise disjoint. Every ratio is at most `1/3`.
pub fn separated_ifs() -> impl Strategy<Value = Ifs<Rational>> {
    (2usize..4)
        .prop_flat_map(|m| proptest::collection::vec((1i64..4, any::<bool>(), 1i64..4), m))
        .prop_map(|spec| {
            let m = spec.len() as i64;
            let maps = spec
                .iter()
                .enumerate()
                .map(|(i, &(k, neg, s))| {
                    let a = rat(1, m + k);
                    let start = rat(i as i64, m) + rat(s, 4) * (rat(1, m) - &a);
                    if neg {
                        AffineMap::scalar(-a.clone(), start + a)
                    } else {
                        AffineMap::scalar(a, start)
                    }
                })
                .collect();
            Ifs::new(maps).unwrap()
        })
}
