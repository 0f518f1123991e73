use std::sync::OnceLock;

use metric_fractals::code_space::{is_strict_ultrafractal, CylinderLattice, ImageSet};
use metric_fractals::kameyama::kameyama_distance;
use metric_fractals::realization::{even_odd_split, interleave, Address, Realization, XImage, XPoint, ZPoint, ZSpace, ZSpaceSpec};
use metric_fractals::scalar::{rat, rat_pow, Rational};
use num_traits::Zero;
use proptest::prelude::*;

const DEPTH: usize = 5;

fn desk() -> &'static Realization {
    static R: OnceLock<Realization> = OnceLock::new();
    R.get_or_init(|| {
        let extras = [("1", "11"), ("01", "0101"), ("", "101"), ("110", "0011"), ("0", "1101")];
        let spec = ZSpaceSpec { extras: extras.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect() };
        let y = vec![vec![rat(0, 1), rat(0, 1)], vec![rat(1, 1), rat(1, 2)], vec![rat(1, 3), rat(1, 4)], vec![rat(3, 8), rat(1, 4)]];
        Realization::new(ZSpace::from_spec(&spec).unwrap(), y, rat(3, 4)).unwrap()
    })
}

fn z_lattice() -> &'static CylinderLattice<XImage> {
    static L: OnceLock<CylinderLattice<XImage>> = OnceLock::new();
    L.get_or_init(|| desk().z_lattice(DEPTH).unwrap())
}

fn lcp(a: &Address, b: &Address) -> usize {
    (0..).take_while(|&i| a.bit(i) == b.bit(i)).count()
}

#[test]
fn z_lattices_are_strict_at_every_depth() {
    let bare = Realization::new(ZSpace::new(vec![]).unwrap(), vec![vec![rat(0, 1)], vec![rat(1, 1)]], rat(1, 2)).unwrap();
    for real in [desk(), &bare] {
        for depth in 3..=5 {
            let v = is_strict_ultrafractal(&real.z_lattice(depth).unwrap());
            assert!(v.is_yes(), "depth {depth}: {v:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_and_interleave_are_inverse(s in proptest::collection::vec(0u8..2, 0..24)) {
        let (even, odd) = even_odd_split(&s);
        prop_assert_eq!(even.len(), s.len().div_ceil(2));
        prop_assert_eq!(interleave(&even, &odd), s);
    }

    #[test]
    fn base_points_sit_at_the_power_of_their_common_prefix(
        s in proptest::collection::vec(0u8..2, 0..4),
        t in proptest::collection::vec(0u8..2, 0..4),
    ) {
        let real = desk();
        let (a, b) = (ZPoint::base(&s), ZPoint::base(&t));
        let d = kameyama_distance(z_lattice(), &real.lambda, &XPoint::Z(a.clone()), &XPoint::Z(b.clone())).unwrap().value;
        let want: Rational = if a == b { Rational::zero() } else { rat_pow(&real.lambda, lcp(&a.first, &b.first)) };
        prop_assert_eq!(d, want);
    }

    #[test]
    fn a_three_after_the_first_letter_collapses_the_image(
        head in proptest::collection::vec(0usize..4, 1..3),
        tail in proptest::collection::vec(0usize..4, 0..3),
    ) {
        let mut w = head;
        w.push(3);
        w.extend(tail);
        prop_assert!(desk().image_of_word(&w).unwrap().is_singleton(), "{:?}", w);
    }
}
