//! The compact set `Z = (K × S₀) ∪ extras` inside the square of the Cantor
//! set, its retractions and the maps `f₀, f₁, f₂`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::address::{format_bits, parse_bits, Address};
use crate::{Error, Result};

/// A point `(x_u, x_v)` of `K × K`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZPoint {
    pub first: Address,
    pub second: Address,
}

impl ZPoint {
    pub fn new(first: Address, second: Address) -> Self {
        Self { first, second }
    }

    /// `(x_s, 0)`.
    pub fn base(s: &[u8]) -> Self {
        Self::new(Address::finite(s), Address::zero())
    }

    /// `(x_s, 2/3^{k+1})`.
    pub fn level(s: &[u8], k: usize) -> Self {
        Self::new(Address::finite(s), Address::finite(&level_bits(k)))
    }

    pub fn in_rect(&self, s: &[u8], t: &[u8]) -> bool {
        self.first.starts_with(s) && self.second.starts_with(t)
    }
}

impl fmt::Display for ZPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

impl fmt::Debug for ZPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `0^k 1`.
pub fn level_bits(k: usize) -> Vec<u8> {
    let mut v = vec![0; k];
    v.push(1);
    v
}

/// `Some(k)` when the address is `0^k 1 0^ω`, i.e. the point `2/3^{k+1}` of `S₀`.
pub fn s0_level(v: &Address) -> Option<usize> {
    let k = v.first_one()?;
    (v.tail() == 0 && v.bits().len() == k + 1).then_some(k)
}

/// Whether `t` is all zeros or `0^k 1 0^j`, i.e. `K_t` meets `S₀`.
pub fn meets_s0(t: &[u8]) -> bool {
    t.iter().filter(|&&b| b == 1).count() <= 1
}

/// JSON form: `{"extras": [["first_bits", "second_bits"], ...]}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZSpaceSpec {
    pub extras: Vec<(String, String)>,
}

/// `K × S₀` together with finitely many isolated points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZSpace {
    extras: Vec<ZPoint>,
}

impl ZSpace {
    /// Extras must have eventually zero coordinates off `K × S₀`; duplicates are
    /// dropped.
    pub fn new(extras: Vec<ZPoint>) -> Result<Self> {
        let mut extras = extras;
        for e in &extras {
            if e.first.tail() != 0 || e.second.tail() != 0 {
                return Err(Error::InvalidInput(format!("extra point {e} must have finite addresses")));
            }
            if e.second.is_zero() || s0_level(&e.second).is_some() {
                return Err(Error::InvalidInput(format!("extra point {e} already lies in K × S0")));
            }
        }
        extras.sort();
        extras.dedup();
        Ok(Self { extras })
    }

    pub fn from_spec(spec: &ZSpaceSpec) -> Result<Self> {
        let pts = spec
            .extras
            .iter()
            .map(|(a, b)| Ok(ZPoint::new(Address::finite(&parse_bits(a)?), Address::finite(&parse_bits(b)?))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts)
    }

    pub fn to_spec(&self) -> ZSpaceSpec {
        ZSpaceSpec {
            extras: self.extras.iter().map(|e| (format_bits(e.first.bits()), format_bits(e.second.bits()))).collect(),
        }
    }

    pub fn extras(&self) -> &[ZPoint] {
        &self.extras
    }

    /// Longest address among the extras.
    pub fn max_len(&self) -> usize {
        self.extras.iter().map(|e| e.first.bits().len().max(e.second.bits().len())).max().unwrap_or(0)
    }

    pub fn contains(&self, z: &ZPoint) -> bool {
        z.second.is_zero() || s0_level(&z.second).is_some() || self.extras.binary_search(z).is_ok()
    }

    pub fn extras_in(&self, s: &[u8], t: &[u8]) -> impl Iterator<Item = &ZPoint> + '_ {
        let (s, t) = (s.to_vec(), t.to_vec());
        self.extras.iter().filter(move |e| e.in_rect(&s, &t))
    }

    /// `Z ∩ (K_s × K_t) ≠ ∅`.
    pub fn rect_nonempty(&self, s: &[u8], t: &[u8]) -> bool {
        meets_s0(t) || self.extras_in(s, t).next().is_some()
    }

    /// `Z^γ_{α,β} ≠ ∅`.
    pub fn pair_nonempty(&self, gamma: &[u8], alpha: &[u8], beta: &[u8]) -> bool {
        let (s, t) = pair_rect(gamma, alpha, beta);
        self.rect_nonempty(&s, &t)
    }

    /// The chosen point `z^γ_{α,β}`: `(x_{γα}, 2/3^{|γ|+1})` when `β` is all
    /// zeros, otherwise the smallest extra in the rectangle.
    pub fn representative(&self, gamma: &[u8], alpha: &[u8], beta: &[u8]) -> Option<ZPoint> {
        if beta.iter().all(|&b| b == 0) {
            let mut s = gamma.to_vec();
            s.extend_from_slice(alpha);
            return Some(ZPoint::level(&s, gamma.len()));
        }
        let (s, t) = pair_rect(gamma, alpha, beta);
        self.extras_in(&s, &t).next().cloned()
    }

    fn check(&self, z: &ZPoint) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("{z} is not a point of Z")))
        }
    }

    /// Retraction `r: K × K → Z`.
    ///
    /// A point outside `Z` goes to the representative of the deepest non-empty
    /// rectangle `Z^γ_{α,β}` containing it. The pairs containing a point form a
    /// chain with one pair per value of `|α| + |β|`, so the maximum is unique.
    pub fn retract(&self, z: &ZPoint) -> ZPoint {
        if self.contains(z) {
            return z.clone();
        }
        let k = z.second.first_one().expect("points off K x {0} have a 1 in the second address");
        let gamma = z.first.prefix(k);
        let u = z.first.skip(k);
        let v = z.second.skip(k + 1);
        let mut best = (Vec::new(), Vec::new());
        let mut sum: usize = 1;
        loop {
            let (alpha, beta) = (u.prefix(sum.div_ceil(2)), v.prefix(sum / 2));
            if !self.pair_nonempty(&gamma, &alpha, &beta) {
                break;
            }
            best = (alpha, beta);
            sum += 1;
        }
        self.representative(&gamma, &best.0, &best.1).expect("chosen pair is non-empty")
    }

    /// `r̲: Z → K × {0}`.
    pub fn retract_under(&self, z: &ZPoint) -> Result<ZPoint> {
        self.check(z)?;
        Ok(match z.second.first_one() {
            None => z.clone(),
            Some(k) => ZPoint::new(Address::finite(&z.first.prefix(k)), Address::zero()),
        })
    }

    /// `r̲^γ: Z^γ → Z^γ ∩ (K × S₀)`.
    pub fn retract_gamma(&self, gamma: &[u8], z: &ZPoint) -> Result<ZPoint> {
        self.check(z)?;
        let k = gamma.len();
        if !z.in_rect(gamma, &level_bits(k)) {
            return Err(Error::InvalidInput(format!("{z} is outside Z^{}", format_bits(gamma))));
        }
        let rest = z.second.skip(k + 1);
        match rest.first_one() {
            None => Ok(z.clone()),
            Some(j) => {
                let mut s = gamma.to_vec();
                s.extend(z.first.skip(k).prefix(j + 1));
                Ok(ZPoint::level(&s, k))
            }
        }
    }

    /// `f₂`.
    pub fn f2(&self, z: &ZPoint) -> Result<ZPoint> {
        let base = self.retract_under(z)?;
        let u = &base.first;
        Ok(self.retract(&ZPoint::new(u.even(), u.odd().prepend(&[1]))))
    }

    /// `f₀` and `f₁`.
    pub fn fi(&self, i: u8, z: &ZPoint) -> Result<ZPoint> {
        self.check(z)?;
        let Some(k) = z.second.first_one() else {
            return Ok(ZPoint::new(z.first.prepend(&[i]), Address::zero()));
        };
        let gamma = z.first.prefix(k);
        let z = if s0_level(&z.second).is_some() { z.clone() } else { self.retract_gamma(&gamma, z)? };
        let alpha = z.first.skip(k);
        let mut head = vec![i];
        head.extend_from_slice(&gamma);
        let first = alpha.even().prepend(&head);
        let mut lead = vec![0; k + 1];
        lead.push(1);
        let second = alpha.odd().prepend(&lead);
        Ok(self.retract(&ZPoint::new(first, second)))
    }

    /// `f_i` for `i ∈ {0, 1, 2}`.
    pub fn apply(&self, i: usize, z: &ZPoint) -> Result<ZPoint> {
        match i {
            0 | 1 => self.fi(i as u8, z),
            2 => self.f2(z),
            _ => Err(Error::InvalidInput(format!("no map f_{i} on Z"))),
        }
    }

    /// `f_w = f_{w_0} ∘ … ∘ f_{w_n}` at a point.
    pub fn apply_word(&self, w: &[usize], z: &ZPoint) -> Result<ZPoint> {
        let mut p = z.clone();
        for &i in w.iter().rev() {
            p = self.apply(i, &p)?;
        }
        Ok(p)
    }

    /// Fixed point of `f_i`: `(0, 0)`, `(1, 0)` and `(0, 2/3)`.
    pub fn fixed_point(&self, i: usize) -> ZPoint {
        match i {
            0 => ZPoint::base(&[]),
            1 => ZPoint::new(Address::new(Vec::new(), 1), Address::zero()),
            _ => ZPoint::level(&[], 0),
        }
    }
}

/// Address rectangle `(γα, 0^{|γ|} 1 β)` of `K^γ_{α,β}`.
pub fn pair_rect(gamma: &[u8], alpha: &[u8], beta: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut s = gamma.to_vec();
    s.extend_from_slice(alpha);
    let mut t = level_bits(gamma.len());
    t.extend_from_slice(beta);
    (s, t)
}
