//! Binary sequences that are eventually constant, and the Cantor points they
//! address.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::scalar::Rational;
use crate::{Error, Result};

/// The infinite binary sequence `bits · tail^ω`.
///
/// Kept normalized: `bits` never ends with the tail digit, so equal sequences
/// have equal representations.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    bits: Vec<u8>,
    tail: u8,
}

impl Address {
    pub fn new(bits: Vec<u8>, tail: u8) -> Self {
        debug_assert!(tail <= 1 && bits.iter().all(|&b| b <= 1));
        let mut a = Self { bits, tail };
        while a.bits.last() == Some(&a.tail) {
            a.bits.pop();
        }
        a
    }

    /// `s0^ω`.
    pub fn finite(bits: &[u8]) -> Self {
        Self::new(bits.to_vec(), 0)
    }

    pub fn zero() -> Self {
        Self::new(Vec::new(), 0)
    }

    /// Parses a string of `0`/`1`, optionally followed by `(1)` or `(0)` for the
    /// repeating tail.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let (head, tail) = match t.strip_suffix("(1)") {
            Some(h) => (h, 1),
            None => (t.strip_suffix("(0)").unwrap_or(t), 0),
        };
        let bits = parse_bits(head)?;
        Ok(Self::new(bits, tail))
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn tail(&self) -> u8 {
        self.tail
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.bits.get(i).copied().unwrap_or(self.tail)
    }

    pub fn is_zero(&self) -> bool {
        self.bits.is_empty() && self.tail == 0
    }

    /// First `n` digits.
    pub fn prefix(&self, n: usize) -> Vec<u8> {
        (0..n).map(|i| self.bit(i)).collect()
    }

    /// Digits from position `n` on.
    pub fn skip(&self, n: usize) -> Self {
        Self::new(self.bits.iter().skip(n).copied().collect(), self.tail)
    }

    pub fn starts_with(&self, s: &[u8]) -> bool {
        s.iter().enumerate().all(|(i, &b)| self.bit(i) == b)
    }

    pub fn prepend(&self, s: &[u8]) -> Self {
        let mut bits = s.to_vec();
        bits.extend_from_slice(&self.bits);
        Self::new(bits, self.tail)
    }

    /// Position of the first `1`.
    pub fn first_one(&self) -> Option<usize> {
        self.bits.iter().position(|&b| b == 1).or(if self.tail == 1 { Some(self.bits.len()) } else { None })
    }

    /// Even part `⌊α⌋`.
    pub fn even(&self) -> Self {
        Self::new(self.bits.iter().step_by(2).copied().collect(), self.tail)
    }

    /// Odd part `⌈α⌉`.
    pub fn odd(&self) -> Self {
        Self::new(self.bits.iter().skip(1).step_by(2).copied().collect(), self.tail)
    }

    /// `x_α = Σ 2α_n / 3^{n+1}`.
    pub fn value(&self) -> Rational {
        cantor_value(&self.bits) + if self.tail == 1 {
            Rational::new(BigInt::one(), BigInt::from(3).pow(self.bits.len() as u32))
        } else {
            Rational::zero()
        }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_bits(&self.bits))?;
        if self.tail == 1 {
            write!(f, "(1)")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

pub fn parse_bits(text: &str) -> Result<Vec<u8>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::Parse(format!("not a binary string: {text:?}"))),
        })
        .collect()
}

pub fn format_bits(s: &[u8]) -> String {
    s.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
}

/// `Σ 2 s_i / 3^{i+1}` for a finite string.
pub fn cantor_value(s: &[u8]) -> Rational {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for &b in s {
        num = num * 3 + BigInt::from(2 * b);
        den *= 3;
    }
    Rational::new(num, den)
}

/// Even- and odd-index subsequences of a finite string.
pub fn even_odd_split(s: &[u8]) -> (Vec<u8>, Vec<u8>) {
    (s.iter().step_by(2).copied().collect(), s.iter().skip(1).step_by(2).copied().collect())
}

/// Inverse of [`even_odd_split`].
pub fn interleave(even: &[u8], odd: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(even.len() + odd.len());
    for i in 0..even.len().max(odd.len()) {
        if let Some(&b) = even.get(i) {
            out.push(b);
        }
        if let Some(&b) = odd.get(i) {
            out.push(b);
        }
    }
    out
}

/// `i`-fold iterated even part.
pub fn iterated_even(s: &[u8], i: usize) -> Vec<u8> {
    let mut out = s.to_vec();
    for _ in 0..i {
        out = even_odd_split(&out).0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn values() {
        assert_eq!(cantor_value(&[]), rat(0, 1));
        assert_eq!(cantor_value(&[1]), rat(2, 3));
        assert_eq!(cantor_value(&[0, 1]), rat(2, 9));
        assert_eq!(Address::new(vec![], 1).value(), rat(1, 1));
        assert_eq!(Address::new(vec![0], 1).value(), rat(1, 3));
    }

    #[test]
    fn normalization() {
        assert_eq!(Address::finite(&[1, 0, 0]), Address::finite(&[1]));
        assert_eq!(Address::new(vec![0, 1, 1], 1), Address::new(vec![0], 1));
        assert_eq!(Address::parse("01(1)").unwrap(), Address::new(vec![0], 1));
    }

    #[test]
    fn splits() {
        assert_eq!(even_odd_split(&[]), (vec![], vec![]));
        let a = Address::finite(&[1, 0, 1, 1]);
        assert_eq!(a.even(), Address::finite(&[1, 1]));
        assert_eq!(a.odd(), Address::finite(&[0, 1]));
    }

    #[test]
    fn first_one() {
        assert_eq!(Address::finite(&[0, 0, 1]).first_one(), Some(2));
        assert_eq!(Address::new(vec![0, 0], 1).first_one(), Some(2));
        assert_eq!(Address::zero().first_one(), None);
    }
}
