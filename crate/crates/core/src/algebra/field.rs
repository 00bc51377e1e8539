use std::fmt;

use rand::Rng;

use super::encoding::{decode_magnitude, encode_magnitude, u64_from_be};
use crate::error::{Error, Result};

/// The Mersenne prime 2^61 - 1, the default masking field.
pub const DEFAULT_FIELD_PRIME: u64 = (1u64 << 61) - 1;

/// Largest modulus accepted; keeps `a + b` inside a `u64`.
pub const MAX_FIELD_PRIME: u64 = 1u64 << 63;

/// An element of Z_p. Always reduced; only [`FieldParams`] creates them from
/// raw integers.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp({})", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Prime field Z_p with a runtime modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldParams {
    p: u64,
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams { p: DEFAULT_FIELD_PRIME }
    }
}

impl FieldParams {
    pub fn new(p: u64) -> Result<Self> {
        if p >= MAX_FIELD_PRIME {
            return Err(Error::config(format!("modulus {p} does not fit in 63 bits")));
        }
        if !is_prime_u64(p) {
            return Err(Error::config(format!("modulus {p} is not prime")));
        }
        Ok(FieldParams { p })
    }

    pub fn modulus(&self) -> u64 {
        self.p
    }

    pub fn bits(&self) -> u32 {
        64 - self.p.leading_zeros()
    }

    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement(v % self.p)
    }

    pub fn elem_i64(&self, v: i64) -> FieldElement {
        let r = v.rem_euclid(self.p as i64);
        FieldElement(r as u64)
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(1 % self.p)
    }

    pub fn contains(&self, a: FieldElement) -> bool {
        a.0 < self.p
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        debug_assert!(self.contains(a) && self.contains(b));
        let s = a.0 + b.0;
        FieldElement(if s >= self.p { s - self.p } else { s })
    }

    #[inline]
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        debug_assert!(self.contains(a) && self.contains(b));
        if a.0 >= b.0 {
            FieldElement(a.0 - b.0)
        } else {
            FieldElement(a.0 + self.p - b.0)
        }
    }

    #[inline]
    pub fn neg(&self, a: FieldElement) -> FieldElement {
        self.sub(FieldElement(0), a)
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        debug_assert!(self.contains(a) && self.contains(b));
        FieldElement(((a.0 as u128 * b.0 as u128) % self.p as u128) as u64)
    }

    pub fn pow(&self, a: FieldElement, e: u64) -> FieldElement {
        FieldElement(pow_mod(a.0, e, self.p))
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::degenerate("inverse of zero"));
        }
        Ok(self.pow(a, self.p - 2))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn sum<I: IntoIterator<Item = FieldElement>>(&self, items: I) -> FieldElement {
        items.into_iter().fold(self.zero(), |acc, x| self.add(acc, x))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement(rng.gen_range(0..self.p))
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement(rng.gen_range(1..self.p))
    }

    /// Reduces a wide big-endian digest into the field. Callers pass at least 16
    /// more bytes than the modulus so the bias is negligible.
    pub fn from_wide_bytes(&self, bytes: &[u8]) -> FieldElement {
        let p = self.p as u128;
        let r = bytes.iter().fold(0u128, |acc, &b| ((acc << 8) | b as u128) % p);
        FieldElement(r as u64)
    }

    pub fn encode(&self, a: FieldElement) -> Vec<u8> {
        encode_magnitude(&a.0.to_be_bytes())
    }

    /// Decodes one element from the front of `bytes`, returning the remainder.
    pub fn decode<'a>(&self, bytes: &'a [u8]) -> Result<(FieldElement, &'a [u8])> {
        let (body, rest) = decode_magnitude(bytes)?;
        let v = u64_from_be(body)?;
        if v >= self.p {
            return Err(Error::decode("field element not reduced"));
        }
        Ok((FieldElement(v), rest))
    }

    /// Decodes exactly one element.
    pub fn decode_exact(&self, bytes: &[u8]) -> Result<FieldElement> {
        let (v, rest) = self.decode(bytes)?;
        if !rest.is_empty() {
            return Err(Error::decode("trailing bytes after field element"));
        }
        Ok(v)
    }
}

pub(crate) fn pow_mod(base: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let m128 = m as u128;
    let mut acc: u128 = 1;
    let mut b = (base % m) as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        e >>= 1;
    }
    acc as u64
}

/// Deterministic Miller-Rabin; the witness set is exact for all 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f7() -> FieldParams {
        FieldParams::new(7).unwrap()
    }

    #[test]
    fn wraparound_add() {
        let f = FieldParams::default();
        let a = f.elem(f.modulus() - 1);
        assert_eq!(f.add(a, f.one()), f.zero());
    }

    #[test]
    fn inverse_of_three_mod_seven_by_search() {
        let f = f7();
        let three = f.elem(3);
        let brute = (1..7).find(|&c| (3 * c) % 7 == 1).unwrap();
        assert_eq!(brute, 5);
        assert_eq!(f.inv(three).unwrap(), f.elem(brute));
    }

    #[test]
    fn inverse_of_zero_is_degenerate() {
        assert!(matches!(f7().inv(FieldElement::ZERO), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn rejects_composites_and_oversized() {
        assert!(FieldParams::new(21).is_err());
        assert!(FieldParams::new(1).is_err());
        assert!(FieldParams::new((1u64 << 63) + 29).is_err());
        assert!(FieldParams::new(DEFAULT_FIELD_PRIME).is_ok());
    }

    #[test]
    fn primality_matches_trial_division_below_10k() {
        for n in 0u64..10_000 {
            let trial = n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_prime_u64(n), trial, "n = {n}");
        }
    }

    #[test]
    fn encoding_rejects_unreduced() {
        let f = f7();
        assert!(f.decode_exact(&[0, 1, 7]).is_err());
        assert_eq!(f.decode_exact(&[0, 1, 6]).unwrap(), f.elem(6));
        assert_eq!(f.encode(f.zero()), vec![0, 0]);
    }

    proptest! {
        #[test]
        fn field_axioms(a in 0u64..DEFAULT_FIELD_PRIME, b in 0u64..DEFAULT_FIELD_PRIME, c in 0u64..DEFAULT_FIELD_PRIME) {
            let f = FieldParams::default();
            let (a, b, c) = (f.elem(a), f.elem(b), f.elem(c));
            prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            prop_assert_eq!(f.sub(f.add(a, b), b), a);
            if !a.is_zero() {
                prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), f.one());
            }
        }

        #[test]
        fn encode_decode_bijection(a in 0u64..DEFAULT_FIELD_PRIME) {
            let f = FieldParams::default();
            let e = f.encode(f.elem(a));
            prop_assert_eq!(f.decode_exact(&e).unwrap(), f.elem(a));
        }
    }
}
