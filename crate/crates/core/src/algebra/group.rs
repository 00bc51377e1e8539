use std::fmt;
use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use sha2::{Digest, Sha256};

use super::encoding::{decode_magnitude, encode_magnitude};
use super::field::{is_prime_u64, pow_mod, FieldElement};
use crate::counters;
use crate::error::{Error, Result};

/// RFC 3526 group 14: a 2048-bit safe prime. `2` generates the subgroup of
/// quadratic residues, whose order is the prime `(P - 1) / 2`.
const MODP_2048_HEX: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

/// Largest safe prime below 2^63. Its subgroup order fits the `u64` field
/// arithmetic, which lets shares live directly in the exponent field.
pub const DESK_SAFE_PRIME: u64 = 9_223_372_036_854_771_239;

/// An element of the prime-order group. Opaque outside this module.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(BigUint);

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = self.0.to_str_radix(16);
        if hex.len() > 16 {
            write!(f, "G(0x{}..)", &hex[..16])
        } else {
            write!(f, "G(0x{hex})")
        }
    }
}

/// An exponent, reduced modulo the group order.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Exponent(BigUint);

impl Exponent {
    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    pub fn to_bytes_be(&self) -> Vec<u8> {
        self.0.to_bytes_be()
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Exp(..)")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct SmallModulus {
    p: u64,
    q: u64,
}

/// A cyclic group of prime order `q` inside Z_P^*.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    name: String,
    modulus: BigUint,
    order: BigUint,
    generator: BigUint,
    generator_inv: BigUint,
    safe_prime: bool,
    small: Option<SmallModulus>,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupParams")
            .field("name", &self.name)
            .field("modulus_bits", &self.modulus.bits())
            .finish()
    }
}

impl GroupParams {
    /// Builds a group from `(P, q, g)` after checking that `q` divides `P - 1`
    /// and that `g` has order exactly `q`. `q` must be prime; primality is
    /// checked exactly for 64-bit values and trusted above that.
    pub fn new(name: &str, modulus: BigUint, order: BigUint, generator: BigUint) -> Result<Self> {
        let one = BigUint::one();
        if modulus <= BigUint::from(3u8) || order <= one {
            return Err(Error::config("group modulus and order must exceed 3 and 1"));
        }
        if (&modulus - &one) % &order != BigUint::zero() {
            return Err(Error::config("group order does not divide P - 1"));
        }
        if generator <= one || generator >= modulus {
            return Err(Error::config("generator out of range"));
        }
        if generator.modpow(&order, &modulus) != one {
            return Err(Error::config("generator does not have the stated order"));
        }
        if let (Some(p), Some(q)) = (modulus.to_u64(), order.to_u64()) {
            if !is_prime_u64(p) || !is_prime_u64(q) {
                return Err(Error::config("group modulus or order is not prime"));
            }
        }
        Ok(Self::assemble(name, modulus, order, generator))
    }

    fn assemble(name: &str, modulus: BigUint, order: BigUint, generator: BigUint) -> Self {
        let generator_inv = generator.modpow(&(&order - BigUint::one()), &modulus);
        let safe_prime = &order * 2u32 + 1u32 == modulus;
        let small = match (modulus.to_u64(), order.to_u64()) {
            (Some(p), Some(q)) => Some(SmallModulus { p, q }),
            _ => None,
        };
        GroupParams {
            name: name.to_string(),
            modulus,
            order,
            generator,
            generator_inv,
            safe_prime,
            small,
        }
    }

    /// The 2048-bit production profile.
    pub fn modp2048() -> Self {
        let p = BigUint::parse_bytes(MODP_2048_HEX.as_bytes(), 16).expect("valid constant");
        let q = (&p - 1u32) >> 1;
        Self::assemble("modp2048", p, q, BigUint::from(2u8))
    }

    /// 63-bit safe-prime profile for tests and desk-scale simulation.
    pub fn desk() -> Self {
        let p = BigUint::from(DESK_SAFE_PRIME);
        let q = (&p - 1u32) >> 1;
        Self::assemble("desk", p, q, BigUint::from(4u8))
    }

    /// Subgroup of order 11 in Z_23^* generated by 2.
    pub fn toy() -> Self {
        Self::new("toy", BigUint::from(23u8), BigUint::from(11u8), BigUint::from(2u8))
            .expect("valid toy group")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "modp2048" => Ok(Self::modp2048()),
            "desk" => Ok(Self::desk()),
            "toy" => Ok(Self::toy()),
            other => Err(Error::config(format!("unknown group profile '{other}'"))),
        }
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }

    /// The group order when it fits in 64 bits.
    pub fn order_u64(&self) -> Option<u64> {
        self.small.map(|s| s.q)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement(self.generator.clone())
    }

    pub fn is_identity(&self, a: &GroupElement) -> bool {
        a.0.is_one()
    }

    /// Membership test: quadratic residuosity for safe-prime groups, otherwise
    /// `a^q = 1`. Not counted as an exponentiation.
    pub fn contains(&self, a: &GroupElement) -> bool {
        if a.0.is_zero() || a.0 >= self.modulus {
            return false;
        }
        if self.safe_prime {
            jacobi(&a.0, &self.modulus) == 1
        } else {
            self.raw_pow(&a.0, &self.order).is_one()
        }
    }

    fn raw_pow(&self, base: &BigUint, e: &BigUint) -> BigUint {
        match (self.small, e.to_u64()) {
            (Some(s), Some(e)) => {
                BigUint::from(pow_mod(base.to_u64().expect("reduced base"), e, s.p))
            }
            _ => base.modpow(e, &self.modulus),
        }
    }

    /// `base^e`. Counted as one modular exponentiation.
    pub fn exp(&self, base: &GroupElement, e: &Exponent) -> GroupElement {
        counters::record(|c| c.modexp += 1);
        GroupElement(self.raw_pow(&base.0, &e.0))
    }

    pub fn exp_generator(&self, e: &Exponent) -> GroupElement {
        self.exp(&self.generator(), e)
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        match self.small {
            Some(s) => {
                let (x, y) = (a.0.to_u64().unwrap_or(0), b.0.to_u64().unwrap_or(0));
                GroupElement(BigUint::from((x as u128 * y as u128 % s.p as u128) as u64))
            }
            None => GroupElement((&a.0 * &b.0) % &self.modulus),
        }
    }

    /// Inverse via `a^(q-1)`. Counted as a group inversion, not an exponentiation.
    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        counters::record(|c| c.group_inversions += 1);
        GroupElement(self.raw_pow(&a.0, &(&self.order - BigUint::one())))
    }

    pub fn generator_inverse(&self) -> GroupElement {
        GroupElement(self.generator_inv.clone())
    }

    pub fn exponent(&self, v: u64) -> Exponent {
        Exponent(BigUint::from(v) % &self.order)
    }

    pub fn exponent_from_field(&self, f: FieldElement) -> Exponent {
        self.exponent(f.value())
    }

    pub fn exponent_add(&self, a: &Exponent, b: &Exponent) -> Exponent {
        Exponent((&a.0 + &b.0) % &self.order)
    }

    pub fn exponent_mul(&self, a: &Exponent, b: &Exponent) -> Exponent {
        Exponent((&a.0 * &b.0) % &self.order)
    }

    pub fn exponent_neg(&self, a: &Exponent) -> Exponent {
        Exponent((&self.order - &a.0) % &self.order)
    }

    /// Uniform exponent in `[1, q)`.
    pub fn random_exponent<R: Rng + ?Sized>(&self, rng: &mut R) -> Exponent {
        Exponent(rng.gen_biguint_range(&BigUint::one(), &self.order))
    }

    /// Reduces a SHA-256 counter-mode expansion of `msg` (16 bytes longer than
    /// the order) modulo `q`.
    pub fn hash_to_exponent(&self, domain: &[u8], msg: &[u8]) -> Exponent {
        let want = (self.order.bits() as usize).div_ceil(8) + 16;
        let wide = expand_sha256(domain, msg, want);
        Exponent(BigUint::from_bytes_be(&wide) % &self.order)
    }

    /// `h(msg) = g^(H(msg) mod q)`.
    pub fn hash_to_group(&self, msg: &[u8]) -> GroupElement {
        let e = self.hash_to_exponent(b"hash-to-group", msg);
        self.exp_generator(&e)
    }

    pub fn encode(&self, a: &GroupElement) -> Vec<u8> {
        encode_magnitude(&a.0.to_bytes_be())
    }

    /// Decodes one element from the front of `bytes`; non-members are rejected.
    pub fn decode<'a>(&self, bytes: &'a [u8]) -> Result<(GroupElement, &'a [u8])> {
        let (body, rest) = decode_magnitude(bytes)?;
        let e = GroupElement(BigUint::from_bytes_be(body));
        if !self.contains(&e) {
            return Err(Error::decode("not a group element"));
        }
        Ok((e, rest))
    }

    pub fn decode_exact(&self, bytes: &[u8]) -> Result<GroupElement> {
        let (e, rest) = self.decode(bytes)?;
        if !rest.is_empty() {
            return Err(Error::decode("trailing bytes after group element"));
        }
        Ok(e)
    }

    /// Canonical bytes of an exponent, used as key-derivation input.
    pub fn encode_exponent(&self, e: &Exponent) -> Vec<u8> {
        encode_magnitude(&e.0.to_bytes_be())
    }
}

pub(crate) fn expand_sha256(domain: &[u8], msg: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut counter = 0u32;
    while out.len() < len {
        let mut h = Sha256::new();
        h.update((domain.len() as u32).to_be_bytes());
        h.update(domain);
        h.update(counter.to_be_bytes());
        h.update(msg);
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(len);
    out
}

/// Jacobi symbol (a/n) for odd n.
fn jacobi(a: &BigUint, n: &BigUint) -> i32 {
    let mut a = a % n;
    let mut n = n.clone();
    let mut result = 1;
    let three = BigUint::from(3u8);
    let five = BigUint::from(5u8);
    let eight = BigUint::from(8u8);
    let four = BigUint::from(4u8);
    while !a.is_zero() {
        while (&a & BigUint::one()).is_zero() {
            a >>= 1;
            let r = &n % &eight;
            if r == three || r == five {
                result = -result;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if &a % &four == three && &n % &four == three {
            result = -result;
        }
        a %= &n;
    }
    if n.is_one() {
        result
    } else {
        0
    }
}
