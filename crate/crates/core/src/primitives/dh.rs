use hkdf::Hkdf;
use rand::Rng;
use sha2::Sha256;

use super::aead::AeadKey;
use crate::algebra::{Exponent, GroupElement, GroupParams};
use crate::counters;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq)]
pub struct DhKeyPair {
    sk: Exponent,
    pk: GroupElement,
}

impl std::fmt::Debug for DhKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DhKeyPair").field("pk", &self.pk).finish_non_exhaustive()
    }
}

impl DhKeyPair {
    pub fn secret(&self) -> &Exponent {
        &self.sk
    }

    pub fn public(&self) -> &GroupElement {
        &self.pk
    }

    fn from_secret(group: &GroupParams, sk: Exponent) -> Self {
        let pk = group.exp_generator(&sk);
        counters::record(|c| c.modexp_setup += 1);
        DhKeyPair { sk, pk }
    }
}

/// Fresh key pair with `sk` uniform in `[1, q)`. The exponentiation is booked
/// as setup, not agreement.
pub fn dh_gen<R: Rng + ?Sized>(group: &GroupParams, rng: &mut R) -> DhKeyPair {
    let sk = group.random_exponent(rng);
    DhKeyPair::from_secret(group, sk)
}

/// Key pair whose secret exponent is a hash of `seed`. Used when the secret is
/// itself derived, as with temporary keys.
pub fn dh_from_seed(group: &GroupParams, seed: &[u8]) -> DhKeyPair {
    DhKeyPair::from_secret(group, dh_secret_from_seed(group, seed))
}

/// The secret half of [`dh_from_seed`], with no exponentiation. Lets a party
/// that recovers the seed agree on keys without re-deriving the public key.
pub fn dh_secret_from_seed(group: &GroupParams, seed: &[u8]) -> Exponent {
    let sk = group.hash_to_exponent(b"dh-from-seed", seed);
    if sk.is_zero() {
        group.exponent(1)
    } else {
        sk
    }
}

/// `KDF(encode(their_pk^my_sk))`.
pub fn dh_agree(group: &GroupParams, my_sk: &Exponent, their_pk: &GroupElement) -> Result<AeadKey> {
    if group.is_identity(their_pk) || !group.contains(their_pk) {
        return Err(Error::degenerate("peer public key is the identity or not in the group"));
    }
    let shared = group.exp(their_pk, my_sk);
    counters::record(|c| c.modexp_agreement += 1);
    let hk = Hkdf::<Sha256>::new(Some(b"ahsecagg-dh"), &group.encode(&shared));
    let mut key = [0u8; 16];
    hk.expand(b"aead-128", &mut key).expect("16 bytes is a valid HKDF length");
    Ok(AeadKey::from_bytes(key))
}
