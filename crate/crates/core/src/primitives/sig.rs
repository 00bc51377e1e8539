//! Ed25519 signatures.

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};

pub const SIGNATURE_LEN: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Sig({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

impl Signature {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn from_slice(b: &[u8]) -> Option<Self> {
        b.try_into().ok().map(Signature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SigPublicKey(pub [u8; 32]);

#[derive(Clone)]
pub struct SigKeyPair {
    sk: SigningKey,
}

impl std::fmt::Debug for SigKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SigKeyPair").field("pk", &self.public()).finish_non_exhaustive()
    }
}

impl SigKeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        SigKeyPair { sk: SigningKey::generate(rng) }
    }

    pub fn public(&self) -> SigPublicKey {
        SigPublicKey(self.sk.verifying_key().to_bytes())
    }
}

pub fn ds_sign(key: &SigKeyPair, msg: &[u8]) -> Signature {
    Signature(key.sk.sign(msg).to_bytes())
}

/// Malformed keys or signatures verify as `false`.
pub fn ds_verify(sig: &[u8], pk: &SigPublicKey, msg: &[u8]) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let Ok(bytes) = <[u8; SIGNATURE_LEN]>::try_from(sig) else {
        return false;
    };
    vk.verify(msg, &ed25519_dalek::Signature::from_bytes(&bytes)).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn sign_verify_contract() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (a, b) = (SigKeyPair::generate(&mut rng), SigKeyPair::generate(&mut rng));
        let s = ds_sign(&a, b"U3");
        assert!(ds_verify(s.as_bytes(), &a.public(), b"U3"));
        assert!(!ds_verify(s.as_bytes(), &b.public(), b"U3"));
        assert!(!ds_verify(s.as_bytes(), &a.public(), b"U3'"));
        assert!(!ds_verify(&s.as_bytes()[..10], &a.public(), b"U3"));
        assert!(!ds_verify(&[0xff; 64], &a.public(), b"U3"));
    }

    #[test]
    fn deterministic_under_seed() {
        let a = SigKeyPair::generate(&mut ChaCha20Rng::seed_from_u64(2));
        let b = SigKeyPair::generate(&mut ChaCha20Rng::seed_from_u64(2));
        assert_eq!(a.public(), b.public());
        assert_eq!(ds_sign(&a, b"m"), ds_sign(&b, b"m"));
    }
}
