//! AES-128-GCM. Ciphertexts carry their 96-bit nonce as a prefix.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes128Gcm, Nonce};

use crate::error::{Error, Result};

pub const NONCE_LEN: usize = 12;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AeadKey([u8; 16]);

impl std::fmt::Debug for AeadKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AeadKey(..)")
    }
}

impl AeadKey {
    pub fn from_bytes(b: [u8; 16]) -> Self {
        AeadKey(b)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

/// Nonce for the single message `sender` encrypts to `receiver` in `round`.
pub fn derive_nonce(round: u8, sender: u32, receiver: u32) -> [u8; NONCE_LEN] {
    let mut n = [0u8; NONCE_LEN];
    n[0] = round;
    n[4..8].copy_from_slice(&sender.to_be_bytes());
    n[8..12].copy_from_slice(&receiver.to_be_bytes());
    n
}

pub fn ae_enc(key: &AeadKey, plaintext: &[u8], nonce: [u8; NONCE_LEN]) -> Vec<u8> {
    let cipher = Aes128Gcm::new(&key.0.into());
    let body = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("AES-GCM encryption does not fail for in-memory buffers");
    let mut out = Vec::with_capacity(NONCE_LEN + body.len());
    out.extend_from_slice(&nonce);
    out.extend(body);
    out
}

pub fn ae_dec(key: &AeadKey, ciphertext: &[u8]) -> Result<Vec<u8>> {
    if ciphertext.len() < NONCE_LEN + 16 {
        return Err(Error::AuthFailure);
    }
    let (nonce, body) = ciphertext.split_at(NONCE_LEN);
    Aes128Gcm::new(&key.0.into())
        .decrypt(Nonce::from_slice(nonce), body)
        .map_err(|_| Error::AuthFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(b: u8) -> AeadKey {
        AeadKey::from_bytes([b; 16])
    }

    #[test]
    fn round_trip_and_wrong_key() {
        let c = ae_enc(&key(1), b"share", derive_nonce(1, 2, 3));
        assert_eq!(ae_dec(&key(1), &c).unwrap(), b"share");
        assert_eq!(ae_dec(&key(2), &c), Err(Error::AuthFailure));
        assert_eq!(ae_dec(&key(1), &c[..10]), Err(Error::AuthFailure));
    }

    #[test]
    fn one_mebibyte_round_trip() {
        let m: Vec<u8> = (0..1 << 20).map(|i| (i * 31 % 251) as u8).collect();
        let mut c = ae_enc(&key(3), &m, derive_nonce(2, 0, 1));
        assert_eq!(ae_dec(&key(3), &c).unwrap(), m);
        let mid = c.len() / 2;
        c[mid] ^= 0x80;
        assert_eq!(ae_dec(&key(3), &c), Err(Error::AuthFailure));
    }

    #[test]
    fn nonces_distinguish_direction() {
        assert_ne!(derive_nonce(1, 2, 3), derive_nonce(1, 3, 2));
        assert_ne!(derive_nonce(1, 2, 3), derive_nonce(2, 2, 3));
    }

    proptest! {
        #[test]
        fn any_bit_flip_rejected(m in proptest::collection::vec(any::<u8>(), 0..2048), pos in any::<usize>(), bit in 0u8..8) {
            let mut c = ae_enc(&key(9), &m, derive_nonce(0, 1, 2));
            prop_assert_eq!(ae_dec(&key(9), &c).unwrap(), m);
            let i = pos % c.len();
            c[i] ^= 1 << bit;
            prop_assert_eq!(ae_dec(&key(9), &c), Err(Error::AuthFailure));
        }
    }
}
