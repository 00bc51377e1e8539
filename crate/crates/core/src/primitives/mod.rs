//! Key agreement, authenticated encryption, signatures and the key registry.

pub mod aead;
pub mod dh;
pub mod pki;
pub mod sig;
pub mod wire;

pub use aead::{ae_dec, ae_enc, derive_nonce, AeadKey};
pub use dh::{dh_agree, dh_from_seed, dh_gen, dh_secret_from_seed, DhKeyPair};
pub use pki::{BulletinBoard, Registration};
pub use sig::{ds_sign, ds_verify, SigKeyPair, SigPublicKey, Signature};
