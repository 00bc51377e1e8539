//! In-process bulletin board for signature public keys.

use std::collections::BTreeMap;
use std::sync::RwLock;

use super::sig::{ds_sign, ds_verify, SigKeyPair, SigPublicKey, Signature};
use crate::error::{Error, Result};
use crate::party::PartyId;

/// A registration request: the key plus a signature over it made with the
/// matching secret key, so a party can only register a key it holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Registration {
    pub identity: PartyId,
    pub key: SigPublicKey,
    pub proof: Signature,
}

impl Registration {
    pub fn new(identity: PartyId, keys: &SigKeyPair) -> Self {
        let key = keys.public();
        let proof = ds_sign(keys, &statement(identity, &key));
        Registration { identity, key, proof }
    }
}

fn statement(identity: PartyId, key: &SigPublicKey) -> Vec<u8> {
    let mut m = b"register".to_vec();
    m.extend(identity.wire_id().to_be_bytes());
    m.extend(key.0);
    m
}

/// Append-only: an identity registers once and its key never changes.
#[derive(Debug, Default)]
pub struct BulletinBoard {
    entries: RwLock<BTreeMap<PartyId, SigPublicKey>>,
}

impl BulletinBoard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, reg: &Registration) -> Result<()> {
        if !ds_verify(reg.proof.as_bytes(), &reg.key, &statement(reg.identity, &reg.key)) {
            return Err(Error::Rejected(format!("{}: proof of possession failed", reg.identity)));
        }
        let mut entries = self.entries.write().expect("board lock");
        if entries.contains_key(&reg.identity) {
            return Err(Error::Rejected(format!("{} already registered", reg.identity)));
        }
        entries.insert(reg.identity, reg.key);
        Ok(())
    }

    pub fn lookup(&self, identity: PartyId) -> Result<SigPublicKey> {
        self.entries
            .read()
            .expect("board lock")
            .get(&identity)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("{identity} not registered")))
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("board lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::party::UserId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn register_lookup_and_replay() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let board = BulletinBoard::new();
        let id = PartyId::User(UserId(3));
        let k1 = SigKeyPair::generate(&mut rng);
        board.register(&Registration::new(id, &k1)).unwrap();
        assert_eq!(board.lookup(id).unwrap(), k1.public());

        let k2 = SigKeyPair::generate(&mut rng);
        assert!(matches!(board.register(&Registration::new(id, &k2)), Err(Error::Rejected(_))));
        assert_eq!(board.lookup(id).unwrap(), k1.public());
        assert!(matches!(board.lookup(PartyId::Server), Err(Error::NotFound(_))));
    }

    #[test]
    fn cannot_register_someone_elses_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let board = BulletinBoard::new();
        let victim = SigKeyPair::generate(&mut rng);
        let thief = SigKeyPair::generate(&mut rng);
        let mut reg = Registration::new(PartyId::User(UserId(0)), &thief);
        reg.key = victim.public();
        assert!(matches!(board.register(&reg), Err(Error::Rejected(_))));
        assert!(board.is_empty());
    }
}
