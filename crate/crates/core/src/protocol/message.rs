use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::party::{PartyId, UserId};
use crate::primitives::wire::{FrameReader, FrameWriter};
use crate::primitives::Signature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    KeyAdvert,
    KeyBroadcast,
    EncShare,
    MaskedInput,
    SurvivorList,
    ListSig,
    ListSigEcho,
    ShareSum,
    Nonce,
    UnmaskShares,
    SubSig,
}

impl Tag {
    pub fn code(self) -> u8 {
        match self {
            Tag::KeyAdvert => 1,
            Tag::KeyBroadcast => 2,
            Tag::EncShare => 3,
            Tag::MaskedInput => 4,
            Tag::SurvivorList => 5,
            Tag::ListSig => 6,
            Tag::ListSigEcho => 7,
            Tag::ShareSum => 8,
            Tag::Nonce => 9,
            Tag::UnmaskShares => 10,
            Tag::SubSig => 11,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::KeyAdvert => "key_advert",
            Tag::KeyBroadcast => "key_broadcast",
            Tag::EncShare => "enc_share",
            Tag::MaskedInput => "masked_input",
            Tag::SurvivorList => "survivor_list",
            Tag::ListSig => "list_sig",
            Tag::ListSigEcho => "list_sig_echo",
            Tag::ShareSum => "share_sum",
            Tag::Nonce => "nonce",
            Tag::UnmaskShares => "unmask_shares",
            Tag::SubSig => "sub_sig",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One message on the simulated channel. When a signature is present it
/// covers exactly `payload`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundMessage {
    pub round: u8,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub tag: Tag,
    pub payload: Vec<u8>,
    pub signature: Option<Signature>,
}

impl RoundMessage {
    pub fn new(round: u8, sender: PartyId, receiver: PartyId, tag: Tag, payload: Vec<u8>) -> Self {
        RoundMessage { round, sender, receiver, tag, payload, signature: None }
    }

    pub fn signed(mut self, sig: Option<Signature>) -> Self {
        self.signature = sig;
        self
    }

    /// Bytes on the wire: payload plus signature.
    pub fn bytes(&self) -> usize {
        self.payload.len() + self.signature.map_or(0, |s| s.as_bytes().len())
    }

    pub fn sender_user(&self) -> Option<UserId> {
        self.sender.user()
    }
}

/// Why a party stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbortCause {
    InsufficientSurvivors { have: usize, need: usize },
    DuplicateKeys,
    BadSignature { from: PartyId },
    DecryptionFailure { from: PartyId },
    MissingBroadcast,
    Inconsistent(String),
    Protocol(Error),
}

impl fmt::Display for AbortCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortCause::InsufficientSurvivors { have, need } => {
                write!(f, "insufficient survivors ({have} < {need})")
            }
            AbortCause::DuplicateKeys => write!(f, "duplicate public keys"),
            AbortCause::BadSignature { from } => write!(f, "bad signature from {from}"),
            AbortCause::DecryptionFailure { from } => write!(f, "decryption failure on message from {from}"),
            AbortCause::MissingBroadcast => write!(f, "missing broadcast"),
            AbortCause::Inconsistent(s) => write!(f, "inconsistent view: {s}"),
            AbortCause::Protocol(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for AbortCause {
    fn from(e: Error) -> Self {
        AbortCause::Protocol(e)
    }
}

/// Canonical encoding of a sorted user list; this is what list signatures
/// cover.
pub fn encode_user_list(users: &BTreeSet<UserId>) -> Vec<u8> {
    users.iter().fold(FrameWriter::new(Tag::SurvivorList.code()), |w, u| w.id(u.0)).finish()
}

pub fn decode_user_list(bytes: &[u8]) -> Result<BTreeSet<UserId>> {
    let mut r = FrameReader::open(bytes, Tag::SurvivorList.code())?;
    let mut out = BTreeSet::new();
    let mut last = None;
    while !r.is_done() {
        let id = r.id()?;
        if last.is_some_and(|l| id <= l) {
            return Err(Error::decode("user list not strictly increasing"));
        }
        last = Some(id);
        out.insert(UserId(id));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn user_list_round_trip_and_canonical() {
        let l: BTreeSet<UserId> = [3, 1, 2].into_iter().map(UserId).collect();
        let e = encode_user_list(&l);
        assert_eq!(decode_user_list(&e).unwrap(), l);
        let unsorted = FrameWriter::new(Tag::SurvivorList.code()).id(2).id(1).finish();
        assert!(decode_user_list(&unsorted).is_err());
    }

    #[test]
    fn tag_codes_unique() {
        let all = [
            Tag::KeyAdvert,
            Tag::KeyBroadcast,
            Tag::EncShare,
            Tag::MaskedInput,
            Tag::SurvivorList,
            Tag::ListSig,
            Tag::ListSigEcho,
            Tag::ShareSum,
            Tag::Nonce,
            Tag::UnmaskShares,
            Tag::SubSig,
        ];
        let codes: BTreeSet<u8> = all.iter().map(|t| t.code()).collect();
        assert_eq!(codes.len(), all.len());
    }
}
