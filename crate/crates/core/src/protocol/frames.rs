//! Payload layouts of the multi-entry messages.

use super::message::Tag;
use crate::error::{Error, Result};
use crate::party::UserId;
use crate::primitives::wire::{FrameReader, FrameWriter};
use crate::primitives::Signature;

/// One advertised key, with its signature when one is carried. `pk` holds the
/// canonical group encoding; a key bundle may hold several concatenated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyEntry {
    pub user: UserId,
    pub pk: Vec<u8>,
    pub sig: Option<Signature>,
}

fn opt_sig(bytes: &[u8]) -> Result<Option<Signature>> {
    if bytes.is_empty() {
        return Ok(None);
    }
    Signature::from_slice(bytes).map(Some).ok_or_else(|| Error::decode("bad signature length"))
}

pub fn encode_key_broadcast(entries: &[KeyEntry]) -> Vec<u8> {
    entries
        .iter()
        .fold(FrameWriter::new(Tag::KeyBroadcast.code()), |w, e| {
            w.id(e.user.0).field(&e.pk).field(e.sig.as_ref().map_or(&[][..], |s| s.as_bytes()))
        })
        .finish()
}

pub fn decode_key_broadcast(bytes: &[u8]) -> Result<Vec<KeyEntry>> {
    let mut r = FrameReader::open(bytes, Tag::KeyBroadcast.code())?;
    let mut out = Vec::new();
    while !r.is_done() {
        let user = UserId(r.id()?);
        let pk = r.field()?.to_vec();
        let sig = opt_sig(r.field()?)?;
        out.push(KeyEntry { user, pk, sig });
    }
    Ok(out)
}

/// `i || j || c`: user `i` sends ciphertext `c` to user `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncShareFrame {
    pub from: UserId,
    pub to: UserId,
    pub ciphertext: Vec<u8>,
}

impl EncShareFrame {
    pub fn encode(&self) -> Vec<u8> {
        FrameWriter::new(Tag::EncShare.code()).id(self.from.0).id(self.to.0).field(&self.ciphertext).finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = FrameReader::open(bytes, Tag::EncShare.code())?;
        let from = UserId(r.id()?);
        let to = UserId(r.id()?);
        let ciphertext = r.field()?.to_vec();
        r.finish()?;
        Ok(EncShareFrame { from, to, ciphertext })
    }
}

pub fn encode_sig_echo(entries: &[(UserId, Signature)]) -> Vec<u8> {
    entries
        .iter()
        .fold(FrameWriter::new(Tag::ListSigEcho.code()), |w, (u, s)| w.id(u.0).field(s.as_bytes()))
        .finish()
}

pub fn decode_sig_echo(bytes: &[u8]) -> Result<Vec<(UserId, Signature)>> {
    let mut r = FrameReader::open(bytes, Tag::ListSigEcho.code())?;
    let mut out = Vec::new();
    while !r.is_done() {
        let u = UserId(r.id()?);
        let s = opt_sig(r.field()?)?.ok_or_else(|| Error::decode("missing signature in echo"))?;
        out.push((u, s));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_broadcast_round_trip() {
        let e = vec![
            KeyEntry { user: UserId(0), pk: vec![0, 1, 9], sig: None },
            KeyEntry { user: UserId(4), pk: vec![0, 1, 7], sig: Some(Signature([3; 64])) },
        ];
        assert_eq!(decode_key_broadcast(&encode_key_broadcast(&e)).unwrap(), e);
    }

    #[test]
    fn enc_share_layout_is_i_j_c() {
        let f = EncShareFrame { from: UserId(1), to: UserId(2), ciphertext: vec![0xaa] };
        let b = f.encode();
        assert_eq!(b, vec![Tag::EncShare.code(), 0, 0, 0, 4, 0, 0, 0, 1, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 1, 0xaa]);
        assert_eq!(EncShareFrame::decode(&b).unwrap(), f);
    }

    #[test]
    fn echo_round_trip() {
        let e = vec![(UserId(2), Signature([1; 64]))];
        assert_eq!(decode_sig_echo(&encode_sig_echo(&e)).unwrap(), e);
    }
}
