use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand_chacha::ChaCha20Rng;

use super::backend::MaskBackend;
use super::config::ProtocolConfig;
use super::frames::{decode_key_broadcast, decode_sig_echo, EncShareFrame};
use super::holder;
use super::message::{decode_user_list, encode_user_list, AbortCause, RoundMessage, Tag};
use crate::algebra::{FieldElement, GroupElement};
use crate::harness::sim::UserParty;
use crate::masking::share_sum_for_unmask;
use crate::party::{PartyId, UserId};
use crate::primitives::{
    ae_dec, ae_enc, derive_nonce, dh_agree, dh_gen, ds_sign, ds_verify, AeadKey, BulletinBoard, DhKeyPair,
    SigKeyPair, Signature,
};
use crate::sss;

/// Signing key plus the registry used to look up peers.
pub struct Identity {
    pub keys: SigKeyPair,
    pub board: Arc<BulletinBoard>,
}

impl Identity {
    fn sign(&self, msg: &[u8]) -> Signature {
        ds_sign(&self.keys, msg)
    }

    fn verify(&self, from: PartyId, sig: Option<&Signature>, msg: &[u8]) -> Result<(), AbortCause> {
        let ok = match (sig, self.board.lookup(from)) {
            (Some(s), Ok(pk)) => ds_verify(s.as_bytes(), &pk, msg),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(AbortCause::BadSignature { from })
        }
    }
}

/// One user's side of the additive-mask protocol.
pub struct AhUser {
    id: UserId,
    cfg: Arc<ProtocolConfig>,
    backend: Arc<dyn MaskBackend>,
    input: Vec<FieldElement>,
    rng: ChaCha20Rng,
    identity: Option<Identity>,
    dh: Option<DhKeyPair>,
    channel_keys: BTreeMap<UserId, AeadKey>,
    u1: BTreeSet<UserId>,
    mask_key: Option<FieldElement>,
    shares: BTreeMap<UserId, FieldElement>,
    u3: Option<BTreeSet<UserId>>,
    last_round: Option<u8>,
}

impl AhUser {
    pub fn new(
        id: UserId,
        cfg: Arc<ProtocolConfig>,
        backend: Arc<dyn MaskBackend>,
        input: Vec<FieldElement>,
        rng: ChaCha20Rng,
        identity: Option<Identity>,
    ) -> Self {
        AhUser {
            id,
            cfg,
            backend,
            input,
            rng,
            identity,
            dh: None,
            channel_keys: BTreeMap::new(),
            u1: BTreeSet::new(),
            mask_key: None,
            shares: BTreeMap::new(),
            u3: None,
            last_round: None,
        }
    }

    pub fn mask_key(&self) -> Option<FieldElement> {
        self.mask_key
    }

    fn me(&self) -> PartyId {
        PartyId::User(self.id)
    }

    fn msg(&self, round: u8, tag: Tag, payload: Vec<u8>) -> RoundMessage {
        let sig = self.identity.as_ref().map(|i| i.sign(&payload));
        RoundMessage::new(round, self.me(), PartyId::Server, tag, payload).signed(sig)
    }

    fn single(inbox: Vec<RoundMessage>, tag: Tag) -> Result<RoundMessage, AbortCause> {
        let mut it = inbox.into_iter().filter(|m| m.tag == tag && m.sender == PartyId::Server);
        match (it.next(), it.next()) {
            (Some(m), None) => Ok(m),
            (None, _) => Err(AbortCause::MissingBroadcast),
            (Some(_), Some(_)) => Err(AbortCause::Inconsistent(format!("two {tag} messages"))),
        }
    }

    fn round0(&mut self) -> Vec<RoundMessage> {
        let kp = dh_gen(&self.cfg.group, &mut self.rng);
        let payload = self.cfg.group.encode(kp.public());
        self.dh = Some(kp);
        vec![self.msg(0, Tag::KeyAdvert, payload)]
    }

    fn round1(&mut self, inbox: Vec<RoundMessage>) -> Result<Vec<RoundMessage>, AbortCause> {
        let m = Self::single(inbox, Tag::KeyBroadcast)?;
        let entries = decode_key_broadcast(&m.payload)?;
        let group = &self.cfg.group;
        let mut pks: BTreeMap<UserId, GroupElement> = BTreeMap::new();
        let mut distinct = BTreeSet::new();
        for e in &entries {
            let pk = group.decode_exact(&e.pk)?;
            if let Some(id) = &self.identity {
                id.verify(PartyId::User(e.user), e.sig.as_ref(), &e.pk)?;
            }
            if !distinct.insert(e.pk.clone()) || pks.insert(e.user, pk).is_some() {
                return Err(AbortCause::DuplicateKeys);
            }
        }
        if pks.len() <= self.cfg.t {
            return Err(AbortCause::InsufficientSurvivors { have: pks.len(), need: self.cfg.t + 1 });
        }
        let own = self.dh.as_ref().expect("round 0 ran");
        if pks.get(&self.id) != Some(own.public()) {
            return Err(AbortCause::Inconsistent("own key missing or altered in broadcast".into()));
        }
        for (&j, pk) in &pks {
            if j != self.id {
                self.channel_keys.insert(j, dh_agree(group, own.secret(), pk)?);
            }
        }
        self.u1 = pks.keys().copied().collect();

        let field = self.backend.share_field();
        let s = field.random(&mut self.rng);
        self.mask_key = Some(s);
        let holders = self.u1.iter().map(|&u| holder(field, u)).collect::<Result<Vec<_>, _>>()?;
        let set = sss::share(field, s, self.cfg.t, &holders, &mut self.rng)?;
        let mut out = Vec::with_capacity(self.u1.len() - 1);
        for &j in &self.u1 {
            let share = set.get(holder(field, j)?).expect("holder in set").value;
            if j == self.id {
                self.shares.insert(j, share);
                continue;
            }
            let c = ae_enc(&self.channel_keys[&j], &field.encode(share), derive_nonce(1, self.id.0, j.0));
            let frame = EncShareFrame { from: self.id, to: j, ciphertext: c };
            out.push(self.msg(1, Tag::EncShare, frame.encode()));
        }
        Ok(out)
    }

    fn round2(&mut self, inbox: Vec<RoundMessage>) -> Result<Vec<RoundMessage>, AbortCause> {
        let field = *self.backend.share_field();
        let mut got = 0;
        for m in inbox.into_iter().filter(|m| m.tag == Tag::EncShare) {
            let f = EncShareFrame::decode(&m.payload)?;
            let from = PartyId::User(f.from);
            if f.to != self.id || f.from == self.id || !self.u1.contains(&f.from) || self.shares.contains_key(&f.from) {
                return Err(AbortCause::Inconsistent(format!("unexpected share routing from {}", f.from)));
            }
            let key = &self.channel_keys[&f.from];
            let plain = ae_dec(key, &f.ciphertext).map_err(|_| AbortCause::DecryptionFailure { from })?;
            if let Some(id) = &self.identity {
                id.verify(from, m.signature.as_ref(), &m.payload)?;
            }
            let share = field.decode_exact(&plain).map_err(|_| AbortCause::DecryptionFailure { from })?;
            self.shares.insert(f.from, share);
            got += 1;
        }
        if got == 0 {
            return Err(AbortCause::MissingBroadcast);
        }
        let payload = self.backend.mask(&self.input, self.mask_key.expect("round 1 ran"))?;
        Ok(vec![self.msg(2, Tag::MaskedInput, payload)])
    }

    fn accept_u3(&mut self, u3: BTreeSet<UserId>) -> Result<(), AbortCause> {
        if let Some(j) = u3.iter().find(|j| !self.shares.contains_key(j)) {
            return Err(AbortCause::Inconsistent(format!("{j} listed as survivor but never shared")));
        }
        if u3.len() < self.cfg.t {
            return Err(AbortCause::InsufficientSurvivors { have: u3.len(), need: self.cfg.t });
        }
        self.u3 = Some(u3);
        Ok(())
    }

    fn round3(&mut self, inbox: Vec<RoundMessage>) -> Result<Vec<RoundMessage>, AbortCause> {
        let m = Self::single(inbox, Tag::SurvivorList)?;
        let id = self.identity.as_ref().expect("active mode has identities");
        id.verify(PartyId::Server, m.signature.as_ref(), &m.payload)?;
        self.accept_u3(decode_user_list(&m.payload)?)?;
        Ok(vec![self.msg(3, Tag::ListSig, m.payload)])
    }

    fn round4(&mut self, inbox: Vec<RoundMessage>) -> Result<Vec<RoundMessage>, AbortCause> {
        if self.cfg.active() {
            let m = Self::single(inbox, Tag::ListSigEcho)?;
            let echo = decode_sig_echo(&m.payload)?;
            let u3 = self.u3.clone().expect("round 3 ran");
            let list = encode_user_list(&u3);
            let u4: BTreeSet<UserId> = echo.iter().map(|(u, _)| *u).collect();
            if u4.len() != echo.len() || !u4.is_subset(&u3) {
                return Err(AbortCause::Inconsistent("echo lists users outside U3".into()));
            }
            if u4.len() < self.cfg.t {
                return Err(AbortCause::InsufficientSurvivors { have: u4.len(), need: self.cfg.t });
            }
            let id = self.identity.as_ref().expect("active mode has identities");
            for (j, sig) in &echo {
                id.verify(PartyId::User(*j), Some(sig), &list)?;
            }
        } else {
            let m = Self::single(inbox, Tag::SurvivorList)?;
            self.accept_u3(decode_user_list(&m.payload)?)?;
        }
        let field = self.backend.share_field();
        let u3 = self.u3.as_ref().expect("U3 accepted");
        let sum = share_sum_for_unmask(field, &self.shares, u3)?;
        Ok(vec![self.msg(4, Tag::ShareSum, field.encode(sum))])
    }
}

impl UserParty for AhUser {
    fn id(&self) -> UserId {
        self.id
    }

    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> Result<Vec<RoundMessage>, AbortCause> {
        if self.last_round.is_some_and(|r| round <= r) {
            return Err(AbortCause::Inconsistent(format!("round {round} replayed")));
        }
        self.last_round = Some(round);
        match round {
            0 => Ok(self.round0()),
            1 => self.round1(inbox),
            2 => self.round2(inbox),
            3 => self.round3(inbox),
            4 => self.round4(inbox),
            _ => Err(AbortCause::Inconsistent(format!("no round {round}"))),
        }
    }

    fn secret_encodings(&self) -> Vec<Vec<u8>> {
        let field = self.backend.share_field();
        let mut out: Vec<Vec<u8>> = self.mask_key.iter().map(|&s| field.encode(s)).collect();
        if !self.input.is_empty() {
            out.push(crate::masking::encode_vector(self.backend.output_field(), &self.input));
        }
        out
    }
}
