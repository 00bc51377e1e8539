use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::backend::MaskBackend;
use super::config::ProtocolConfig;
use super::frames::{encode_key_broadcast, encode_sig_echo, EncShareFrame, KeyEntry};
use super::holder;
use super::message::{encode_user_list, AbortCause, RoundMessage, Tag};
use super::split_view::{SplitPlan, SplitReport};
use crate::harness::sim::{ServerParty, ServerStep, SurvivorSets};
use crate::party::{PartyId, UserId};
use crate::primitives::{ds_sign, ds_verify, BulletinBoard, SigKeyPair, Signature};
use crate::sss::{LagrangeCache, Share};

pub struct ServerIdentity {
    pub keys: SigKeyPair,
    pub board: Arc<BulletinBoard>,
}

/// The honest server. In active mode it drops messages whose signature does
/// not verify; otherwise it trusts the channel.
pub struct AhServer {
    cfg: Arc<ProtocolConfig>,
    backend: Arc<dyn MaskBackend>,
    identity: Option<ServerIdentity>,
    cache: LagrangeCache,
    sets: SurvivorSets,
    masked: BTreeMap<UserId, Vec<u8>>,
    u3_frame: Vec<u8>,
    split: Option<(SplitPlan, Vec<u8>)>,
    report: SplitReport,
}

impl AhServer {
    pub fn new(cfg: Arc<ProtocolConfig>, backend: Arc<dyn MaskBackend>, identity: Option<ServerIdentity>) -> Self {
        let cache = LagrangeCache::new(*backend.share_field());
        AhServer {
            cfg,
            backend,
            identity,
            cache,
            sets: SurvivorSets::default(),
            masked: BTreeMap::new(),
            u3_frame: Vec::new(),
            split: None,
            report: SplitReport::default(),
        }
    }

    /// Turns this server into the split-view adversary. Requires signing keys.
    pub fn with_split(mut self, plan: SplitPlan) -> Self {
        self.split = Some((plan, Vec::new()));
        self
    }

    pub fn split_report(&self) -> Option<&SplitReport> {
        self.split.as_ref().map(|_| &self.report)
    }

    fn list_of(&self, u: UserId) -> usize {
        match &self.split {
            Some((plan, _)) if plan.group_b.contains(&u) && u != plan.victim => 1,
            _ => 0,
        }
    }

    fn sig_ok(&self, m: &RoundMessage) -> bool {
        match &self.identity {
            None => true,
            Some(id) => match (&m.signature, id.board.lookup(m.sender)) {
                (Some(s), Ok(pk)) => ds_verify(s.as_bytes(), &pk, &m.payload),
                _ => false,
            },
        }
    }

    fn sign(&self, payload: &[u8]) -> Option<Signature> {
        self.identity.as_ref().map(|id| ds_sign(&id.keys, payload))
    }

    fn need(&self, set: &BTreeSet<UserId>) -> Result<(), AbortCause> {
        if set.len() < self.cfg.t {
            Err(AbortCause::InsufficientSurvivors { have: set.len(), need: self.cfg.t })
        } else {
            Ok(())
        }
    }

    /// Messages of `tag` from users in `allowed`, first per sender, with a valid
    /// signature in active mode.
    fn collect<'a>(
        &'a self,
        inbox: &'a [RoundMessage],
        tag: Tag,
        allowed: Option<&'a BTreeSet<UserId>>,
    ) -> impl Iterator<Item = (UserId, &'a RoundMessage)> + 'a {
        inbox.iter().filter_map(move |m| {
            let u = m.sender_user()?;
            let ok = m.tag == tag && allowed.is_none_or(|a| a.contains(&u)) && self.sig_ok(m);
            ok.then_some((u, m))
        })
    }

    fn broadcast(&self, round: u8, to: &BTreeSet<UserId>, tag: Tag, payload: &[u8], sig: Option<Signature>) -> Vec<RoundMessage> {
        to.iter()
            .map(|&u| RoundMessage::new(round, PartyId::Server, PartyId::User(u), tag, payload.to_vec()).signed(sig))
            .collect()
    }

    fn round0(&mut self, inbox: Vec<RoundMessage>) -> Result<ServerStep, AbortCause> {
        let mut entries: BTreeMap<UserId, KeyEntry> = BTreeMap::new();
        for (u, m) in self.collect(&inbox, Tag::KeyAdvert, None) {
            if self.cfg.group.decode_exact(&m.payload).is_ok() {
                entries.entry(u).or_insert(KeyEntry { user: u, pk: m.payload.clone(), sig: m.signature });
            }
        }
        let u1: BTreeSet<UserId> = entries.keys().copied().collect();
        self.need(&u1)?;
        let payload = encode_key_broadcast(&entries.into_values().collect::<Vec<_>>());
        let out = self.broadcast(0, &u1, Tag::KeyBroadcast, &payload, None);
        self.sets.u1 = Some(u1);
        Ok(ServerStep::Send(out))
    }

    fn round1(&mut self, inbox: Vec<RoundMessage>) -> Result<ServerStep, AbortCause> {
        let u1 = self.sets.u1.clone().expect("round 0 ran");
        let mut valid: Vec<(EncShareFrame, &RoundMessage)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (u, m) in self.collect(&inbox, Tag::EncShare, Some(&u1)) {
            let Ok(f) = EncShareFrame::decode(&m.payload) else { continue };
            if f.from == u && f.to != u && u1.contains(&f.to) && seen.insert((f.from, f.to)) {
                valid.push((f, m));
            }
        }
        let u2: BTreeSet<UserId> = valid.iter().map(|(f, _)| f.from).collect();
        self.need(&u2)?;
        let out = valid
            .into_iter()
            .filter(|(f, _)| u2.contains(&f.to))
            .map(|(f, m)| {
                RoundMessage::new(1, PartyId::Server, PartyId::User(f.to), Tag::EncShare, m.payload.clone())
                    .signed(m.signature)
            })
            .collect();
        self.sets.u2 = Some(u2);
        Ok(ServerStep::Send(out))
    }

    fn round2(&mut self, inbox: Vec<RoundMessage>) -> Result<ServerStep, AbortCause> {
        let u2 = self.sets.u2.clone().expect("round 1 ran");
        let fresh: Vec<(UserId, Vec<u8>)> = self
            .collect(&inbox, Tag::MaskedInput, Some(&u2))
            .filter(|(_, m)| self.backend.check(&m.payload).is_ok())
            .map(|(u, m)| (u, m.payload.clone()))
            .collect();
        for (u, y) in fresh {
            self.masked.entry(u).or_insert(y);
        }
        let u3: BTreeSet<UserId> = self.masked.keys().copied().collect();
        self.need(&u3)?;
        self.u3_frame = encode_user_list(&u3);
        let sig = self.sign(&self.u3_frame);
        let mut out = self.broadcast(2, &u3, Tag::SurvivorList, &self.u3_frame, sig);
        if let Some((plan, frame_b)) = &mut self.split {
            let mut alt = u3.clone();
            alt.remove(&plan.victim);
            *frame_b = encode_user_list(&alt);
        }
        if let Some((_, frame_b)) = &self.split {
            let sig_b = self.sign(frame_b);
            for m in out.iter_mut().filter(|m| m.receiver.user().is_some_and(|u| self.list_of(u) == 1)) {
                m.payload = frame_b.clone();
                m.signature = sig_b;
            }
        }
        if !self.cfg.active() {
            self.sets.u4 = Some(u3.clone());
        }
        self.sets.u3 = Some(u3);
        Ok(ServerStep::Send(out))
    }

    fn round3(&mut self, inbox: Vec<RoundMessage>) -> Result<ServerStep, AbortCause> {
        if self.split.is_some() {
            return self.round3_split(inbox);
        }
        let u3 = self.sets.u3.clone().expect("round 2 ran");
        let mut sigs: BTreeMap<UserId, Signature> = BTreeMap::new();
        for (u, m) in self.collect(&inbox, Tag::ListSig, Some(&u3)) {
            if m.payload == self.u3_frame {
                sigs.entry(u).or_insert(m.signature.expect("checked by collect"));
            }
        }
        let u4: BTreeSet<UserId> = sigs.keys().copied().collect();
        self.need(&u4)?;
        let payload = encode_sig_echo(&sigs.into_iter().collect::<Vec<_>>());
        let out = self.broadcast(3, &u4, Tag::ListSigEcho, &payload, None);
        self.sets.u4 = Some(u4);
        Ok(ServerStep::Send(out))
    }

    /// Signatures per list, colluders signing both; each list that reaches
    /// `t` gets its own echo.
    fn round3_split(&mut self, inbox: Vec<RoundMessage>) -> Result<ServerStep, AbortCause> {
        let u3 = self.sets.u3.clone().expect("round 2 ran");
        let (plan, frame_b) = self.split.as_ref().expect("split plan");
        let frames = [self.u3_frame.clone(), frame_b.clone()];
        let mut sigs: [BTreeMap<UserId, Signature>; 2] = Default::default();
        for (u, m) in self.collect(&inbox, Tag::ListSig, Some(&u3)) {
            if let Some(l) = frames.iter().position(|f| *f == m.payload) {
                sigs[l].entry(u).or_insert(m.signature.expect("checked by collect"));
            }
        }
        for (c, keys) in plan.colluders.iter().filter(|(c, _)| u3.contains(c)) {
            for l in 0..2 {
                sigs[l].entry(*c).or_insert_with(|| ds_sign(keys, &frames[l]));
            }
        }
        let mut out = Vec::new();
        for l in 0..2 {
            self.report.signatures[l] = sigs[l].len();
            self.report.echoed[l] = sigs[l].len() >= self.cfg.t;
            if self.report.echoed[l] {
                let viewers: BTreeSet<UserId> = sigs[l].keys().copied().filter(|&u| self.list_of(u) == l).collect();
                let payload = encode_sig_echo(&sigs[l].iter().map(|(u, s)| (*u, *s)).collect::<Vec<_>>());
                out.extend(self.broadcast(3, &viewers, Tag::ListSigEcho, &payload, None));
            }
        }
        if !self.report.echoed[0] {
            return Err(AbortCause::InsufficientSurvivors { have: sigs[0].len(), need: self.cfg.t });
        }
        self.sets.u4 = Some(sigs[0].keys().copied().collect());
        Ok(ServerStep::Send(out))
    }

    fn round4(&mut self, inbox: Vec<RoundMessage>) -> Result<ServerStep, AbortCause> {
        let u4 = self.sets.u4.clone().expect("U4 formed");
        let field = *self.backend.share_field();
        if let Some((plan, _)) = &self.split {
            let colluders = plan.colluders.len();
            let lists: Vec<usize> =
                self.collect(&inbox, Tag::ShareSum, self.sets.u3.as_ref()).map(|(u, _)| self.list_of(u)).collect();
            for l in lists {
                self.report.share_sums[l] += 1;
            }
            for l in 0..2 {
                // Colluders actually answer list 0; for list 1 they could.
                let extra = if l == 1 { colluders } else { 0 };
                self.report.reconstructible[l] = self.report.echoed[l] && self.report.share_sums[l] + extra >= self.cfg.t;
            }
        }
        let mut sums: BTreeMap<UserId, Share> = BTreeMap::new();
        for (u, m) in self.collect(&inbox, Tag::ShareSum, Some(&u4)) {
            if let Ok(v) = field.decode_exact(&m.payload) {
                sums.entry(u).or_insert(Share { holder: holder(&field, u)?, value: v });
            }
        }
        let u5: BTreeSet<UserId> = sums.keys().copied().collect();
        self.need(&u5)?;
        self.sets.u5 = Some(u5);
        let shares: Vec<Share> = sums.into_values().collect();
        let key_sum = self.cache.reconstruct(&shares, self.cfg.t)?;
        let masked: Vec<&[u8]> = self.masked.values().map(Vec::as_slice).collect();
        Ok(ServerStep::Output(self.backend.unmask(&masked, key_sum)?))
    }
}

impl ServerParty for AhServer {
    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> Result<ServerStep, AbortCause> {
        match round {
            0 => self.round0(inbox),
            1 => self.round1(inbox),
            2 => self.round2(inbox),
            3 => self.round3(inbox),
            4 => self.round4(inbox),
            _ => Err(AbortCause::Inconsistent(format!("no round {round}"))),
        }
    }

    fn survivors(&self) -> SurvivorSets {
        self.sets.clone()
    }
}
