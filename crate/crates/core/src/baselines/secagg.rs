//! Pairwise-mask baseline: each user hides its input under a self mask and
//! antisymmetric pairwise masks, and the server recovers the per-user seeds
//! it needs after dropouts.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::prg::{self, SEED_LEN};
use crate::algebra::{Exponent, FieldElement, FieldParams, GroupElement, GroupParams};
use crate::error::{Error, Result};
use crate::harness::scripts::DropoutScript;
use crate::harness::sim::{self, PassThrough, ServerParty, ServerStep, SimOptions, SimOutcome, SurvivorSets, UserParty};
use crate::masking::{add_vectors, decode_vector, encode_vector};
use crate::party::{PartyId, UserId};
use crate::primitives::wire::{FrameReader, FrameWriter};
use crate::primitives::{ae_dec, ae_enc, derive_nonce, dh_agree, dh_from_seed, dh_gen, dh_secret_from_seed, AeadKey, DhKeyPair};
use crate::protocol::frames::{decode_key_broadcast, encode_key_broadcast, EncShareFrame, KeyEntry};
use crate::protocol::message::{decode_user_list, encode_user_list, AbortCause, RoundMessage, Tag};
use crate::protocol::{holder, plain_sum, AggregationResult, ProtocolConfig, RunEnv};
use crate::sss::{self, LagrangeCache, Share};

pub type Seed = [u8; SEED_LEN];

pub const ROUNDS: [u8; 4] = [0, 1, 2, 3];

/// Self-mask seed derived from `b`.
pub fn self_seed(field: &FieldParams, b: FieldElement) -> Seed {
    let d = Sha256::digest(field.encode(b));
    d[..SEED_LEN].try_into().expect("digest is 32 bytes")
}

/// Secret exponent of the mask key pair derived from `s`.
pub fn mask_secret(group: &GroupParams, field: &FieldParams, s: FieldElement) -> Exponent {
    dh_secret_from_seed(group, &field.encode(s))
}

/// Pairwise seed shared by the holder of `sk` and the owner of `pk`.
pub fn pairwise_seed(group: &GroupParams, sk: &Exponent, pk: &GroupElement) -> Result<Seed> {
    Ok(*dh_agree(group, sk, pk)?.as_bytes())
}

/// `y = x + PRG(b) + sum_{j > me} PRG(s_{me,j}) - sum_{j < me} PRG(s_{j,me})`
/// over `peers`. A peer without a seed is a configuration error.
pub fn mask(
    field: &FieldParams,
    me: UserId,
    x: &[FieldElement],
    self_seed: &Seed,
    peers: &BTreeSet<UserId>,
    pairwise: &BTreeMap<UserId, Seed>,
) -> Result<Vec<FieldElement>> {
    let m = x.len();
    let mut y: Vec<FieldElement> = x.iter().zip(prg::expand(field, self_seed, m)).map(|(a, b)| field.add(*a, b)).collect();
    for &j in peers.iter().filter(|&&j| j != me) {
        let seed = pairwise.get(&j).ok_or_else(|| Error::config(format!("no pairwise seed for {j}")))?;
        let r = prg::expand(field, seed, m);
        for (yk, rk) in y.iter_mut().zip(r) {
            *yk = if j > me { field.add(*yk, rk) } else { field.sub(*yk, rk) };
        }
    }
    Ok(y)
}

/// Removes the self masks of `survivors` and the pairwise masks between each
/// dropped user and each survivor. `pairwise` is keyed `(dropped, survivor)`.
pub fn unmask(
    field: &FieldParams,
    sum_y: &[FieldElement],
    survivors: &BTreeSet<UserId>,
    dropped: &BTreeSet<UserId>,
    self_seeds: &BTreeMap<UserId, Seed>,
    pairwise: &BTreeMap<(UserId, UserId), Seed>,
) -> Result<Vec<FieldElement>> {
    let m = sum_y.len();
    let mut z = sum_y.to_vec();
    for &j in dropped {
        for &i in survivors {
            let seed = pairwise.get(&(j, i)).ok_or_else(|| Error::MissingShare(format!("pairwise seed ({j}, {i})")))?;
            let r = prg::expand(field, seed, m);
            // Survivor i added PRG when j > i and subtracted it otherwise.
            for (zk, rk) in z.iter_mut().zip(r) {
                *zk = if j > i { field.sub(*zk, rk) } else { field.add(*zk, rk) };
            }
        }
    }
    for &i in survivors {
        let seed = self_seeds.get(&i).ok_or_else(|| Error::MissingShare(format!("self-mask seed of {i}")))?;
        for (zk, rk) in z.iter_mut().zip(prg::expand(field, seed, m)) {
            *zk = field.sub(*zk, rk);
        }
    }
    Ok(z)
}

/// Which secret a recovery share belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KeyKind {
    Mask = 0,
    SelfMask = 1,
}

impl KeyKind {
    fn from_byte(b: &[u8]) -> Result<Self> {
        match b {
            [0] => Ok(KeyKind::Mask),
            [1] => Ok(KeyKind::SelfMask),
            _ => Err(Error::decode("bad key kind")),
        }
    }
}

/// Key advert payload: the mask public key, then optionally a channel key.
pub(crate) fn encode_advert(group: &GroupParams, mask_pk: &GroupElement, channel_pk: Option<&GroupElement>) -> Vec<u8> {
    let w = FrameWriter::new(Tag::KeyAdvert.code()).field(&group.encode(mask_pk));
    match channel_pk {
        Some(c) => w.field(&group.encode(c)),
        None => w,
    }
    .finish()
}

pub(crate) fn decode_advert(group: &GroupParams, bytes: &[u8]) -> Result<(GroupElement, Option<GroupElement>)> {
    let mut r = FrameReader::open(bytes, Tag::KeyAdvert.code())?;
    let s = group.decode_exact(r.field()?)?;
    let c = if r.is_done() { None } else { Some(group.decode_exact(r.field()?)?) };
    r.finish()?;
    Ok((s, c))
}

/// Recovery responses: `(owner, kind, bytes)` triples after a tag.
pub(crate) fn encode_recovery(tag: Tag, holder: UserId, items: &[(UserId, KeyKind, Vec<u8>)]) -> Vec<u8> {
    items
        .iter()
        .fold(FrameWriter::new(tag.code()).id(holder.0), |w, (j, k, v)| w.id(j.0).field(&[*k as u8]).field(v))
        .finish()
}

/// Recovery items per holder: owner, key kind and share bytes.
pub type RecoveryItems = Vec<(UserId, KeyKind, Vec<u8>)>;

pub(crate) fn decode_recovery(tag: Tag, bytes: &[u8]) -> Result<(UserId, RecoveryItems)> {
    let mut r = FrameReader::open(bytes, tag.code())?;
    let holder = UserId(r.id()?);
    let mut out = Vec::new();
    while !r.is_done() {
        let j = UserId(r.id()?);
        let k = KeyKind::from_byte(r.field()?)?;
        out.push((j, k, r.field()?.to_vec()));
    }
    Ok((holder, out))
}

pub(crate) fn single(inbox: Vec<RoundMessage>, tag: Tag) -> std::result::Result<RoundMessage, AbortCause> {
    let mut it = inbox.into_iter().filter(|m| m.tag == tag && m.sender == PartyId::Server);
    match (it.next(), it.next()) {
        (Some(m), None) => Ok(m),
        (None, _) => Err(AbortCause::MissingBroadcast),
        (Some(_), Some(_)) => Err(AbortCause::Inconsistent(format!("two {tag} messages"))),
    }
}

/// Mask public keys from a key broadcast, checking distinctness and our own entry.
pub(crate) fn read_key_broadcast(
    cfg: &ProtocolConfig,
    me: UserId,
    own_mask_pk: &GroupElement,
    payload: &[u8],
) -> std::result::Result<BTreeMap<UserId, (GroupElement, Option<GroupElement>)>, AbortCause> {
    let mut out = BTreeMap::new();
    let mut distinct = BTreeSet::new();
    for e in decode_key_broadcast(payload)? {
        let (s, c) = decode_advert(&cfg.group, &e.pk)?;
        let fresh = distinct.insert(cfg.group.encode(&s)) && c.as_ref().is_none_or(|c| distinct.insert(cfg.group.encode(c)));
        if !fresh || out.insert(e.user, (s, c)).is_some() {
            return Err(AbortCause::DuplicateKeys);
        }
    }
    if out.len() <= cfg.t {
        return Err(AbortCause::InsufficientSurvivors { have: out.len(), need: cfg.t + 1 });
    }
    if out.get(&me).map(|(s, _)| s) != Some(own_mask_pk) {
        return Err(AbortCause::Inconsistent("own key missing or altered in broadcast".into()));
    }
    Ok(out)
}

pub struct SecAggUser {
    id: UserId,
    cfg: Arc<ProtocolConfig>,
    input: Vec<FieldElement>,
    rng: ChaCha20Rng,
    channel: Option<DhKeyPair>,
    s: FieldElement,
    mask_dh: Option<DhKeyPair>,
    b: FieldElement,
    peers: BTreeMap<UserId, (GroupElement, Option<GroupElement>)>,
    channel_keys: BTreeMap<UserId, AeadKey>,
    held: BTreeMap<UserId, (FieldElement, FieldElement)>,
    u2: BTreeSet<UserId>,
}

impl SecAggUser {
    pub fn new(id: UserId, cfg: Arc<ProtocolConfig>, input: Vec<FieldElement>, rng: ChaCha20Rng) -> Self {
        let zero = cfg.field.zero();
        SecAggUser {
            id,
            cfg,
            input,
            rng,
            channel: None,
            s: zero,
            mask_dh: None,
            b: zero,
            peers: BTreeMap::new(),
            channel_keys: BTreeMap::new(),
            held: BTreeMap::new(),
            u2: BTreeSet::new(),
        }
    }

    fn up(&self, round: u8, tag: Tag, payload: Vec<u8>) -> RoundMessage {
        RoundMessage::new(round, PartyId::User(self.id), PartyId::Server, tag, payload)
    }

    fn round0(&mut self) -> Vec<RoundMessage> {
        let (group, field) = (&self.cfg.group, &self.cfg.field);
        let c = dh_gen(group, &mut self.rng);
        self.s = field.random(&mut self.rng);
        let kp = dh_from_seed(group, &field.encode(self.s));
        let payload = encode_advert(group, kp.public(), Some(c.public()));
        self.mask_dh = Some(kp);
        self.channel = Some(c);
        vec![self.up(0, Tag::KeyAdvert, payload)]
    }

    fn round1(&mut self, inbox: Vec<RoundMessage>) -> std::result::Result<Vec<RoundMessage>, AbortCause> {
        let m = single(inbox, Tag::KeyBroadcast)?;
        let own = self.mask_dh.as_ref().expect("round 0 ran").public().clone();
        self.peers = read_key_broadcast(&self.cfg, self.id, &own, &m.payload)?;
        let (group, field) = (&self.cfg.group, self.cfg.field);
        let c = self.channel.as_ref().expect("round 0 ran");
        for (&j, (_, cpk)) in &self.peers {
            if j == self.id {
                continue;
            }
            let cpk = cpk.as_ref().ok_or_else(|| AbortCause::Inconsistent(format!("{j} advertised no channel key")))?;
            self.channel_keys.insert(j, dh_agree(group, c.secret(), cpk)?);
        }
        self.b = field.random(&mut self.rng);
        let holders = self.peers.keys().map(|&u| holder(&field, u)).collect::<Result<Vec<_>>>()?;
        let s_set = sss::share(&field, self.s, self.cfg.t, &holders, &mut self.rng)?;
        let b_set = sss::share(&field, self.b, self.cfg.t, &holders, &mut self.rng)?;
        let mut out = Vec::new();
        for &j in self.peers.keys() {
            let h = holder(&field, j)?;
            let pair = (s_set.get(h).expect("holder").value, b_set.get(h).expect("holder").value);
            if j == self.id {
                self.held.insert(j, pair);
                continue;
            }
            let mut plain = field.encode(pair.0);
            plain.extend(field.encode(pair.1));
            let ct = ae_enc(&self.channel_keys[&j], &plain, derive_nonce(1, self.id.0, j.0));
            out.push(self.up(1, Tag::EncShare, EncShareFrame { from: self.id, to: j, ciphertext: ct }.encode()));
        }
        Ok(out)
    }

    fn round2(&mut self, inbox: Vec<RoundMessage>) -> std::result::Result<Vec<RoundMessage>, AbortCause> {
        let field = self.cfg.field;
        for m in inbox.into_iter().filter(|m| m.tag == Tag::EncShare) {
            let f = EncShareFrame::decode(&m.payload)?;
            let from = PartyId::User(f.from);
            if f.to != self.id || !self.channel_keys.contains_key(&f.from) || self.held.contains_key(&f.from) {
                return Err(AbortCause::Inconsistent(format!("unexpected share routing from {}", f.from)));
            }
            let plain = ae_dec(&self.channel_keys[&f.from], &f.ciphertext).map_err(|_| AbortCause::DecryptionFailure { from })?;
            let (s, rest) = field.decode(&plain).map_err(|_| AbortCause::DecryptionFailure { from })?;
            let b = field.decode_exact(rest).map_err(|_| AbortCause::DecryptionFailure { from })?;
            self.held.insert(f.from, (s, b));
        }
        if self.held.len() < 2 {
            return Err(AbortCause::MissingBroadcast);
        }
        self.u2 = self.held.keys().copied().collect();
        let y = self.masked_input()?;
        Ok(vec![self.up(2, Tag::MaskedInput, encode_vector(&field, &y))])
    }

    fn masked_input(&self) -> Result<Vec<FieldElement>> {
        let sk = self.mask_dh.as_ref().expect("round 0 ran").secret();
        let mut pairwise = BTreeMap::new();
        for &j in self.u2.iter().filter(|&&j| j != self.id) {
            pairwise.insert(j, pairwise_seed(&self.cfg.group, sk, &self.peers[&j].0)?);
        }
        mask(&self.cfg.field, self.id, &self.input, &self_seed(&self.cfg.field, self.b), &self.u2, &pairwise)
    }

    fn round3(&mut self, inbox: Vec<RoundMessage>) -> std::result::Result<Vec<RoundMessage>, AbortCause> {
        let m = single(inbox, Tag::SurvivorList)?;
        let u3 = decode_user_list(&m.payload)?;
        let field = self.cfg.field;
        if !u3.is_subset(&self.u2) || u3.len() < self.cfg.t {
            return Err(AbortCause::Inconsistent("survivor list is not a large enough subset of U2".into()));
        }
        let items: RecoveryItems = self
            .u2
            .iter()
            .map(|j| {
                let (s, b) = self.held[j];
                if u3.contains(j) {
                    (*j, KeyKind::SelfMask, field.encode(b))
                } else {
                    (*j, KeyKind::Mask, field.encode(s))
                }
            })
            .collect();
        Ok(vec![self.up(3, Tag::UnmaskShares, encode_recovery(Tag::UnmaskShares, self.id, &items))])
    }
}

impl UserParty for SecAggUser {
    fn id(&self) -> UserId {
        self.id
    }

    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> std::result::Result<Vec<RoundMessage>, AbortCause> {
        match round {
            0 => Ok(self.round0()),
            1 => self.round1(inbox),
            2 => self.round2(inbox),
            3 => self.round3(inbox),
            _ => Err(AbortCause::Inconsistent(format!("no round {round}"))),
        }
    }

    fn secret_encodings(&self) -> Vec<Vec<u8>> {
        let f = &self.cfg.field;
        vec![f.encode(self.s), f.encode(self.b), encode_vector(f, &self.input)]
    }
}

/// What the server recovers for each user.
pub struct Recovered {
    /// Mask secret exponent of each dropped user.
    pub mask_secrets: BTreeMap<UserId, Exponent>,
    pub self_seeds: BTreeMap<UserId, Seed>,
}

/// How the server turns recovery responses into keys.
pub trait KeyRecovery: Send {
    /// Message sent before the first round.
    fn start(&mut self) -> Vec<RoundMessage> {
        Vec::new()
    }

    /// Whether users run the share-distribution round in this aggregation.
    fn shares_keys(&self) -> bool;

    fn response_tag(&self) -> Tag;

    fn recover(
        &self,
        cfg: &ProtocolConfig,
        responses: &BTreeMap<UserId, RecoveryItems>,
        dropped: &BTreeSet<UserId>,
        survivors: &BTreeSet<UserId>,
    ) -> Result<Recovered>;
}

/// Field Shamir shares of `s` and `b`, reconstructed once per needed user.
pub struct ShamirRecovery {
    cache: LagrangeCache,
}

impl ShamirRecovery {
    pub fn new(field: FieldParams) -> Self {
        ShamirRecovery { cache: LagrangeCache::new(field) }
    }
}

pub(crate) fn shares_of(
    responses: &BTreeMap<UserId, RecoveryItems>,
    owner: UserId,
    kind: KeyKind,
) -> impl Iterator<Item = (UserId, &[u8])> + '_ {
    responses.iter().filter_map(move |(h, items)| {
        items.iter().find(|(j, k, _)| *j == owner && *k == kind).map(|(_, _, v)| (*h, v.as_slice()))
    })
}

impl KeyRecovery for ShamirRecovery {
    fn shares_keys(&self) -> bool {
        true
    }

    fn response_tag(&self) -> Tag {
        Tag::UnmaskShares
    }

    fn recover(
        &self,
        cfg: &ProtocolConfig,
        responses: &BTreeMap<UserId, RecoveryItems>,
        dropped: &BTreeSet<UserId>,
        survivors: &BTreeSet<UserId>,
    ) -> Result<Recovered> {
        let field = cfg.field;
        let secret = |owner: UserId, kind: KeyKind| -> Result<FieldElement> {
            let shares = shares_of(responses, owner, kind)
                .map(|(h, v)| Ok(Share { holder: holder(&field, h)?, value: field.decode_exact(v)? }))
                .collect::<Result<Vec<_>>>()?;
            self.cache.reconstruct(&shares, cfg.t)
        };
        let mut out = Recovered { mask_secrets: BTreeMap::new(), self_seeds: BTreeMap::new() };
        for &j in dropped {
            out.mask_secrets.insert(j, mask_secret(&cfg.group, &field, secret(j, KeyKind::Mask)?));
        }
        for &i in survivors {
            out.self_seeds.insert(i, self_seed(&field, secret(i, KeyKind::SelfMask)?));
        }
        Ok(out)
    }
}

pub struct SecAggServer {
    cfg: Arc<ProtocolConfig>,
    recovery: Box<dyn KeyRecovery>,
    sets: SurvivorSets,
    mask_pks: BTreeMap<UserId, GroupElement>,
    masked: BTreeMap<UserId, Vec<FieldElement>>,
}

impl SecAggServer {
    pub fn new(cfg: Arc<ProtocolConfig>, recovery: Box<dyn KeyRecovery>) -> Self {
        SecAggServer { cfg, recovery, sets: SurvivorSets::default(), mask_pks: BTreeMap::new(), masked: BTreeMap::new() }
    }

    fn need(&self, set: &BTreeSet<UserId>) -> std::result::Result<(), AbortCause> {
        if set.len() < self.cfg.t {
            Err(AbortCause::InsufficientSurvivors { have: set.len(), need: self.cfg.t })
        } else {
            Ok(())
        }
    }

    fn down(round: u8, to: UserId, tag: Tag, payload: Vec<u8>) -> RoundMessage {
        RoundMessage::new(round, PartyId::Server, PartyId::User(to), tag, payload)
    }

    fn round0(&mut self, inbox: Vec<RoundMessage>) -> std::result::Result<ServerStep, AbortCause> {
        let mut entries = BTreeMap::new();
        for m in inbox.iter().filter(|m| m.tag == Tag::KeyAdvert) {
            let Some(u) = m.sender_user() else { continue };
            if let Ok((s, _)) = decode_advert(&self.cfg.group, &m.payload) {
                if let std::collections::btree_map::Entry::Vacant(e) = entries.entry(u) {
                    self.mask_pks.insert(u, s);
                    e.insert(KeyEntry { user: u, pk: m.payload.clone(), sig: None });
                }
            }
        }
        let u1: BTreeSet<UserId> = entries.keys().copied().collect();
        self.need(&u1)?;
        let payload = encode_key_broadcast(&entries.into_values().collect::<Vec<_>>());
        let out = u1.iter().map(|&u| Self::down(0, u, Tag::KeyBroadcast, payload.clone())).collect();
        if !self.recovery.shares_keys() {
            self.sets.u2 = Some(u1.clone());
        }
        self.sets.u1 = Some(u1);
        Ok(ServerStep::Send(out))
    }

    fn round1(&mut self, inbox: Vec<RoundMessage>) -> std::result::Result<ServerStep, AbortCause> {
        let u1 = self.sets.u1.clone().expect("round 0 ran");
        let mut frames = Vec::new();
        let mut seen = BTreeSet::new();
        for m in inbox.iter().filter(|m| m.tag == Tag::EncShare) {
            let Ok(f) = EncShareFrame::decode(&m.payload) else { continue };
            if m.sender_user() == Some(f.from) && u1.contains(&f.to) && f.to != f.from && seen.insert((f.from, f.to)) {
                frames.push((f, m.payload.clone()));
            }
        }
        let u2: BTreeSet<UserId> = frames.iter().map(|(f, _)| f.from).collect();
        self.need(&u2)?;
        let out = frames
            .into_iter()
            .filter(|(f, _)| u2.contains(&f.to))
            .map(|(f, p)| Self::down(1, f.to, Tag::EncShare, p))
            .collect();
        self.sets.u2 = Some(u2);
        Ok(ServerStep::Send(out))
    }

    fn round2(&mut self, inbox: Vec<RoundMessage>) -> std::result::Result<ServerStep, AbortCause> {
        let u2 = self.sets.u2.clone().expect("U2 formed");
        let m_len = self.cfg.mask.m();
        for m in inbox.iter().filter(|m| m.tag == Tag::MaskedInput) {
            let Some(u) = m.sender_user().filter(|u| u2.contains(u)) else { continue };
            if let Ok(y) = decode_vector(&self.cfg.field, &m.payload) {
                if y.len() == m_len {
                    self.masked.entry(u).or_insert(y);
                }
            }
        }
        let u3: BTreeSet<UserId> = self.masked.keys().copied().collect();
        self.need(&u3)?;
        let list = encode_user_list(&u3);
        let out = u3.iter().map(|&u| Self::down(2, u, Tag::SurvivorList, list.clone())).collect();
        self.sets.u4 = Some(u3.clone());
        self.sets.u3 = Some(u3);
        Ok(ServerStep::Send(out))
    }

    fn round3(&mut self, inbox: Vec<RoundMessage>) -> std::result::Result<ServerStep, AbortCause> {
        let u3 = self.sets.u3.clone().expect("round 2 ran");
        let u2 = self.sets.u2.clone().expect("U2 formed");
        let tag = self.recovery.response_tag();
        let mut responses = BTreeMap::new();
        for m in inbox.iter().filter(|m| m.tag == tag) {
            let Some(u) = m.sender_user().filter(|u| u3.contains(u)) else { continue };
            if let Ok((h, items)) = decode_recovery(tag, &m.payload) {
                if h == u {
                    responses.entry(u).or_insert(items);
                }
            }
        }
        let u5: BTreeSet<UserId> = responses.keys().copied().collect();
        self.need(&u5)?;
        self.sets.u5 = Some(u5);

        let dropped: BTreeSet<UserId> = u2.difference(&u3).copied().collect();
        let keys = self.recovery.recover(&self.cfg, &responses, &dropped, &u3)?;
        let mut pairwise = BTreeMap::new();
        for (&j, sk) in &keys.mask_secrets {
            for &i in &u3 {
                pairwise.insert((j, i), pairwise_seed(&self.cfg.group, sk, &self.mask_pks[&i])?);
            }
        }
        let field = self.cfg.field;
        let sum = add_vectors(&field, self.cfg.mask.m(), self.masked.values().map(Vec::as_slice))?;
        Ok(ServerStep::Output(unmask(&field, &sum, &u3, &dropped, &keys.self_seeds, &pairwise)?))
    }
}

impl ServerParty for SecAggServer {
    fn start(&mut self) -> std::result::Result<Vec<RoundMessage>, AbortCause> {
        Ok(self.recovery.start())
    }

    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> std::result::Result<ServerStep, AbortCause> {
        match round {
            0 => self.round0(inbox),
            1 => self.round1(inbox),
            2 => self.round2(inbox),
            3 => self.round3(inbox),
            _ => Err(AbortCause::Inconsistent(format!("no round {round}"))),
        }
    }

    fn survivors(&self) -> SurvivorSets {
        self.sets.clone()
    }
}

/// The pairwise-mask baseline end to end. Semi-honest only.
pub fn run_secagg(
    cfg: &ProtocolConfig,
    inputs: &[Vec<FieldElement>],
    dropout: &DropoutScript,
    env: &RunEnv,
) -> Result<AggregationResult> {
    if cfg.active() {
        return Err(Error::config("the pairwise-mask baseline runs in semi-honest mode only"));
    }
    check_inputs(cfg, inputs, dropout)?;
    let cfg = Arc::new(cfg.clone());
    let mut users: Vec<SecAggUser> = (0..cfg.n)
        .map(|i| SecAggUser::new(UserId(i as u32), cfg.clone(), inputs[i].clone(), env.randomness.stream("user", i as u64)))
        .collect();
    let mut server = SecAggServer::new(cfg.clone(), Box::new(ShamirRecovery::new(cfg.field)));
    let opts = sim_options(ROUNDS.to_vec(), dropout, env);
    let outcome = sim::run(&mut server, &mut users, &mut PassThrough, &opts);
    finish(&cfg, inputs, outcome)
}

pub(crate) fn check_inputs(cfg: &ProtocolConfig, inputs: &[Vec<FieldElement>], dropout: &DropoutScript) -> Result<()> {
    if inputs.len() != cfg.n || inputs.iter().any(|x| x.len() != cfg.mask.m()) {
        return Err(Error::config(format!("expected {} input vectors of length {}", cfg.n, cfg.mask.m())));
    }
    if let Some(v) = dropout.victims.iter().find(|v| v.index() >= cfg.n) {
        return Err(Error::config(format!("dropout victim {v} is not a user")));
    }
    Ok(())
}

pub(crate) fn sim_options(rounds: Vec<u8>, dropout: &DropoutScript, env: &RunEnv) -> SimOptions {
    SimOptions {
        rounds,
        dropouts: dropout.victims.iter().map(|&v| (v, dropout.round)).collect(),
        parallel: env.parallel,
        latency: env.latency,
        board: None,
    }
}

pub(crate) fn finish(cfg: &ProtocolConfig, inputs: &[Vec<FieldElement>], outcome: SimOutcome) -> Result<AggregationResult> {
    let expected = match &outcome.survivors.u3 {
        Some(u3) => Some(plain_sum(&cfg.field, cfg.mask.m(), inputs, u3)?),
        None => None,
    };
    Ok(AggregationResult { outcome, expected, notes: Vec::new(), split: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counters::measure;
    use rand::{Rng, SeedableRng};

    fn seeds(n: u32, rng: &mut impl Rng) -> BTreeMap<(UserId, UserId), Seed> {
        let mut out = BTreeMap::new();
        for i in 0..n {
            for j in i + 1..n {
                let s: Seed = rng.gen();
                out.insert((UserId(i), UserId(j)), s);
                out.insert((UserId(j), UserId(i)), s);
            }
        }
        out
    }

    fn peer_seeds(all: &BTreeMap<(UserId, UserId), Seed>, me: UserId) -> BTreeMap<UserId, Seed> {
        all.iter().filter(|((a, _), _)| *a == me).map(|((_, b), s)| (*b, *s)).collect()
    }

    #[test]
    fn two_users_pairwise_cancels() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let all = seeds(2, &mut rng);
        let peers: BTreeSet<UserId> = [UserId(0), UserId(1)].into();
        let x = [vec![f.elem(5), f.elem(6)], vec![f.elem(7), f.elem(8)]];
        let b: [Seed; 2] = [rng.gen(), rng.gen()];
        let y0 = mask(&f, UserId(0), &x[0], &b[0], &peers, &peer_seeds(&all, UserId(0))).unwrap();
        let y1 = mask(&f, UserId(1), &x[1], &b[1], &peers, &peer_seeds(&all, UserId(1))).unwrap();
        let p0 = prg::expand(&f, &b[0], 2);
        let p1 = prg::expand(&f, &b[1], 2);
        for k in 0..2 {
            let z = f.sub(f.sub(f.add(y0[k], y1[k]), p0[k]), p1[k]);
            assert_eq!(z, f.add(x[0][k], x[1][k]));
        }
    }

    #[test]
    fn single_user_is_self_mask_only() {
        let f = FieldParams::default();
        let x = vec![f.elem(9); 4];
        let y = mask(&f, UserId(0), &x, &[2; 16], &[UserId(0)].into(), &BTreeMap::new()).unwrap();
        let p = prg::expand(&f, &[2; 16], 4);
        assert_eq!(y, x.iter().zip(p).map(|(a, b)| f.add(*a, b)).collect::<Vec<_>>());
    }

    #[test]
    fn missing_pairwise_seed_is_config_error() {
        let f = FieldParams::default();
        let r = mask(&f, UserId(0), &[f.zero()], &[0; 16], &[UserId(0), UserId(1)].into(), &BTreeMap::new());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn dropout_unmask_and_expansion_count() {
        let f = FieldParams::default();
        let (n, m) = (10u32, 100usize);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let all = seeds(n, &mut rng);
        let everyone: BTreeSet<UserId> = (0..n).map(UserId).collect();
        let dropped: BTreeSet<UserId> = [UserId(1), UserId(4), UserId(8)].into();
        let survivors: BTreeSet<UserId> = everyone.difference(&dropped).copied().collect();
        let xs: Vec<Vec<FieldElement>> = (0..n).map(|_| (0..m).map(|_| f.elem(rng.gen::<u32>() as u64)).collect()).collect();
        let bs: Vec<Seed> = (0..n).map(|_| rng.gen()).collect();
        let ys: Vec<Vec<FieldElement>> = survivors
            .iter()
            .map(|&u| mask(&f, u, &xs[u.index()], &bs[u.index()], &everyone, &peer_seeds(&all, u)).unwrap())
            .collect();
        let sum = add_vectors(&f, m, ys.iter().map(Vec::as_slice)).unwrap();
        let self_seeds = survivors.iter().map(|&u| (u, bs[u.index()])).collect();
        let (z, c) = measure(|| unmask(&f, &sum, &survivors, &dropped, &self_seeds, &all).unwrap());
        let want = add_vectors(&f, m, survivors.iter().map(|u| xs[u.index()].as_slice())).unwrap();
        assert_eq!(z, want);
        assert_eq!(c.prg_element_expansions, 2800);
    }

    #[test]
    fn missing_reconstruction_is_reported() {
        let f = FieldParams::default();
        let s: BTreeSet<UserId> = [UserId(0)].into();
        let r = unmask(&f, &[f.zero()], &s, &BTreeSet::new(), &BTreeMap::new(), &BTreeMap::new());
        assert!(matches!(r, Err(Error::MissingShare(_))));
    }

    fn cfg(n: usize, t: usize, m: usize) -> ProtocolConfig {
        let f = FieldParams::default();
        ProtocolConfig::new(n, t, crate::protocol::Mode::SemiHonest, f, GroupParams::desk().shared(), crate::masking::MaskParams::new(&f, 3, m).unwrap()).unwrap()
    }

    fn inputs(c: &ProtocolConfig, seed: u64) -> Vec<Vec<FieldElement>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..c.n).map(|_| (0..c.mask.m()).map(|_| c.field.elem(rng.gen::<u32>() as u64)).collect()).collect()
    }

    #[test]
    fn end_to_end_with_dropouts_matches_table_counts() {
        let c = cfg(10, 7, 100);
        let d = DropoutScript::at(2, [UserId(0), UserId(4), UserId(9)]);
        let r = run_secagg(&c, &inputs(&c, 1), &d, &RunEnv::seeded(1)).unwrap();
        assert!(r.matches_oracle(), "{:?}", r.outcome.server_abort);
        let s = r.outcome.metrics.server().ops;
        assert_eq!(s.prg_element_expansions, 2800);
        assert_eq!(s.shamir_reconstructions, 10);
        assert_eq!(s.modexp, 21);
        for (u, pm) in r.outcome.metrics.users() {
            assert_eq!(pm.ops.shamir_sharings, 2, "{u}");
            let want = if d.victims.contains(&u) { 9 } else { 18 };
            assert_eq!(pm.ops.modexp_agreement, want, "{u}");
        }
    }

    #[test]
    fn rejects_active_mode() {
        let f = FieldParams::default();
        let c = ProtocolConfig::new(6, 5, crate::protocol::Mode::ActiveAdversary, f, GroupParams::desk().shared(), crate::masking::MaskParams::new(&f, 3, 2).unwrap()).unwrap();
        assert!(matches!(run_secagg(&c, &inputs(&c, 1), &DropoutScript::none(), &RunEnv::seeded(1)), Err(Error::Config(_))));
    }

    #[test]
    fn recovery_frame_round_trip() {
        let items = vec![(UserId(2), KeyKind::Mask, vec![1, 2]), (UserId(5), KeyKind::SelfMask, vec![])];
        let b = encode_recovery(Tag::UnmaskShares, UserId(3), &items);
        assert_eq!(decode_recovery(Tag::UnmaskShares, &b).unwrap(), (UserId(3), items));
    }
}
