//! The pairwise-mask baseline with keys from threshold-signature generation:
//! one preparation run distributes shares of `s_i` and `b_i` in `Z_q`; each
//! aggregation then starts from a server nonce, skips the share round, and
//! recovers dropped users' keys from sub-signatures.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::RngCore;
use rand_chacha::ChaCha20Rng;

use super::{exponent_field, nonce_base, reconstruct, sub_sig_with_base, ts_trans, TempKey};
use crate::algebra::{FieldElement, FieldParams, GroupElement};
use crate::baselines::secagg::{
    self, decode_advert, encode_advert, encode_recovery, mask_secret, pairwise_seed, read_key_broadcast, self_seed, shares_of,
    single, KeyKind, KeyRecovery, Recovered, RecoveryItems, SecAggServer,
};
use crate::error::{Error, Result};
use crate::harness::metrics::RunMetrics;
use crate::harness::scripts::DropoutScript;
use crate::harness::sim::{self, PassThrough, ServerParty, ServerStep, SimOutcome, SurvivorSets, UserParty};
use crate::masking::encode_vector;
use crate::party::{PartyId, UserId};
use crate::primitives::{ae_dec, ae_enc, derive_nonce, dh_agree, dh_from_seed, dh_gen, AeadKey, DhKeyPair};
use crate::protocol::frames::{encode_key_broadcast, EncShareFrame, KeyEntry};
use crate::protocol::message::{decode_user_list, AbortCause, RoundMessage, Tag};
use crate::protocol::{holder, AggregationResult, ProtocolConfig, RunEnv};
use crate::sss::{self, LagrangeCache};

pub const NONCE_LEN: usize = 32;
pub const PREPARATION_ROUNDS: [u8; 3] = [0, 1, 2];
pub const AGGREGATION_ROUNDS: [u8; 3] = [0, 2, 3];

type Step = std::result::Result<Vec<RoundMessage>, AbortCause>;

#[derive(Default)]
struct Aggregation {
    input: Vec<FieldElement>,
    base: Option<GroupElement>,
    temp: Option<(TempKey, TempKey)>,
    mask_dh: Option<DhKeyPair>,
    peers: BTreeSet<UserId>,
}

pub struct TskgUser {
    id: UserId,
    cfg: Arc<ProtocolConfig>,
    q: FieldParams,
    rng: ChaCha20Rng,
    s: FieldElement,
    b: FieldElement,
    channel: Option<DhKeyPair>,
    channel_keys: BTreeMap<UserId, AeadKey>,
    /// `(s_j^i, b_j^i)` for each owner `j`, from preparation.
    held: BTreeMap<UserId, (FieldElement, FieldElement)>,
    agg: Option<Aggregation>,
}

impl TskgUser {
    fn new(id: UserId, cfg: Arc<ProtocolConfig>, q: FieldParams, rng: ChaCha20Rng) -> Self {
        TskgUser {
            id,
            cfg,
            q,
            rng,
            s: q.zero(),
            b: q.zero(),
            channel: None,
            channel_keys: BTreeMap::new(),
            held: BTreeMap::new(),
            agg: None,
        }
    }

    fn up(&self, round: u8, tag: Tag, payload: Vec<u8>) -> RoundMessage {
        RoundMessage::new(round, PartyId::User(self.id), PartyId::Server, tag, payload)
    }

    fn prep0(&mut self) -> Vec<RoundMessage> {
        let c = dh_gen(&self.cfg.group, &mut self.rng);
        let payload = encode_advert(&self.cfg.group, c.public(), None);
        self.channel = Some(c);
        vec![self.up(0, Tag::KeyAdvert, payload)]
    }

    fn prep1(&mut self, inbox: Vec<RoundMessage>) -> Step {
        let m = single(inbox, Tag::KeyBroadcast)?;
        let c = self.channel.as_ref().expect("round 0 ran");
        let peers = read_key_broadcast(&self.cfg, self.id, c.public(), &m.payload)?;
        if peers.len() != self.cfg.n {
            return Err(AbortCause::InsufficientSurvivors { have: peers.len(), need: self.cfg.n });
        }
        for (&j, (pk, _)) in peers.iter().filter(|(&j, _)| j != self.id) {
            self.channel_keys.insert(j, dh_agree(&self.cfg.group, c.secret(), pk)?);
        }
        let q = self.q;
        self.s = q.random(&mut self.rng);
        self.b = q.random(&mut self.rng);
        let holders = peers.keys().map(|&u| holder(&q, u)).collect::<Result<Vec<_>>>()?;
        let s_set = sss::share(&q, self.s, self.cfg.t, &holders, &mut self.rng)?;
        let b_set = sss::share(&q, self.b, self.cfg.t, &holders, &mut self.rng)?;
        let mut out = Vec::new();
        for &j in peers.keys() {
            let h = holder(&q, j)?;
            let pair = (s_set.get(h).expect("holder").value, b_set.get(h).expect("holder").value);
            if j == self.id {
                self.held.insert(j, pair);
                continue;
            }
            let mut plain = q.encode(pair.0);
            plain.extend(q.encode(pair.1));
            let ct = ae_enc(&self.channel_keys[&j], &plain, derive_nonce(1, self.id.0, j.0));
            out.push(self.up(1, Tag::EncShare, EncShareFrame { from: self.id, to: j, ciphertext: ct }.encode()));
        }
        Ok(out)
    }

    fn prep2(&mut self, inbox: Vec<RoundMessage>) -> Step {
        let q = self.q;
        for m in inbox.into_iter().filter(|m| m.tag == Tag::EncShare) {
            let f = EncShareFrame::decode(&m.payload)?;
            let from = PartyId::User(f.from);
            let key = self.channel_keys.get(&f.from).filter(|_| f.to == self.id && !self.held.contains_key(&f.from));
            let key = key.ok_or_else(|| AbortCause::Inconsistent(format!("unexpected share routing from {}", f.from)))?;
            let plain = ae_dec(key, &f.ciphertext).map_err(|_| AbortCause::DecryptionFailure { from })?;
            let (s, rest) = q.decode(&plain).map_err(|_| AbortCause::DecryptionFailure { from })?;
            let b = q.decode_exact(rest).map_err(|_| AbortCause::DecryptionFailure { from })?;
            self.held.insert(f.from, (s, b));
        }
        if self.held.len() != self.cfg.n {
            return Err(AbortCause::InsufficientSurvivors { have: self.held.len(), need: self.cfg.n });
        }
        Ok(Vec::new())
    }

    fn agg0(&mut self, inbox: Vec<RoundMessage>) -> Step {
        let m = single(inbox, Tag::Nonce)?;
        if m.payload.len() != NONCE_LEN {
            return Err(AbortCause::Inconsistent("nonce has the wrong length".into()));
        }
        let (group, field) = (&self.cfg.group, &self.cfg.field);
        let base = nonce_base(group, &m.payload);
        let mk = |secret: FieldElement| {
            let sig = sub_sig_with_base(group, &base, secret);
            TempKey { sz: ts_trans(group, field, &sig), sig }
        };
        let (ts, tb) = (mk(self.s), mk(self.b));
        let kp = dh_from_seed(group, &field.encode(ts.sz));
        let payload = encode_advert(group, kp.public(), None);
        let agg = self.agg.as_mut().expect("aggregation begun");
        agg.base = Some(base);
        agg.temp = Some((ts, tb));
        agg.mask_dh = Some(kp);
        Ok(vec![self.up(0, Tag::KeyAdvert, payload)])
    }

    fn agg2(&mut self, inbox: Vec<RoundMessage>) -> Step {
        let m = single(inbox, Tag::KeyBroadcast)?;
        let agg = self.agg.as_ref().expect("aggregation begun");
        let kp = agg.mask_dh.as_ref().ok_or(AbortCause::MissingBroadcast)?;
        let peers = read_key_broadcast(&self.cfg, self.id, kp.public(), &m.payload)?;
        let mut pairwise = BTreeMap::new();
        for (&j, (pk, _)) in peers.iter().filter(|(&j, _)| j != self.id) {
            pairwise.insert(j, pairwise_seed(&self.cfg.group, kp.secret(), pk)?);
        }
        let field = self.cfg.field;
        let (_, tb) = agg.temp.as_ref().expect("round 0 ran");
        let ids: BTreeSet<UserId> = peers.keys().copied().collect();
        let y = secagg::mask(&field, self.id, &agg.input, &self_seed(&field, tb.sz), &ids, &pairwise)?;
        self.agg.as_mut().expect("aggregation begun").peers = ids;
        Ok(vec![self.up(2, Tag::MaskedInput, encode_vector(&field, &y))])
    }

    fn agg3(&mut self, inbox: Vec<RoundMessage>) -> Step {
        let m = single(inbox, Tag::SurvivorList)?;
        let u3 = decode_user_list(&m.payload)?;
        let agg = self.agg.as_ref().expect("aggregation begun");
        if !u3.is_subset(&agg.peers) || u3.len() < self.cfg.t {
            return Err(AbortCause::Inconsistent("survivor list is not a large enough subset of U1".into()));
        }
        let group = &self.cfg.group;
        let base = agg.base.as_ref().expect("round 0 ran");
        let items: RecoveryItems = agg
            .peers
            .iter()
            .map(|j| {
                let (s, b) = self.held[j];
                let (kind, share) = if u3.contains(j) { (KeyKind::SelfMask, b) } else { (KeyKind::Mask, s) };
                (*j, kind, group.encode(&sub_sig_with_base(group, base, share)))
            })
            .collect();
        Ok(vec![self.up(3, Tag::SubSig, encode_recovery(Tag::SubSig, self.id, &items))])
    }

    /// Encodings of every initial share this user holds.
    pub fn held_share_encodings(&self) -> Vec<Vec<u8>> {
        self.held.values().flat_map(|(s, b)| [self.q.encode(*s), self.q.encode(*b)]).collect()
    }

    pub fn temp_keys(&self) -> Option<&(TempKey, TempKey)> {
        self.agg.as_ref().and_then(|a| a.temp.as_ref())
    }
}

impl UserParty for TskgUser {
    fn id(&self) -> UserId {
        self.id
    }

    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> Step {
        match (self.agg.is_some(), round) {
            (false, 0) => Ok(self.prep0()),
            (false, 1) => self.prep1(inbox),
            (false, 2) => self.prep2(inbox),
            (true, 0) => self.agg0(inbox),
            (true, 2) => self.agg2(inbox),
            (true, 3) => self.agg3(inbox),
            _ => Err(AbortCause::Inconsistent(format!("no round {round} in this phase"))),
        }
    }

    fn secret_encodings(&self) -> Vec<Vec<u8>> {
        let mut out = vec![self.q.encode(self.s), self.q.encode(self.b)];
        if let Some(a) = &self.agg {
            out.push(encode_vector(&self.cfg.field, &a.input));
        }
        out
    }
}

/// Routes preparation traffic; holds nothing secret.
struct PrepServer {
    cfg: Arc<ProtocolConfig>,
    sets: SurvivorSets,
}

impl ServerParty for PrepServer {
    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> std::result::Result<ServerStep, AbortCause> {
        let all = self.cfg.n;
        match round {
            0 => {
                let mut entries = BTreeMap::new();
                for m in inbox.iter().filter(|m| m.tag == Tag::KeyAdvert) {
                    if let (Some(u), Ok(_)) = (m.sender_user(), decode_advert(&self.cfg.group, &m.payload)) {
                        entries.entry(u).or_insert(KeyEntry { user: u, pk: m.payload.clone(), sig: None });
                    }
                }
                if entries.len() != all {
                    return Err(AbortCause::InsufficientSurvivors { have: entries.len(), need: all });
                }
                let u1: BTreeSet<UserId> = entries.keys().copied().collect();
                let payload = encode_key_broadcast(&entries.into_values().collect::<Vec<_>>());
                let out = u1
                    .iter()
                    .map(|&u| RoundMessage::new(0, PartyId::Server, PartyId::User(u), Tag::KeyBroadcast, payload.clone()))
                    .collect();
                self.sets.u1 = Some(u1);
                Ok(ServerStep::Send(out))
            }
            1 => {
                let mut out = Vec::new();
                let mut senders = BTreeSet::new();
                for m in inbox.into_iter().filter(|m| m.tag == Tag::EncShare) {
                    let Ok(f) = EncShareFrame::decode(&m.payload) else { continue };
                    if m.sender_user() == Some(f.from) {
                        senders.insert(f.from);
                        out.push(RoundMessage::new(1, PartyId::Server, PartyId::User(f.to), Tag::EncShare, m.payload));
                    }
                }
                if senders.len() != all {
                    return Err(AbortCause::InsufficientSurvivors { have: senders.len(), need: all });
                }
                self.sets.u2 = Some(senders);
                Ok(ServerStep::Send(out))
            }
            2 => Ok(ServerStep::Output(Vec::new())),
            _ => Err(AbortCause::Inconsistent(format!("no round {round}"))),
        }
    }

    fn survivors(&self) -> SurvivorSets {
        self.sets.clone()
    }
}

/// The server side of key recovery from sub-signatures.
struct SubSigRecovery {
    n: usize,
    nonce: Vec<u8>,
    q: FieldParams,
    cache: Arc<LagrangeCache>,
}

impl KeyRecovery for SubSigRecovery {
    fn start(&mut self) -> Vec<RoundMessage> {
        (0..self.n as u32)
            .map(|i| RoundMessage::new(0, PartyId::Server, PartyId::User(UserId(i)), Tag::Nonce, self.nonce.clone()))
            .collect()
    }

    fn shares_keys(&self) -> bool {
        false
    }

    fn response_tag(&self) -> Tag {
        Tag::SubSig
    }

    fn recover(
        &self,
        cfg: &ProtocolConfig,
        responses: &BTreeMap<UserId, RecoveryItems>,
        dropped: &BTreeSet<UserId>,
        survivors: &BTreeSet<UserId>,
    ) -> Result<Recovered> {
        let group = &cfg.group;
        let temp = |owner: UserId, kind: KeyKind| -> Result<FieldElement> {
            let subs = shares_of(responses, owner, kind)
                .map(|(h, v)| Ok((holder(&self.q, h)?, group.decode_exact(v)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let sig = reconstruct(group, &self.cache, &subs, cfg.t)?;
            Ok(ts_trans(group, &cfg.field, &sig))
        };
        let mut out = Recovered { mask_secrets: BTreeMap::new(), self_seeds: BTreeMap::new() };
        for &j in dropped {
            out.mask_secrets.insert(j, mask_secret(group, &cfg.field, temp(j, KeyKind::Mask)?));
        }
        for &i in survivors {
            out.self_seeds.insert(i, self_seed(&cfg.field, temp(i, KeyKind::SelfMask)?));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct TskgRun {
    pub result: AggregationResult,
    pub nonce: [u8; NONCE_LEN],
    /// `(s, b)` temporary keys per user that completed round 0.
    pub temp_keys: BTreeMap<UserId, (TempKey, TempKey)>,
}

/// A fixed participant set sharing its initial keys once.
pub struct Deployment {
    cfg: Arc<ProtocolConfig>,
    q: FieldParams,
    env: RunEnv,
    users: Vec<TskgUser>,
    nonce_rng: ChaCha20Rng,
    used: HashSet<[u8; NONCE_LEN]>,
    cache: Arc<LagrangeCache>,
    preparation: Option<SimOutcome>,
}

impl Deployment {
    pub fn new(cfg: &ProtocolConfig, env: &RunEnv) -> Result<Self> {
        if cfg.active() {
            return Err(Error::config("threshold-signature key generation runs in semi-honest mode only"));
        }
        let q = exponent_field(&cfg.group)?;
        let cfg = Arc::new(cfg.clone());
        let users = (0..cfg.n)
            .map(|i| TskgUser::new(UserId(i as u32), cfg.clone(), q, env.randomness.stream("user", i as u64)))
            .collect();
        Ok(Deployment {
            cfg,
            q,
            env: *env,
            users,
            nonce_rng: env.randomness.stream("nonce", 0),
            used: HashSet::new(),
            cache: Arc::new(LagrangeCache::new(q)),
            preparation: None,
        })
    }

    /// Distributes the initial shares. Every user must take part.
    pub fn prepare(&mut self) -> Result<&SimOutcome> {
        if self.preparation.is_some() {
            return Err(Error::config("preparation already ran for this deployment"));
        }
        let mut server = PrepServer { cfg: self.cfg.clone(), sets: SurvivorSets::default() };
        let opts = secagg::sim_options(PREPARATION_ROUNDS.to_vec(), &DropoutScript::none(), &self.env);
        let out = sim::run(&mut server, &mut self.users, &mut PassThrough, &opts);
        if let Some((round, cause)) = out.user_aborts.iter().next().map(|(_, v)| v.clone()).or(out.server_abort.clone()) {
            return Err(Error::Rejected(format!("preparation failed in round {round}: {cause}")));
        }
        Ok(self.preparation.insert(out))
    }

    pub fn preparation_metrics(&self) -> Option<&RunMetrics> {
        self.preparation.as_ref().map(|o| &o.metrics)
    }

    pub fn preparation_outcome(&self) -> Option<&SimOutcome> {
        self.preparation.as_ref()
    }

    /// One aggregation under a fresh server nonce.
    pub fn aggregate(&mut self, inputs: &[Vec<FieldElement>], dropout: &DropoutScript) -> Result<TskgRun> {
        let mut nonce = [0u8; NONCE_LEN];
        self.nonce_rng.fill_bytes(&mut nonce);
        self.aggregate_with_nonce(nonce, inputs, dropout)
    }

    /// One aggregation under `nonce`, which must not have been used before.
    pub fn aggregate_with_nonce(
        &mut self,
        nonce: [u8; NONCE_LEN],
        inputs: &[Vec<FieldElement>],
        dropout: &DropoutScript,
    ) -> Result<TskgRun> {
        if self.preparation.is_none() {
            return Err(Error::config("run preparation before aggregating"));
        }
        secagg::check_inputs(&self.cfg, inputs, dropout)?;
        if !self.used.insert(nonce) {
            return Err(Error::NonceReuse);
        }
        for (u, x) in self.users.iter_mut().zip(inputs) {
            u.agg = Some(Aggregation { input: x.clone(), ..Default::default() });
        }
        let recovery = SubSigRecovery { n: self.cfg.n, nonce: nonce.to_vec(), q: self.q, cache: self.cache.clone() };
        let mut server = SecAggServer::new(self.cfg.clone(), Box::new(recovery));
        let opts = secagg::sim_options(AGGREGATION_ROUNDS.to_vec(), dropout, &self.env);
        let outcome = sim::run(&mut server, &mut self.users, &mut PassThrough, &opts);
        let temp_keys = self.users.iter().filter_map(|u| u.temp_keys().map(|k| (u.id, k.clone()))).collect();
        let result = secagg::finish(&self.cfg, inputs, outcome)?;
        Ok(TskgRun { result, nonce, temp_keys })
    }

    /// Encodings of every initial share held by any user.
    pub fn initial_share_encodings(&self) -> Vec<Vec<u8>> {
        self.users.iter().flat_map(|u| u.held_share_encodings()).collect()
    }

    pub fn exponent_field(&self) -> &FieldParams {
        &self.q
    }

    /// Direct `(s_i, b_i)` temporary keys for `nonce`, computed from the
    /// simulator's knowledge of every secret.
    pub fn direct_temp_keys(&self, nonce: &[u8]) -> BTreeMap<UserId, (TempKey, TempKey)> {
        let (g, f) = (&self.cfg.group, &self.cfg.field);
        self.users
            .iter()
            .map(|u| (u.id, (super::temp_key(g, f, u.s, nonce), super::temp_key(g, f, u.b, nonce))))
            .collect()
    }
}
