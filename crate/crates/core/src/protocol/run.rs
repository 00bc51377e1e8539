use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use super::backend::{AdditiveMask, MaskBackend};
use super::config::{corruption_bound, ProtocolConfig};
use super::server::{AhServer, ServerIdentity};
use super::split_view::{SplitPlan, SplitReport};
use super::user::{AhUser, Identity};
use crate::algebra::FieldElement;
use crate::error::{Error, Result};
use crate::harness::scripts::{AdversaryScript, DropoutScript, ForgeKey, TamperCiphertext, Withhold};
use crate::harness::sim::{self, Interceptor, PassThrough, SimOptions, SimOutcome, UserParty};
use crate::masking::add_vectors;
use crate::party::{PartyId, UserId};
use crate::primitives::{BulletinBoard, Registration, SigKeyPair};
use crate::rng::RandomnessSource;

/// Execution knobs that do not change the protocol.
#[derive(Debug, Clone, Copy)]
pub struct RunEnv {
    pub randomness: RandomnessSource,
    pub latency: Duration,
    pub parallel: bool,
}

impl RunEnv {
    pub fn seeded(seed: u64) -> Self {
        RunEnv { randomness: RandomnessSource::Seeded(seed), latency: Duration::ZERO, parallel: false }
    }
}

impl Default for RunEnv {
    fn default() -> Self {
        RunEnv::seeded(0)
    }
}

#[derive(Debug, Clone)]
pub struct AggregationResult {
    pub outcome: SimOutcome,
    /// Plain sum of the inputs of `U3`, when `U3` was formed.
    pub expected: Option<Vec<FieldElement>>,
    pub notes: Vec<String>,
    pub split: Option<SplitReport>,
}

impl AggregationResult {
    pub fn output(&self) -> Option<&[FieldElement]> {
        self.outcome.output.as_deref()
    }

    pub fn matches_oracle(&self) -> bool {
        matches!((&self.outcome.output, &self.expected), (Some(a), Some(b)) if a == b)
    }
}

/// Sum of `inputs[u]` over `set`.
pub fn plain_sum(field: &crate::algebra::FieldParams, m: usize, inputs: &[Vec<FieldElement>], set: &BTreeSet<UserId>) -> Result<Vec<FieldElement>> {
    add_vectors(field, m, set.iter().map(|u| inputs[u.index()].as_slice()))
}

pub(crate) struct Pki {
    pub board: Arc<BulletinBoard>,
    pub server: SigKeyPair,
    pub users: Vec<SigKeyPair>,
}

pub(crate) fn setup_pki(n: usize, env: &RunEnv) -> Result<Pki> {
    let board = Arc::new(BulletinBoard::new());
    let server = SigKeyPair::generate(&mut env.randomness.stream("sig", PartyId::Server.wire_id() as u64));
    board.register(&Registration::new(PartyId::Server, &server))?;
    let mut users = Vec::with_capacity(n);
    for i in 0..n as u32 {
        let k = SigKeyPair::generate(&mut env.randomness.stream("sig", i as u64));
        board.register(&Registration::new(PartyId::User(UserId(i)), &k))?;
        users.push(k);
    }
    Ok(Pki { board, server, users })
}

fn replay_registration(pki: &Pki, victim: UserId, env: &RunEnv) -> Vec<String> {
    let attacker = SigKeyPair::generate(&mut env.randomness.stream("attacker-sig", victim.0 as u64));
    let fresh = Registration::new(PartyId::User(victim), &attacker);
    let mut notes = Vec::new();
    match pki.board.register(&fresh) {
        Err(e) => notes.push(format!("second registration for {victim} rejected: {e}")),
        Ok(()) => notes.push(format!("second registration for {victim} ACCEPTED")),
    }
    // The victim's own proof replayed with the attacker's key.
    let honest = Registration::new(PartyId::User(victim), &pki.users[victim.index()]);
    let spliced = Registration { key: attacker.public(), ..honest };
    match pki.board.register(&spliced) {
        Err(e) => notes.push(format!("replayed proof for {victim} rejected: {e}")),
        Ok(()) => notes.push(format!("replayed proof for {victim} ACCEPTED")),
    }
    notes
}

/// Users shown the alternative list, and the colluder set. Colluders are the
/// highest ids other than the victim; the remaining honest users alternate.
fn split_plan(cfg: &ProtocolConfig, victim: UserId, colluders: usize, pki: &Pki) -> SplitPlan {
    let c = colluders.min(corruption_bound(cfg.n)).min(cfg.n - 1);
    let others: Vec<UserId> = (0..cfg.n as u32).rev().map(UserId).filter(|&u| u != victim).collect();
    let colluders: std::collections::BTreeMap<UserId, SigKeyPair> =
        others.iter().take(c).map(|&u| (u, pki.users[u.index()].clone())).collect();
    let group_b = others.iter().skip(c).enumerate().filter(|(k, _)| k % 2 == 0).map(|(_, &u)| u).collect();
    SplitPlan { victim, group_b, colluders }
}

/// Runs the round-based masked aggregation with the given mask backend.
pub fn run_with_backend(
    cfg: Arc<ProtocolConfig>,
    backend: Arc<dyn MaskBackend>,
    inputs: &[Vec<FieldElement>],
    dropout: &DropoutScript,
    adversary: Option<&AdversaryScript>,
    env: &RunEnv,
) -> Result<AggregationResult> {
    if inputs.len() != cfg.n {
        return Err(Error::config(format!("expected {} input vectors, got {}", cfg.n, inputs.len())));
    }
    let m = backend.vector_len();
    if let Some(bad) = inputs.iter().position(|x| x.len() != m) {
        return Err(Error::config(format!("input {bad} has length {}, expected {m}", inputs[bad].len())));
    }
    if let Some(&v) = dropout.victims.iter().find(|v| v.index() >= cfg.n) {
        return Err(Error::config(format!("dropout victim {v} is not a user")));
    }
    if let Some(a) = adversary {
        if a.needs_active_mode() && !cfg.active() {
            return Err(Error::config(format!("scenario {a} requires active mode")));
        }
        let victim = match *a {
            AdversaryScript::ForgeSignature { victim }
            | AdversaryScript::SplitView { victim, .. }
            | AdversaryScript::ReplayRegistration { victim }
            | AdversaryScript::WithholdBroadcast { victim } => Some(victim),
            AdversaryScript::TamperCiphertext => None,
        };
        if victim.is_some_and(|v| v.index() >= cfg.n) {
            return Err(Error::config(format!("scenario {a} names a victim outside the user set")));
        }
    }

    let pki = if cfg.active() { Some(setup_pki(cfg.n, env)?) } else { None };
    let mut notes = Vec::new();
    if let (Some(AdversaryScript::ReplayRegistration { victim }), Some(p)) = (adversary, &pki) {
        notes.extend(replay_registration(p, *victim, env));
    }

    let mut users: Vec<Box<dyn UserParty>> = (0..cfg.n)
        .map(|i| {
            let id = UserId(i as u32);
            let identity = pki.as_ref().map(|p| Identity { keys: p.users[i].clone(), board: p.board.clone() });
            let rng = env.randomness.stream("user", i as u64);
            Box::new(AhUser::new(id, cfg.clone(), backend.clone(), inputs[i].clone(), rng, identity)) as Box<dyn UserParty>
        })
        .collect();
    let server_id = pki.as_ref().map(|p| ServerIdentity { keys: p.server.clone(), board: p.board.clone() });
    let mut server = AhServer::new(cfg.clone(), backend.clone(), server_id);
    if let (Some(AdversaryScript::SplitView { victim, colluders }), Some(p)) = (adversary, &pki) {
        server = server.with_split(split_plan(&cfg, *victim, *colluders, p));
    }

    let mut interceptor: Box<dyn Interceptor> = match adversary {
        Some(AdversaryScript::ForgeSignature { victim }) => Box::new(ForgeKey::new(*victim, &cfg.group, seed_of(env))),
        Some(AdversaryScript::TamperCiphertext) => Box::new(TamperCiphertext),
        Some(AdversaryScript::WithholdBroadcast { victim }) => Box::new(Withhold { victim: *victim }),
        _ => Box::new(PassThrough),
    };
    let opts = SimOptions {
        rounds: cfg.rounds(),
        dropouts: dropout.victims.iter().map(|&v| (v, dropout.round)).collect(),
        parallel: env.parallel,
        latency: env.latency,
        board: pki.as_ref().map(|p| p.board.clone()),
    };
    let outcome = sim::run(&mut server, &mut users, interceptor.as_mut(), &opts);

    let expected = match &outcome.survivors.u3 {
        Some(u3) => Some(plain_sum(backend.output_field(), m, inputs, u3)?),
        None => None,
    };
    Ok(AggregationResult { outcome, expected, notes, split: server.split_report().cloned() })
}

fn seed_of(env: &RunEnv) -> u64 {
    match env.randomness {
        RandomnessSource::Seeded(s) => s,
        RandomnessSource::Os => rand::random(),
    }
}

/// The additive-mask protocol end to end.
pub fn run_aggregation(
    cfg: &ProtocolConfig,
    inputs: &[Vec<FieldElement>],
    dropout: &DropoutScript,
    adversary: Option<&AdversaryScript>,
    env: &RunEnv,
) -> Result<AggregationResult> {
    let backend = Arc::new(AdditiveMask { field: cfg.field, params: cfg.mask });
    run_with_backend(Arc::new(cfg.clone()), backend, inputs, dropout, adversary, env)
}
