//! Round-barrier simulator. Each round, every live user steps on its inbox,
//! the server steps on everything the users sent, and the server's replies
//! become the next round's inboxes. Dropouts and adversarial rewriting are
//! applied at the barrier, so scheduling never affects the transcript.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::metrics::{RoundTiming, RunMetrics};
use crate::algebra::FieldElement;
use crate::counters::{measure, OpCounts};
use crate::party::{PartyId, UserId};
use crate::primitives::{ds_verify, BulletinBoard};
use crate::protocol::message::{AbortCause, RoundMessage};

pub trait UserParty: Send {
    fn id(&self) -> UserId;

    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> Result<Vec<RoundMessage>, AbortCause>;

    /// Canonical encodings of values that must never reach the server in the
    /// clear. Used by transcript audits.
    fn secret_encodings(&self) -> Vec<Vec<u8>> {
        Vec::new()
    }
}

impl<T: UserParty + ?Sized> UserParty for Box<T> {
    fn id(&self) -> UserId {
        (**self).id()
    }

    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> Result<Vec<RoundMessage>, AbortCause> {
        (**self).step(round, inbox)
    }

    fn secret_encodings(&self) -> Vec<Vec<u8>> {
        (**self).secret_encodings()
    }
}

pub enum ServerStep {
    Send(Vec<RoundMessage>),
    Output(Vec<FieldElement>),
}

/// Survivor sets in the order the server forms them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurvivorSets {
    pub u1: Option<BTreeSet<UserId>>,
    pub u2: Option<BTreeSet<UserId>>,
    pub u3: Option<BTreeSet<UserId>>,
    pub u4: Option<BTreeSet<UserId>>,
    pub u5: Option<BTreeSet<UserId>>,
}

impl SurvivorSets {
    pub fn chain(&self) -> Vec<&BTreeSet<UserId>> {
        [&self.u1, &self.u2, &self.u3, &self.u4, &self.u5].into_iter().flatten().collect()
    }

    /// Each formed set is contained in the previous one.
    pub fn is_monotone(&self) -> bool {
        self.chain().windows(2).all(|w| w[1].is_subset(w[0]))
    }
}

pub trait ServerParty: Send {
    /// Messages sent before the first round, such as a fresh nonce.
    fn start(&mut self) -> Result<Vec<RoundMessage>, AbortCause> {
        Ok(Vec::new())
    }

    fn step(&mut self, round: u8, inbox: Vec<RoundMessage>) -> Result<ServerStep, AbortCause>;

    fn survivors(&self) -> SurvivorSets;
}

/// Rewrites traffic at the barrier. Used by adversary scenarios.
pub trait Interceptor: Send {
    fn user_out(&mut self, _round: u8, _msgs: &mut Vec<RoundMessage>) {}
    fn server_out(&mut self, _round: u8, _msgs: &mut Vec<RoundMessage>) {}
}

pub struct PassThrough;

impl Interceptor for PassThrough {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub round: u8,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub tag: &'static str,
    pub bytes: usize,
    pub valid_sig: Option<bool>,
    pub delivered: bool,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub const HEADER: &'static str = "round,sender,receiver,tag,bytes,valid_sig";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for e in &self.entries {
            let sig = match e.valid_sig {
                Some(true) => "1",
                Some(false) => "0",
                None => "-",
            };
            let _ = writeln!(s, "{},{},{},{},{},{}", e.round, e.sender, e.receiver, e.tag, e.bytes, sig);
        }
        s
    }

    pub fn received_by(&self, p: PartyId) -> impl Iterator<Item = &TranscriptEntry> {
        self.entries.iter().filter(move |e| e.receiver == p && e.delivered)
    }

    /// Whether any payload delivered to `p` contains `needle`.
    pub fn leaks_to(&self, p: PartyId, needle: &[u8]) -> bool {
        !needle.is_empty() && self.received_by(p).any(|e| e.payload.windows(needle.len()).any(|w| w == needle))
    }
}

#[derive(Clone, Default)]
pub struct SimOptions {
    /// Protocol round numbers, in order.
    pub rounds: Vec<u8>,
    /// User -> first round at which it no longer acts.
    pub dropouts: BTreeMap<UserId, u8>,
    pub parallel: bool,
    /// Injected per-hop latency.
    pub latency: Duration,
    /// Used only to annotate the transcript with signature validity.
    pub board: Option<Arc<BulletinBoard>>,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub output: Option<Vec<FieldElement>>,
    pub server_abort: Option<(u8, AbortCause)>,
    pub user_aborts: BTreeMap<UserId, (u8, AbortCause)>,
    pub survivors: SurvivorSets,
    pub metrics: RunMetrics,
    pub transcript: Transcript,
    pub secrets: BTreeMap<UserId, Vec<Vec<u8>>>,
}

impl SimOutcome {
    pub fn succeeded(&self) -> bool {
        self.output.is_some()
    }
}

struct Engine<'a> {
    opts: &'a SimOptions,
    metrics: RunMetrics,
    transcript: Transcript,
    aborted: BTreeMap<UserId, (u8, AbortCause)>,
}

impl Engine<'_> {
    fn active(&self, u: UserId, round: u8) -> bool {
        !self.aborted.contains_key(&u) && self.opts.dropouts.get(&u).is_none_or(|&r| round < r)
    }

    fn log(&mut self, m: &RoundMessage, delivered: bool) {
        let bytes = m.bytes() as u64;
        let s = self.metrics.party_mut(m.sender);
        s.bytes_sent += bytes;
        s.messages_sent += 1;
        if delivered {
            self.metrics.party_mut(m.receiver).bytes_received += bytes;
        } else {
            self.metrics.bytes_undelivered += bytes;
        }
        let valid_sig = match (&m.signature, &self.opts.board) {
            (Some(sig), Some(board)) => {
                Some(board.lookup(m.sender).is_ok_and(|pk| ds_verify(sig.as_bytes(), &pk, &m.payload)))
            }
            (Some(_), None) => None,
            (None, _) => None,
        };
        self.transcript.entries.push(TranscriptEntry {
            round: m.round,
            sender: m.sender,
            receiver: m.receiver,
            tag: m.tag.name(),
            bytes: m.bytes(),
            valid_sig,
            delivered,
            payload: m.payload.clone(),
        });
    }

    /// Delivers server messages into the inboxes for `next_round`.
    fn deliver_down(&mut self, msgs: Vec<RoundMessage>, next_round: Option<u8>) -> BTreeMap<UserId, Vec<RoundMessage>> {
        let mut inbox: BTreeMap<UserId, Vec<RoundMessage>> = BTreeMap::new();
        for m in msgs {
            let to = m.receiver.user();
            let ok = match (to, next_round) {
                (Some(u), Some(r)) => self.active(u, r),
                _ => false,
            };
            self.log(&m, ok);
            if ok {
                inbox.entry(to.expect("user receiver")).or_default().push(m);
            }
        }
        inbox
    }
}

pub fn run<U: UserParty>(
    server: &mut dyn ServerParty,
    users: &mut [U],
    interceptor: &mut dyn Interceptor,
    opts: &SimOptions,
) -> SimOutcome {
    let started = Instant::now();
    let mut eng = Engine { opts, metrics: RunMetrics::default(), transcript: Transcript::default(), aborted: BTreeMap::new() };
    let mut output = None;
    let mut server_abort = None;
    eng.metrics.party_mut(PartyId::Server);
    for u in users.iter() {
        eng.metrics.party_mut(PartyId::User(u.id()));
    }

    let first = opts.rounds.first().copied();
    let (prelude, c) = measure(|| server.start());
    eng.metrics.party_mut(PartyId::Server).ops += c;
    let mut inbox = match prelude {
        Ok(mut msgs) => {
            if let Some(r) = first {
                interceptor.server_out(r, &mut msgs);
            }
            if !msgs.is_empty() {
                eng.metrics.virtual_latency += opts.latency;
            }
            eng.deliver_down(msgs, first)
        }
        Err(cause) => {
            server_abort = Some((first.unwrap_or(0), cause));
            BTreeMap::new()
        }
    };

    for (pos, &round) in opts.rounds.iter().enumerate() {
        if server_abort.is_some() {
            break;
        }
        let next = opts.rounds.get(pos + 1).copied();

        let live: BTreeSet<UserId> = users.iter().map(|u| u.id()).filter(|&u| eng.active(u, round)).collect();
        let step_one = |u: &mut U, inbox: Vec<RoundMessage>| {
            let t0 = Instant::now();
            let (res, c) = measure(|| u.step(round, inbox));
            (u.id(), res, c, t0.elapsed())
        };
        let mut jobs: Vec<(&mut U, Vec<RoundMessage>)> = users
            .iter_mut()
            .filter(|u| live.contains(&u.id()))
            .map(|u| {
                let id = u.id();
                (u, inbox.remove(&id).unwrap_or_default())
            })
            .collect();
        type StepResult = (UserId, Result<Vec<RoundMessage>, AbortCause>, OpCounts, Duration);
        let results: Vec<StepResult> = if opts.parallel {
            jobs.par_iter_mut().map(|(u, ib)| step_one(u, std::mem::take(ib))).collect()
        } else {
            jobs.iter_mut().map(|(u, ib)| step_one(u, std::mem::take(ib))).collect()
        };

        let mut up = Vec::new();
        let mut user_max = Duration::ZERO;
        for (id, res, c, dt) in results {
            eng.metrics.party_mut(PartyId::User(id)).ops += c;
            user_max = user_max.max(dt);
            match res {
                Ok(msgs) => up.extend(msgs),
                Err(cause) => {
                    eng.aborted.insert(id, (round, cause));
                }
            }
        }
        interceptor.user_out(round, &mut up);
        if !up.is_empty() {
            eng.metrics.virtual_latency += opts.latency;
        }
        for m in &up {
            eng.log(m, m.receiver == PartyId::Server);
        }
        up.retain(|m| m.receiver == PartyId::Server);

        let t0 = Instant::now();
        let (res, c) = measure(|| server.step(round, up));
        let server_time = t0.elapsed();
        eng.metrics.party_mut(PartyId::Server).ops += c;
        eng.metrics.rounds.push(RoundTiming { round, server: server_time, user_max });
        match res {
            Err(cause) => server_abort = Some((round, cause)),
            Ok(ServerStep::Output(v)) => {
                output = Some(v);
                break;
            }
            Ok(ServerStep::Send(mut msgs)) => {
                interceptor.server_out(round, &mut msgs);
                if !msgs.is_empty() {
                    eng.metrics.virtual_latency += opts.latency;
                }
                inbox = eng.deliver_down(msgs, next);
            }
        }
    }
    if output.is_none() && server_abort.is_none() {
        server_abort = Some((
            opts.rounds.last().copied().unwrap_or(0),
            AbortCause::Inconsistent("server produced no output".into()),
        ));
    }

    eng.metrics.wall = started.elapsed();
    let secrets = users.iter().map(|u| (u.id(), u.secret_encodings())).collect();
    SimOutcome {
        output,
        server_abort,
        user_aborts: eng.aborted,
        survivors: server.survivors(),
        metrics: eng.metrics,
        transcript: eng.transcript,
        secrets,
    }
}
