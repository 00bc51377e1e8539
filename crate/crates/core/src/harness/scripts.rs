//! Scripted dropouts and adversarial behavior.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::sim::Interceptor;
use crate::algebra::GroupParams;
use crate::error::{Error, Result};
use crate::party::UserId;
use crate::primitives::{dh_gen, ds_sign, SigKeyPair};
use crate::protocol::frames::{decode_key_broadcast, encode_key_broadcast};
use crate::protocol::message::{RoundMessage, Tag};
use crate::rng::seeded_stream;

/// Victims stop acting at `round` and never send again.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropoutScript {
    pub round: u8,
    pub victims: BTreeSet<UserId>,
}

impl DropoutScript {
    pub fn none() -> Self {
        DropoutScript::default()
    }

    pub fn at(round: u8, victims: impl IntoIterator<Item = UserId>) -> Self {
        DropoutScript { round, victims: victims.into_iter().collect() }
    }

    /// `floor(rate * n)` victims chosen by a seeded shuffle.
    pub fn from_rate(n: usize, round: u8, rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate {rate} outside [0, 1]")));
        }
        if round > 4 {
            return Err(Error::config(format!("dropout round {round} outside 0..=4")));
        }
        let k = (rate * n as f64 + 1e-9).floor() as usize;
        let mut ids: Vec<u32> = (0..n as u32).collect();
        ids.shuffle(&mut seeded_stream(seed, "dropout", round as u64));
        Ok(DropoutScript::at(round, ids.into_iter().take(k).map(UserId)))
    }

    pub fn len(&self) -> usize {
        self.victims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.victims.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryScript {
    /// The server swaps the victim's advertised key for one it controls and
    /// signs it with a key that is not the victim's.
    ForgeSignature { victim: UserId },
    /// The server flips a bit in one routed ciphertext per receiver.
    TamperCiphertext,
    /// The server shows `U3 \ {victim}` to part of the honest users, with
    /// `colluders` corrupted users signing both lists.
    SplitView { victim: UserId, colluders: usize },
    /// An attacker tries to register its own key under the victim's identity.
    ReplayRegistration { victim: UserId },
    /// The server withholds the key broadcast from the victim.
    WithholdBroadcast { victim: UserId },
}

impl AdversaryScript {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryScript::ForgeSignature { .. } => "forge-signature",
            AdversaryScript::TamperCiphertext => "tamper-ciphertext",
            AdversaryScript::SplitView { .. } => "split-view",
            AdversaryScript::ReplayRegistration { .. } => "replay-registration",
            AdversaryScript::WithholdBroadcast { .. } => "withhold-broadcast",
        }
    }

    /// Scenarios that rely on signatures and the PKI.
    pub fn needs_active_mode(&self) -> bool {
        !matches!(self, AdversaryScript::TamperCiphertext | AdversaryScript::WithholdBroadcast { .. })
    }
}

impl fmt::Display for AdversaryScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `name` or `name:victim`; split-view takes `split-view:victim:colluders`.
/// `none` parses to `None`.
pub fn parse_adversary(s: &str) -> Result<Option<AdversaryScript>> {
    let mut parts = s.split(':');
    let name = parts.next().unwrap_or_default().trim();
    let mut num = |default: u32| -> Result<u32> {
        match parts.next() {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|_| Error::config(format!("bad adversary parameter '{v}'"))),
        }
    };
    let a = match name {
        "" | "none" => return Ok(None),
        "forge-signature" => AdversaryScript::ForgeSignature { victim: UserId(num(0)?) },
        "tamper-ciphertext" => AdversaryScript::TamperCiphertext,
        "split-view" => {
            let victim = UserId(num(0)?);
            AdversaryScript::SplitView { victim, colluders: num(u32::MAX)? as usize }
        }
        "replay-registration" => AdversaryScript::ReplayRegistration { victim: UserId(num(0)?) },
        "withhold-broadcast" => AdversaryScript::WithholdBroadcast { victim: UserId(num(0)?) },
        other => return Err(Error::config(format!("unknown adversary scenario '{other}'"))),
    };
    Ok(Some(a))
}

impl FromStr for AdversaryScript {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_adversary(s)?.ok_or_else(|| Error::config("expected an adversary scenario"))
    }
}

pub(crate) struct ForgeKey {
    victim: UserId,
    pk: Vec<u8>,
    attacker: SigKeyPair,
}

impl ForgeKey {
    pub(crate) fn new(victim: UserId, group: &GroupParams, seed: u64) -> Self {
        let mut rng = seeded_stream(seed, "attacker", victim.0 as u64);
        let pk = group.encode(dh_gen(group, &mut rng).public());
        ForgeKey { victim, pk, attacker: SigKeyPair::generate(&mut rng) }
    }
}

impl Interceptor for ForgeKey {
    fn server_out(&mut self, round: u8, msgs: &mut Vec<RoundMessage>) {
        if round != 0 {
            return;
        }
        for m in msgs.iter_mut().filter(|m| m.tag == Tag::KeyBroadcast) {
            let Ok(mut entries) = decode_key_broadcast(&m.payload) else { continue };
            for e in entries.iter_mut().filter(|e| e.user == self.victim) {
                e.pk = self.pk.clone();
                e.sig = Some(ds_sign(&self.attacker, &self.pk));
            }
            m.payload = encode_key_broadcast(&entries);
        }
    }
}

pub(crate) struct TamperCiphertext;

impl Interceptor for TamperCiphertext {
    fn server_out(&mut self, round: u8, msgs: &mut Vec<RoundMessage>) {
        if round != 1 {
            return;
        }
        let mut hit = BTreeSet::new();
        for m in msgs.iter_mut().filter(|m| m.tag == Tag::EncShare) {
            if hit.insert(m.receiver) {
                if let Some(b) = m.payload.last_mut() {
                    *b ^= 1;
                }
            }
        }
    }
}

pub(crate) struct Withhold {
    pub(crate) victim: UserId,
}

impl Interceptor for Withhold {
    fn server_out(&mut self, round: u8, msgs: &mut Vec<RoundMessage>) {
        if round == 0 {
            msgs.retain(|m| m.receiver.user() != Some(self.victim));
        }
    }
}
