//! A corrupted server showing different survivor lists to different users,
//! plus the exhaustive counting check over all honest splits.

use std::collections::{BTreeMap, BTreeSet};

use super::config::{active_threshold, corruption_bound};
use crate::party::UserId;
use crate::primitives::SigKeyPair;

/// Server-side plan: users in `group_b` receive `U3 \ {victim}`, everyone
/// else the true `U3`. Colluders' signing keys let the server sign both lists
/// on their behalf.
pub struct SplitPlan {
    pub victim: UserId,
    pub group_b: BTreeSet<UserId>,
    pub colluders: BTreeMap<UserId, SigKeyPair>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitReport {
    /// Valid list signatures gathered for `[U3, U3 \ {victim}]`.
    pub signatures: [usize; 2],
    /// Whether the echo for each list was sent (the list reached `t`).
    pub echoed: [bool; 2],
    /// Share-sums received per list.
    pub share_sums: [usize; 2],
    /// Whether the server could reconstruct the key sum of each list,
    /// counting colluders as able to supply a share-sum for either list.
    pub reconstructible: [bool; 2],
}

impl SplitReport {
    /// Both sums known means the victim's key is their difference.
    pub fn victim_exposed(&self) -> bool {
        self.reconstructible[0] && self.reconstructible[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounterexample {
    pub n: usize,
    pub t: usize,
    pub colluders: usize,
    /// Honest users shown each list.
    pub sizes: [usize; 2],
}

#[derive(Debug, Clone, Default)]
pub struct SplitCheck {
    pub cases: u64,
    pub counterexamples: Vec<SplitCounterexample>,
}

impl SplitCheck {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Every split of the `n - c` honest users into two views, for every
/// `c <= max_colluders(n)`. A list gathers the signatures of its honest
/// viewers plus all colluders; the property fails when both lists reach `t`.
pub fn exhaustive_split_check(ns: impl IntoIterator<Item = usize>, max_colluders: impl Fn(usize) -> usize) -> SplitCheck {
    let mut out = SplitCheck::default();
    for n in ns {
        let t = active_threshold(n);
        for c in 0..=max_colluders(n).min(n) {
            let honest = n - c;
            let mut seen = BTreeSet::new();
            for mask in 0u64..(1u64 << honest) {
                out.cases += 1;
                let a = mask.count_ones() as usize;
                let b = honest - a;
                if a + c >= t && b + c >= t && seen.insert(a) {
                    out.counterexamples.push(SplitCounterexample { n, t, colluders: c, sizes: [a, b] });
                }
            }
        }
    }
    out
}

/// The check at the declared corruption bound.
pub fn check_at_corruption_bound() -> SplitCheck {
    exhaustive_split_check(6..=15, corruption_bound)
}
