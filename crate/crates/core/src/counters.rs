//! Exact operation counters.
//!
//! Instrumented call sites (group exponentiation, key agreement, PRG expansion,
//! Shamir sharing and reconstruction, ...) bump a thread-local [`OpCounts`].
//! The simulator wraps every party step in [`measure`] so counts are attributed
//! to the party that performed the work, including when steps run on a worker
//! pool.

use std::cell::Cell;
use std::ops::{Add, AddAssign};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpCounts {
    /// Every group exponentiation, whatever its purpose.
    pub modexp: u64,
    /// Exponentiations performed inside key agreement.
    pub modexp_agreement: u64,
    /// Exponentiations performed while generating key pairs.
    pub modexp_setup: u64,
    pub group_inversions: u64,
    /// Field elements produced by PRG expansion.
    pub prg_element_expansions: u64,
    pub shamir_sharings: u64,
    pub shamir_reconstructions: u64,
    /// Online field multiplications at the masking and interpolation sites.
    pub field_mults: u64,
    pub bsgs_steps: u64,
}

impl OpCounts {
    /// Sum of all counters except the purpose-tagged modexp breakdowns, which are
    /// already contained in `modexp`.
    pub fn total_operations(&self) -> u64 {
        self.modexp
            + self.group_inversions
            + self.prg_element_expansions
            + self.shamir_sharings
            + self.shamir_reconstructions
            + self.field_mults
            + self.bsgs_steps
    }
}

impl Add for OpCounts {
    type Output = OpCounts;

    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            modexp: self.modexp + o.modexp,
            modexp_agreement: self.modexp_agreement + o.modexp_agreement,
            modexp_setup: self.modexp_setup + o.modexp_setup,
            group_inversions: self.group_inversions + o.group_inversions,
            prg_element_expansions: self.prg_element_expansions + o.prg_element_expansions,
            shamir_sharings: self.shamir_sharings + o.shamir_sharings,
            shamir_reconstructions: self.shamir_reconstructions + o.shamir_reconstructions,
            field_mults: self.field_mults + o.field_mults,
            bsgs_steps: self.bsgs_steps + o.bsgs_steps,
        }
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, o: OpCounts) {
        *self = *self + o;
    }
}

thread_local! {
    static COUNTS: Cell<OpCounts> = Cell::new(OpCounts::default());
}

pub(crate) fn record(f: impl FnOnce(&mut OpCounts)) {
    COUNTS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

/// Current thread's running totals.
pub fn snapshot() -> OpCounts {
    COUNTS.with(|c| c.get())
}

/// Runs `f` and returns the operations it performed on this thread. Nested calls
/// are transparent: the outer scope still sees the inner work.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let saved = COUNTS.with(|c| c.replace(OpCounts::default()));
    let out = f();
    let delta = COUNTS.with(|c| c.replace(OpCounts::default()));
    COUNTS.with(|c| c.set(saved + delta));
    (out, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_measure_accumulates() {
        let (_, outer) = measure(|| {
            record(|c| c.modexp += 2);
            let (_, inner) = measure(|| record(|c| c.modexp += 3));
            assert_eq!(inner.modexp, 3);
        });
        assert_eq!(outer.modexp, 5);
    }
}
