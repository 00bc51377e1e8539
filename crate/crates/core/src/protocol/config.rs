use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::algebra::{FieldParams, GroupParams};
use crate::error::{Error, Result};
use crate::masking::{MaskParams, MAX_INPUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    SemiHonest,
    ActiveAdversary,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi-honest" | "semihonest" | "semi_honest" => Ok(Mode::SemiHonest),
            "active" | "active-adversary" | "active_adversary" => Ok(Mode::ActiveAdversary),
            other => Err(Error::config(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SemiHonest => "semi-honest",
            Mode::ActiveAdversary => "active",
        })
    }
}

/// Smallest threshold accepted against an active adversary: `floor(2n/3) + 1`.
pub fn active_threshold(n: usize) -> usize {
    2 * n / 3 + 1
}

/// Largest number of corrupted parties the active threshold is meant to
/// tolerate: `ceil(n/3) + 1`.
pub fn corruption_bound(n: usize) -> usize {
    n.div_ceil(3) + 1
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub n: usize,
    pub t: usize,
    pub mode: Mode,
    pub field: FieldParams,
    pub group: Arc<GroupParams>,
    pub mask: MaskParams,
}

impl ProtocolConfig {
    pub fn new(n: usize, t: usize, mode: Mode, field: FieldParams, group: Arc<GroupParams>, mask: MaskParams) -> Result<Self> {
        if n < 3 {
            return Err(Error::config("need at least 3 users"));
        }
        if t <= 1 || t >= n {
            return Err(Error::config(format!("threshold {t} must satisfy 1 < t < n = {n}")));
        }
        if mode == Mode::ActiveAdversary && t < active_threshold(n) {
            return Err(Error::config(format!(
                "active mode needs t >= floor(2n/3) + 1 = {}, got {t}",
                active_threshold(n)
            )));
        }
        let max_sum = n as u128 * MAX_INPUT as u128;
        if (field.modulus() as u128) <= max_sum {
            return Err(Error::config(format!("field modulus must exceed n (2^32 - 1) = {max_sum}")));
        }
        Ok(ProtocolConfig { n, t, mode, field, group, mask })
    }

    /// Round numbers executed in this mode.
    pub fn rounds(&self) -> Vec<u8> {
        match self.mode {
            Mode::SemiHonest => vec![0, 1, 2, 4],
            Mode::ActiveAdversary => vec![0, 1, 2, 3, 4],
        }
    }

    pub fn active(&self) -> bool {
        self.mode == Mode::ActiveAdversary
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, t: usize, mode: Mode) -> Result<ProtocolConfig> {
        let f = FieldParams::default();
        ProtocolConfig::new(n, t, mode, f, Arc::new(GroupParams::desk()), MaskParams::new(&f, 7, 4).unwrap())
    }

    #[test]
    fn thresholds() {
        assert!(cfg(5, 3, Mode::SemiHonest).is_ok());
        assert!(cfg(5, 1, Mode::SemiHonest).is_err());
        assert!(cfg(5, 5, Mode::SemiHonest).is_err());
        assert_eq!(active_threshold(9), 7);
        assert!(cfg(9, 6, Mode::ActiveAdversary).is_err());
        assert!(cfg(9, 7, Mode::ActiveAdversary).is_ok());
        assert!(cfg(3, 3, Mode::ActiveAdversary).is_err());
    }

    #[test]
    fn field_must_hold_the_sum() {
        let f = FieldParams::new(4_294_967_311).unwrap(); // smallest prime above 2^32
        let r = ProtocolConfig::new(3, 2, Mode::SemiHonest, f, Arc::new(GroupParams::desk()), MaskParams::new(&f, 7, 4).unwrap());
        assert!(r.is_err());
    }

    #[test]
    fn corruption_bound_values() {
        assert_eq!(corruption_bound(6), 3);
        assert_eq!(corruption_bound(7), 4);
        assert_eq!(corruption_bound(15), 6);
    }
}
