pub mod algebra;
pub mod baselines;
pub mod counters;
pub mod error;
pub mod harness;
pub mod masking;
pub mod party;
pub mod primitives;
pub mod protocol;
pub mod rng;
pub mod sss;
pub mod tskg;

pub use error::{Error, Result};
pub use party::{PartyId, UserId};
