//! The round-based aggregation protocol: users, server, and orchestration.

pub mod backend;
pub mod config;
pub mod frames;
pub mod message;
mod run;
pub mod server;
pub mod split_view;
pub mod user;

pub use backend::{AdditiveMask, MaskBackend};
pub use config::{active_threshold, corruption_bound, Mode, ProtocolConfig};
pub use message::{AbortCause, RoundMessage, Tag};
pub use run::{plain_sum, run_aggregation, run_with_backend, AggregationResult, RunEnv};

use crate::algebra::FieldParams;
use crate::error::Result;
use crate::party::UserId;
use crate::sss::ShareIndex;

/// Evaluation point of a user's share: `id + 1`, so it is never zero.
pub fn holder(field: &FieldParams, u: UserId) -> Result<ShareIndex> {
    ShareIndex::new(field, u.0 as u64 + 1)
}
