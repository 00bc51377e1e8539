//! Reference schemes the additive-mask protocol is compared against.

pub mod effiagg;
pub mod prg;
pub mod secagg;
