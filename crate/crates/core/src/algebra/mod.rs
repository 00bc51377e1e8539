//! Prime-field arithmetic, the prime-order group, and their canonical encodings.

pub mod encoding;
mod field;
mod group;

pub use field::{is_prime_u64, FieldElement, FieldParams, DEFAULT_FIELD_PRIME, MAX_FIELD_PRIME};
pub use group::{Exponent, GroupElement, GroupParams, DESK_SAFE_PRIME};

pub(crate) use group::expand_sha256;
