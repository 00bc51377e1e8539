//! Threshold-signature key generation: one initial sharing of a secret `s`
//! yields a fresh temporary key `h(nonce)^s` per aggregation, recoverable from
//! any `t` sub-signatures `h(nonce)^{s^j}` by interpolating in the exponent.

pub mod deploy;

use std::collections::BTreeMap;

use crate::algebra::{expand_sha256, FieldElement, FieldParams, GroupElement, GroupParams};
use crate::counters;
use crate::error::{Error, Result};
use crate::sss::{lagrange_coeffs, LagrangeCache, ShareIndex};

pub use deploy::{Deployment, TskgRun};

/// Group, exponent field `Z_q`, holder indices and threshold.
#[derive(Debug, Clone)]
pub struct TskgParams {
    pub group: std::sync::Arc<GroupParams>,
    pub field: FieldParams,
    pub holders: Vec<ShareIndex>,
    pub t: usize,
}

impl TskgParams {
    /// The group order must fit the `u64` field arithmetic.
    pub fn new(group: std::sync::Arc<GroupParams>, holders: Vec<ShareIndex>, t: usize) -> Result<Self> {
        let field = exponent_field(&group)?;
        if t < 2 || t > holders.len() {
            return Err(Error::config(format!("threshold {t} out of range for {} holders", holders.len())));
        }
        Ok(TskgParams { group, field, holders, t })
    }
}

/// `Z_q` for the group's prime order `q`.
pub fn exponent_field(group: &GroupParams) -> Result<FieldParams> {
    let q = group.order_u64().ok_or_else(|| {
        Error::config(format!("group '{}' has an order too wide for exponent-field sharing", group.name()))
    })?;
    FieldParams::new(q)
}

/// `h(nonce)`.
pub fn nonce_base(group: &GroupParams, nonce: &[u8]) -> GroupElement {
    group.hash_to_group(nonce)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TempKey {
    pub sig: GroupElement,
    /// `ts_trans(sig)`, the field value used as a masking secret.
    pub sz: FieldElement,
}

/// `h(nonce)^s` and its field image.
pub fn temp_key(group: &GroupParams, out_field: &FieldParams, s: FieldElement, nonce: &[u8]) -> TempKey {
    let sig = sub_sig(group, s, nonce);
    TempKey { sz: ts_trans(group, out_field, &sig), sig }
}

/// `h(nonce)^{share}`: the same formula applied to one share.
pub fn sub_sig(group: &GroupParams, share: FieldElement, nonce: &[u8]) -> GroupElement {
    sub_sig_with_base(group, &nonce_base(group, nonce), share)
}

pub fn sub_sig_with_base(group: &GroupParams, base: &GroupElement, share: FieldElement) -> GroupElement {
    group.exp(base, &group.exponent_from_field(share))
}

/// `prod_j sub_j^{l_j}` over exactly `subset`, with Lagrange coefficients in `Z_q`.
pub fn reconstruct_subset(
    group: &GroupParams,
    field: &FieldParams,
    sub_sigs: &BTreeMap<ShareIndex, GroupElement>,
    subset: &[ShareIndex],
) -> Result<GroupElement> {
    let l = lagrange_coeffs(field, subset)?;
    combine(group, sub_sigs, subset, &l)
}

fn combine(
    group: &GroupParams,
    sub_sigs: &BTreeMap<ShareIndex, GroupElement>,
    subset: &[ShareIndex],
    l: &[FieldElement],
) -> Result<GroupElement> {
    let mut acc = group.identity();
    for (j, lj) in subset.iter().zip(l) {
        let s = sub_sigs.get(j).ok_or_else(|| Error::MissingShare(format!("sub-signature of holder {}", j.value().value())))?;
        acc = group.mul(&acc, &group.exp(s, &group.exponent_from_field(*lj)));
    }
    counters::record(|c| c.shamir_reconstructions += 1);
    Ok(acc)
}

/// Reconstruction from the `t` smallest holders present.
pub fn reconstruct(
    group: &GroupParams,
    cache: &LagrangeCache,
    sub_sigs: &BTreeMap<ShareIndex, GroupElement>,
    t: usize,
) -> Result<GroupElement> {
    if sub_sigs.len() < t {
        return Err(Error::InsufficientShares { have: sub_sigs.len(), need: t });
    }
    let subset: Vec<ShareIndex> = sub_sigs.keys().copied().take(t).collect();
    let l = cache.coeffs(&subset)?;
    combine(group, sub_sigs, &subset, &l)
}

/// Group element to field: SHA-256 expansion of the canonical encoding,
/// reduced mod `p`.
pub fn ts_trans(group: &GroupParams, field: &FieldParams, a: &GroupElement) -> FieldElement {
    let len = (field.bits() as usize).div_ceil(8) + 16;
    field.from_wide_bytes(&expand_sha256(b"ts-trans", &group.encode(a), len))
}
