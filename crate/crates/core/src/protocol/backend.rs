//! What a user uploads in the masking round and how the server removes the
//! aggregate mask. The round logic is shared; only this part differs between
//! the additive scheme and the group-based baseline.

use crate::algebra::{FieldElement, FieldParams};
use crate::error::Result;
use crate::masking::{self, MaskParams};

pub trait MaskBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Field in which the masking key is sampled and shared.
    fn share_field(&self) -> &FieldParams;

    /// Field of inputs and of the aggregate output.
    fn output_field(&self) -> &FieldParams;

    fn vector_len(&self) -> usize;

    fn mask(&self, x: &[FieldElement], key: FieldElement) -> Result<Vec<u8>>;

    /// Structural validation of an uploaded masked vector.
    fn check(&self, payload: &[u8]) -> Result<()>;

    /// Removes the mask for `key_sum` from the combination of `masked`.
    fn unmask(&self, masked: &[&[u8]], key_sum: FieldElement) -> Result<Vec<FieldElement>>;
}

#[derive(Debug, Clone)]
pub struct AdditiveMask {
    pub field: FieldParams,
    pub params: MaskParams,
}

impl MaskBackend for AdditiveMask {
    fn name(&self) -> &'static str {
        "ahsecagg"
    }

    fn share_field(&self) -> &FieldParams {
        &self.field
    }

    fn output_field(&self) -> &FieldParams {
        &self.field
    }

    fn vector_len(&self) -> usize {
        self.params.m()
    }

    fn mask(&self, x: &[FieldElement], key: FieldElement) -> Result<Vec<u8>> {
        let y = masking::mask(&self.field, x, key, &self.params)?;
        Ok(masking::encode_vector(&self.field, &y))
    }

    fn check(&self, payload: &[u8]) -> Result<()> {
        let v = masking::decode_vector(&self.field, payload)?;
        if v.len() != self.params.m() {
            return Err(crate::Error::decode("masked vector has the wrong length"));
        }
        Ok(())
    }

    fn unmask(&self, masked: &[&[u8]], key_sum: FieldElement) -> Result<Vec<FieldElement>> {
        let m = self.params.m();
        let mut sum = vec![self.field.zero(); m];
        for bytes in masked {
            let y = masking::decode_vector(&self.field, bytes)?;
            sum = masking::add_vectors(&self.field, m, [sum.as_slice(), y.as_slice()])?;
        }
        masking::unmask_sum(&self.field, &sum, key_sum, &self.params)
    }
}
