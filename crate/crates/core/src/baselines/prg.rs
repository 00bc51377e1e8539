//! AES-128 in counter mode, expanded into field elements by rejection
//! sampling on the low `bits(p)` bits of each 8-byte block.

use aes::cipher::{KeyIvInit, StreamCipher};

use crate::algebra::{FieldElement, FieldParams};
use crate::counters;

type Aes128Ctr = ctr::Ctr128BE<aes::Aes128>;

pub const SEED_LEN: usize = 16;

const BLOCK_BYTES: usize = 512;

pub struct PrgStream {
    cipher: Aes128Ctr,
    field: FieldParams,
    mask: u64,
    buf: [u8; BLOCK_BYTES],
    pos: usize,
}

impl PrgStream {
    pub fn new(field: &FieldParams, seed: &[u8; SEED_LEN]) -> Self {
        let bits = field.bits();
        let mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
        let cipher = Aes128Ctr::new(seed.into(), &[0u8; 16].into());
        PrgStream { cipher, field: *field, mask, buf: [0; BLOCK_BYTES], pos: BLOCK_BYTES }
    }

    /// Keystream is drawn 512 bytes at a time; the output is the same as
    /// reading it 8 bytes at a time.
    fn next_block(&mut self) -> u64 {
        if self.pos == BLOCK_BYTES {
            self.buf = [0; BLOCK_BYTES];
            self.cipher.apply_keystream(&mut self.buf);
            self.pos = 0;
        }
        let v = u64::from_be_bytes(self.buf[self.pos..self.pos + 8].try_into().expect("8 bytes"));
        self.pos += 8;
        v
    }

    pub fn next_element(&mut self) -> FieldElement {
        loop {
            let v = self.next_block() & self.mask;
            if v < self.field.modulus() {
                return self.field.elem(v);
            }
        }
    }
}

/// `m` elements from `seed`. Counted as `m` element expansions.
pub fn expand(field: &FieldParams, seed: &[u8; SEED_LEN], m: usize) -> Vec<FieldElement> {
    counters::record(|c| c.prg_element_expansions += m as u64);
    let mut s = PrgStream::new(field, seed);
    (0..m).map(|_| s.next_element()).collect()
}
