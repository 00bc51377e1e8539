//! Group-based baseline: inputs go into the exponent, masks come from a
//! seed-homomorphic generator, and the server takes a bounded discrete log of
//! each aggregated component.

use std::collections::HashMap;
use std::sync::Arc;

use crate::algebra::{FieldElement, FieldParams, GroupElement, GroupParams};
use crate::counters;
use crate::error::{Error, Result};
use crate::harness::scripts::DropoutScript;
use crate::primitives::wire::{FrameReader, FrameWriter};
use crate::protocol::{run_with_backend, AggregationResult, MaskBackend, Mode, ProtocolConfig, RunEnv, Tag};

/// `HPRG(s)[k] = h_k^s` with `h_k = hash_to_group(k)`, so
/// `HPRG(a) * HPRG(b) = HPRG(a + b)` componentwise.
#[derive(Debug, Clone)]
pub struct Hprg {
    group: Arc<GroupParams>,
    bases: Vec<GroupElement>,
}

impl Hprg {
    /// Precomputes the `m` bases. Each is one exponentiation, done once.
    pub fn new(group: Arc<GroupParams>, m: usize) -> Self {
        let bases = (0..m as u64).map(|k| group.hash_to_group(&k.to_be_bytes())).collect();
        Hprg { group, bases }
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn expand(&self, s: FieldElement) -> Vec<GroupElement> {
        let e = self.group.exponent_from_field(s);
        self.bases.iter().map(|h| self.group.exp(h, &e)).collect()
    }
}

/// Baby-step giant-step for `g^z = target` with `z` in `[0, range)`. The
/// table holds `ceil(sqrt(range))` powers; every step is counted.
pub struct Bsgs {
    group: Arc<GroupParams>,
    table: HashMap<Vec<u8>, u64>,
    width: u64,
    giant: GroupElement,
    range: u64,
}

impl Bsgs {
    pub fn new(group: Arc<GroupParams>, range: u64) -> Self {
        let width = (range as f64).sqrt().ceil().max(1.0) as u64;
        let width = if width * width < range { width + 1 } else { width };
        let mut table = HashMap::with_capacity(width as usize);
        let (g, g_inv) = (group.generator(), group.generator_inverse());
        let mut cur = group.identity();
        let mut giant = group.identity();
        for j in 0..width {
            table.entry(group.encode(&cur)).or_insert(j);
            cur = group.mul(&cur, &g);
            giant = group.mul(&giant, &g_inv);
        }
        counters::record(|c| c.bsgs_steps += width);
        Bsgs { group, table, width, giant, range }
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn solve(&self, target: &GroupElement) -> Result<u64> {
        let mut cur = target.clone();
        let mut steps = 0;
        let found = (|| {
            for i in 0..self.width {
                steps += 1;
                if let Some(&j) = self.table.get(&self.group.encode(&cur)) {
                    let z = i * self.width + j;
                    return (z < self.range).then_some(z);
                }
                cur = self.group.mul(&cur, &self.giant);
            }
            None
        })();
        counters::record(|c| c.bsgs_steps += steps);
        found.ok_or(Error::RangeExceeded { bound: self.range })
    }
}

#[derive(Debug, Clone)]
pub struct EffiAggMask {
    group: Arc<GroupParams>,
    share_field: FieldParams,
    output_field: FieldParams,
    hprg: Hprg,
    /// Exclusive bound on each input component.
    bound: u64,
    n: usize,
}

impl EffiAggMask {
    /// Needs a group order below `2^63` so the mask key can be shared in the
    /// exponent field.
    pub fn new(group: Arc<GroupParams>, output_field: FieldParams, m: usize, bound: u64, n: usize) -> Result<Self> {
        let q = group
            .order_u64()
            .ok_or_else(|| Error::config(format!("group '{}' order does not fit the exponent field", group.name())))?;
        let share_field = FieldParams::new(q)?;
        let range = (n as u128) * (bound as u128);
        if bound == 0 || range >= q.min(output_field.modulus()) as u128 {
            return Err(Error::config("aggregate range must be positive and below the group order"));
        }
        let hprg = Hprg::new(group.clone(), m);
        Ok(EffiAggMask { group, share_field, output_field, hprg, bound, n })
    }

    pub fn range(&self) -> u64 {
        self.n as u64 * self.bound
    }

    fn decode(&self, payload: &[u8]) -> Result<Vec<GroupElement>> {
        let mut r = FrameReader::open(payload, Tag::MaskedInput.code())?;
        let mut out = Vec::with_capacity(self.hprg.len());
        while !r.is_done() {
            out.push(self.group.decode_exact(r.field()?)?);
        }
        if out.len() != self.hprg.len() {
            return Err(Error::decode("masked vector has the wrong length"));
        }
        Ok(out)
    }
}

impl MaskBackend for EffiAggMask {
    fn name(&self) -> &'static str {
        "effiagg"
    }

    fn share_field(&self) -> &FieldParams {
        &self.share_field
    }

    fn output_field(&self) -> &FieldParams {
        &self.output_field
    }

    fn vector_len(&self) -> usize {
        self.hprg.len()
    }

    /// `y_k = g^{x_k} * h_k^s`.
    fn mask(&self, x: &[FieldElement], key: FieldElement) -> Result<Vec<u8>> {
        if x.len() != self.hprg.len() {
            return Err(Error::config("input length differs from the mask length"));
        }
        if let Some(v) = x.iter().find(|v| v.value() >= self.bound) {
            return Err(Error::config(format!("input component {} exceeds bound {}", v.value(), self.bound)));
        }
        let mask = self.hprg.expand(key);
        let w = x.iter().zip(&mask).fold(FrameWriter::new(Tag::MaskedInput.code()), |w, (xk, hk)| {
            let gx = self.group.exp_generator(&self.group.exponent(xk.value()));
            w.field(&self.group.encode(&self.group.mul(&gx, hk)))
        });
        Ok(w.finish())
    }

    fn check(&self, payload: &[u8]) -> Result<()> {
        self.decode(payload).map(|_| ())
    }

    fn unmask(&self, masked: &[&[u8]], key_sum: FieldElement) -> Result<Vec<FieldElement>> {
        let m = self.hprg.len();
        let mut prod = vec![self.group.identity(); m];
        for bytes in masked {
            for (p, y) in prod.iter_mut().zip(self.decode(bytes)?) {
                *p = self.group.mul(p, &y);
            }
        }
        let bsgs = Bsgs::new(self.group.clone(), self.range());
        self.hprg
            .expand(key_sum)
            .iter()
            .zip(prod)
            .map(|(h, p)| {
                let gz = self.group.mul(&p, &self.group.inv(h));
                Ok(self.output_field.elem(bsgs.solve(&gz)?))
            })
            .collect()
    }
}

/// The group-based baseline end to end, reusing the additive protocol's
/// rounds in semi-honest mode. Inputs must lie in `[0, bound)`.
pub fn run_effiagg(
    cfg: &ProtocolConfig,
    bound: u64,
    inputs: &[Vec<FieldElement>],
    dropout: &DropoutScript,
    env: &RunEnv,
) -> Result<AggregationResult> {
    if cfg.mode != Mode::SemiHonest {
        return Err(Error::config("the group-based baseline runs in semi-honest mode only"));
    }
    let backend = Arc::new(EffiAggMask::new(cfg.group.clone(), cfg.field, cfg.mask.m(), bound, cfg.n)?);
    run_with_backend(Arc::new(cfg.clone()), backend, inputs, dropout, None, env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counters::measure;
    use crate::masking::MaskParams;
    use crate::party::UserId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn desk() -> Arc<GroupParams> {
        GroupParams::desk().shared()
    }

    #[test]
    fn hprg_is_seed_homomorphic() {
        let g = desk();
        let h = Hprg::new(g.clone(), 6);
        let q = FieldParams::new(g.order_u64().unwrap()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (a, b) = (q.random(&mut rng), q.random(&mut rng));
            let lhs: Vec<_> = h.expand(a).iter().zip(h.expand(b)).map(|(x, y)| g.mul(x, &y)).collect();
            assert_eq!(lhs, h.expand(q.add(a, b)));
        }
    }

    #[test]
    fn zero_input_masks_to_hprg_and_unmasks_to_zero() {
        let g = desk();
        let f = FieldParams::default();
        let b = EffiAggMask::new(g.clone(), f, 4, 1 << 10, 1).unwrap();
        let s = b.share_field.elem(12345);
        let y = b.mask(&[f.zero(); 4], s).unwrap();
        assert_eq!(b.decode(&y).unwrap(), b.hprg.expand(s));
        assert_eq!(b.unmask(&[&y], s).unwrap(), vec![f.zero(); 4]);
    }

    #[test]
    fn bsgs_recovers_every_value_and_counts_steps() {
        let g = GroupParams::toy().shared();
        let bsgs = Bsgs::new(g.clone(), 11);
        for z in 0..11 {
            let e = g.exp_generator(&g.exponent(z));
            let (got, c) = measure(|| bsgs.solve(&e).unwrap());
            assert_eq!(got, z);
            assert!(c.bsgs_steps <= bsgs.width());
        }
    }

    #[test]
    fn bsgs_range_exceeded() {
        let g = desk();
        let bsgs = Bsgs::new(g.clone(), 100);
        let e = g.exp_generator(&g.exponent(5000));
        assert!(matches!(bsgs.solve(&e), Err(Error::RangeExceeded { bound: 100 })));
    }

    #[test]
    fn end_to_end_plain_sum_and_server_counts() {
        let f = FieldParams::default();
        let (n, m, bound) = (5, 16, 1u64 << 10);
        let cfg = ProtocolConfig::new(n, 3, Mode::SemiHonest, f, desk(), MaskParams::new(&f, 3, m).unwrap()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let inputs: Vec<Vec<FieldElement>> = (0..n).map(|_| (0..m).map(|_| f.elem(rng.gen_range(0..bound))).collect()).collect();
        let r = run_effiagg(&cfg, bound, &inputs, &DropoutScript::at(2, [UserId(1)]), &RunEnv::seeded(4)).unwrap();
        assert!(r.matches_oracle(), "{:?}", r.outcome.server_abort);
        let s = r.outcome.metrics.server().ops;
        assert_eq!(s.modexp, m as u64);
        assert_eq!(s.group_inversions, m as u64);
        let width = ((n as u64 * bound) as f64).sqrt().ceil() as u64;
        assert!(s.bsgs_steps >= width && s.bsgs_steps <= width + m as u64 * width, "{}", s.bsgs_steps);
        for (u, pm) in r.outcome.metrics.users() {
            if u != UserId(1) {
                assert_eq!(pm.ops.modexp - pm.ops.modexp_setup, (2 * m + n - 1) as u64, "{u}");
            }
        }
    }

    #[test]
    fn rejects_wide_groups() {
        let f = FieldParams::default();
        assert!(EffiAggMask::new(GroupParams::modp2048().shared(), f, 4, 16, 3).is_err());
    }
}
