//! (t, n) Shamir secret sharing over a prime field.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use rand::seq::index;
use rand::Rng;

use crate::algebra::{FieldElement, FieldParams};
use crate::counters;
use crate::error::{Error, Result};

/// Evaluation point of one shareholder. Never zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShareIndex(FieldElement);

impl ShareIndex {
    pub fn new(field: &FieldParams, x: u64) -> Result<Self> {
        if x == 0 || x >= field.modulus() {
            return Err(Error::degenerate(format!("share index {x} outside [1, p)")));
        }
        Ok(ShareIndex(field.elem(x)))
    }

    pub fn value(self) -> FieldElement {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Share {
    pub holder: ShareIndex,
    pub value: FieldElement,
}

impl Share {
    pub fn encode(&self, field: &FieldParams) -> Vec<u8> {
        let mut out = field.encode(self.holder.0);
        out.extend(field.encode(self.value));
        out
    }

    pub fn decode<'a>(field: &FieldParams, bytes: &'a [u8]) -> Result<(Share, &'a [u8])> {
        let (x, rest) = field.decode(bytes)?;
        let (value, rest) = field.decode(rest)?;
        let holder = ShareIndex::new(field, x.value()).map_err(|_| Error::decode("zero share index"))?;
        Ok((Share { holder, value }, rest))
    }
}

/// All n shares of one secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareSet {
    field: FieldParams,
    threshold: usize,
    shares: BTreeMap<ShareIndex, FieldElement>,
}

impl ShareSet {
    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn get(&self, holder: ShareIndex) -> Option<Share> {
        self.shares.get(&holder).map(|&value| Share { holder, value })
    }

    pub fn iter(&self) -> impl Iterator<Item = Share> + '_ {
        self.shares.iter().map(|(&holder, &value)| Share { holder, value })
    }

    pub fn to_vec(&self) -> Vec<Share> {
        self.iter().collect()
    }
}

/// `n` indices `1..=n`.
pub fn init_sequential(field: &FieldParams, n: usize) -> Result<Vec<ShareIndex>> {
    check_fits(field, n)?;
    (1..=n as u64).map(|x| ShareIndex::new(field, x)).collect()
}

/// `n` distinct indices drawn uniformly from `[1, p)`.
pub fn init_random<R: Rng + ?Sized>(field: &FieldParams, n: usize, rng: &mut R) -> Result<Vec<ShareIndex>> {
    check_fits(field, n)?;
    let p = field.modulus();
    if p <= 1 << 20 {
        let picked = index::sample(rng, (p - 1) as usize, n);
        return picked.into_iter().map(|i| ShareIndex::new(field, i as u64 + 1)).collect();
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = rng.gen_range(1..p);
        if seen.insert(x) {
            out.push(ShareIndex::new(field, x)?);
        }
    }
    Ok(out)
}

fn check_fits(field: &FieldParams, n: usize) -> Result<()> {
    if n as u128 >= field.modulus() as u128 {
        return Err(Error::degenerate(format!("{n} holders do not fit in Z_{}", field.modulus())));
    }
    Ok(())
}

fn check_distinct(holders: &[ShareIndex]) -> Result<()> {
    let set: BTreeSet<_> = holders.iter().collect();
    if set.len() != holders.len() {
        return Err(Error::degenerate("duplicate share index"));
    }
    Ok(())
}

/// Shares `secret` with a fresh random polynomial of degree `t - 1`.
pub fn share<R: Rng + ?Sized>(
    field: &FieldParams,
    secret: FieldElement,
    t: usize,
    holders: &[ShareIndex],
    rng: &mut R,
) -> Result<ShareSet> {
    let coeffs: Vec<FieldElement> = (1..t.max(1)).map(|_| field.random(rng)).collect();
    share_with_coefficients(field, secret, t, &coeffs, holders)
}

/// Shares `secret` using the given higher-order coefficients `a_1..a_{t-1}`.
/// Exposed so that fixed polynomials can be checked by hand.
pub fn share_with_coefficients(
    field: &FieldParams,
    secret: FieldElement,
    t: usize,
    coeffs: &[FieldElement],
    holders: &[ShareIndex],
) -> Result<ShareSet> {
    if t < 2 || t > holders.len() {
        return Err(Error::config(format!("threshold {t} outside [2, {}]", holders.len())));
    }
    if coeffs.len() != t - 1 {
        return Err(Error::config("coefficient count must be t - 1"));
    }
    check_distinct(holders)?;
    counters::record(|c| c.shamir_sharings += 1);
    let shares = holders
        .iter()
        .map(|&h| {
            // Horner evaluation from the top coefficient down.
            let x = h.0;
            let acc = coeffs.iter().rev().fold(field.zero(), |acc, &a| field.add(field.mul(acc, x), a));
            (h, field.add(field.mul(acc, x), secret))
        })
        .collect();
    Ok(ShareSet { field: *field, threshold: t, shares })
}

/// `l_j = prod_{o != j} (-x_o) / (x_j - x_o)`: the coefficients that interpolate
/// at zero.
pub fn lagrange_coeffs(field: &FieldParams, subset: &[ShareIndex]) -> Result<Vec<FieldElement>> {
    check_distinct(subset)?;
    subset
        .iter()
        .map(|&j| {
            let (num, den) = subset.iter().filter(|&&o| o != j).fold(
                (field.one(), field.one()),
                |(num, den), &o| (field.mul(num, field.neg(o.0)), field.mul(den, field.sub(j.0, o.0))),
            );
            field.div(num, den)
        })
        .collect()
}

/// Lagrange coefficients memoized by sorted index subset. Safe to share.
#[derive(Debug)]
pub struct LagrangeCache {
    field: FieldParams,
    cache: Mutex<HashMap<Vec<ShareIndex>, Arc<Vec<FieldElement>>>>,
}

impl LagrangeCache {
    pub fn new(field: FieldParams) -> Self {
        LagrangeCache { field, cache: Mutex::new(HashMap::new()) }
    }

    pub fn field(&self) -> &FieldParams {
        &self.field
    }

    /// Coefficients for `subset`, which must already be sorted.
    pub fn coeffs(&self, subset: &[ShareIndex]) -> Result<Arc<Vec<FieldElement>>> {
        debug_assert!(subset.windows(2).all(|w| w[0] <= w[1]));
        if let Some(hit) = self.cache.lock().expect("cache lock").get(subset) {
            return Ok(Arc::clone(hit));
        }
        let fresh = Arc::new(lagrange_coeffs(&self.field, subset)?);
        self.cache.lock().expect("cache lock").insert(subset.to_vec(), Arc::clone(&fresh));
        Ok(fresh)
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reconstruct(&self, shares: &[Share], t: usize) -> Result<FieldElement> {
        let chosen = select_subset(shares, t)?;
        let holders: Vec<ShareIndex> = chosen.iter().map(|s| s.holder).collect();
        let l = self.coeffs(&holders)?;
        Ok(interpolate(&self.field, &chosen, &l))
    }
}

/// Picks the `t` shares with the smallest holder indices, so the interpolation
/// subset depends only on who answered.
pub(crate) fn select_subset(shares: &[Share], t: usize) -> Result<Vec<Share>> {
    if t == 0 {
        return Err(Error::config("threshold must be positive"));
    }
    let mut sorted = shares.to_vec();
    sorted.sort_by_key(|s| s.holder);
    if sorted.windows(2).any(|w| w[0].holder == w[1].holder) {
        return Err(Error::degenerate("duplicate share holder"));
    }
    if sorted.len() < t {
        return Err(Error::InsufficientShares { have: sorted.len(), need: t });
    }
    sorted.truncate(t);
    Ok(sorted)
}

fn interpolate(field: &FieldParams, chosen: &[Share], l: &[FieldElement]) -> FieldElement {
    counters::record(|c| {
        c.shamir_reconstructions += 1;
        c.field_mults += chosen.len() as u64;
    });
    field.sum(chosen.iter().zip(l).map(|(s, &lj)| field.mul(s.value, lj)))
}

/// Interpolates the secret from at least `t` shares with distinct holders.
pub fn reconstruct(field: &FieldParams, shares: &[Share], t: usize) -> Result<FieldElement> {
    let chosen = select_subset(shares, t)?;
    let holders: Vec<ShareIndex> = chosen.iter().map(|s| s.holder).collect();
    let l = lagrange_coeffs(field, &holders)?;
    Ok(interpolate(field, &chosen, &l))
}

/// Pointwise sum of two sharings over the same holders and threshold.
pub fn add(a: &ShareSet, b: &ShareSet) -> Result<ShareSet> {
    if a.field != b.field || a.threshold != b.threshold {
        return Err(Error::config("share sets differ in field or threshold"));
    }
    if !a.shares.keys().eq(b.shares.keys()) {
        return Err(Error::config("share sets differ in holders"));
    }
    let f = a.field;
    let shares = a.shares.iter().zip(b.shares.values()).map(|((&h, &x), &y)| (h, f.add(x, y))).collect();
    Ok(ShareSet { field: f, threshold: a.threshold, shares })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn f7() -> FieldParams {
        FieldParams::new(7).unwrap()
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if n < k {
            return vec![];
        }
        let mut out = subsets(n - 1, k);
        for mut s in subsets(n - 1, k - 1) {
            s.push(n - 1);
            out.push(s);
        }
        out
    }

    #[test]
    fn init_checks_pigeonhole_and_is_seeded() {
        let f = f7();
        let x = init_random(&f, 3, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let set: BTreeSet<u64> = x.iter().map(|i| i.value().value()).collect();
        assert_eq!(set.len(), 3);
        assert!(set.iter().all(|&v| (1..7).contains(&v)));
        let y = init_random(&f, 3, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(x, y);
        assert!(init_random(&f, 7, &mut ChaCha20Rng::seed_from_u64(1)).is_err());
        assert!(init_sequential(&f, 7).is_err());
        let big = FieldParams::default();
        let z = init_random(&big, 50, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert!(check_distinct(&z).is_ok());
    }

    #[test]
    fn hand_polynomial_over_z7() {
        // f(x) = 5 + 3x
        let f = f7();
        let x = init_sequential(&f, 2).unwrap();
        let set = share_with_coefficients(&f, f.elem(5), 2, &[f.elem(3)], &x).unwrap();
        let by_hand: Vec<u64> = [1u64, 2].iter().map(|&x| (5 + 3 * x) % 7).collect();
        assert_eq!(by_hand, vec![1, 4]);
        assert_eq!(set.get(x[0]).unwrap().value, f.elem(by_hand[0]));
        assert_eq!(set.get(x[1]).unwrap().value, f.elem(by_hand[1]));
        assert_eq!(reconstruct(&f, &set.to_vec(), 2).unwrap(), f.elem(5));
    }

    #[test]
    fn hand_lagrange_over_z7() {
        let f = f7();
        let x = init_sequential(&f, 2).unwrap();
        let l = lagrange_coeffs(&f, &x).unwrap();
        assert_eq!(l, vec![f.elem(2), f.elem(6)]);
        let dup = [x[0], x[0]];
        assert!(matches!(lagrange_coeffs(&f, &dup), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn too_few_shares() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x = init_sequential(&f, 5).unwrap();
        let set = share(&f, f.elem(42), 3, &x, &mut rng).unwrap();
        let two = &set.to_vec()[..2];
        assert_eq!(reconstruct(&f, two, 3), Err(Error::InsufficientShares { have: 2, need: 3 }));
        assert_eq!(reconstruct(&f, &set.to_vec(), 5).err(), None);
    }

    #[test]
    fn threshold_range_checked() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let x = init_sequential(&f, 4).unwrap();
        assert!(matches!(share(&f, f.one(), 1, &x, &mut rng), Err(Error::Config(_))));
        assert!(matches!(share(&f, f.one(), 5, &x, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn different_seeds_different_shares() {
        let f = FieldParams::default();
        let x = init_sequential(&f, 4).unwrap();
        let a = share(&f, f.elem(9), 3, &x, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let b = share(&f, f.elem(9), 3, &x, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn every_t_subset_agrees() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for n in 2..=7 {
            for t in 2..=n {
                let x = init_random(&f, n, &mut rng).unwrap();
                let secret = f.random(&mut rng);
                let all = share(&f, secret, t, &x, &mut rng).unwrap().to_vec();
                for sub in subsets(n, t) {
                    let picked: Vec<Share> = sub.iter().map(|&i| all[i]).collect();
                    assert_eq!(reconstruct(&f, &picked, t).unwrap(), secret);
                }
            }
        }
    }

    #[test]
    fn fifty_summand_fold() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let x = init_sequential(&f, 9).unwrap();
        let secrets: Vec<FieldElement> = (0..50).map(|_| f.random(&mut rng)).collect();
        let mut acc = share(&f, secrets[0], 5, &x, &mut rng).unwrap();
        for &s in &secrets[1..] {
            acc = add(&acc, &share(&f, s, 5, &x, &mut rng).unwrap()).unwrap();
        }
        let oracle = secrets.iter().fold(0u128, |a, s| (a + s.value() as u128) % f.modulus() as u128);
        assert_eq!(reconstruct(&f, &acc.to_vec(), 5).unwrap().value() as u128, oracle);
    }

    #[test]
    fn adding_a_zero_sharing_keeps_the_secret() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let x = init_sequential(&f, 5).unwrap();
        let s = share(&f, f.elem(77), 3, &x, &mut rng).unwrap();
        let z = share(&f, f.zero(), 3, &x, &mut rng).unwrap();
        assert_eq!(reconstruct(&f, &add(&s, &z).unwrap().to_vec(), 3).unwrap(), f.elem(77));
        let other = share(&f, f.zero(), 4, &x, &mut rng).unwrap();
        assert!(add(&s, &other).is_err());
    }

    #[test]
    fn constant_polynomial_and_coefficients_independent_of_secret() {
        let f = FieldParams::default();
        let x = init_sequential(&f, 4).unwrap();
        let l = lagrange_coeffs(&f, &x).unwrap();
        assert_eq!(f.sum(l.iter().copied()), f.one());
    }

    #[test]
    fn cache_matches_direct_and_reuses_entries() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x = init_sequential(&f, 6).unwrap();
        let cache = LagrangeCache::new(f);
        for _ in 0..5 {
            let secret = f.random(&mut rng);
            let set = share(&f, secret, 4, &x, &mut rng).unwrap();
            assert_eq!(cache.reconstruct(&set.to_vec(), 4).unwrap(), secret);
        }
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn share_encoding_round_trips() {
        let f = FieldParams::default();
        let x = init_sequential(&f, 3).unwrap();
        let set = share(&f, f.elem(3), 2, &x, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        for s in set.iter() {
            let bytes = s.encode(&f);
            let (back, rest) = Share::decode(&f, &bytes).unwrap();
            assert_eq!(back, s);
            assert!(rest.is_empty());
        }
    }

    /// Every candidate secret is consistent with any t - 1 shares, checked by
    /// enumerating all polynomials over a small field.
    #[test]
    fn t_minus_one_shares_fit_every_secret() {
        for &(p, t) in &[(7u64, 2usize), (11, 3), (13, 2), (31, 3)] {
            let f = FieldParams::new(p).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(p);
            let x = init_random(&f, t + 1, &mut rng).unwrap();
            let set = share(&f, f.random(&mut rng), t, &x, &mut rng).unwrap();
            let seen: Vec<Share> = set.to_vec().into_iter().take(t - 1).collect();
            for s_prime in 0..p {
                let mut found = false;
                let total = p.pow((t - 1) as u32);
                for code in 0..total {
                    let coeffs: Vec<u64> = (0..t - 1).map(|k| code / p.pow(k as u32) % p).collect();
                    let fits = seen.iter().all(|sh| {
                        let xv = sh.holder.value().value();
                        let val = coeffs.iter().rev().fold(0u64, |acc, &a| (acc * xv + a) % p);
                        (val * xv + s_prime) % p == sh.value.value()
                    });
                    if fits {
                        found = true;
                        break;
                    }
                }
                assert!(found, "p={p} t={t} secret {s_prime} has no consistent polynomial");
            }
        }
    }

    proptest! {
        #[test]
        fn reconstruct_from_random_superset(secret in 0u64..1_000_000, n in 2usize..12, t_off in 0usize..10, seed in any::<u64>()) {
            let f = FieldParams::default();
            let t = 2 + t_off % (n - 1);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let x = init_random(&f, n, &mut rng).unwrap();
            let set = share(&f, f.elem(secret), t, &x, &mut rng).unwrap();
            let mut shares = set.to_vec();
            let keep = rng.gen_range(t..=n);
            rand::seq::SliceRandom::shuffle(&mut shares[..], &mut rng);
            shares.truncate(keep);
            prop_assert_eq!(reconstruct(&f, &shares, t).unwrap(), f.elem(secret));
        }

        #[test]
        fn homomorphism_random(count in 1usize..50, seed in any::<u64>()) {
            let f = FieldParams::default();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let x = init_sequential(&f, 6).unwrap();
            let mut expect = f.zero();
            let mut acc: Option<ShareSet> = None;
            for _ in 0..count {
                let s = f.random(&mut rng);
                expect = f.add(expect, s);
                let set = share(&f, s, 4, &x, &mut rng).unwrap();
                acc = Some(match acc { None => set, Some(a) => add(&a, &set).unwrap() });
            }
            prop_assert_eq!(reconstruct(&f, &acc.unwrap().to_vec(), 4).unwrap(), expect);
        }
    }
}
