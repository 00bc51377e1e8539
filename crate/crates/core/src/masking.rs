//! Additive homomorphic masks `y^(k) = x^(k) + r^k s` and the mask-equation
//! rank analyzer.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::algebra::{FieldElement, FieldParams};
use crate::counters;
use crate::error::{Error, Result};
use crate::party::UserId;

/// Largest accepted input component.
pub const MAX_INPUT: u64 = u32::MAX as u64;

/// Public masking parameters: the chain ratio `r` and the vector length `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskParams {
    r: FieldElement,
    m: usize,
}

impl MaskParams {
    pub fn new(field: &FieldParams, r: u64, m: usize) -> Result<Self> {
        let r = field.elem(r);
        if r.value() < 2 {
            return Err(Error::config("mask ratio r must not be 0 or 1"));
        }
        if m == 0 {
            return Err(Error::config("vector length must be positive"));
        }
        Ok(MaskParams { r, m })
    }

    /// Samples `r` from `Z_p \ {0, 1}`.
    pub fn random<R: Rng + ?Sized>(field: &FieldParams, m: usize, rng: &mut R) -> Result<Self> {
        let r = rng.gen_range(2..field.modulus());
        Self::new(field, r, m)
    }

    pub fn r(&self) -> FieldElement {
        self.r
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

/// Embeds 32-bit inputs into the field.
pub fn input_vector(field: &FieldParams, values: &[u64]) -> Result<Vec<FieldElement>> {
    values
        .iter()
        .map(|&v| {
            if v > MAX_INPUT || v >= field.modulus() {
                Err(Error::RangeExceeded { bound: MAX_INPUT.min(field.modulus() - 1) })
            } else {
                Ok(field.elem(v))
            }
        })
        .collect()
}

/// `(r s, r^2 s, ..., r^m s)` by repeated multiplication.
pub fn mask_chain(field: &FieldParams, s: FieldElement, params: &MaskParams) -> Vec<FieldElement> {
    counters::record(|c| c.field_mults += params.m as u64);
    let mut out = Vec::with_capacity(params.m);
    let mut cur = s;
    for _ in 0..params.m {
        cur = field.mul(cur, params.r);
        out.push(cur);
    }
    out
}

fn check_len(v: &[FieldElement], params: &MaskParams) -> Result<()> {
    if v.len() != params.m {
        return Err(Error::config(format!("vector length {} but m = {}", v.len(), params.m)));
    }
    Ok(())
}

pub fn mask(field: &FieldParams, x: &[FieldElement], s: FieldElement, params: &MaskParams) -> Result<Vec<FieldElement>> {
    check_len(x, params)?;
    let chain = mask_chain(field, s, params);
    Ok(x.iter().zip(chain).map(|(&a, b)| field.add(a, b)).collect())
}

/// `sum_y - chain(s_sum)`. With one user this is plain unmasking.
pub fn unmask_sum(
    field: &FieldParams,
    sum_y: &[FieldElement],
    s_sum: FieldElement,
    params: &MaskParams,
) -> Result<Vec<FieldElement>> {
    check_len(sum_y, params)?;
    let chain = mask_chain(field, s_sum, params);
    Ok(sum_y.iter().zip(chain).map(|(&a, b)| field.sub(a, b)).collect())
}

/// Componentwise sum of equal-length vectors.
pub fn add_vectors<'a, I>(field: &FieldParams, m: usize, vectors: I) -> Result<Vec<FieldElement>>
where
    I: IntoIterator<Item = &'a [FieldElement]>,
{
    let mut acc = vec![field.zero(); m];
    for v in vectors {
        if v.len() != m {
            return Err(Error::config("vector length mismatch in sum"));
        }
        for (a, &b) in acc.iter_mut().zip(v) {
            *a = field.add(*a, b);
        }
    }
    Ok(acc)
}

/// The one field element a holder returns for unmasking: the sum of the shares
/// it holds for every user in `u3`.
pub fn share_sum_for_unmask(
    field: &FieldParams,
    my_shares: &BTreeMap<UserId, FieldElement>,
    u3: &BTreeSet<UserId>,
) -> Result<FieldElement> {
    u3.iter().try_fold(field.zero(), |acc, j| {
        let s = my_shares.get(j).ok_or_else(|| Error::MissingShare(format!("no share from {j}")))?;
        Ok(field.add(acc, *s))
    })
}

pub fn encode_vector(field: &FieldParams, v: &[FieldElement]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + v.len() * 10);
    out.extend((v.len() as u32).to_be_bytes());
    for &e in v {
        out.extend(field.encode(e));
    }
    out
}

pub fn decode_vector(field: &FieldParams, bytes: &[u8]) -> Result<Vec<FieldElement>> {
    if bytes.len() < 4 {
        return Err(Error::decode("missing vector length"));
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let mut rest = &bytes[4..];
    let mut out = Vec::with_capacity(len.min(rest.len() / 2));
    for _ in 0..len {
        let (e, r) = field.decode(rest)?;
        out.push(e);
        rest = r;
    }
    if !rest.is_empty() {
        return Err(Error::decode("trailing bytes after vector"));
    }
    Ok(out)
}

pub mod rank {
    //! Linear systems an observer of one masked vector can write down, and their
    //! ranks over Z_p.

    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Layout {
        /// Unknowns `(s, x^(1), ..., x^(m))`, coefficients `r^k` and 1.
        Ours,
        /// Unknowns `(s^(1..m), x^(1..m))`, one fresh mask per component.
        Others,
    }

    impl std::str::FromStr for Layout {
        type Err = Error;

        fn from_str(s: &str) -> Result<Self> {
            match s {
                "ours" => Ok(Layout::Ours),
                "others" => Ok(Layout::Others),
                other => Err(Error::config(format!("unknown layout '{other}'"))),
            }
        }
    }

    pub type Matrix = Vec<Vec<FieldElement>>;

    #[derive(Debug, Clone)]
    pub struct MaskEquations {
        pub layout: Layout,
        pub coefficients: Matrix,
        pub augmented: Matrix,
    }

    impl MaskEquations {
        pub fn unknowns(&self) -> usize {
            self.coefficients.first().map_or(0, Vec::len)
        }
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct RankReport {
        pub rank_coefficients: usize,
        pub rank_augmented: usize,
        pub unknowns: usize,
    }

    impl RankReport {
        /// Consistent but with fewer pivots than unknowns: infinitely many
        /// solutions, so the inputs cannot be pinned down.
        pub fn underdetermined(&self) -> bool {
            self.rank_coefficients == self.rank_augmented && self.rank_coefficients < self.unknowns
        }
    }

    pub fn build_mask_equations(
        field: &FieldParams,
        y: &[FieldElement],
        params: &MaskParams,
        layout: Layout,
    ) -> Result<MaskEquations> {
        check_len(y, params)?;
        let m = params.m();
        let width = match layout {
            Layout::Ours => m + 1,
            Layout::Others => 2 * m,
        };
        let mut coefficients = vec![vec![field.zero(); width]; m];
        let mut rk = field.one();
        for (k, row) in coefficients.iter_mut().enumerate() {
            match layout {
                Layout::Ours => {
                    rk = field.mul(rk, params.r());
                    row[0] = rk;
                    row[1 + k] = field.one();
                }
                Layout::Others => {
                    row[k] = field.one();
                    row[m + k] = field.one();
                }
            }
        }
        let augmented = coefficients
            .iter()
            .zip(y)
            .map(|(row, &yk)| {
                let mut r = row.clone();
                r.push(yk);
                r
            })
            .collect();
        Ok(MaskEquations { layout, coefficients, augmented })
    }

    /// Row echelon form by Gaussian elimination; returns the pivot columns.
    pub fn echelon(field: &FieldParams, a: &mut Matrix) -> Vec<usize> {
        let rows = a.len();
        let cols = a.first().map_or(0, Vec::len);
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
                continue;
            };
            a.swap(r, p);
            let inv = field.inv(a[r][c]).expect("pivot is nonzero");
            for i in r + 1..rows {
                let f = field.mul(a[i][c], inv);
                if f.is_zero() {
                    continue;
                }
                for j in c..cols {
                    let sub = field.mul(f, a[r][j]);
                    a[i][j] = field.sub(a[i][j], sub);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank_zp(field: &FieldParams, a: &Matrix) -> usize {
        echelon(field, &mut a.clone()).len()
    }

    pub fn analyze(field: &FieldParams, eq: &MaskEquations) -> RankReport {
        RankReport {
            rank_coefficients: rank_zp(field, &eq.coefficients),
            rank_augmented: rank_zp(field, &eq.augmented),
            unknowns: eq.unknowns(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::rank::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn f101() -> FieldParams {
        FieldParams::new(101).unwrap()
    }

    #[test]
    fn hand_chain_and_mask() {
        let f = f101();
        let params = MaskParams::new(&f, 2, 3).unwrap();
        let by_hand: Vec<u64> = (1..=3u32).map(|k| 2u64.pow(k) * 3 % 101).collect();
        assert_eq!(by_hand, vec![6, 12, 24]);
        let chain = mask_chain(&f, f.elem(3), &params);
        assert_eq!(chain.iter().map(|e| e.value()).collect::<Vec<_>>(), by_hand);
        let x = input_vector(&f, &[1, 1, 1]).unwrap();
        let y = mask(&f, &x, f.elem(3), &params).unwrap();
        assert_eq!(y.iter().map(|e| e.value()).collect::<Vec<_>>(), vec![7, 13, 25]);
        assert_eq!(unmask_sum(&f, &y, f.elem(3), &params).unwrap(), x);
    }

    #[test]
    fn zero_key_and_degenerate_ratio() {
        let f = f101();
        let params = MaskParams::new(&f, 5, 4).unwrap();
        assert!(mask_chain(&f, f.zero(), &params).iter().all(|e| e.is_zero()));
        let x = input_vector(&f, &[3, 1, 4, 1]).unwrap();
        assert_eq!(mask(&f, &x, f.zero(), &params).unwrap(), x);
        assert!(MaskParams::new(&f, 0, 4).is_err());
        assert!(MaskParams::new(&f, 1, 4).is_err());
        assert!(MaskParams::new(&f, 102, 4).is_err());
        assert!(mask(&f, &x[..3], f.one(), &params).is_err());
    }

    #[test]
    fn chain_uses_no_exponentiation() {
        let f = FieldParams::default();
        let params = MaskParams::new(&f, 12345, 64).unwrap();
        let (_, c) = crate::counters::measure(|| mask_chain(&f, f.elem(99), &params));
        assert_eq!(c.modexp, 0);
        assert_eq!(c.field_mults, 64);
    }

    #[test]
    fn five_users_match_plain_sum() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let params = MaskParams::random(&f, 32, &mut rng).unwrap();
        let xs: Vec<Vec<u64>> = (0..5).map(|_| (0..32).map(|_| rng.gen::<u32>() as u64).collect()).collect();
        let ss: Vec<FieldElement> = (0..5).map(|_| f.random(&mut rng)).collect();
        let ys: Vec<Vec<FieldElement>> = xs
            .iter()
            .zip(&ss)
            .map(|(x, &s)| mask(&f, &input_vector(&f, x).unwrap(), s, &params).unwrap())
            .collect();
        let sum_y = add_vectors(&f, 32, ys.iter().map(Vec::as_slice)).unwrap();
        let s_sum = f.sum(ss.iter().copied());
        let out = unmask_sum(&f, &sum_y, s_sum, &params).unwrap();
        for k in 0..32 {
            let oracle: u64 = xs.iter().map(|x| x[k]).sum();
            assert_eq!(out[k].value(), oracle);
        }
        let off = unmask_sum(&f, &sum_y, f.add(s_sum, f.one()), &params).unwrap();
        assert!(off.iter().zip(&out).all(|(a, b)| a != b));
    }

    #[test]
    fn inputs_above_32_bits_rejected() {
        let f = FieldParams::default();
        assert!(input_vector(&f, &[1 << 32]).is_err());
        assert!(input_vector(&f, &[u32::MAX as u64]).is_ok());
    }

    #[test]
    fn share_sum_cases() {
        let f = FieldParams::default();
        let shares: BTreeMap<UserId, FieldElement> =
            [(UserId(0), f.elem(4)), (UserId(1), f.elem(9))].into_iter().collect();
        let one: BTreeSet<UserId> = [UserId(1)].into_iter().collect();
        assert_eq!(share_sum_for_unmask(&f, &shares, &one).unwrap(), f.elem(9));
        assert_eq!(share_sum_for_unmask(&f, &shares, &BTreeSet::new()).unwrap(), f.zero());
        let missing: BTreeSet<UserId> = [UserId(0), UserId(2)].into_iter().collect();
        assert!(matches!(share_sum_for_unmask(&f, &shares, &missing), Err(Error::MissingShare(_))));
    }

    #[test]
    fn share_sums_reconstruct_key_sum() {
        use crate::sss;
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let n = 6;
        let x = sss::init_sequential(&f, n).unwrap();
        let keys: Vec<FieldElement> = (0..n).map(|_| f.random(&mut rng)).collect();
        let sets: Vec<sss::ShareSet> = keys.iter().map(|&s| sss::share(&f, s, 4, &x, &mut rng).unwrap()).collect();
        let u3: BTreeSet<UserId> = [0, 2, 3, 5].into_iter().map(UserId).collect();
        let sums: Vec<sss::Share> = (0..n)
            .map(|i| {
                let mine: BTreeMap<UserId, FieldElement> =
                    (0..n).map(|j| (UserId(j as u32), sets[j].get(x[i]).unwrap().value)).collect();
                sss::Share { holder: x[i], value: share_sum_for_unmask(&f, &mine, &u3).unwrap() }
            })
            .collect();
        let expect = f.sum(u3.iter().map(|u| keys[u.index()]));
        assert_eq!(sss::reconstruct(&f, &sums[1..5], 4).unwrap(), expect);
    }

    #[test]
    fn vector_encoding_round_trip() {
        let f = FieldParams::default();
        let v = vec![f.elem(0), f.elem(1), f.elem(f.modulus() - 1)];
        let e = encode_vector(&f, &v);
        assert_eq!(decode_vector(&f, &e).unwrap(), v);
        assert!(decode_vector(&f, &e[..e.len() - 1]).is_err());
    }

    /// Every masked component is uniform over Z_p as s ranges over Z_p.
    #[test]
    fn masked_components_uniform_on_tiny_fields() {
        for p in [5u64, 7, 11, 13, 17, 19, 23, 29, 31] {
            let f = FieldParams::new(p).unwrap();
            for r in 2..p {
                let params = MaskParams::new(&f, r, 4).unwrap();
                for xv in 0..p {
                    let x = vec![f.elem(xv); 4];
                    let mut hist = vec![[0u32; 31]; 4];
                    for s in 0..p {
                        for (k, y) in mask(&f, &x, f.elem(s), &params).unwrap().into_iter().enumerate() {
                            hist[k][y.value() as usize] += 1;
                        }
                    }
                    assert!(hist.iter().all(|h| h[..p as usize].iter().all(|&c| c == 1)));
                }
            }
        }
    }

    #[test]
    fn single_equation_rank() {
        let f = FieldParams::default();
        let params = MaskParams::new(&f, 3, 1).unwrap();
        let eq = build_mask_equations(&f, &[f.elem(10)], &params, Layout::Ours).unwrap();
        let rep = analyze(&f, &eq);
        assert_eq!((rep.rank_coefficients, rep.unknowns), (1, 2));
    }

    /// Counts solutions of the mask equations by enumeration over a tiny field;
    /// a consistent system of rank k in u unknowns has exactly p^(u-k) solutions.
    #[test]
    fn rank_agrees_with_solution_count() {
        let p = 5u64;
        let f = FieldParams::new(p).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for m in 1..=3usize {
            for layout in [Layout::Ours, Layout::Others] {
                let params = MaskParams::random(&f, m, &mut rng).unwrap();
                let x: Vec<FieldElement> = (0..m).map(|_| f.random(&mut rng)).collect();
                let y = mask(&f, &x, f.random(&mut rng), &params).unwrap();
                let eq = build_mask_equations(&f, &y, &params, layout).unwrap();
                let u = eq.unknowns();
                let mut solutions = 0u64;
                for code in 0..p.pow(u as u32) {
                    let z: Vec<u64> = (0..u).map(|i| code / p.pow(i as u32) % p).collect();
                    let ok = eq.coefficients.iter().zip(&y).all(|(row, yk)| {
                        row.iter().zip(&z).map(|(c, zi)| c.value() * zi).sum::<u64>() % p == yk.value()
                    });
                    solutions += ok as u64;
                }
                let rep = analyze(&f, &eq);
                assert_eq!(rep.rank_coefficients, rep.rank_augmented);
                assert_eq!(solutions, p.pow((u - rep.rank_coefficients) as u32), "m={m} {layout:?}");
            }
        }
    }

    #[test]
    fn echelon_has_m_pivots_for_ours() {
        let f = FieldParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let params = MaskParams::random(&f, 8, &mut rng).unwrap();
        let y: Vec<FieldElement> = (0..8).map(|_| f.random(&mut rng)).collect();
        let eq = build_mask_equations(&f, &y, &params, Layout::Ours).unwrap();
        let mut a = eq.augmented.clone();
        let pivots = echelon(&f, &mut a);
        assert_eq!(pivots, (0..8).collect::<Vec<_>>());
        assert_eq!(eq.unknowns(), 9);
    }

    proptest! {
        #[test]
        fn chain_is_linear_in_s(a in 0u64..DEFAULT_P, b in 0u64..DEFAULT_P, r in 2u64..DEFAULT_P) {
            let f = FieldParams::default();
            let params = MaskParams::new(&f, r, 16).unwrap();
            let lhs = mask_chain(&f, f.add(f.elem(a), f.elem(b)), &params);
            let ca = mask_chain(&f, f.elem(a), &params);
            let cb = mask_chain(&f, f.elem(b), &params);
            for k in 0..16 {
                prop_assert_eq!(lhs[k], f.add(ca[k], cb[k]));
            }
        }

        #[test]
        fn exact_sum_invariant(n in 1usize..50, m in 1usize..512, seed in any::<u64>()) {
            let f = FieldParams::default();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let params = MaskParams::random(&f, m, &mut rng).unwrap();
            let mut sum_y = vec![f.zero(); m];
            let mut oracle = vec![0u64; m];
            let mut s_sum = f.zero();
            for _ in 0..n {
                let raw: Vec<u64> = (0..m).map(|_| rng.gen::<u32>() as u64).collect();
                let s = f.random(&mut rng);
                let y = mask(&f, &input_vector(&f, &raw).unwrap(), s, &params).unwrap();
                sum_y = add_vectors(&f, m, [sum_y.as_slice(), y.as_slice()]).unwrap();
                s_sum = f.add(s_sum, s);
                for k in 0..m { oracle[k] += raw[k]; }
            }
            let out = unmask_sum(&f, &sum_y, s_sum, &params).unwrap();
            prop_assert_eq!(out.iter().map(|e| e.value()).collect::<Vec<_>>(), oracle);
        }

        #[test]
        fn ranks_match_layout(m in 1usize..=16, seed in any::<u64>()) {
            let f = FieldParams::default();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let params = MaskParams::random(&f, m, &mut rng).unwrap();
            let y: Vec<FieldElement> = (0..m).map(|_| f.random(&mut rng)).collect();
            for (layout, unknowns) in [(Layout::Ours, m + 1), (Layout::Others, 2 * m)] {
                let rep = analyze(&f, &build_mask_equations(&f, &y, &params, layout).unwrap());
                prop_assert_eq!(rep, RankReport { rank_coefficients: m, rank_augmented: m, unknowns });
                prop_assert!(rep.underdetermined());
            }
        }
    }

    const DEFAULT_P: u64 = crate::algebra::DEFAULT_FIELD_PRIME;
}
