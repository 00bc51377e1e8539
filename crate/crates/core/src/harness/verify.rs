//! Property suites runnable from the command line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::scripts::AdversaryScript;
use super::simulate::{simulate, RunConfig, Scheme};
use super::sweep::Check;
use crate::algebra::{FieldParams, GroupParams};
use crate::error::{Error, Result};
use crate::masking::rank::{analyze, build_mask_equations, Layout};
use crate::masking::{self, MaskParams};
use crate::party::UserId;
use crate::protocol::split_view::exhaustive_split_check;
use crate::protocol::{active_threshold, Mode};
use crate::sss::{self, Share};
use crate::tskg::{self, exponent_field};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Sss,
    Masking,
    Rank,
    Tskg,
    Protocol,
    Baselines,
    Adversary,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] =
        [Suite::Sss, Suite::Masking, Suite::Rank, Suite::Tskg, Suite::Protocol, Suite::Baselines, Suite::Adversary];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Sss => "sss",
            Suite::Masking => "masking",
            Suite::Rank => "rank",
            Suite::Tskg => "tskg",
            Suite::Protocol => "protocol",
            Suite::Baselines => "baselines",
            Suite::Adversary => "adversary",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown suite '{s}'")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Sss => sss_suite(seed),
        Suite::Masking => masking_suite(seed),
        Suite::Rank => rank_suite(seed, 50),
        Suite::Tskg => tskg_suite(seed),
        Suite::Protocol => protocol_suite(seed),
        Suite::Baselines => baselines_suite(seed),
        Suite::Adversary => adversary_suite(seed),
        Suite::All => Suite::EACH.into_iter().flat_map(|s| run_suite(s, seed)).collect(),
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

fn outcome<T>(name: &str, r: Result<T>, ok: impl FnOnce(T) -> std::result::Result<String, String>) -> Check {
    match r.map_err(|e| e.to_string()).and_then(ok) {
        Ok(d) => Check::new(name, true, d),
        Err(d) => Check::new(name, false, d),
    }
}

pub fn sss_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let f = FieldParams::default();
    let every_subset = outcome("sss/every-t-subset", Ok(()), |_| {
        let mut cases = 0;
        for n in 2..=7 {
            for t in 2..=n {
                let secret = f.random(&mut rng);
                let x = sss::init_random(&f, n, &mut rng).map_err(|e| e.to_string())?;
                let set = sss::share(&f, secret, t, &x, &mut rng).map_err(|e| e.to_string())?;
                let all = set.to_vec();
                for sub in subsets(n, t) {
                    let pick: Vec<Share> = sub.iter().map(|&i| all[i]).collect();
                    if sss::reconstruct(&f, &pick, t).map_err(|e| e.to_string())? != secret {
                        return Err(format!("n={n} t={t} subset {sub:?}"));
                    }
                    cases += 1;
                }
            }
        }
        Ok(format!("{cases} subsets"))
    });
    let fold = outcome("sss/homomorphic-fold-50", Ok(()), |_| {
        let x = sss::init_sequential(&f, 7).map_err(|e| e.to_string())?;
        let secrets: Vec<_> = (0..50).map(|_| f.random(&mut rng)).collect();
        let mut acc = sss::share(&f, secrets[0], 4, &x, &mut rng).map_err(|e| e.to_string())?;
        for &s in &secrets[1..] {
            let next = sss::share(&f, s, 4, &x, &mut rng).map_err(|e| e.to_string())?;
            acc = sss::add(&acc, &next).map_err(|e| e.to_string())?;
        }
        let got = sss::reconstruct(&f, &acc.to_vec(), 4).map_err(|e| e.to_string())?;
        (got == f.sum(secrets)).then(|| "50 summands".to_string()).ok_or_else(|| "sum mismatch".into())
    });
    let hiding = outcome("sss/t-minus-one-consistent-with-every-secret", Ok(()), |_| {
        for &(p, t) in &[(7u64, 2usize), (11, 3), (13, 2), (17, 3), (31, 3)] {
            let fp = FieldParams::new(p).map_err(|e| e.to_string())?;
            let x = sss::init_random(&fp, t + 1, &mut rng).map_err(|e| e.to_string())?;
            let set = sss::share(&fp, fp.random(&mut rng), t, &x, &mut rng).map_err(|e| e.to_string())?;
            let seen: Vec<Share> = set.to_vec().into_iter().take(t - 1).collect();
            for cand in 0..p {
                let fits = (0..p.pow((t - 1) as u32)).any(|code| {
                    let coeffs: Vec<u64> = (0..t - 1).map(|k| code / p.pow(k as u32) % p).collect();
                    seen.iter().all(|sh| {
                        let xv = sh.holder.value().value();
                        let v = coeffs.iter().rev().fold(0u64, |acc, &a| (acc * xv + a) % p);
                        (v * xv + cand) % p == sh.value.value()
                    })
                });
                if !fits {
                    return Err(format!("p={p} t={t}: secret {cand} excluded"));
                }
            }
        }
        Ok("p in {7, 11, 13, 17, 31}".into())
    });
    vec![every_subset, fold, hiding]
}

pub fn masking_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let f = FieldParams::default();
    let r = outcome("masking/summed-key-unmask", Ok(()), |_| {
        for trial in 0..50 {
            let m = rng.gen_range(1..64);
            let n = rng.gen_range(1..20);
            let params = MaskParams::random(&f, m, &mut rng).map_err(|e| e.to_string())?;
            let xs: Vec<Vec<_>> = (0..n).map(|_| (0..m).map(|_| f.elem(rng.gen::<u32>() as u64)).collect()).collect();
            let keys: Vec<_> = (0..n).map(|_| f.random(&mut rng)).collect();
            let ys: Vec<Vec<_>> = xs
                .iter()
                .zip(&keys)
                .map(|(x, &s)| masking::mask(&f, x, s, &params))
                .collect::<Result<_>>()
                .map_err(|e| e.to_string())?;
            let sum_y = masking::add_vectors(&f, m, ys.iter().map(Vec::as_slice)).map_err(|e| e.to_string())?;
            let sum_x = masking::add_vectors(&f, m, xs.iter().map(Vec::as_slice)).map_err(|e| e.to_string())?;
            let got = masking::unmask_sum(&f, &sum_y, f.sum(keys.iter().copied()), &params).map_err(|e| e.to_string())?;
            if got != sum_x {
                return Err(format!("trial {trial}"));
            }
        }
        Ok("50 random instances".into())
    });
    vec![r]
}

/// Ranks of both observer systems for `instances` random `m` in `1..=16`.
pub fn rank_suite(seed: u64, instances: usize) -> Vec<Check> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let f = FieldParams::default();
    let mut bad = Vec::new();
    for _ in 0..instances {
        let m = rng.gen_range(1..=16);
        let params = MaskParams::random(&f, m, &mut rng).expect("m positive");
        let y: Vec<_> = (0..m).map(|_| f.random(&mut rng)).collect();
        for (layout, unknowns) in [(Layout::Ours, m + 1), (Layout::Others, 2 * m)] {
            let rep = analyze(&f, &build_mask_equations(&f, &y, &params, layout).expect("lengths match"));
            if rep.rank_coefficients != m || rep.rank_augmented != m || rep.unknowns != unknowns {
                bad.push(format!("m={m} {layout:?}: {rep:?}"));
            }
        }
    }
    let detail = if bad.is_empty() { format!("{instances} instances") } else { bad.join("; ") };
    vec![Check::new("rank/both-layouts-rank-m", bad.is_empty(), detail)]
}

pub fn tskg_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = GroupParams::desk();
    let exponent = outcome("tskg/exponent-interpolation", exponent_field(&g), |q| {
        let mut subsets_checked = 0;
        for trial in 0..100 {
            let n = rng.gen_range(2..=9);
            let t = rng.gen_range(2..=n);
            let s = q.random(&mut rng);
            let nonce: [u8; 32] = rng.gen();
            let x = sss::init_random(&q, n, &mut rng).map_err(|e| e.to_string())?;
            let set = sss::share(&q, s, t, &x, &mut rng).map_err(|e| e.to_string())?;
            let base = tskg::nonce_base(&g, &nonce);
            let subs: BTreeMap<_, _> = set.iter().map(|sh| (sh.holder, tskg::sub_sig_with_base(&g, &base, sh.value))).collect();
            let want = tskg::sub_sig_with_base(&g, &base, s);
            for sub in subsets(n, t) {
                let pick: Vec<_> = sub.iter().map(|&i| x[i]).collect();
                if tskg::reconstruct_subset(&g, &q, &subs, &pick).map_err(|e| e.to_string())? != want {
                    return Err(format!("trial {trial} n={n} t={t} subset {sub:?}"));
                }
                subsets_checked += 1;
            }
        }
        Ok(format!("100 instances, {subsets_checked} subsets"))
    });
    let reuse = outcome(
        "tskg/five-aggregations",
        simulate(&RunConfig { scheme: Scheme::SecAggTskg, n: 7, m: 8, aggregations: 5, dropout_rate: 0.2, seed, ..Default::default() }),
        |r| r.matches_oracle().then(|| "5 exact outputs".to_string()).ok_or_else(|| "output mismatch".into()),
    );
    vec![exponent, reuse]
}

pub fn protocol_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    let runs = 20;
    for k in 0..runs {
        let n = rng.gen_range(5..=20);
        let m = rng.gen_range(1..=128);
        let rate = [0.0, 0.1, 0.2, 0.3][k % 4];
        let mode = if k % 2 == 0 { Mode::SemiHonest } else { Mode::ActiveAdversary };
        let c = RunConfig { n, m, mode, group: Some("desk".into()), dropout_rate: rate, seed: seed + k as u64, ..Default::default() };
        match simulate(&c) {
            Ok(r) if r.matches_oracle() => {}
            Ok(r) => bad.push(format!("n={n} m={m} {mode}: {:?}", r.result.outcome.server_abort)),
            Err(e) => bad.push(format!("n={n} m={m} {mode}: {e}")),
        }
    }
    let detail = if bad.is_empty() { format!("{runs} runs") } else { bad.join("; ") };
    vec![Check::new("protocol/exact-aggregation", bad.is_empty(), detail)]
}

pub fn baselines_suite(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    for scheme in [Scheme::SecAgg, Scheme::EffiAgg] {
        let c = RunConfig { scheme, n: 10, m: 100, group: Some("desk".into()), dropout_rate: 0.3, seed, ..Default::default() };
        out.push(outcome(&format!("baselines/{scheme}-exact"), simulate(&c), |r| {
            let prg = r.result.outcome.metrics.server().ops.prg_element_expansions;
            if !r.matches_oracle() {
                return Err("output mismatch".into());
            }
            if scheme == Scheme::SecAgg && prg != 2800 {
                return Err(format!("server expanded {prg} elements, expected 2800"));
            }
            Ok(format!("server prg expansions {prg}"))
        }));
    }
    out
}

pub fn adversary_suite(seed: u64) -> Vec<Check> {
    let n = 9;
    let t = active_threshold(n);
    let mut out = Vec::new();
    for a in [
        AdversaryScript::ForgeSignature { victim: UserId(0) },
        AdversaryScript::TamperCiphertext,
        AdversaryScript::WithholdBroadcast { victim: UserId(0) },
        AdversaryScript::ReplayRegistration { victim: UserId(0) },
    ] {
        let c = RunConfig { n, t: Some(t), m: 8, mode: Mode::ActiveAdversary, group: Some("desk".into()), seed, adversary: Some(a), ..Default::default() };
        out.push(outcome(&format!("adversary/{}", a.name()), simulate(&c), |r| {
            let o = &r.result.outcome;
            let revealed = o.transcript.entries.iter().any(|e| e.tag == crate::protocol::Tag::ShareSum.name());
            match a {
                AdversaryScript::ReplayRegistration { .. } => {
                    (r.matches_oracle() && !r.result.notes.is_empty()).then(|| r.result.notes.join("; ")).ok_or_else(|| "replay accepted".into())
                }
                AdversaryScript::WithholdBroadcast { victim } => {
                    let abort = o.user_aborts.get(&victim).map(|(rd, c)| format!("victim aborted in round {rd}: {c}"));
                    abort.ok_or_else(|| "victim carried on without a broadcast".into())
                }
                _ => {
                    let all = o.user_aborts.len() == n;
                    (all && !revealed).then(|| format!("{} users aborted, no share-sums", o.user_aborts.len())).ok_or_else(|| {
                        format!("{} of {n} aborted, share-sums revealed: {revealed}", o.user_aborts.len())
                    })
                }
            }
        }));
    }
    let safe = exhaustive_split_check(6..=15, |n| (n - 1) / 3);
    out.push(Check::new(
        "adversary/split-view-below-a-third",
        safe.holds(),
        format!("{} splits, {} admitting two lists", safe.cases, safe.counterexamples.len()),
    ));
    out
}
