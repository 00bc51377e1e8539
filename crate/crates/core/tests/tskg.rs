use std::collections::BTreeSet;

use ahsecagg::algebra::{FieldParams, GroupParams};
use ahsecagg::error::Error;
use ahsecagg::harness::{simulate, DropoutScript, RunConfig, Scheme};
use ahsecagg::masking::MaskParams;
use ahsecagg::protocol::{Mode, ProtocolConfig, RunEnv};
use ahsecagg::tskg::deploy::Deployment;
use ahsecagg::UserId;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn matches_secagg_under_the_same_dropouts(seed in any::<u64>(), n in 4usize..12, rate in 0.0f64..0.3, round in 1u8..5) {
        let base = RunConfig { n, m: 12, seed, dropout_rate: rate, dropout_round: round, t: Some((n / 2 + 1).max(2)), group: Some("desk".into()), ..RunConfig::default() };
        let plain = simulate(&RunConfig { scheme: Scheme::SecAgg, ..base.clone() }).unwrap();
        let tskg = simulate(&RunConfig { scheme: Scheme::SecAggTskg, ..base }).unwrap();
        prop_assert_eq!(plain.result.outcome.output.is_some(), tskg.result.outcome.output.is_some());
        prop_assert_eq!(&plain.result.outcome.survivors.u3, &tskg.result.outcome.survivors.u3);
        if plain.result.outcome.output.is_some() {
            prop_assert!(tskg.matches_oracle());
            prop_assert_eq!(&plain.result.outcome.output, &tskg.result.outcome.output);
        }
    }
}

fn deployment(n: usize, t: usize, m: usize, seed: u64) -> (Deployment, Vec<Vec<ahsecagg::algebra::FieldElement>>) {
    let f = FieldParams::default();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mask = MaskParams::random(&f, m, &mut rng).unwrap();
    let cfg = ProtocolConfig::new(n, t, Mode::SemiHonest, f, GroupParams::desk().shared(), mask).unwrap();
    let x = (0..n).map(|_| (0..m).map(|_| f.elem(rng.gen::<u32>() as u64)).collect()).collect();
    let mut d = Deployment::new(&cfg, &RunEnv::seeded(seed)).unwrap();
    d.prepare().unwrap();
    (d, x)
}

#[test]
fn fresh_nonces_give_fresh_keys_and_reuse_is_refused() {
    let (mut d, x) = deployment(7, 5, 6, 11);
    let mut seen = BTreeSet::new();
    for k in 0..4u8 {
        let run = d.aggregate_with_nonce([k; 32], &x, &DropoutScript::at(3, [UserId(k as u32)])).unwrap();
        assert!(run.result.matches_oracle());
        for (a, b) in run.temp_keys.values() {
            assert!(seen.insert(format!("{a:?}")));
            assert!(seen.insert(format!("{b:?}")));
        }
    }
    assert!(matches!(d.aggregate_with_nonce([2; 32], &x, &DropoutScript::none()), Err(Error::NonceReuse)));
}

#[test]
fn later_rounds_never_carry_preparation_shares() {
    let (mut d, x) = deployment(8, 6, 4, 12);
    let held = d.initial_share_encodings();
    assert!(!held.is_empty());
    for _ in 0..3 {
        let run = d.aggregate(&x, &DropoutScript::at(2, [UserId(3)])).unwrap();
        assert!(run.result.matches_oracle());
        for e in &run.result.outcome.transcript.entries {
            assert!(held.iter().all(|h| !e.payload.windows(h.len()).any(|w| w == h.as_slice())));
        }
    }
}
