use ahsecagg::harness::{simulate, RunConfig, Scheme};
use ahsecagg::UserId;
use proptest::prelude::*;

fn cfg(scheme: Scheme, n: usize, m: usize, seed: u64) -> RunConfig {
    RunConfig { scheme, n, m, seed, group: Some("desk".into()), ..RunConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn secagg_is_exact_and_follows_the_prg_law(seed in any::<u64>(), n in 4usize..14, m in 1usize..40, rate in 0.0f64..0.35) {
        let mut c = cfg(Scheme::SecAgg, n, m, seed);
        c.t = Some((n / 2 + 1).max(2));
        c.dropout_rate = rate;
        let r = simulate(&c).unwrap();
        let o = &r.result.outcome;
        prop_assume!(o.output.is_some());
        prop_assert!(r.matches_oracle());
        let u3 = o.survivors.u3.as_ref().unwrap().len() as u64;
        let u2 = o.survivors.u2.as_ref().unwrap().len() as u64;
        let d = u2 - u3;
        let s = o.metrics.server().ops;
        prop_assert_eq!(s.prg_element_expansions, (d * u3 + u3) * m as u64);
        prop_assert_eq!(s.shamir_reconstructions, u2);
    }

    #[test]
    fn effiagg_is_exact_for_bounded_inputs(seed in any::<u64>(), n in 3usize..9, m in 1usize..8) {
        let r = simulate(&cfg(Scheme::EffiAgg, n, m, seed)).unwrap();
        prop_assert!(r.matches_oracle());
    }
}

#[test]
fn discrete_log_work_grows_with_the_input_range() {
    let steps = |bound: u64| {
        let c = RunConfig { effiagg_bound: bound, ..cfg(Scheme::EffiAgg, 5, 4, 1) };
        let r = simulate(&c).unwrap();
        assert!(r.matches_oracle());
        r.result.outcome.metrics.server().ops.bsgs_steps
    };
    let (small, large) = (steps(1 << 6), steps(1 << 14));
    // Sixteen times the width per component, give or take rounding.
    assert!(large >= 12 * small && large <= 20 * small, "{small} -> {large}");
}

#[test]
fn additive_masking_ignores_the_input_range() {
    let ops = |seed| {
        let r = simulate(&cfg(Scheme::AhSecAgg, 6, 8, seed)).unwrap();
        assert!(r.matches_oracle());
        let s = r.result.outcome.metrics.server().ops;
        (s.bsgs_steps, s.modexp, s.field_mults, s.shamir_reconstructions)
    };
    assert_eq!(ops(1), ops(2));
    assert_eq!(ops(1).0, 0);
}

#[test]
fn secagg_users_dropped_after_sharing_are_unmasked() {
    let mut c = cfg(Scheme::SecAgg, 10, 100, 4);
    c.t = Some(6);
    c.dropout_rate = 0.3;
    let r = simulate(&c).unwrap();
    let o = &r.result.outcome;
    assert!(r.matches_oracle());
    let u3 = o.survivors.u3.as_ref().unwrap();
    assert_eq!(u3.len(), 7);
    assert!(!u3.contains(&UserId(10)));
    assert_eq!(o.metrics.server().ops.prg_element_expansions, 2800);
}
