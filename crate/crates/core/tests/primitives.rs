use ahsecagg::algebra::GroupParams;
use ahsecagg::primitives::{ae_dec, ae_enc, derive_nonce, dh_agree, dh_gen, BulletinBoard, Registration, SigKeyPair};
use ahsecagg::{PartyId, UserId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agreement_is_symmetric(seed in any::<u64>()) {
        let g = GroupParams::desk();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (a, b) = (dh_gen(&g, &mut rng), dh_gen(&g, &mut rng));
        let ab = dh_agree(&g, a.secret(), b.public()).unwrap();
        let ba = dh_agree(&g, b.secret(), a.public()).unwrap();
        prop_assert_eq!(ab.as_bytes(), ba.as_bytes());
    }

    #[test]
    fn agreed_key_carries_messages(seed in any::<u64>(), msg in proptest::collection::vec(any::<u8>(), 0..2048), flip in any::<usize>()) {
        let g = GroupParams::desk();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (a, b) = (dh_gen(&g, &mut rng), dh_gen(&g, &mut rng));
        let k = dh_agree(&g, a.secret(), b.public()).unwrap();
        let k2 = dh_agree(&g, b.secret(), a.public()).unwrap();
        let mut ct = ae_enc(&k, &msg, derive_nonce(1, 0, 1));
        prop_assert_eq!(ae_dec(&k2, &ct).unwrap(), msg);
        let i = flip % ct.len();
        ct[i] ^= 1;
        prop_assert!(ae_dec(&k2, &ct).is_err());
    }

    #[test]
    fn board_never_overwrites(seed in any::<u64>(), id in 0u32..64) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let board = BulletinBoard::new();
        let who = PartyId::User(UserId(id));
        let first = SigKeyPair::generate(&mut rng);
        board.register(&Registration::new(who, &first)).unwrap();
        let second = SigKeyPair::generate(&mut rng);
        prop_assert!(board.register(&Registration::new(who, &second)).is_err());
        prop_assert!(board.register(&Registration::new(who, &first)).is_err());
        prop_assert_eq!(board.lookup(who).unwrap(), first.public());
        prop_assert_eq!(board.len(), 1);
    }
}
