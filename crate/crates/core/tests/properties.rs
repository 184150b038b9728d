mod common;

use common::props;
use grigorchuk_cw::tree::{decompose, words_equal};
use grigorchuk_cw::words::{weighted_length, EtaNumber, Gen, GenWord};
use proptest::prelude::*;

macro_rules! seeded {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = props::$name(&mut props::rng()) {
                    panic!("{e}");
                }
            }
        )*
    };
}

seeded!(
    word_reduction_oracle,
    word_algebra,
    triviality_oracle,
    wreath_homomorphism,
    normal_form_round_trip,
    genus_invariance,
    eta_identities,
    contraction,
    closure_bound,
    derived_states,
    k_inactivity,
    omega_on_triples,
    pbar_lift_independence,
    generators_fix_r_n,
    orbit_table_soundness,
    orbit_counts_without_swaps,
);

fn raw_word(max: usize) -> impl Strategy<Value = Vec<Gen>> {
    prop::collection::vec((0usize..4).prop_map(Gen::from_index), 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn reduction_is_a_monoid_map(u in raw_word(200), v in raw_word(200)) {
        let (ru, rv) = (GenWord::reduce(u.clone()), GenWord::reduce(v.clone()));
        prop_assert_eq!(GenWord::reduce(ru.letters().to_vec()), ru.clone());
        prop_assert_eq!(GenWord::reduce(u.into_iter().chain(v)), ru.multiply(&rv));
    }

    #[test]
    fn inverse_laws(u in raw_word(200)) {
        let w = GenWord::reduce(u);
        prop_assert_eq!(w.invert().invert(), w.clone());
        prop_assert!(w.multiply(&w.invert()).is_empty());
        let l = weighted_length(&w);
        prop_assert!(l >= EtaNumber::zero());
        prop_assert_eq!(l == EtaNumber::zero(), w.is_empty());
    }

    #[test]
    fn decomposition_respects_products(u in raw_word(60), v in raw_word(60)) {
        let (u, v) = (GenWord::reduce(u), GenWord::reduce(v));
        let (du, dv, duv) = (decompose(&u), decompose(&v), decompose(&u.multiply(&v)));
        prop_assert_eq!(duv.active, du.active ^ dv.active);
        for i in 0..2 {
            prop_assert!(words_equal(duv.state(i), &du.state(i).multiply(dv.state(i ^ du.active as usize))));
        }
    }
}
