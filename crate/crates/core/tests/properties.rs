use nlgame_core::audit::{
    condition_on_event, expected_wins, product_joint, round_to_sns, single_letterize, ROUNDING_TOL,
};
use nlgame_core::game::{chsh, tensor_power, Game, DEFAULT_BUDGET_CELLS};
use nlgame_core::gamefile::{game_digest, GameFile};
use nlgame_core::info::{approx_ns_check, combined_divergence_identity, dvar_mass, kl_mass, pinsker_bound};
use nlgame_core::sampling::{dirichlet, random_small_game};
use nlgame_core::strategy::{is_nonsignalling, proper_subsets, HvtMixture};
use nlgame_core::tensor::{Channel, ChannelKind, JointTable, Normalization};
use nlgame_core::values::{
    classical_value, eta_lower_search, eta_upper_bound, ns_value, sample_feasible_joint, sns_value, value_of_joint,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn game_from(seed: u64) -> (Game, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=3);
    (random_small_game(m, 2, &mut rng), rng)
}

fn joint_of(game: &Game, rng: &mut ChaCha8Rng) -> JointTable {
    JointTable::new(game.joint_shape(), dirichlet(game.joint_shape().len(), rng), Normalization::Distribution).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn classes_are_ordered(seed in any::<u64>()) {
        let (g, _) = game_from(seed);
        let c = classical_value(&g).unwrap().value;
        let ns = ns_value(&g).unwrap().value;
        let sns = sns_value(&g).unwrap().value;
        prop_assert!(c <= ns + 1e-8, "{c} > {ns}");
        prop_assert!(ns <= sns + 1e-8, "{ns} > {sns}");
    }

    #[test]
    fn mixtures_do_not_signal(seed in any::<u64>(), k in 1usize..6) {
        let (g, mut rng) = game_from(seed);
        let ch = HvtMixture::random(&g, k, &mut rng).to_channel(&g).unwrap();
        prop_assert!(is_nonsignalling(&ch, 1e-12).nonsignalling);
    }

    #[test]
    fn divergence_identity_holds(seed in any::<u64>()) {
        let (g, mut rng) = game_from(seed);
        let joint = joint_of(&g, &mut rng);
        for a in proper_subsets(g.parties()) {
            let id = combined_divergence_identity(&joint, &g, a).unwrap();
            prop_assert!((id.lhs - id.rhs).abs() <= 1e-9);
        }
    }

    #[test]
    fn pinsker(seed in any::<u64>(), k in 2usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = dirichlet(k, &mut rng);
        let q = dirichlet(k, &mut rng);
        prop_assert!(dvar_mass(&p, &q) <= pinsker_bound(kl_mass(&p, &q).0) + 1e-12);
    }

    #[test]
    fn conditioning_costs_its_log_probability(seed in any::<u64>(), scale in 0.2f64..=1.0) {
        let (g, mut rng) = game_from(seed);
        let nu = g.num_responses();
        let mass: Vec<f64> = (0..g.num_queries()).flat_map(|_| dirichlet(nu, &mut rng)).map(|v| v * scale).collect();
        let ch = Channel::new(g.query_shape().clone(), g.response_shape().clone(), mass, ChannelKind::Subchannel).unwrap();
        let mut event: Vec<u8> = (0..g.num_queries() * nu).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        event[0] = 1;
        let c = condition_on_event(&ch, &g, &event).unwrap();
        prop_assert!((c.divergence - c.exponent).abs() <= 1e-9);
        prop_assert!((c.exponent - (1.0 / c.event_probability).log2()).abs() <= 1e-12);
    }

    #[test]
    fn game_files_round_trip(seed in any::<u64>()) {
        let (g, _) = game_from(seed);
        let file = GameFile::from_game(&g).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let back = GameFile::from_json(&text).unwrap();
        let parsed = back.to_game().unwrap();
        prop_assert_eq!(parsed.predicate(), g.predicate());
        prop_assert_eq!(back.digest().unwrap(), game_digest(&g).unwrap());
    }

    #[test]
    fn rounding_respects_its_bound(seed in any::<u64>(), t in 0.0f64..0.5) {
        let (g, mut rng) = game_from(seed);
        let ns = ns_value(&g).unwrap();
        let base = ns.witness.channel().unwrap().joint(g.query()).unwrap();
        let target = base.mix(&joint_of(&g, &mut rng), t).unwrap();
        let r = round_to_sns(&target, &g).unwrap();
        prop_assert!(r.achieved <= r.bound + ROUNDING_TOL, "{} > {}", r.achieved, r.bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn products_of_feasible_points_stay_feasible(seed in any::<u64>(), delta in 1e-3f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = chsh();
        let rg = tensor_power(&g, 2, DEFAULT_BUDGET_CELLS).unwrap();
        let single = sample_feasible_joint(&g, delta, &mut rng).unwrap();
        let gap = approx_ns_check(&single, &g, delta).unwrap().max_gap;
        let product = product_joint(&single, &rg).unwrap();
        let check = approx_ns_check(&product, rg.game(), 2.0 * delta).unwrap();
        prop_assert!(check.passes);
        prop_assert!((check.max_gap - 2.0 * gap).abs() <= 1e-9);
        let wins = expected_wins(&product, &rg).unwrap();
        prop_assert!((wins - 2.0 * value_of_joint(&g, &single).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn single_letterization_halves_the_gap(seed in any::<u64>(), budget in 1e-2f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = chsh();
        let rg = tensor_power(&g, 2, DEFAULT_BUDGET_CELLS).unwrap();
        let joint = sample_feasible_joint(rg.game(), budget, &mut rng).unwrap();
        let gap = approx_ns_check(&joint, rg.game(), budget).unwrap().max_gap;
        let single = single_letterize(&joint, &rg).unwrap();
        prop_assert!(approx_ns_check(&single, &g, gap / 2.0).unwrap().passes);
        let per_copy = expected_wins(&joint, &rg).unwrap() / 2.0;
        prop_assert!((per_copy - value_of_joint(&g, &single).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn eta_search_stays_below_the_upper_bound(seed in any::<u64>(), delta in 0.0f64..2.0) {
        let (g, _) = game_from(seed);
        let lower = eta_lower_search(&g, delta, 8, seed).unwrap().value;
        prop_assert!(lower <= eta_upper_bound(&g, delta).unwrap() + 1e-6);
        prop_assert!(lower >= ns_value(&g).unwrap().value - 1e-6 || delta == 0.0);
    }
}
