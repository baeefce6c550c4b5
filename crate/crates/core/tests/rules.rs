mod common;

use proptest::prelude::*;
use tugwar::GameConfig;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_games_keep_every_rule(seed in any::<u64>()) {
        let v = common::random_game_violations(&GameConfig::default(), seed);
        prop_assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn rules_hold_under_other_economies(seed in any::<u64>(), start in 50u32..400, stipend in 1u32..200, jitter in 0.0f64..0.9) {
        let cfg = GameConfig { start_currency: start, base_stipend: stipend, damage_jitter: jitter, ..GameConfig::default() };
        let v = common::random_game_violations(&cfg, seed);
        prop_assert!(v.is_empty(), "{v:?}");
    }
}

#[test]
fn shrunk_config_is_valid() {
    common::shrunk_config().validate().unwrap();
}
