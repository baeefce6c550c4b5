//! Bounded candidate sets for scoring with the Q-function.
//!
//! A rich player can have tens of thousands of legal actions. When the legal
//! set fits within `limit` it is returned whole; otherwise the set is the
//! anchor actions (null, the largest single-type purchase per lane and type,
//! the largest pylon-only purchase) topped up to `limit`, either by uniform
//! sampling (training) or by an even stride over the canonical order
//! (search, which must not depend on a seed).

use std::collections::BTreeSet;

use rand::Rng;

use crate::config::GameConfig;
use crate::game::{action_cost, legal_actions_for, sample_legal_action, Lane, PlayerAction, UnitType};

/// Number of legal actions, without building the list.
pub fn count_legal(config: &GameConfig, currency: u32, pylons_owned: u32) -> usize {
    let [cm, cb, ci] = UnitType::ALL.map(|t| config.building_cost(t));
    let cp = config.pylon_cost;
    let room = config.max_pylons.saturating_sub(pylons_owned);
    let mut building = 0usize; // purchases with at least one building, per lane
    let mut pylon_only = 0usize;
    for m in 0..=currency / cm {
        let left_m = currency - m * cm;
        for b in 0..=left_m / cb {
            let left_b = left_m - b * cb;
            for i in 0..=left_b / ci {
                let n = ((left_b - i * ci) / cp).min(room) as usize + 1;
                if m + b + i == 0 {
                    pylon_only += n;
                } else {
                    building += n;
                }
            }
        }
    }
    2 * building + pylon_only
}

fn anchors(config: &GameConfig, currency: u32, pylons_owned: u32) -> BTreeSet<PlayerAction> {
    let mut set = BTreeSet::from([PlayerAction::NULL]);
    for lane in Lane::BOTH {
        for t in UnitType::ALL {
            let n = currency / config.building_cost(t);
            if n > 0 {
                let mut buildings = [0; 3];
                buildings[t.index()] = n;
                set.insert(PlayerAction::new(lane, buildings, 0));
            }
        }
    }
    let pylons = (currency / config.pylon_cost).min(config.max_pylons.saturating_sub(pylons_owned));
    if pylons > 0 {
        set.insert(PlayerAction::new(Lane::Top, [0; 3], pylons));
    }
    debug_assert!(set.iter().all(|a| action_cost(a, config) <= currency));
    set
}

/// Uniformly topped-up candidate set. `limit == 0` means no limit.
pub fn sampled_candidates<R: Rng + ?Sized>(
    config: &GameConfig,
    currency: u32,
    pylons_owned: u32,
    limit: usize,
    rng: &mut R,
) -> Vec<PlayerAction> {
    if limit == 0 || count_legal(config, currency, pylons_owned) <= limit {
        return legal_actions_for(config, currency, pylons_owned);
    }
    let mut set = anchors(config, currency, pylons_owned);
    let mut attempts = 0;
    while set.len() < limit && attempts < 8 * limit {
        set.insert(sample_legal_action(config, currency, pylons_owned, rng));
        attempts += 1;
    }
    set.into_iter().collect()
}

/// Deterministic candidate set: anchors plus an even stride through the
/// canonical legal order. `limit == 0` means no limit.
pub fn strided_candidates(config: &GameConfig, currency: u32, pylons_owned: u32, limit: usize) -> Vec<PlayerAction> {
    if limit == 0 || count_legal(config, currency, pylons_owned) <= limit {
        return legal_actions_for(config, currency, pylons_owned);
    }
    let legal = legal_actions_for(config, currency, pylons_owned);
    let mut set = anchors(config, currency, pylons_owned);
    let room = limit.saturating_sub(set.len()).max(1);
    let stride = legal.len() as f64 / room as f64;
    for k in 0..room {
        set.insert(legal[(k as f64 * stride) as usize]);
    }
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn count_matches_enumeration() {
        let cfg = GameConfig::default();
        for (c, p) in [(0, 0), (50, 0), (150, 0), (777, 2), (3000, 0), (3000, 3)] {
            assert_eq!(count_legal(&cfg, c, p), legal_actions_for(&cfg, c, p).len(), "{c} {p}");
        }
    }

    #[test]
    fn small_sets_are_exhaustive() {
        let cfg = GameConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let all = legal_actions_for(&cfg, 200, 0);
        assert_eq!(sampled_candidates(&cfg, 200, 0, all.len(), &mut rng), all);
        assert_eq!(strided_candidates(&cfg, 200, 0, 0), all);
    }

    #[test]
    fn large_sets_are_bounded_legal_and_anchored() {
        let cfg = GameConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for cands in [
            sampled_candidates(&cfg, 2500, 1, 64, &mut rng),
            strided_candidates(&cfg, 2500, 1, 64),
        ] {
            assert!(cands.len() <= 64 && cands.len() > 40);
            assert!(cands.iter().all(|a| action_cost(a, &cfg) <= 2500 && a.pylons <= 2));
            assert!(cands.contains(&PlayerAction::NULL));
            assert!(cands.contains(&PlayerAction::new(Lane::Bottom, [50, 0, 0], 0)));
            assert!(cands.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(strided_candidates(&cfg, 2500, 1, 64), strided_candidates(&cfg, 2500, 1, 64));
    }
}
