use serde::{Deserialize, Serialize};

use super::{action_cost, AbstractState, Lane, PlayerAction, PlayerId, UnitType};
use crate::config::GameConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurrencyEstimate {
    pub value: u32,
    /// The accounting went negative and was clamped to zero.
    pub inconsistent: bool,
}

/// The purchase `who` made between two consecutive observations, read off
/// the building and pylon count deltas.
pub fn observed_purchase(prev: &AbstractState, next: &AbstractState, who: PlayerId) -> PlayerAction {
    let p = who.index();
    let mut lane = Lane::Top;
    let mut buildings = [0u32; 3];
    for l in Lane::BOTH {
        let mut any = false;
        for t in UnitType::ALL {
            let delta = next.buildings[p][l.index()][t.index()]
                .saturating_sub(prev.buildings[p][l.index()][t.index()]);
            if delta > 0 {
                buildings[t.index()] += delta;
                any = true;
            }
        }
        if any {
            lane = l;
        }
    }
    let pylons = next.pylons[p].saturating_sub(prev.pylons[p]);
    PlayerAction::new(lane, buildings, pylons)
}

/// Opponent currency from public information: the start amount, plus each
/// wave's stipend (from the pylons they owned after buying), minus what
/// their observed purchases cost.
///
/// Each history entry is the state at a decision point together with the
/// enemy purchase observed at that point. The result is the enemy's
/// currency at the decision point following the last entry.
pub fn estimate_enemy_currency(
    config: &GameConfig,
    history: &[(AbstractState, PlayerAction)],
) -> CurrencyEstimate {
    let mut tracker = EnemyCurrencyTracker::new(config);
    for (state, purchase) in history {
        tracker.observe(config, state.pylons[state.enemy().index()], purchase);
    }
    tracker.estimate()
}

/// Incremental form of [`estimate_enemy_currency`] used during play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnemyCurrencyTracker {
    balance: i64,
    inconsistent: bool,
}

impl EnemyCurrencyTracker {
    pub fn new(config: &GameConfig) -> Self {
        Self {
            balance: config.start_currency as i64,
            inconsistent: false,
        }
    }

    /// Records one wave: the enemy owned `pylons_before` and bought `purchase`.
    pub fn observe(&mut self, config: &GameConfig, pylons_before: u32, purchase: &PlayerAction) {
        let pylons_after = pylons_before + purchase.pylons;
        self.balance += config.stipend(pylons_after) as i64 - action_cost(purchase, config) as i64;
        if self.balance < 0 {
            self.inconsistent = true;
            self.balance = 0;
        }
    }

    pub fn estimate(&self) -> CurrencyEstimate {
        CurrencyEstimate {
            value: self.balance as u32,
            inconsistent: self.inconsistent,
        }
    }
}
