use rand::Rng;

use super::{Lane, MicroState, PlayerAction, PlayerId, UnitType};
use crate::config::GameConfig;
use crate::error::{Error, Result};

pub fn action_cost(action: &PlayerAction, config: &GameConfig) -> u32 {
    UnitType::ALL
        .iter()
        .map(|&t| action.buildings[t.index()] * config.building_cost(t))
        .sum::<u32>()
        + action.pylons * config.pylon_cost
}

pub fn legal_actions(state: &MicroState, player: PlayerId) -> Result<Vec<PlayerAction>> {
    if state.outcome().is_some() {
        return Err(Error::Terminal);
    }
    let p = &state.players[player.index()];
    Ok(legal_actions_for(&state.config, p.currency, p.pylons))
}

/// Every affordable purchase, deduplicated, in canonical order.
pub fn legal_actions_for(config: &GameConfig, currency: u32, pylons_owned: u32) -> Vec<PlayerAction> {
    let [cm, cb, ci] = UnitType::ALL.map(|t| config.building_cost(t));
    let cp = config.pylon_cost;
    let pylon_room = config.max_pylons.saturating_sub(pylons_owned);
    let mut out = Vec::new();
    for lane in Lane::BOTH {
        for m in 0..=currency / cm {
            let left_m = currency - m * cm;
            for b in 0..=left_m / cb {
                let left_b = left_m - b * cb;
                for i in 0..=left_b / ci {
                    let left_i = left_b - i * ci;
                    for p in 0..=(left_i / cp).min(pylon_room) {
                        let action = PlayerAction {
                            lane,
                            buildings: [m, b, i],
                            pylons: p,
                        };
                        if lane == Lane::Bottom && action.builds_nothing() {
                            continue;
                        }
                        out.push(action);
                    }
                }
            }
        }
    }
    out
}

/// Draws uniformly from `legal_actions_for(config, currency, pylons_owned)`
/// without materializing the list (rejection sampling over the bounding box).
pub fn sample_legal_action<R: Rng + ?Sized>(
    config: &GameConfig,
    currency: u32,
    pylons_owned: u32,
    rng: &mut R,
) -> PlayerAction {
    let [cm, cb, ci] = UnitType::ALL.map(|t| config.building_cost(t));
    let cp = config.pylon_cost;
    let pylon_max = (currency / cp).min(config.max_pylons.saturating_sub(pylons_owned));
    loop {
        let action = PlayerAction {
            lane: if rng.gen::<bool>() { Lane::Top } else { Lane::Bottom },
            buildings: [
                rng.gen_range(0..=currency / cm),
                rng.gen_range(0..=currency / cb),
                rng.gen_range(0..=currency / ci),
            ],
            pylons: rng.gen_range(0..=pylon_max),
        };
        if action.lane == Lane::Bottom && action.builds_nothing() {
            continue;
        }
        if action_cost(&action, config) <= currency {
            return action;
        }
    }
}
