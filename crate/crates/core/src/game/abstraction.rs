use serde::{Deserialize, Serialize};

use super::{Lane, MicroState, PlayerId, PlayerState, Unit, UnitType};
use crate::config::GameConfig;

pub const CELLS_PER_LANE: usize = 4;
pub const GRID_CELLS: usize = 2 * CELLS_PER_LANE;

/// What a player sees before a wave.
///
/// Player-indexed arrays are in absolute order (Player 1 first) and grid
/// cells run from Player 1's edge: cells 0..4 are the top lane, 4..8 the
/// bottom lane. Only the `perspective` player's currency is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractState {
    pub wave: u32,
    pub perspective: PlayerId,
    /// `[player][lane]`, as a fraction of the maximum.
    pub base_health: [[f64; 2]; 2],
    pub currency: u32,
    /// `[player][lane][unit type]`.
    pub buildings: [[[u32; 3]; 2]; 2],
    pub pylons: [u32; 2],
    /// `[owner][unit type][cell]`.
    pub unit_grid: [[[u32; GRID_CELLS]; 3]; 2],
}

impl AbstractState {
    pub fn enemy(&self) -> PlayerId {
        self.perspective.other()
    }

    pub fn health(&self, player: PlayerId, lane: Lane) -> f64 {
        self.base_health[player.index()][lane.index()]
    }

    pub fn lane_cells(&self, owner: PlayerId, kind: UnitType, lane: Lane) -> &[u32] {
        let start = lane.index() * CELLS_PER_LANE;
        &self.unit_grid[owner.index()][kind.index()][start..start + CELLS_PER_LANE]
    }

    pub fn lane_unit_count(&self, lane: Lane) -> u32 {
        PlayerId::BOTH
            .iter()
            .flat_map(|&p| UnitType::ALL.map(move |t| (p, t)))
            .map(|(p, t)| self.lane_cells(p, t, lane).iter().sum::<u32>())
            .sum()
    }

    /// The same position seen by the other player, who holds `their_currency`.
    pub fn flipped(&self, their_currency: u32) -> AbstractState {
        AbstractState {
            perspective: self.perspective.other(),
            currency: their_currency,
            ..self.clone()
        }
    }

    /// Lowest base health on the board.
    pub fn min_health(&self) -> f64 {
        self.base_health.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

fn cell_of(pos: f64, lane_length: f64) -> usize {
    let k = (pos / lane_length * CELLS_PER_LANE as f64).floor();
    (k.max(0.0) as usize).min(CELLS_PER_LANE - 1)
}

pub fn abstract_state(state: &MicroState, perspective: PlayerId) -> AbstractState {
    let cfg = &state.config;
    let mut unit_grid = [[[0u32; GRID_CELLS]; 3]; 2];
    for lane in Lane::BOTH {
        for u in &state.lanes[lane.index()] {
            let cell = lane.index() * CELLS_PER_LANE + cell_of(u.pos, cfg.lane_length);
            unit_grid[u.owner.index()][u.kind.index()][cell] += 1;
        }
    }
    let p = &state.players;
    AbstractState {
        wave: state.wave,
        perspective,
        base_health: [0, 1].map(|i| p[i].base_health.map(|h| h / cfg.base_health_max)),
        currency: p[perspective.index()].currency,
        buildings: [p[0].buildings, p[1].buildings],
        pylons: [p[0].pylons, p[1].pylons],
        unit_grid,
    }
}

/// A micro state consistent with `state`: units at full health in the middle
/// of their cells. The unobserved enemy currency is set to zero.
pub fn realize(state: &AbstractState, config: &GameConfig) -> MicroState {
    let players = PlayerId::BOTH.map(|p| PlayerState {
        currency: if p == state.perspective { state.currency } else { 0 },
        pylons: state.pylons[p.index()],
        buildings: state.buildings[p.index()],
        base_health: state.base_health[p.index()].map(|h| h * config.base_health_max),
    });
    let mut lanes: [Vec<Unit>; 2] = [Vec::new(), Vec::new()];
    for owner in PlayerId::BOTH {
        for kind in UnitType::ALL {
            for (cell, &n) in state.unit_grid[owner.index()][kind.index()].iter().enumerate() {
                let lane = cell / CELLS_PER_LANE;
                let k = (cell % CELLS_PER_LANE) as f64;
                let pos = (k + 0.5) / CELLS_PER_LANE as f64 * config.lane_length;
                let hp = config.units.get(kind).hp;
                lanes[lane].extend((0..n).map(|_| Unit { owner, kind, pos, hp }));
            }
        }
    }
    MicroState::from_parts(config.clone(), state.wave, players, lanes, 0)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::game::{new_game, sample_legal_action};

    fn midgame(seed: u64, waves: u32) -> MicroState {
        let cfg = GameConfig::default();
        let mut s = new_game(cfg.clone(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..waves {
            if s.is_terminal() {
                break;
            }
            let a1 = sample_legal_action(&cfg, s.players[0].currency, s.players[0].pylons, &mut rng);
            let a2 = sample_legal_action(&cfg, s.players[1].currency, s.players[1].pylons, &mut rng);
            s.step(&a1, &a2).unwrap();
        }
        s
    }

    #[test]
    fn position_buckets() {
        assert_eq!(cell_of(0.10, 1.0), 0);
        assert_eq!(cell_of(0.25, 1.0), 1);
        assert_eq!(cell_of(0.99, 1.0), 3);
        assert_eq!(cell_of(1.0, 1.0), 3);
        assert_eq!(cell_of(0.0, 1.0), 0);
    }

    #[test]
    fn unit_in_bottom_lane_lands_in_bottom_cells() {
        let mut s = new_game(GameConfig::default(), 1).unwrap();
        s.lanes[1].push(Unit { owner: PlayerId::P2, kind: UnitType::Baneling, pos: 0.10, hp: 1.0 });
        let a = abstract_state(&s, PlayerId::P1);
        assert_eq!(a.unit_grid[1][1][4], 1);
        assert_eq!(a.lane_unit_count(Lane::Bottom), 1);
        assert_eq!(a.lane_unit_count(Lane::Top), 0);
    }

    #[test]
    fn grid_partitions_live_units() {
        for seed in 0..20 {
            let s = midgame(seed, 15);
            let a = abstract_state(&s, PlayerId::P1);
            for lane in Lane::BOTH {
                assert_eq!(a.lane_unit_count(lane) as usize, s.lanes[lane.index()].len());
            }
        }
    }

    #[test]
    fn only_own_currency_is_visible() {
        let mut s = new_game(GameConfig::default(), 1).unwrap();
        s.players[1].currency = 999;
        assert_eq!(abstract_state(&s, PlayerId::P1).currency, 100);
        assert_eq!(abstract_state(&s, PlayerId::P2).currency, 999);
    }

    #[test]
    fn requantization_is_idempotent() {
        let cfg = GameConfig::default();
        for seed in 0..20 {
            let a = abstract_state(&midgame(seed, 12), PlayerId::P1);
            let b = abstract_state(&realize(&a, &cfg), PlayerId::P1);
            assert_eq!(a.unit_grid, b.unit_grid);
            assert_eq!(a.buildings, b.buildings);
            assert_eq!((a.wave, a.currency, a.pylons), (b.wave, b.currency, b.pylons));
            for (x, y) in a.base_health.iter().flatten().zip(b.base_health.iter().flatten()) {
                assert!((x - y).abs() < 1e-12);
            }
            // A realized state re-realizes to itself exactly.
            let c = abstract_state(&realize(&b, &cfg), PlayerId::P1);
            assert_eq!(b.unit_grid, c.unit_grid);
        }
    }
}
