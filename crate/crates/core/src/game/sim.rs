use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{action_cost, GameOutcome, Lane, PlayerAction, PlayerId, UnitType, WinCondition};
use crate::config::GameConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub currency: u32,
    pub pylons: u32,
    /// Indexed `[lane][unit type]`.
    pub buildings: [[u32; 3]; 2],
    /// Indexed by lane, in hit points.
    pub base_health: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub owner: PlayerId,
    pub kind: UnitType,
    /// Distance from Player 1's edge of the lane.
    pub pos: f64,
    pub hp: f64,
}

/// The full simulator state.
///
/// `wave` is the wave about to be played. Damage jitter is drawn from one
/// ChaCha stream per lane, both derived from the game seed, so a lane's
/// randomness never depends on what happens in the other lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroState {
    pub config: GameConfig,
    pub wave: u32,
    pub players: [PlayerState; 2],
    /// Live units per lane.
    pub lanes: [Vec<Unit>; 2],
    rngs: [ChaCha8Rng; 2],
    /// First base to fall, recorded as (owner, lane).
    first_destroyed: Option<(PlayerId, Lane)>,
    outcome: Option<GameOutcome>,
}

pub fn new_game(config: GameConfig, seed: u64) -> Result<MicroState> {
    config.validate()?;
    let player = PlayerState {
        currency: config.start_currency,
        pylons: 0,
        buildings: [[0; 3]; 2],
        base_health: [config.base_health_max; 2],
    };
    Ok(MicroState {
        wave: 1,
        players: [player.clone(), player],
        lanes: [Vec::new(), Vec::new()],
        rngs: lane_rngs(seed),
        first_destroyed: None,
        outcome: None,
        config,
    })
}

fn lane_rngs(seed: u64) -> [ChaCha8Rng; 2] {
    [0u64, 1].map(|stream| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    })
}

enum Intent {
    Move,
    HitUnit(usize),
    HitBase,
}

impl MicroState {
    /// A state assembled from parts, e.g. a representative of an abstract
    /// state. Units are taken as given.
    pub fn from_parts(
        config: GameConfig,
        wave: u32,
        players: [PlayerState; 2],
        lanes: [Vec<Unit>; 2],
        seed: u64,
    ) -> Self {
        let mut state = MicroState {
            config,
            wave,
            players,
            lanes,
            rngs: lane_rngs(seed),
            first_destroyed: None,
            outcome: None,
        };
        state.outcome = terminal_outcome(&state);
        state
    }

    pub fn outcome(&self) -> Option<GameOutcome> {
        self.outcome
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn player(&self, id: PlayerId) -> &PlayerState {
        &self.players[id.index()]
    }

    pub fn check_legal(&self, player: PlayerId, action: &PlayerAction) -> Result<()> {
        let p = self.player(player);
        let illegal = |reason: String| Error::IllegalAction { player, reason };
        let cost = action_cost(action, &self.config);
        if cost > p.currency {
            return Err(illegal(format!("costs {cost} with {} available", p.currency)));
        }
        if p.pylons + action.pylons > self.config.max_pylons {
            return Err(illegal(format!(
                "would own {} pylons",
                p.pylons + action.pylons
            )));
        }
        Ok(())
    }

    /// Plays one wave with both players' purchases. Returns the successor and
    /// the game outcome if the wave ended the game.
    pub fn resolve_wave(
        &self,
        a1: &PlayerAction,
        a2: &PlayerAction,
    ) -> Result<(MicroState, Option<GameOutcome>)> {
        let mut next = self.clone();
        let outcome = next.step(a1, a2)?;
        Ok((next, outcome))
    }

    /// In-place form of [`MicroState::resolve_wave`].
    pub fn step(&mut self, a1: &PlayerAction, a2: &PlayerAction) -> Result<Option<GameOutcome>> {
        if self.outcome.is_some() {
            return Err(Error::Terminal);
        }
        self.check_legal(PlayerId::P1, a1)?;
        self.check_legal(PlayerId::P2, a2)?;

        for (id, action) in [(PlayerId::P1, a1), (PlayerId::P2, a2)] {
            let cost = action_cost(action, &self.config);
            let p = &mut self.players[id.index()];
            p.currency -= cost;
            p.pylons += action.pylons;
            for t in UnitType::ALL {
                p.buildings[action.lane.index()][t.index()] += action.buildings[t.index()];
            }
        }

        self.spawn();
        for _ in 0..self.config.ticks_per_wave {
            for lane in Lane::BOTH {
                self.tick_lane(lane);
            }
            if self.first_destroyed.is_none() {
                self.record_destroyed_base();
            }
        }

        self.wave += 1;
        for p in &mut self.players {
            p.currency += self.config.stipend(p.pylons);
        }
        self.outcome = terminal_outcome(self);
        Ok(self.outcome)
    }

    fn spawn(&mut self) {
        let length = self.config.lane_length;
        for lane in Lane::BOTH {
            for owner in PlayerId::BOTH {
                let pos = match owner {
                    PlayerId::P1 => 0.0,
                    PlayerId::P2 => length,
                };
                for kind in UnitType::ALL {
                    let n = self.players[owner.index()].buildings[lane.index()][kind.index()];
                    let hp = self.config.units.get(kind).hp;
                    self.lanes[lane.index()]
                        .extend((0..n).map(|_| Unit { owner, kind, pos, hp }));
                }
            }
        }
    }

    fn record_destroyed_base(&mut self) {
        // Within one tick, Player 1's bases are checked first.
        for owner in PlayerId::BOTH {
            for lane in Lane::BOTH {
                if self.players[owner.index()].base_health[lane.index()] <= 0.0 {
                    self.first_destroyed = Some((owner, lane));
                    return;
                }
            }
        }
    }

    fn tick_lane(&mut self, lane: Lane) {
        let cfg = &self.config;
        let length = cfg.lane_length;
        let units = &mut self.lanes[lane.index()];
        if units.is_empty() {
            return;
        }

        // Positions of each owner's units, sorted, for nearest-enemy lookups.
        let mut sorted: [Vec<(f64, usize)>; 2] = [Vec::new(), Vec::new()];
        for (i, u) in units.iter().enumerate() {
            sorted[u.owner.index()].push((u.pos, i));
        }
        for s in &mut sorted {
            s.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }

        let intents: Vec<Intent> = units
            .iter()
            .map(|u| {
                let stats = cfg.units.get(u.kind);
                let enemy_base = match u.owner {
                    PlayerId::P1 => length,
                    PlayerId::P2 => 0.0,
                };
                let base_dist = (enemy_base - u.pos).abs();
                let nearest = nearest(&sorted[u.owner.other().index()], u.pos);
                match nearest {
                    Some((d, j)) if d <= stats.attack_range && d <= base_dist => Intent::HitUnit(j),
                    Some((d, _)) if d < base_dist => Intent::Move,
                    _ if base_dist <= stats.attack_range => Intent::HitBase,
                    _ => Intent::Move,
                }
            })
            .collect();

        let rng = &mut self.rngs[lane.index()];
        let jitter = cfg.damage_jitter;
        let mut unit_damage = vec![0.0; units.len()];
        let mut base_damage = [0.0; 2];
        for (u, intent) in units.iter().zip(&intents) {
            let stats = cfg.units.get(u.kind);
            match *intent {
                Intent::Move => {}
                Intent::HitUnit(j) => {
                    let bonus = if u.kind.beats() == units[j].kind {
                        stats.rps_multiplier
                    } else {
                        1.0
                    };
                    let roll = rng.gen_range(1.0 - jitter..=1.0 + jitter);
                    unit_damage[j] += stats.base_damage * bonus * roll;
                }
                Intent::HitBase => {
                    let roll = rng.gen_range(1.0 - jitter..=1.0 + jitter);
                    base_damage[u.owner.other().index()] += stats.base_damage * roll;
                }
            }
        }

        for (u, intent) in units.iter_mut().zip(&intents) {
            if let Intent::Move = intent {
                let speed = cfg.units.get(u.kind).move_speed;
                u.pos = match u.owner {
                    PlayerId::P1 => (u.pos + speed).min(length),
                    PlayerId::P2 => (u.pos - speed).max(0.0),
                };
            }
        }
        for (u, dmg) in units.iter_mut().zip(&unit_damage) {
            u.hp -= dmg;
        }
        units.retain(|u| u.hp > 0.0);

        for owner in PlayerId::BOTH {
            let h = &mut self.players[owner.index()].base_health[lane.index()];
            *h = (*h - base_damage[owner.index()]).max(0.0);
        }
    }
}

/// Nearest entry to `pos` in a position-sorted list: (distance, unit index).
/// Ties go to the lower position.
fn nearest(sorted: &[(f64, usize)], pos: f64) -> Option<(f64, usize)> {
    if sorted.is_empty() {
        return None;
    }
    let k = sorted.partition_point(|&(p, _)| p < pos);
    let mut best: Option<(f64, usize)> = None;
    for cand in [k.checked_sub(1), Some(k)].into_iter().flatten() {
        if let Some(&(p, i)) = sorted.get(cand) {
            let d = (p - pos).abs();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
    }
    best
}

/// The game result, if the game is over.
///
/// A destroyed base loses the game for its owner. If bases of both players
/// are down, the first to fall decides; failing that record, lower total
/// health loses and an exact tie goes to Player 1. After the last wave, the
/// owner of the lowest-health base loses, with the same tie-breaks.
pub fn terminal_outcome(state: &MicroState) -> Option<GameOutcome> {
    let health = |p: PlayerId| state.players[p.index()].base_health;
    let total = |p: PlayerId| health(p).iter().sum::<f64>();
    let loser_by_total = || {
        if total(PlayerId::P2) <= total(PlayerId::P1) {
            PlayerId::P2
        } else {
            PlayerId::P1
        }
    };

    let dead_lane = |p: PlayerId| Lane::BOTH.into_iter().find(|l| health(p)[l.index()] <= 0.0);
    let dead = [dead_lane(PlayerId::P1), dead_lane(PlayerId::P2)];
    let fallen = match (state.first_destroyed, dead) {
        (Some(first), _) => Some(first),
        (None, [Some(l), None]) => Some((PlayerId::P1, l)),
        (None, [None, Some(l)]) => Some((PlayerId::P2, l)),
        (None, [Some(_), Some(_)]) => {
            let loser = loser_by_total();
            Some((loser, dead[loser.index()].unwrap()))
        }
        (None, [None, None]) => None,
    };
    if let Some((loser, lane)) = fallen {
        let winner = loser.other();
        return Some(GameOutcome {
            winner,
            condition: WinCondition::destroyed(winner, lane),
        });
    }

    if state.wave > state.config.max_waves {
        let min = |p: PlayerId| health(p).iter().copied().fold(f64::INFINITY, f64::min);
        let (m1, m2) = (min(PlayerId::P1), min(PlayerId::P2));
        let loser = if m1 < m2 {
            PlayerId::P1
        } else if m2 < m1 {
            PlayerId::P2
        } else {
            loser_by_total()
        };
        let winner = loser.other();
        return Some(GameOutcome {
            winner,
            condition: WinCondition::timeout(winner),
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{legal_actions, sample_legal_action};

    fn with_health(wave: u32, p1: [f64; 2], p2: [f64; 2]) -> MicroState {
        let mut s = new_game(GameConfig::default(), 0).unwrap();
        s.wave = wave;
        s.players[0].base_health = p1;
        s.players[1].base_health = p2;
        MicroState::from_parts(s.config.clone(), wave, s.players, s.lanes, 0)
    }

    #[test]
    fn fresh_game() {
        let cfg = GameConfig::default();
        let s = new_game(cfg.clone(), 7).unwrap();
        for p in &s.players {
            assert_eq!(p.base_health, [cfg.base_health_max; 2]);
            assert_eq!(p.currency, cfg.start_currency);
        }
        assert!(s.lanes.iter().all(Vec::is_empty));
        assert_eq!(s.wave, 1);
        assert_eq!(s, new_game(cfg, 7).unwrap());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = GameConfig { max_pylons: 4, ..GameConfig::default() };
        assert!(new_game(cfg, 1).is_err());
    }

    #[test]
    fn empty_wave_only_moves_counters() {
        let s = new_game(GameConfig::default(), 3).unwrap();
        let (next, outcome) = s.resolve_wave(&PlayerAction::NULL, &PlayerAction::NULL).unwrap();
        assert!(outcome.is_none());
        assert_eq!(next.wave, 2);
        for (a, b) in s.players.iter().zip(&next.players) {
            assert_eq!(b.currency, a.currency + 100);
            assert_eq!(a.buildings, b.buildings);
            assert_eq!(a.base_health, b.base_health);
            assert_eq!(a.pylons, b.pylons);
        }
        assert!(next.lanes.iter().all(Vec::is_empty));
    }

    #[test]
    fn illegal_actions_rejected() {
        let s = new_game(GameConfig::default(), 3).unwrap();
        let too_costly = PlayerAction::new(Lane::Top, [0, 0, 1], 0);
        assert!(matches!(
            s.resolve_wave(&too_costly, &PlayerAction::NULL),
            Err(Error::IllegalAction { player: PlayerId::P1, .. })
        ));
        let mut rich = s.clone();
        rich.players[1].currency = 10_000;
        rich.players[1].pylons = 3;
        let pylon = PlayerAction::new(Lane::Top, [0; 3], 1);
        assert!(rich.resolve_wave(&PlayerAction::NULL, &pylon).is_err());
    }

    /// Worst-case bound: the Marine's slowest kill beats the Immortal's fastest.
    #[test]
    fn marine_beats_immortal_head_on() {
        let cfg = GameConfig::default();
        let (m, i) = (cfg.units.marine, cfg.units.immortal);
        let j = cfg.damage_jitter;
        let marine_slowest = (i.hp / (m.base_damage * m.rps_multiplier * (1.0 - j))).ceil();
        let immortal_fastest = (m.hp / (i.base_damage * (1.0 + j))).ceil();
        assert!(marine_slowest < immortal_fastest);

        for seed in 0..200 {
            let mut s = new_game(cfg.clone(), seed).unwrap();
            s.lanes[0] = vec![
                Unit { owner: PlayerId::P1, kind: UnitType::Marine, pos: 0.4, hp: m.hp },
                Unit { owner: PlayerId::P2, kind: UnitType::Immortal, pos: 0.6, hp: i.hp },
            ];
            s.step(&PlayerAction::NULL, &PlayerAction::NULL).unwrap();
            assert_eq!(s.lanes[0].len(), 1, "seed {seed}");
            assert_eq!(s.lanes[0][0].kind, UnitType::Marine);
        }
    }

    #[test]
    fn seeded_resolution_is_bit_identical() {
        let cfg = GameConfig::default();
        let play = |seed: u64| {
            let mut s = new_game(cfg.clone(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            while !s.is_terminal() {
                let a1 = sample_legal_action(&cfg, s.players[0].currency, s.players[0].pylons, &mut rng);
                let a2 = sample_legal_action(&cfg, s.players[1].currency, s.players[1].pylons, &mut rng);
                s.step(&a1, &a2).unwrap();
            }
            s
        };
        assert_eq!(play(5), play(5));
    }

    #[test]
    fn destroyed_top_base() {
        let s = with_health(12, [2000.0, 2000.0], [0.0, 1500.0]);
        assert_eq!(
            terminal_outcome(&s),
            Some(GameOutcome { winner: PlayerId::P1, condition: WinCondition::P1DestroysTop })
        );
        assert!(legal_actions(&s, PlayerId::P1).is_err());
    }

    #[test]
    fn timeout_lowest_base_loses() {
        let s = with_health(41, [300.0, 2000.0], [200.0, 2000.0]);
        assert_eq!(
            terminal_outcome(&s),
            Some(GameOutcome { winner: PlayerId::P1, condition: WinCondition::P1Timeout })
        );
        let s = with_health(41, [100.0, 900.0], [200.0, 2000.0]);
        assert_eq!(terminal_outcome(&s).unwrap().winner, PlayerId::P2);
    }

    #[test]
    fn timeout_ties() {
        let s = with_health(41, [200.0, 900.0], [200.0, 1000.0]);
        assert_eq!(terminal_outcome(&s).unwrap().winner, PlayerId::P2);
        let s = with_health(41, [200.0, 900.0], [200.0, 900.0]);
        assert_eq!(terminal_outcome(&s).unwrap().winner, PlayerId::P1);
    }

    #[test]
    fn no_outcome_before_timeout() {
        let s = with_health(39, [10.0, 2000.0], [2000.0, 2000.0]);
        assert_eq!(terminal_outcome(&s), None);
    }

    #[test]
    fn nearest_lookup() {
        let sorted = vec![(0.1, 4), (0.5, 2), (0.9, 0)];
        assert_eq!(nearest(&sorted, 0.6).unwrap().1, 2);
        assert_eq!(nearest(&sorted, 0.0).unwrap().1, 4);
        assert_eq!(nearest(&sorted, 1.0).unwrap().1, 0);
        assert_eq!(nearest(&sorted, 0.3).unwrap().1, 4);
        assert_eq!(nearest(&[], 0.3), None);
    }
}
