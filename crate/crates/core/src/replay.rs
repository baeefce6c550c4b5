//! Games played by the search agent, recorded with the explanation tree of
//! every decision.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::game::{abstract_state, new_game, AbstractState, EnemyCurrencyTracker, GameOutcome, PlayerAction, PlayerId};
use crate::models::{QFunction, TransitionModel};
use crate::search::{build_learned_tree, RootEntry, SearchParams, SearchTree};
use crate::training::Agent;

pub const REPLAY_VERSION: u32 = 1;

/// Content hash of everything that shapes a game besides the seed.
pub fn config_hash(config: &GameConfig, params: &SearchParams) -> String {
    let mut h = Sha256::new();
    h.update(config.to_toml_string().as_bytes());
    h.update(serde_json::to_string(params).expect("params serialize").as_bytes());
    hex::encode(h.finalize())
}

/// The planning agent: minimax over the learned models at every decision.
#[derive(Debug, Clone)]
pub struct SearchAgent {
    pub q: QFunction,
    pub model: TransitionModel,
    pub params: SearchParams,
}

impl SearchAgent {
    pub fn decide(&self, config: &GameConfig, state: &AbstractState, enemy_currency: u32) -> Result<SearchTree> {
        build_learned_tree(state, enemy_currency, &self.q, &self.model, config, &self.params)
    }
}

/// Who the recorded agent plays against.
#[derive(Debug, Clone)]
pub enum Opponent {
    Agent(Agent),
    /// Another copy of the search agent.
    Search(SearchAgent),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub index: usize,
    pub wave: u32,
    /// The true position as the agent saw it.
    pub state: AbstractState,
    pub enemy_currency_estimate: u32,
    pub friendly: PlayerAction,
    pub enemy: PlayerAction,
    pub tree: SearchTree,
    pub root_table: Vec<RootEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub version: u32,
    pub game_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub agent: PlayerId,
    pub opponent: String,
    pub decisions: Vec<Decision>,
    pub outcome: GameOutcome,
}

impl Replay {
    pub fn lost(&self) -> bool {
        self.outcome.winner != self.agent
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.version != REPLAY_VERSION {
            return Err(Error::Version { found: probe.version, expected: REPLAY_VERSION });
        }
        let replay: Replay = serde_json::from_str(text)?;
        for d in &replay.decisions {
            d.tree.check()?;
        }
        Ok(replay)
    }
}

/// Plays one game with `agent` in seat `side` and records every decision.
pub fn play_recorded(
    config: &GameConfig,
    agent: &SearchAgent,
    opponent: &Opponent,
    side: PlayerId,
    seed: u64,
    game_id: impl Into<String>,
) -> Result<Replay> {
    let mut game = new_game(config.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0990_0e47);
    let mut trackers = [EnemyCurrencyTracker::new(config); 2];
    let mut decisions = Vec::new();
    let them = side.other();

    let outcome = loop {
        let mine_view = abstract_state(&game, side);
        let estimate = trackers[side.index()].estimate().value;
        let tree = agent.decide(config, &mine_view, estimate)?;
        let (mine, _) = tree.best_action()?;
        let theirs = match opponent {
            Opponent::Agent(a) => a.act(&game, them, &mut rng),
            Opponent::Search(s) => {
                let view = abstract_state(&game, them);
                s.decide(config, &view, trackers[them.index()].estimate().value)?.best_action()?.0
            }
        };
        let pylons = [side, them].map(|p| game.player(p).pylons);
        trackers[side.index()].observe(config, pylons[1], &theirs);
        trackers[them.index()].observe(config, pylons[0], &mine);
        decisions.push(Decision {
            index: decisions.len(),
            wave: game.wave,
            state: mine_view,
            enemy_currency_estimate: estimate,
            friendly: mine,
            enemy: theirs,
            root_table: tree.root_action_table(),
            tree,
        });
        let (a1, a2) = if side == PlayerId::P1 { (mine, theirs) } else { (theirs, mine) };
        if let Some(o) = game.step(&a1, &a2)? {
            break o;
        }
    };
    let opponent = match opponent {
        Opponent::Agent(Agent::Random) => "random",
        Opponent::Agent(Agent::Greedy { .. }) => "pool",
        Opponent::Search(_) => "self",
    };
    Ok(Replay {
        version: REPLAY_VERSION,
        game_id: game_id.into(),
        config_hash: config_hash(config, &agent.params),
        seed,
        agent: side,
        opponent: opponent.to_string(),
        decisions,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent() -> SearchAgent {
        SearchAgent {
            q: QFunction::new(16, 1).unwrap(),
            model: TransitionModel::new(16, 2).unwrap(),
            params: SearchParams { depth: 1, friendly: vec![4], enemy: vec![3], candidate_limit: 32, ..SearchParams::default() },
        }
    }

    #[test]
    fn recorded_games_are_reproducible_and_round_trip() {
        let cfg = GameConfig::default();
        let a = play_recorded(&cfg, &agent(), &Opponent::Agent(Agent::Random), PlayerId::P2, 5, "g5").unwrap();
        let b = play_recorded(&cfg, &agent(), &Opponent::Agent(Agent::Random), PlayerId::P2, 5, "g5").unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(Replay::from_json(&a.to_json().unwrap()).unwrap(), a);
        for (i, d) in a.decisions.iter().enumerate() {
            assert_eq!(d.index, i);
            assert_eq!(d.wave as usize, i + 1);
            assert_eq!(d.friendly, d.tree.best_action().unwrap().0);
        }
    }

    #[test]
    fn self_play_records_one_side() {
        let cfg = GameConfig::default();
        let r = play_recorded(&cfg, &agent(), &Opponent::Search(agent()), PlayerId::P1, 1, "s").unwrap();
        assert_eq!(r.opponent, "self");
        assert!(!r.decisions.is_empty());
    }

    #[test]
    fn hash_tracks_config() {
        let cfg = GameConfig::default();
        let p = SearchParams::default();
        assert_eq!(config_hash(&cfg, &p), config_hash(&cfg.clone(), &p.clone()));
        let other = GameConfig { start_currency: 150, ..GameConfig::default() };
        assert_ne!(config_hash(&cfg, &p), config_hash(&other, &p));
        assert_eq!(config_hash(&cfg, &p).len(), 64);
    }
}
