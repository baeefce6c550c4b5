#![allow(dead_code)]

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tugwar::game::{abstract_state, new_game, sample_legal_action, PlayerId};
use tugwar::models::{QFunction, TransitionModel};
use tugwar::replay::{config_hash, Decision, Replay, SearchAgent, REPLAY_VERSION};
use tugwar::search::{build_tree, CappedLegal, SearchParams, SimulatorDynamics};
use tugwar::training::{PoolMember, TournamentPool};
use tugwar::GameConfig;
use tugwar_service::ServiceConfig;

/// Default root branching with few candidates so untrained games stay quick.
pub fn config() -> ServiceConfig {
    ServiceConfig {
        search: SearchParams { candidate_limit: 12, ..SearchParams::default() },
        ..ServiceConfig::default()
    }
}

pub fn pool_and_model() -> (TournamentPool, TransitionModel) {
    let mut pool = TournamentPool::seeded();
    pool.push(PoolMember::Trained { q: QFunction::new(16, 1).unwrap(), win_rate: 0.8, reached_threshold: true });
    (pool, TransitionModel::new(16, 2).unwrap())
}

/// Writes untrained models where `tow play` looks for them.
pub fn write_models(models_dir: &Path) {
    let (pool, model) = pool_and_model();
    pool.save(models_dir.join("pool")).unwrap();
    model.net().save(models_dir.join("transition.ckpt")).unwrap();
}

pub fn agent(cfg: &ServiceConfig) -> SearchAgent {
    let (pool, model) = pool_and_model();
    SearchAgent { q: pool.latest_trained().unwrap().clone(), model, params: cfg.search.clone() }
}

pub fn ground_truth_params() -> SearchParams {
    SearchParams { depth: 2, friendly: vec![4, 2], enemy: vec![3, 2], guard_terminals: true, candidate_limit: 24 }
}

/// A random game whose every decision carries a tree built by the simulator.
pub fn ground_truth_replay(config: &GameConfig, seed: u64, game_id: &str) -> Replay {
    let params = ground_truth_params();
    let q = QFunction::new(16, seed).unwrap();
    let mut game = new_game(config.clone(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actions = CappedLegal { config: config.clone(), limit: params.candidate_limit };
    let mut decisions = Vec::new();
    let outcome = loop {
        let tree = build_tree(&game, &SimulatorDynamics { perspective: PlayerId::P1 }, &q, &actions, &params).unwrap();
        let (mine, _) = tree.best_action().unwrap();
        let s = game.player(PlayerId::P2);
        let theirs = sample_legal_action(config, s.currency, s.pylons, &mut rng);
        decisions.push(Decision {
            index: decisions.len(),
            wave: game.wave,
            state: abstract_state(&game, PlayerId::P1),
            enemy_currency_estimate: game.player(PlayerId::P2).currency,
            friendly: mine,
            enemy: theirs,
            root_table: tree.root_action_table(),
            tree,
        });
        if let Some(o) = game.step(&mine, &theirs).unwrap() {
            break o;
        }
    };
    Replay {
        version: REPLAY_VERSION,
        game_id: game_id.to_string(),
        config_hash: config_hash(config, &params),
        seed,
        agent: PlayerId::P1,
        opponent: "random".into(),
        decisions,
        outcome,
    }
}
