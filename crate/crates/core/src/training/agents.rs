use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TransitionRecord;
use crate::candidates::sampled_candidates;
use crate::config::GameConfig;
use crate::error::Result;
use crate::game::{abstract_state, new_game, sample_legal_action, GameOutcome, MicroState, PlayerAction, PlayerId};
use crate::models::{OutcomeVector, QFunction};

/// A model-free player: uniform-random, or greedy under a frozen Q-function.
#[derive(Debug, Clone)]
pub enum Agent {
    Random,
    Greedy { q: QFunction, candidate_limit: usize },
}

impl Agent {
    pub fn act<R: Rng + ?Sized>(&self, state: &MicroState, player: PlayerId, rng: &mut R) -> PlayerAction {
        let p = state.player(player);
        match self {
            Agent::Random => sample_legal_action(&state.config, p.currency, p.pylons, rng),
            Agent::Greedy { q, candidate_limit } => {
                greedy_action(q, state, player, *candidate_limit, rng)
            }
        }
    }
}

pub(crate) fn greedy_action<R: Rng + ?Sized>(
    q: &QFunction,
    state: &MicroState,
    player: PlayerId,
    candidate_limit: usize,
    rng: &mut R,
) -> PlayerAction {
    let p = state.player(player);
    let cands = sampled_candidates(&state.config, p.currency, p.pylons, candidate_limit, rng);
    let s = abstract_state(state, player);
    q.best_action(&s, &cands).expect("null action is always a candidate").action
}

/// Reward vector for the wave that produced `outcome`, from `perspective`.
pub(crate) fn reward_for(outcome: Option<GameOutcome>, perspective: PlayerId) -> OutcomeVector {
    outcome.map_or(OutcomeVector::ZERO, |o| OutcomeVector::one_hot(o.condition, perspective))
}

#[derive(Debug, Clone)]
pub struct GameRecord {
    pub seed: u64,
    pub outcome: GameOutcome,
    pub waves: u32,
    /// Both players' views of every wave, P1's first, when recording.
    pub transitions: Vec<TransitionRecord>,
}

pub fn play_game(config: &GameConfig, p1: &Agent, p2: &Agent, seed: u64, record: bool) -> Result<GameRecord> {
    let mut state = new_game(config.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_a9e7);
    let mut transitions = Vec::new();
    let mut waves = 0;
    let outcome = loop {
        let a1 = p1.act(&state, PlayerId::P1, &mut rng);
        let a2 = p2.act(&state, PlayerId::P2, &mut rng);
        let before = record.then(|| PlayerId::BOTH.map(|p| abstract_state(&state, p)));
        let outcome = state.step(&a1, &a2)?;
        waves += 1;
        if let Some(before) = before {
            for (p, s) in PlayerId::BOTH.into_iter().zip(before) {
                let (mine, theirs) = if p == PlayerId::P1 { (a1, a2) } else { (a2, a1) };
                transitions.push(TransitionRecord {
                    state: s,
                    friendly: mine,
                    enemy: theirs,
                    next: abstract_state(&state, p),
                    reward: reward_for(outcome, p),
                    terminal: outcome.is_some(),
                });
            }
        }
        if let Some(o) = outcome {
            break o;
        }
    };
    Ok(GameRecord { seed, outcome, waves, transitions })
}

/// Fraction of `games` won by `agent`, alternating sides each game.
pub fn evaluate_against(config: &GameConfig, agent: &Agent, opponent: &Agent, games: usize, seed: u64) -> Result<f64> {
    use rayon::prelude::*;
    let wins = (0..games)
        .into_par_iter()
        .map(|g| {
            let game_seed = seed.wrapping_add(g as u64);
            let (p1, p2, me) = if g % 2 == 0 {
                (agent, opponent, PlayerId::P1)
            } else {
                (opponent, agent, PlayerId::P2)
            };
            play_game(config, p1, p2, game_seed, false).map(|r| (r.outcome.winner == me) as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(wins.iter().sum::<usize>() as f64 / games.max(1) as f64)
}
