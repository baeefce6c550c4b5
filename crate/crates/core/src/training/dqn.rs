use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agents::{greedy_action, reward_for};
use super::{Agent, ReplayBuffer, TournamentPool, TrainConfig, TransitionRecord};
use crate::candidates::sampled_candidates;
use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::game::{abstract_state, new_game, sample_legal_action, AbstractState, PlayerAction, PlayerId};
use crate::models::{OutcomeVector, QFunction, OUTCOMES};
use crate::neural::Adam;

const ACT_SALT: u64 = 0xac7;
const OPPONENT_SALT: u64 = 0x0bb0;
const TRAIN_SALT: u64 = 0x7a1e;

fn game_seed(base: u64, game: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(game as u64)
}

/// Next-state action for each record: argmax of the online network's agent
/// value over the candidates for that state.
fn next_actions(
    batch: &[&TransitionRecord],
    online: &QFunction,
    next_candidates: &mut dyn FnMut(&AbstractState) -> Vec<PlayerAction>,
) -> Vec<Option<PlayerAction>> {
    batch
        .iter()
        .map(|r| {
            if r.terminal {
                return None;
            }
            let cands = next_candidates(&r.next);
            Some(online.best_action(&r.next, &cands).expect("candidates include null").action)
        })
        .collect()
}

/// Decomposed-reward DQN targets: per component,
/// `r_c + gamma * Q_target_c(s', a*)` with `a*` the online network's best
/// next action by agent value, and `r` alone for terminal records.
pub fn dr_dqn_targets(
    batch: &[&TransitionRecord],
    online: &QFunction,
    target: &QFunction,
    gamma: f64,
    next_candidates: &mut dyn FnMut(&AbstractState) -> Vec<PlayerAction>,
) -> Vec<OutcomeVector> {
    let chosen = next_actions(batch, online, next_candidates);
    batch
        .iter()
        .zip(chosen)
        .map(|(r, a)| match a {
            None => r.reward,
            Some(a) => {
                let q = target.q_value(&r.next, &a);
                let mut t = [0.0; OUTCOMES];
                for c in 0..OUTCOMES {
                    t[c] = r.reward.0[c] + gamma * q.0[c];
                }
                OutcomeVector(t)
            }
        })
        .collect()
}

/// Ordinary scalar DQN targets on the win signal, used to check the
/// decomposition: the agent components of each decomposed target sum to this.
pub fn scalar_dqn_targets(
    batch: &[&TransitionRecord],
    online: &QFunction,
    target: &QFunction,
    gamma: f64,
    next_candidates: &mut dyn FnMut(&AbstractState) -> Vec<PlayerAction>,
) -> Vec<f64> {
    let chosen = next_actions(batch, online, next_candidates);
    batch
        .iter()
        .zip(chosen)
        .map(|(r, a)| {
            let win = r.reward.agent_value();
            match a {
                None => win,
                Some(a) => win + gamma * target.q_value(&r.next, &a).agent_value(),
            }
        })
        .collect()
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub game: usize,
    pub step: usize,
    pub updates: usize,
    /// Mean loss over this game's updates.
    pub loss: Option<f64>,
    /// Trailing win rate over the configured window.
    pub win_rate: f64,
    pub epsilon: f64,
    pub opponent: usize,
    pub won: bool,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub q: QFunction,
    pub log: Vec<LogRecord>,
    pub buffer: ReplayBuffer,
    pub reached_threshold: bool,
    /// Best trailing win rate seen with a full window.
    pub best_win_rate: f64,
}

impl TrainResult {
    pub fn log_lines(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("log records serialize") + "\n")
            .collect()
    }
}

/// Trains one agent with epsilon-greedy self-play against uniformly sampled
/// pool members until the trailing win rate reaches the threshold or the
/// budget runs out. In the latter case the best checkpoint is returned and
/// `reached_threshold` is false.
pub fn train_agent(pool: &TournamentPool, config: &TrainConfig, game_config: &GameConfig) -> Result<TrainResult> {
    config.validate()?;
    game_config.validate()?;
    if pool.is_empty() {
        return Err(Error::Empty("tournament pool"));
    }
    let mut act_rng = ChaCha8Rng::seed_from_u64(config.seed ^ ACT_SALT);
    let mut opp_rng = ChaCha8Rng::seed_from_u64(config.seed ^ OPPONENT_SALT);
    let mut train_rng = ChaCha8Rng::seed_from_u64(config.seed ^ TRAIN_SALT);

    let mut online = QFunction::new(config.hidden, config.seed)?;
    let mut target = online.clone();
    let mut adam = Adam::new(config.lr);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let opponents: Vec<Agent> = pool.agents(config.candidate_limit);

    let mut log = Vec::new();
    let mut window: VecDeque<bool> = VecDeque::new();
    let mut best: Option<(f64, QFunction)> = None;
    let mut reached = false;
    let mut step = 0usize;
    let mut updates = 0usize;

    for game in 0..config.max_games {
        if step >= config.max_steps {
            break;
        }
        let opp_index = opp_rng.gen_range(0..opponents.len());
        let opponent = &opponents[opp_index];
        let me = if game % 2 == 0 { PlayerId::P1 } else { PlayerId::P2 };
        let mut state = new_game(game_config.clone(), game_seed(config.seed, game))?;
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);

        let outcome = loop {
            let eps = config.epsilon(step);
            let mine = {
                let p = state.player(me);
                if eps >= 1.0 || act_rng.gen::<f64>() < eps {
                    sample_legal_action(game_config, p.currency, p.pylons, &mut act_rng)
                } else {
                    greedy_action(&online, &state, me, config.candidate_limit, &mut act_rng)
                }
            };
            let theirs = opponent.act(&state, me.other(), &mut opp_rng);
            let before = abstract_state(&state, me);
            let (a1, a2) = if me == PlayerId::P1 { (mine, theirs) } else { (theirs, mine) };
            let outcome = state.step(&a1, &a2)?;
            buffer.push(TransitionRecord {
                state: before,
                friendly: mine,
                enemy: theirs,
                next: abstract_state(&state, me),
                reward: reward_for(outcome, me),
                terminal: outcome.is_some(),
            });
            step += 1;

            if buffer.len() >= config.batch_size && step.is_multiple_of(config.update_every) {
                let batch = buffer.sample(config.batch_size, &mut train_rng);
                let mut next_cands = |s: &AbstractState| {
                    sampled_candidates(
                        game_config,
                        s.currency,
                        s.pylons[s.perspective.index()],
                        config.target_candidate_limit,
                        &mut train_rng,
                    )
                };
                let targets = dr_dqn_targets(&batch, &online, &target, config.gamma, &mut next_cands);
                let inputs: Vec<Vec<f64>> = batch.iter().map(|r| QFunction::input(&r.state, &r.friendly)).collect();
                let targets: Vec<[f64; OUTCOMES]> = targets.iter().map(|t| t.0).collect();
                let loss = online.net_mut().train_step(&mut adam, &inputs, &targets)?;
                loss_sum += loss;
                loss_n += 1;
                updates += 1;
                if updates.is_multiple_of(config.target_sync) {
                    target = online.clone();
                }
            }
            if let Some(o) = outcome {
                break o;
            }
        };

        let won = outcome.winner == me;
        window.push_back(won);
        if window.len() > config.win_rate_window {
            window.pop_front();
        }
        let win_rate = window.iter().filter(|&&w| w).count() as f64 / window.len() as f64;
        log.push(LogRecord {
            game,
            step,
            updates,
            loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
            win_rate,
            epsilon: config.epsilon(step),
            opponent: opp_index,
            won,
        });
        if window.len() == config.win_rate_window {
            if best.as_ref().is_none_or(|(b, _)| win_rate > *b) {
                best = Some((win_rate, online.clone()));
            }
            if win_rate >= config.win_rate_threshold {
                reached = true;
                break;
            }
        }
    }

    let best_win_rate = best.as_ref().map_or(0.0, |(b, _)| *b);
    let q = match (reached, best) {
        (true, _) | (false, None) => online,
        (false, Some((_, q))) => q,
    };
    Ok(TrainResult { q, log, buffer, reached_threshold: reached, best_win_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> TrainConfig {
        TrainConfig {
            max_steps: 600,
            max_games: 1_000,
            batch_size: 16,
            hidden: 16,
            candidate_limit: 16,
            target_candidate_limit: 8,
            win_rate_window: 20,
            target_sync: 50,
            seed,
            ..TrainConfig::default()
        }
    }

    fn batch_records(n: usize) -> Vec<TransitionRecord> {
        let cfg = GameConfig::default();
        let mut out = Vec::new();
        let mut seed = 0;
        while out.len() < n {
            let g = super::super::play_game(&cfg, &Agent::Random, &Agent::Random, seed, true).unwrap();
            out.extend(g.transitions);
            seed += 1;
        }
        out.truncate(n);
        out
    }

    #[test]
    fn terminal_target_is_the_reward() {
        let recs = batch_records(400);
        let terminal: Vec<&TransitionRecord> = recs.iter().filter(|r| r.terminal).collect();
        assert!(!terminal.is_empty());
        let q = QFunction::new(8, 0).unwrap();
        let mut never = |_: &AbstractState| -> Vec<PlayerAction> { panic!("terminal records need no next action") };
        let t = dr_dqn_targets(&terminal, &q, &q, 1.0, &mut never);
        for (r, t) in terminal.iter().zip(t) {
            assert_eq!(t, r.reward);
            assert_eq!(t.0.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn nonterminal_zero_reward_target_is_target_net_value() {
        let recs = batch_records(50);
        let batch: Vec<&TransitionRecord> = recs.iter().filter(|r| !r.terminal).collect();
        let online = QFunction::new(8, 1).unwrap();
        let target = QFunction::new(8, 2).unwrap();
        let mut only_null = |_: &AbstractState| vec![PlayerAction::NULL];
        let t = dr_dqn_targets(&batch, &online, &target, 1.0, &mut only_null);
        for (r, t) in batch.iter().zip(t) {
            assert_eq!(t, target.q_value(&r.next, &PlayerAction::NULL));
        }
    }

    #[test]
    fn decomposed_targets_sum_to_scalar_targets() {
        let recs = batch_records(300);
        let batch: Vec<&TransitionRecord> = recs.iter().collect();
        let online = QFunction::new(8, 1).unwrap();
        let target = QFunction::new(8, 2).unwrap();
        let cfg = GameConfig::default();
        let mut cands = |s: &AbstractState| {
            crate::candidates::strided_candidates(&cfg, s.currency, s.pylons[s.perspective.index()], 24)
        };
        let vec_t = dr_dqn_targets(&batch, &online, &target, 0.9, &mut cands);
        let scalar = scalar_dqn_targets(&batch, &online, &target, 0.9, &mut cands);
        for (v, s) in vec_t.iter().zip(scalar) {
            assert!((v.agent_value() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_reproducible() {
        let pool = TournamentPool::seeded();
        let cfg = GameConfig::default();
        let a = train_agent(&pool, &tiny(3), &cfg).unwrap();
        let b = train_agent(&pool, &tiny(3), &cfg).unwrap();
        assert_eq!(a.log_lines(), b.log_lines());
        assert_eq!(a.q, b.q);
        assert!(a.log.iter().any(|r| r.loss.is_some()));
    }

    #[test]
    fn full_exploration_plays_like_the_random_agent() {
        let pool = TournamentPool::seeded();
        let game_cfg = GameConfig::default();
        let cfg = TrainConfig { epsilon_start: 1.0, epsilon_end: 1.0, ..tiny(8) };
        let trained = train_agent(&pool, &cfg, &game_cfg).unwrap();

        // Replay the same games with the random agent in the learner's seat.
        let mut act_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ACT_SALT);
        let mut opp_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ OPPONENT_SALT);
        let mut replayed = Vec::new();
        for entry in &trained.log {
            let _ = opp_rng.gen_range(0..1usize);
            let me = if entry.game % 2 == 0 { PlayerId::P1 } else { PlayerId::P2 };
            let mut state = new_game(game_cfg.clone(), game_seed(cfg.seed, entry.game)).unwrap();
            while !state.is_terminal() {
                let mine = Agent::Random.act(&state, me, &mut act_rng);
                let theirs = Agent::Random.act(&state, me.other(), &mut opp_rng);
                replayed.push(mine);
                let (a1, a2) = if me == PlayerId::P1 { (mine, theirs) } else { (theirs, mine) };
                state.step(&a1, &a2).unwrap();
            }
        }
        let learned: Vec<PlayerAction> = trained.buffer.iter().map(|r| r.friendly).collect();
        let first = learned.iter().zip(&replayed).position(|(a, b)| a != b);
        assert_eq!((learned.len(), first), (replayed.len(), None));
    }

    #[test]
    fn empty_pool_rejected() {
        let pool = TournamentPool::default();
        assert!(train_agent(&pool, &tiny(0), &GameConfig::default()).is_err());
    }
}
