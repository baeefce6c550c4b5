//! Self-play training of the Q-function with decomposed-reward DQN, the
//! tournament pool of frozen agents, and transition-model data and fitting.

mod agents;
mod dataset;
mod dqn;
mod pipeline;
mod tournament;

pub use agents::{evaluate_against, play_game, Agent, GameRecord};
pub use dataset::{
    field_errors,
    collect_transition_dataset, fit_transition_model, load_dataset, save_dataset, FieldErrors, FitConfig,
    FitReport,
};
pub use dqn::{dr_dqn_targets, scalar_dqn_targets, train_agent, LogRecord, TrainResult};
pub use pipeline::{train_pipeline, PipelineConfig, TrainedSystem};
pub use tournament::{run_tournament, PoolMember, TournamentPool};

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AbstractState, PlayerAction};
use crate::models::OutcomeVector;

/// One wave from one player's point of view: `(s, a_f, a_e, s', r)`.
///
/// `reward` is zero unless `terminal`, where it is one-hot on the win
/// condition that ended the game, expressed from this player's side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub state: AbstractState,
    pub friendly: PlayerAction,
    pub enemy: PlayerAction,
    pub next: AbstractState,
    pub reward: OutcomeVector,
    pub terminal: bool,
}

/// Bounded FIFO of transitions with uniform sampling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<TransitionRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, record: TransitionRecord) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.items.iter()
    }

    /// `n` records drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&TransitionRecord> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Gradient updates between target-network syncs.
    pub target_sync: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `max_steps` over which epsilon anneals linearly.
    pub epsilon_anneal_fraction: f64,
    pub win_rate_threshold: f64,
    pub win_rate_window: usize,
    pub max_games: usize,
    /// Environment steps (learner decisions).
    pub max_steps: usize,
    /// Environment steps per gradient update.
    pub update_every: usize,
    pub hidden: usize,
    /// Candidate actions scored per greedy decision (0 = all legal actions).
    pub candidate_limit: usize,
    /// Candidate actions scored per next state when forming targets.
    pub target_candidate_limit: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lr: 1e-3,
            batch_size: 64,
            buffer_capacity: 100_000,
            target_sync: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_fraction: 0.5,
            win_rate_threshold: 0.75,
            win_rate_window: 200,
            max_games: 100_000,
            max_steps: 200_000,
            update_every: 1,
            hidden: crate::models::DEFAULT_HIDDEN,
            candidate_limit: 128,
            target_candidate_limit: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// A budget that trains one generation in minutes on a laptop.
    pub fn desk() -> Self {
        Self {
            max_steps: 40_000,
            max_games: 10_000,
            update_every: 2,
            hidden: 64,
            candidate_limit: 64,
            target_sync: 500,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(self.win_rate_threshold > 0.0 && self.win_rate_threshold < 1.0) {
            return bad("win_rate_threshold must be in (0, 1)");
        }
        if self.batch_size == 0 || self.update_every == 0 || self.target_sync == 0 || self.hidden == 0 {
            return bad("batch_size, update_every, target_sync and hidden must be > 0");
        }
        if self.win_rate_window == 0 {
            return bad("win_rate_window must be > 0");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon must be in [0, 1]");
        }
        Ok(())
    }

    /// Linear anneal from `epsilon_start` to `epsilon_end`.
    pub fn epsilon(&self, step: usize) -> f64 {
        let horizon = self.epsilon_anneal_fraction * self.max_steps as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let frac = (step as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}
