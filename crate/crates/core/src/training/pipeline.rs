use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{collect_transition_dataset, fit_transition_model, run_tournament, FitConfig, FitReport, TournamentPool, TrainConfig};
use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::models::{QFunction, TransitionModel};
use crate::neural::Mlp;

/// Everything `train` produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub generations: usize,
    pub train: TrainConfig,
    /// Games simulated for transition-model data.
    pub dataset_games: usize,
    pub fit: FitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            generations: 1,
            train: TrainConfig::desk(),
            dataset_games: 3000,
            fit: FitConfig { hidden: 64, epochs: 10, ..FitConfig::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedSystem {
    pub pool: TournamentPool,
    pub model: TransitionModel,
    pub fit: FitReport,
    pub dataset_records: usize,
    /// Per generation: whether the win-rate threshold was reached, and the
    /// best trailing win rate.
    pub generations: Vec<(bool, f64)>,
}

impl TrainedSystem {
    /// The search agent's Q-function: the last trained pool member.
    pub fn q(&self) -> Result<&QFunction> {
        self.pool.latest_trained().ok_or(Error::Empty("trained agents"))
    }

    /// Writes `pool/`, `transition.ckpt` and `fit_report.json` under `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.pool.save(dir.join("pool"))?;
        self.model.net().save(dir.join("transition.ckpt"))?;
        fs::write(dir.join("fit_report.json"), serde_json::to_string_pretty(&self.fit)?)?;
        Ok(())
    }

    /// The pool and the transition model from a directory written by [`TrainedSystem::save`].
    pub fn load_models(dir: impl AsRef<Path>) -> Result<(TournamentPool, TransitionModel)> {
        let dir = dir.as_ref();
        let pool = TournamentPool::load(dir.join("pool"))?;
        let model = TransitionModel::from_net(Mlp::load(dir.join("transition.ckpt"))?)?;
        Ok((pool, model))
    }
}

/// Runs the tournament, then fits the transition model on games played by
/// the resulting pool.
pub fn train_pipeline(game: &GameConfig, cfg: &PipelineConfig) -> Result<TrainedSystem> {
    if cfg.generations == 0 {
        return Err(Error::InvalidConfig("generations must be at least 1".into()));
    }
    let mut pool = TournamentPool::seeded();
    let results = run_tournament(&mut pool, cfg.generations, &cfg.train, game)?;
    let data = collect_transition_dataset(game, &pool, cfg.dataset_games, cfg.train.candidate_limit, cfg.train.seed)?;
    let fit_cfg = FitConfig { seed: cfg.train.seed, ..cfg.fit.clone() };
    let (model, fit) = fit_transition_model(&data, &fit_cfg)?;
    Ok(TrainedSystem {
        pool,
        model,
        fit,
        dataset_records: data.len(),
        generations: results.iter().map(|r| (r.reached_threshold, r.best_win_rate)).collect(),
    })
}
