use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{train_agent, Agent, TrainConfig, TrainResult};
use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::models::QFunction;
use crate::neural::Mlp;

pub const POOL_VERSION: u32 = 1;

/// A frozen opponent in the pool.
#[derive(Debug, Clone, PartialEq)]
pub enum PoolMember {
    Random,
    Trained {
        q: QFunction,
        /// Best trailing win rate reached while training.
        win_rate: f64,
        reached_threshold: bool,
    },
}

impl PoolMember {
    pub fn agent(&self, candidate_limit: usize) -> Agent {
        match self {
            PoolMember::Random => Agent::Random,
            PoolMember::Trained { q, .. } => Agent::Greedy { q: q.clone(), candidate_limit },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TournamentPool {
    members: Vec<PoolMember>,
}

#[derive(Serialize, Deserialize)]
struct PoolFile {
    version: u32,
    members: Vec<MemberEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum MemberEntry {
    Random,
    Trained { checkpoint: String, win_rate: f64, reached_threshold: bool },
}

impl TournamentPool {
    /// The starting pool: a single uniform-random agent.
    pub fn seeded() -> Self {
        Self { members: vec![PoolMember::Random] }
    }

    pub fn members(&self) -> &[PoolMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn push(&mut self, member: PoolMember) {
        self.members.push(member);
    }

    pub fn agents(&self, candidate_limit: usize) -> Vec<Agent> {
        self.members.iter().map(|m| m.agent(candidate_limit)).collect()
    }

    /// The most recently added trained member.
    pub fn latest_trained(&self) -> Option<&QFunction> {
        self.members.iter().rev().find_map(|m| match m {
            PoolMember::Trained { q, .. } => Some(q),
            PoolMember::Random => None,
        })
    }

    /// Writes `pool.json` and one checkpoint per trained member into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for (i, m) in self.members.iter().enumerate() {
            entries.push(match m {
                PoolMember::Random => MemberEntry::Random,
                PoolMember::Trained { q, win_rate, reached_threshold } => {
                    let checkpoint = format!("agent_{i}.ckpt");
                    q.net().save(dir.join(&checkpoint))?;
                    MemberEntry::Trained { checkpoint, win_rate: *win_rate, reached_threshold: *reached_threshold }
                }
            });
        }
        let file = PoolFile { version: POOL_VERSION, members: entries };
        fs::write(dir.join("pool.json"), serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let file: PoolFile = serde_json::from_str(&fs::read_to_string(dir.join("pool.json"))?)?;
        if file.version != POOL_VERSION {
            return Err(Error::Version { found: file.version, expected: POOL_VERSION });
        }
        let mut members = Vec::new();
        for e in file.members {
            members.push(match e {
                MemberEntry::Random => PoolMember::Random,
                MemberEntry::Trained { checkpoint, win_rate, reached_threshold } => {
                    if checkpoint.contains(['/', '\\']) || checkpoint.starts_with('.') {
                        return Err(Error::Checkpoint(format!("bad checkpoint name {checkpoint:?}")));
                    }
                    let q = QFunction::from_net(Mlp::load(dir.join(&checkpoint))?)?;
                    PoolMember::Trained { q, win_rate, reached_threshold }
                }
            });
        }
        Ok(Self { members })
    }
}

/// Trains `generations` agents in sequence. Each trains against the pool as
/// it stands and then joins it. Generation `g` uses seed `config.seed + g`.
pub fn run_tournament(
    pool: &mut TournamentPool,
    generations: usize,
    config: &TrainConfig,
    game_config: &GameConfig,
) -> Result<Vec<TrainResult>> {
    let mut results = Vec::new();
    for g in 0..generations {
        let cfg = TrainConfig { seed: config.seed.wrapping_add(g as u64), ..config.clone() };
        let result = train_agent(pool, &cfg, game_config)?;
        pool.push(PoolMember::Trained {
            q: result.q.clone(),
            win_rate: result.best_win_rate,
            reached_threshold: result.reached_threshold,
        });
        results.push(result);
    }
    Ok(results)
}
