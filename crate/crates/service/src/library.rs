//! On-disk store of recorded games.
//!
//! ```text
//! <root>/index.json               list of games, replaced by rename
//! <root>/configs/<hash>.toml      game config and search params per hash
//! <root>/games/<id>/replay.json   the game without its trees
//! <root>/games/<id>/trees/<n>.json
//! <root>/games/<id>/lint.json     written by `lint`
//! <root>/lint_report.json         written by `lint`
//! <root>/models/                  written by `train`
//! ```
//!
//! Game files never change once the index lists them, so readers holding
//! an index snapshot always see complete games.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tugwar::game::{AbstractState, GameOutcome, PlayerAction, PlayerId};
use tugwar::lint::{lint_game, DetectorId, GameLint, LintConfig, LintReport};
use tugwar::replay::{config_hash, Decision, Replay, REPLAY_VERSION};
use tugwar::search::{RootEntry, SearchParams, SearchTree};
use tugwar::GameConfig;

use crate::error::{Error, Result};

pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameEntry {
    pub game_id: String,
    pub seed: u64,
    pub agent: PlayerId,
    pub opponent: String,
    pub decisions: usize,
    pub lost: bool,
    pub outcome: GameOutcome,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub version: u32,
    /// Bumped on every write; identifies a library snapshot.
    pub revision: u64,
    /// Sorted by game id.
    pub games: Vec<GameEntry>,
}

impl Index {
    fn empty() -> Self {
        Self { version: INDEX_VERSION, revision: 0, games: Vec::new() }
    }

    pub fn get(&self, game_id: &str) -> Option<&GameEntry> {
        self.games.binary_search_by(|g| g.game_id.as_str().cmp(game_id)).ok().map(|i| &self.games[i])
    }
}

/// A decision as stored in `replay.json`; its tree lives in its own file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub index: usize,
    pub wave: u32,
    pub state: AbstractState,
    pub enemy_currency_estimate: u32,
    pub friendly: PlayerAction,
    pub enemy: PlayerAction,
    pub root_table: Vec<RootEntry>,
}

/// `replay.json`: everything about a game except the trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub version: u32,
    pub game_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub agent: PlayerId,
    pub opponent: String,
    pub decisions: Vec<DecisionRecord>,
    pub outcome: GameOutcome,
}

impl GameRecord {
    pub fn of(replay: &Replay) -> Self {
        Self {
            version: replay.version,
            game_id: replay.game_id.clone(),
            config_hash: replay.config_hash.clone(),
            seed: replay.seed,
            agent: replay.agent,
            opponent: replay.opponent.clone(),
            decisions: replay
                .decisions
                .iter()
                .map(|d| DecisionRecord {
                    index: d.index,
                    wave: d.wave,
                    state: d.state.clone(),
                    enemy_currency_estimate: d.enemy_currency_estimate,
                    friendly: d.friendly,
                    enemy: d.enemy,
                    root_table: d.root_table.clone(),
                })
                .collect(),
            outcome: replay.outcome,
        }
    }

    pub fn lost(&self) -> bool {
        self.outcome.winner != self.agent
    }
}

/// `configs/<hash>.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredConfig {
    pub game: GameConfig,
    pub search: SearchParams,
}

/// Ids become directory names, so they are restricted to a safe alphabet.
pub fn valid_game_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 96 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn check_id(id: &str) -> Result<()> {
    if valid_game_id(id) {
        Ok(())
    } else {
        Err(Error::InvalidId(id.to_string()))
    }
}

/// Writes `path` via a temporary sibling and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(serde_json::from_str(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(what.to_string())),
        Err(e) => Err(e.into()),
    }
}

/// Held while a writer updates the index.
struct WriteLock(PathBuf);

impl WriteLock {
    fn acquire(root: &Path) -> Result<Self> {
        let path = root.join("index.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path.display().to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone)]
pub struct ReplayLibrary {
    root: PathBuf,
}

impl ReplayLibrary {
    /// Opens the library at `root`, creating an empty one if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("games"))?;
        fs::create_dir_all(root.join("configs"))?;
        let lib = Self { root };
        if !lib.index_path().exists() {
            let _lock = WriteLock::acquire(&lib.root)?;
            if !lib.index_path().exists() {
                lib.write_index(&Index::empty())?;
            }
        }
        Ok(lib)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    fn game_dir(&self, id: &str) -> Result<PathBuf> {
        check_id(id)?;
        Ok(self.root.join("games").join(id))
    }

    fn write_index(&self, index: &Index) -> Result<()> {
        write_atomic(&self.index_path(), serde_json::to_string_pretty(index)?.as_bytes())
    }

    pub fn index(&self) -> Result<Index> {
        let index: Index = read_json(&self.index_path(), "index.json")?;
        if index.version != INDEX_VERSION {
            return Err(tugwar::Error::Version { found: index.version, expected: INDEX_VERSION }.into());
        }
        Ok(index)
    }

    /// Stores a finished game. Fails if the id is taken.
    pub fn add(&self, replay: &Replay, config: &GameConfig, params: &SearchParams) -> Result<GameEntry> {
        let hash = config_hash(config, params);
        if hash != replay.config_hash {
            return Err(Error::Usage(format!("replay {} was not played under this config", replay.game_id)));
        }
        let dir = self.game_dir(&replay.game_id)?;
        // Creating the directory claims the id for this writer.
        match fs::create_dir(&dir) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(Error::Exists(replay.game_id.clone())),
            Err(e) => return Err(e.into()),
        }
        fs::create_dir(dir.join("trees"))?;
        for d in &replay.decisions {
            fs::write(tree_path(&dir, d.index), serde_json::to_string(&d.tree)?)?;
        }
        fs::write(dir.join("replay.json"), serde_json::to_string(&GameRecord::of(replay))?)?;
        let config_path = self.root.join("configs").join(format!("{hash}.toml"));
        if !config_path.exists() {
            let stored = StoredConfig { game: config.clone(), search: params.clone() };
            write_atomic(&config_path, toml::to_string(&stored).expect("config serializes").as_bytes())?;
        }

        let entry = GameEntry {
            game_id: replay.game_id.clone(),
            seed: replay.seed,
            agent: replay.agent,
            opponent: replay.opponent.clone(),
            decisions: replay.decisions.len(),
            lost: replay.lost(),
            outcome: replay.outcome,
            config_hash: hash,
        };
        let _lock = WriteLock::acquire(&self.root)?;
        let mut index = self.index()?;
        let at = index.games.partition_point(|g| g.game_id < entry.game_id);
        index.games.insert(at, entry.clone());
        index.revision += 1;
        self.write_index(&index)?;
        Ok(entry)
    }

    pub fn game(&self, id: &str) -> Result<GameRecord> {
        let record: GameRecord = read_json(&self.game_dir(id)?.join("replay.json"), id)?;
        if record.version != REPLAY_VERSION {
            return Err(tugwar::Error::Version { found: record.version, expected: REPLAY_VERSION }.into());
        }
        Ok(record)
    }

    pub fn tree(&self, id: &str, decision: usize) -> Result<SearchTree> {
        let path = tree_path(&self.game_dir(id)?, decision);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(SearchTree::from_json(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::NotFound(format!("{id} decision {decision}")))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Lints a stored game reading one tree at a time.
    pub fn lint_stored(&self, id: &str, detectors: &[DetectorId], cfg: &LintConfig) -> Result<GameLint> {
        let game = self.game(id)?;
        let trees = game.decisions.iter().map(|d| self.tree(id, d.index).map(|t| (d.index, t)));
        lint_game(id, game.lost(), trees, detectors, cfg)
    }

    /// Reassembles the full replay with every tree.
    pub fn replay(&self, id: &str) -> Result<Replay> {
        let record = self.game(id)?;
        let decisions = record
            .decisions
            .into_iter()
            .map(|d| {
                Ok(Decision {
                    tree: self.tree(id, d.index)?,
                    index: d.index,
                    wave: d.wave,
                    state: d.state,
                    enemy_currency_estimate: d.enemy_currency_estimate,
                    friendly: d.friendly,
                    enemy: d.enemy,
                    root_table: d.root_table,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Replay {
            version: record.version,
            game_id: record.game_id,
            config_hash: record.config_hash,
            seed: record.seed,
            agent: record.agent,
            opponent: record.opponent,
            decisions,
            outcome: record.outcome,
        })
    }

    pub fn config(&self, hash: &str) -> Result<StoredConfig> {
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::NotFound(format!("config {hash}")));
        }
        let path = self.root.join("configs").join(format!("{hash}.toml"));
        match fs::read_to_string(&path) {
            Ok(text) => Ok(toml::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(format!("config {hash}"))),
            Err(e) => Err(e.into()),
        }
    }

    /// Lint results are derived data and may be rewritten.
    pub fn write_lint(&self, lint: &GameLint) -> Result<()> {
        let dir = self.game_dir(&lint.game_id)?;
        if !dir.exists() {
            return Err(Error::NotFound(lint.game_id.clone()));
        }
        write_atomic(&dir.join("lint.json"), serde_json::to_string_pretty(lint)?.as_bytes())
    }

    pub fn lint(&self, id: &str) -> Result<Option<GameLint>> {
        match read_json(&self.game_dir(id)?.join("lint.json"), id) {
            Ok(l) => Ok(Some(l)),
            Err(Error::NotFound(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn write_report(&self, report: &LintReport) -> Result<()> {
        write_atomic(&self.root.join("lint_report.json"), report.to_json()?.as_bytes())
    }

    pub fn report(&self) -> Result<LintReport> {
        let text = fs::read_to_string(self.root.join("lint_report.json"))
            .map_err(|_| Error::NotFound("lint_report.json".into()))?;
        Ok(LintReport::from_json(&text)?)
    }
}

fn tree_path(dir: &Path, decision: usize) -> PathBuf {
    dir.join("trees").join(format!("{decision:04}.json"))
}
