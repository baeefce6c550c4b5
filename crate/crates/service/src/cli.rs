//! The `tow` command line. Every subcommand takes `--seed`, `--config`
//! (or `$TOW_CONFIG`) and `--library`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use tugwar::game::PlayerId;
use tugwar::lint::{summarize, DetectorId};
use tugwar::replay::{play_recorded, Opponent, SearchAgent};
use tugwar::training::{train_pipeline, TournamentPool, TrainedSystem};

use crate::api::{flaws_of, interest_of, router, serve};
use crate::config::{ServiceConfig, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::library::{GameEntry, ReplayLibrary};

#[derive(Debug, Parser)]
#[command(name = "tow", version, about = "Train, play, lint and serve tug-of-war search agents")]
pub struct Cli {
    /// TOML config with [game], [search], [lint] and [pipeline] tables.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Library directory.
    #[arg(long, global = true, default_value = "library")]
    pub library: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the tournament and fit the transition model; writes `models/`.
    Train {
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        dataset_games: Option<usize>,
    },
    /// Play `n` recorded games with an explanation tree at every decision.
    Play {
        n: usize,
        #[arg(long, value_enum, default_value_t = Vs::Random)]
        vs: Vs,
    },
    /// Run detectors over every game and write lint results.
    Lint {
        /// Comma-separated detector names (default: all).
        #[arg(long, value_delimiter = ',')]
        detectors: Vec<DetectorId>,
    },
    /// Print decision points ranked by interest.
    Interest {
        /// One game; all games if absent.
        #[arg(long)]
        game: Option<String>,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Write self-contained documents for every game to a directory.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vs {
    Pool,
    Random,
    #[value(name = "self")]
    SelfPlay,
}

impl fmt::Display for Vs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vs::Pool => "pool",
            Vs::Random => "random",
            Vs::SelfPlay => "self",
        })
    }
}

/// Runs one parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = ServiceConfig::resolve(cli.config.as_deref())?;
    let lib = ReplayLibrary::open(&cli.library)?;
    match cli.command {
        Command::Train { generations, dataset_games } => {
            let mut p = cfg.pipeline.clone();
            p.train.seed = cli.seed;
            p.generations = generations.unwrap_or(p.generations);
            p.dataset_games = dataset_games.unwrap_or(p.dataset_games);
            let sys = train_pipeline(&cfg.game, &p)?;
            sys.save(lib.models_dir())?;
            for (g, (reached, rate)) in sys.generations.iter().enumerate() {
                writeln!(out, "generation {g}: best win rate {rate:.3} (threshold reached: {reached})")?;
            }
            let h = &sys.fit.holdout;
            writeln!(
                out,
                "transition model: {} records, holdout base-health MAE {:.4}, unit-grid MAE {:.4}",
                sys.dataset_records, h.base_health, h.unit_grid
            )?;
            writeln!(out, "models written to {}", lib.models_dir().display())?;
        }
        Command::Play { n, vs } => {
            let (pool, model) = load_models(&lib)?;
            let q = pool.latest_trained().ok_or(tugwar::Error::Empty("trained agents"))?.clone();
            let agent = SearchAgent { q, model, params: cfg.search.clone() };
            for e in play_games(&lib, &cfg, &agent, &pool, vs, n, cli.seed)? {
                let result = if e.lost { "lost" } else { "won" };
                writeln!(out, "{} {result} as {:?} after {} decisions", e.game_id, e.agent, e.decisions)?;
            }
        }
        Command::Lint { detectors } => {
            let detectors = if detectors.is_empty() { DetectorId::ALL.to_vec() } else { detectors };
            let report = lint_library(&lib, &cfg, &detectors)?;
            for d in &report.detectors {
                writeln!(out, "{d}: {} findings, {} severe", report.totals[d], report.severe_totals[d])?;
            }
            let f = &report.final_decision;
            writeln!(
                out,
                "losing games {}: final-decision health rise on PV {}, anywhere {}, severe {}",
                f.losing_games, f.rise_on_pv, f.rise_anywhere, f.severe
            )?;
        }
        Command::Interest { game, top } => {
            let ids = match game {
                Some(id) => vec![id],
                None => lib.index()?.games.into_iter().map(|g| g.game_id).collect(),
            };
            for id in ids {
                let interest = interest_of(&lib.game(&id)?);
                for s in interest.ranked.iter().take(top) {
                    let drop = s.value_drop.map_or("-".to_string(), |d| format!("{d:.3}"));
                    writeln!(
                        out,
                        "{id} decision {}: drop {drop} fluctuation {:.3} criticality {:.3}",
                        s.decision, s.fluctuation, s.criticality
                    )?;
                }
            }
        }
        Command::Serve { addr } => {
            let app = router(lib, cfg.lint.clone())?;
            writeln!(out, "serving {} on http://{addr}", cli.library.display())?;
            out.flush()?;
            tokio::runtime::Runtime::new()?.block_on(serve(app, &addr))?;
        }
        Command::Export { out: dir } => {
            let n = export(&lib, &cfg, &dir)?;
            writeln!(out, "exported {n} games to {}", dir.display())?;
        }
    }
    Ok(())
}

pub fn load_models(lib: &ReplayLibrary) -> Result<(TournamentPool, tugwar::models::TransitionModel)> {
    if !lib.models_dir().exists() {
        return Err(Error::Usage(format!("no models in {}; run `tow train` first", lib.models_dir().display())));
    }
    Ok(TrainedSystem::load_models(lib.models_dir())?)
}

/// Seed of game `i` in a batch started with `seed`.
pub fn game_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

/// Plays and stores `n` games. The agent alternates seats; against the pool
/// it meets members in turn.
pub fn play_games(
    lib: &ReplayLibrary,
    cfg: &ServiceConfig,
    agent: &SearchAgent,
    pool: &TournamentPool,
    vs: Vs,
    n: usize,
    seed: u64,
) -> Result<Vec<GameEntry>> {
    let limit = cfg.pipeline.train.candidate_limit;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let opponent = match vs {
            Vs::Random => Opponent::Agent(tugwar::training::Agent::Random),
            Vs::SelfPlay => Opponent::Search(agent.clone()),
            Vs::Pool => {
                let members = pool.members();
                if members.is_empty() {
                    return Err(tugwar::Error::Empty("pool").into());
                }
                Opponent::Agent(members[(game_seed(seed, i) % members.len() as u64) as usize].agent(limit))
            }
        };
        let side = if i % 2 == 0 { PlayerId::P1 } else { PlayerId::P2 };
        let id = format!("{vs}-s{seed}-{i:04}");
        let replay = play_recorded(&cfg.game, agent, &opponent, side, game_seed(seed, i), id)?;
        entries.push(lib.add(&replay, &cfg.game, &agent.params)?);
    }
    Ok(entries)
}

/// Lints every game one at a time, storing per-game results and the
/// library report.
pub fn lint_library(
    lib: &ReplayLibrary,
    cfg: &ServiceConfig,
    detectors: &[DetectorId],
) -> Result<tugwar::lint::LintReport> {
    let mut games = Vec::new();
    for entry in lib.index()?.games {
        let lint = lib.lint_stored(&entry.game_id, detectors, &cfg.lint)?;
        lib.write_lint(&lint)?;
        games.push(lint);
    }
    let report = summarize(games, detectors, &cfg.lint);
    lib.write_report(&report)?;
    Ok(report)
}

/// Writes `index.json`, `configs/`, `lint_report.json` if present, and per
/// game a directory holding `replay.json`, `trees/`, `interest.json` and
/// `flaws.json`. Returns the number of games.
pub fn export(lib: &ReplayLibrary, cfg: &ServiceConfig, dir: &Path) -> Result<usize> {
    fs::create_dir_all(dir.join("games"))?;
    fs::create_dir_all(dir.join("configs"))?;
    let index = lib.index()?;
    fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)?)?;
    if let Ok(report) = lib.report() {
        fs::write(dir.join("lint_report.json"), report.to_json()?)?;
    }
    let mut hashes: Vec<&str> = index.games.iter().map(|g| g.config_hash.as_str()).collect();
    hashes.sort_unstable();
    hashes.dedup();
    for h in hashes {
        let stored = lib.config(h)?;
        fs::write(dir.join("configs").join(format!("{h}.toml")), toml::to_string(&stored).expect("config serializes"))?;
    }
    for g in &index.games {
        let id = &g.game_id;
        let game = lib.game(id)?;
        let out = dir.join("games").join(id);
        fs::create_dir_all(out.join("trees"))?;
        for d in &game.decisions {
            let tree = lib.tree(id, d.index)?;
            fs::write(out.join("trees").join(format!("{:04}.json", d.index)), tree.to_json()?)?;
        }
        fs::write(out.join("replay.json"), serde_json::to_string_pretty(&game)?)?;
        fs::write(out.join("interest.json"), serde_json::to_string_pretty(&interest_of(&game))?)?;
        fs::write(out.join("flaws.json"), serde_json::to_string_pretty(&flaws_of(lib, id, &cfg.lint)?)?)?;
    }
    Ok(index.games.len())
}
