//! Read-only JSON API over a [`ReplayLibrary`].
//!
//! | route | body |
//! |---|---|
//! | `GET /games` | [`GameList`] |
//! | `GET /games/{id}` | [`GameRecord`] |
//! | `GET /games/{id}/decisions/{n}/tree` | `SearchTree` |
//! | `GET /games/{id}/decisions/{n}/root_table` | [`RootTable`] |
//! | `GET /games/{id}/interest` | [`Interest`] |
//! | `GET /games/{id}/flaws` | `GameLint` |
//!
//! The index is read once when the router is built, so every response
//! describes the same library revision, which is also the `ETag`.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tugwar::lint::{interest_from_tables, rank_decisions, DetectorId, GameLint, InterestScore, LintConfig};
use tugwar::search::RootEntry;

use crate::error::{Error, Result};
use crate::library::{valid_game_id, GameEntry, GameRecord, Index, ReplayLibrary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameList {
    pub revision: u64,
    pub games: Vec<GameEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootTable {
    pub game_id: String,
    pub decision: usize,
    /// Sorted by agent value, best first.
    pub entries: Vec<RootEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interest {
    pub game_id: String,
    /// One per decision, in order.
    pub scores: Vec<InterestScore>,
    /// Most interesting first.
    pub ranked: Vec<InterestScore>,
}

/// Interest scores from the root tables of a stored game.
pub fn interest_of(game: &GameRecord) -> Interest {
    let tables: Vec<Vec<f64>> =
        game.decisions.iter().map(|d| d.root_table.iter().map(|r| r.agent_value).collect()).collect();
    let scores = interest_from_tables(&tables);
    Interest { game_id: game.game_id.clone(), ranked: rank_decisions(&scores), scores }
}

/// Stored lint results if `lint` has run, otherwise every detector under `cfg`.
pub fn flaws_of(lib: &ReplayLibrary, id: &str, cfg: &LintConfig) -> Result<GameLint> {
    match lib.lint(id)? {
        Some(l) => Ok(l),
        None => lib.lint_stored(id, &DetectorId::ALL, cfg),
    }
}

struct ApiState {
    lib: ReplayLibrary,
    index: Index,
    lint: LintConfig,
    etag: HeaderValue,
}

impl ApiState {
    fn decision(&self, id: &str, n: &str) -> Result<usize> {
        self.entry(id)?;
        n.parse().map_err(|_| Error::Usage(format!("decision index must be a non-negative integer, got {n:?}")))
    }

    fn entry(&self, id: &str) -> Result<&GameEntry> {
        if !valid_game_id(id) {
            return Err(Error::InvalidId(id.to_string()));
        }
        self.index.get(id).ok_or_else(|| Error::NotFound(id.to_string()))
    }
}

impl IntoResponse for Error {
    fn into_response(self) -> Response {
        let status = match self {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::InvalidId(_) | Error::Usage(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

type Shared = Arc<ApiState>;

fn ok<T: Serialize>(state: &ApiState, body: T) -> Response {
    let mut res = Json(body).into_response();
    let h = res.headers_mut();
    h.insert(header::ETAG, state.etag.clone());
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("public, max-age=3600"));
    res
}

/// File reads and linting block, so they run off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| Error::Usage(format!("worker failed: {e}")))?
}

async fn list_games(State(s): State<Shared>) -> Response {
    ok(&s, GameList { revision: s.index.revision, games: s.index.games.clone() })
}

async fn get_game(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response> {
    s.entry(&id)?;
    let lib = s.lib.clone();
    let game = blocking(move || lib.game(&id)).await?;
    Ok(ok(&s, game))
}

async fn get_decision_tree(State(s): State<Shared>, Path((id, n)): Path<(String, String)>) -> Result<Response> {
    let n = s.decision(&id, &n)?;
    let lib = s.lib.clone();
    let tree = blocking(move || lib.tree(&id, n)).await?;
    Ok(ok(&s, tree))
}

async fn get_root_table(State(s): State<Shared>, Path((id, n)): Path<(String, String)>) -> Result<Response> {
    let n = s.decision(&id, &n)?;
    let lib = s.lib.clone();
    let game = blocking(move || lib.game(&id)).await?;
    let d = game.decisions.get(n).ok_or_else(|| Error::NotFound(format!("{} decision {n}", game.game_id)))?;
    Ok(ok(&s, RootTable { game_id: game.game_id.clone(), decision: n, entries: d.root_table.clone() }))
}

async fn get_interest(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response> {
    s.entry(&id)?;
    let lib = s.lib.clone();
    let game = blocking(move || lib.game(&id)).await?;
    Ok(ok(&s, interest_of(&game)))
}

async fn get_flaws(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response> {
    s.entry(&id)?;
    let (lib, cfg) = (s.lib.clone(), s.lint.clone());
    let flaws = blocking(move || flaws_of(&lib, &id, &cfg)).await?;
    Ok(ok(&s, flaws))
}

/// The API router over a snapshot of `lib`.
pub fn router(lib: ReplayLibrary, lint: LintConfig) -> Result<Router> {
    let index = lib.index()?;
    let etag = HeaderValue::from_str(&format!("\"r{}\"", index.revision)).expect("ascii");
    let state = Arc::new(ApiState { lib, index, lint, etag });
    Ok(Router::new()
        .route("/games", get(list_games))
        .route("/games/{id}", get(get_game))
        .route("/games/{id}/decisions/{n}/tree", get(get_decision_tree))
        .route("/games/{id}/decisions/{n}/root_table", get(get_root_table))
        .route("/games/{id}/interest", get(get_interest))
        .route("/games/{id}/flaws", get(get_flaws))
        .with_state(state))
}

/// Serves `router` on `addr` until the process ends.
pub async fn serve(router: Router, addr: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router).await?;
    Ok(())
}
