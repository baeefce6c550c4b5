//! Builds a throwaway library with one game, lints it and queries the HTTP
//! API in process. Untrained networks keep it quick, so values are flat.

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use tower::ServiceExt;
use tugwar::lint::DetectorId;
use tugwar::models::{QFunction, TransitionModel};
use tugwar::replay::SearchAgent;
use tugwar::search::SearchParams;
use tugwar::training::{PoolMember, TournamentPool};
use tugwar_service::api::router;
use tugwar_service::cli::{lint_library, play_games, Vs};
use tugwar_service::{ReplayLibrary, ServiceConfig};

#[tokio::main]
async fn main() -> tugwar_service::Result<()> {
    let dir = tempfile::tempdir()?;
    let lib = ReplayLibrary::open(dir.path())?;
    let cfg = ServiceConfig {
        search: SearchParams { candidate_limit: 12, ..SearchParams::default() },
        ..ServiceConfig::default()
    };
    let mut pool = TournamentPool::seeded();
    pool.push(PoolMember::Trained { q: QFunction::new(16, 1)?, win_rate: 0.0, reached_threshold: false });
    let agent = SearchAgent { q: pool.latest_trained().expect("pushed").clone(), model: TransitionModel::new(16, 2)?, params: cfg.search.clone() };

    let entry = play_games(&lib, &cfg, &agent, &pool, Vs::Random, 1, 7)?.remove(0);
    println!("stored {} ({} decisions)", entry.game_id, entry.decisions);
    lint_library(&lib, &cfg, &DetectorId::ALL)?;

    let app = router(lib, cfg.lint.clone())?;
    for uri in [
        "/games".to_string(),
        format!("/games/{}/decisions/0/root_table", entry.game_id),
        format!("/games/{}/interest", entry.game_id),
        format!("/games/{}/flaws", entry.game_id),
        "/games/missing".to_string(),
    ] {
        let res = app.clone().oneshot(Request::get(&uri).body(Body::empty()).expect("request")).await.expect("infallible");
        let status = res.status();
        let body = res.into_body().collect().await.expect("body").to_bytes();
        let text = String::from_utf8_lossy(&body);
        let end = text.char_indices().nth(160).map_or(text.len(), |(i, _)| i);
        println!("GET {uri} -> {status}\n  {}", &text[..end]);
    }
    Ok(())
}
