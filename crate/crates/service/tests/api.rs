mod common;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde::de::DeserializeOwned;
use tower::ServiceExt;
use tugwar::game::PlayerId;
use tugwar::lint::{lint_replay, DetectorId, GameLint, InterestScore, LintConfig};
use tugwar::search::SearchTree;
use tugwar_service::api::{router, GameList, Interest, RootTable};
use tugwar_service::cli::{lint_library, play_games, Vs};
use tugwar_service::library::GameRecord;
use tugwar_service::ReplayLibrary;

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    let res = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json<T: DeserializeOwned>(app: &Router, uri: &str) -> T {
    let (status, body) = get(app, uri).await;
    assert_eq!(status, StatusCode::OK, "{uri}: {}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

/// One game played with the default branching and one ground-truth game.
fn library() -> (tempfile::TempDir, ReplayLibrary) {
    let tmp = tempfile::tempdir().unwrap();
    let lib = ReplayLibrary::open(tmp.path()).unwrap();
    let cfg = common::config();
    let (pool, _) = common::pool_and_model();
    play_games(&lib, &cfg, &common::agent(&cfg), &pool, Vs::Random, 1, 11).unwrap();
    let truth = common::ground_truth_replay(&cfg.game, 4, "truth-4");
    lib.add(&truth, &cfg.game, &common::ground_truth_params()).unwrap();
    (tmp, lib)
}

#[tokio::test]
async fn endpoints_serve_the_library() {
    let (_tmp, lib) = library();
    let app = router(lib.clone(), LintConfig::default()).unwrap();

    let list: GameList = get_json(&app, "/games").await;
    assert_eq!(list.revision, 2);
    let ids: Vec<&str> = list.games.iter().map(|g| g.game_id.as_str()).collect();
    assert_eq!(ids, ["random-s11-0000", "truth-4"]);

    let game: GameRecord = get_json(&app, "/games/random-s11-0000").await;
    assert_eq!(game, lib.game("random-s11-0000").unwrap());
    assert_eq!(game.agent, PlayerId::P1);

    for n in 0..game.decisions.len() {
        let tree: SearchTree = get_json(&app, &format!("/games/random-s11-0000/decisions/{n}/tree")).await;
        assert_eq!(tree, lib.tree("random-s11-0000", n).unwrap());
        assert_eq!(SearchTree::from_json(&tree.to_json().unwrap()).unwrap(), tree);

        let table: RootTable = get_json(&app, &format!("/games/random-s11-0000/decisions/{n}/root_table")).await;
        assert!(!table.entries.is_empty() && table.entries.len() <= 20);
        assert!(table.entries.windows(2).all(|w| w[0].agent_value >= w[1].agent_value));
        assert!(table.entries.iter().all(|e| (0.0..=1.0).contains(&e.win_share)));
        assert_eq!(table.entries, tree.root_action_table());
    }
}

#[tokio::test]
async fn interest_matches_a_hand_sorted_table() {
    let (_tmp, lib) = library();
    let app = router(lib.clone(), LintConfig::default()).unwrap();
    let interest: Interest = get_json(&app, "/games/truth-4/interest").await;
    let game = lib.game("truth-4").unwrap();
    assert_eq!(interest.scores.len(), game.decisions.len());

    // Recompute each score from the stored root tables and sort independently.
    let best: Vec<f64> = game
        .decisions
        .iter()
        .map(|d| d.root_table.iter().map(|r| r.agent_value).fold(f64::MIN, f64::max))
        .collect();
    let mut expected: Vec<(f64, usize)> = Vec::new();
    for (i, d) in game.decisions.iter().enumerate() {
        let p: Vec<f64> = d.root_table.iter().map(|r| r.agent_value).collect();
        let min = p.iter().copied().fold(f64::MAX, f64::min);
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let drop = if i == 0 { f64::NEG_INFINITY } else { best[i - 1] - best[i] };
        let s: &InterestScore = &interest.scores[i];
        assert!((s.fluctuation - (best[i] - min)).abs() < 1e-12);
        assert!((s.criticality - (best[i] - mean)).abs() < 1e-12);
        expected.push((drop.max(best[i] - min).max(best[i] - mean), i));
    }
    expected.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let order: Vec<usize> = interest.ranked.iter().map(|s| s.decision).collect();
    assert_eq!(order, expected.iter().map(|e| e.1).collect::<Vec<_>>());
}

#[tokio::test]
async fn flaws_equal_offline_lint() {
    let (_tmp, lib) = library();
    let cfg = common::config();
    // Before `lint` has run the API lints on demand.
    let app = router(lib.clone(), cfg.lint.clone()).unwrap();
    let on_demand: GameLint = get_json(&app, "/games/random-s11-0000/flaws").await;
    let direct = lint_replay(&lib.replay("random-s11-0000").unwrap(), &DetectorId::ALL, &cfg.lint);
    assert_eq!(on_demand, direct);

    let report = lint_library(&lib, &cfg, &DetectorId::ALL).unwrap();
    let app = router(lib.clone(), cfg.lint.clone()).unwrap();
    for g in &report.games {
        let served: GameLint = get_json(&app, &format!("/games/{}/flaws", g.game_id)).await;
        assert_eq!(&served, g);
    }
    let truth = report.games.iter().find(|g| g.game_id == "truth-4").unwrap();
    assert!(DetectorId::RULE_BASED.iter().all(|d| truth.counts[d] == 0));
}

#[tokio::test]
async fn errors_and_caching() {
    let (_tmp, lib) = library();
    let app = router(lib.clone(), LintConfig::default()).unwrap();
    for uri in ["/games/nope", "/games/nope/flaws", "/games/truth-4/decisions/999/tree", "/games/truth-4/decisions/999/root_table", "/nothing"] {
        assert_eq!(get(&app, uri).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    for uri in ["/games/truth-4/decisions/x/tree", "/games/truth-4/decisions/-1/root_table", "/games/bad%20id"] {
        let (status, body) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        let body: serde_json::Value = serde_json::from_slice(&body).unwrap();
        assert!(body["error"].is_string(), "{uri}");
    }

    let res = app.clone().oneshot(Request::get("/games").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(res.headers()[header::ETAG], "\"r2\"");
    assert!(res.headers().contains_key(header::CACHE_CONTROL));

    // A router keeps its snapshot; games added later need a new one.
    let cfg = common::config();
    let late = common::ground_truth_replay(&cfg.game, 5, "truth-5");
    lib.add(&late, &cfg.game, &common::ground_truth_params()).unwrap();
    assert_eq!(get(&app, "/games/truth-5").await.0, StatusCode::NOT_FOUND);
    let list: GameList = get_json(&app, "/games").await;
    assert_eq!(list.games.len(), 2);
    let fresh = router(lib, LintConfig::default()).unwrap();
    assert_eq!(get(&fresh, "/games/truth-5").await.0, StatusCode::OK);
}
