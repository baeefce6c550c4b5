mod common;

use tugwar::game::PlayerId;
use tugwar::models::QFunction;
use tugwar::search::{build_tree, CappedLegal, SearchParams, SimulatorDynamics};

#[test]
fn exhaustive_tree_equals_brute_force_minimax() {
    let config = common::shrunk_config();
    let params = SearchParams { depth: 2, friendly: vec![6, 6], enemy: vec![6, 6], guard_terminals: true, candidate_limit: 0 };
    let actions = CappedLegal { config: config.clone(), limit: 0 };
    for seed in 0..20 {
        let root = common::random_root(&config, seed);
        let me = if seed % 2 == 0 { PlayerId::P1 } else { PlayerId::P2 };
        let q = QFunction::new(12, seed).unwrap();
        let tree = build_tree(&root, &SimulatorDynamics { perspective: me }, &q, &actions, &params).unwrap();
        let oracle = common::brute_force(&root, me, &q, 2);
        assert!(oracle.max_legal <= 6, "seed {seed}: {} legal actions", oracle.max_legal);
        let (action, value) = tree.best_action().unwrap();
        assert_eq!(value, oracle.value, "seed {seed}");
        assert!(oracle.best_actions.contains(&action), "seed {seed}");
    }
}
