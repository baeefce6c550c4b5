//! Minimax over the simulator from a fresh game: the sorted root table and
//! the principal variation.

use tugwar::game::{new_game, PlayerId};
use tugwar::models::QFunction;
use tugwar::search::{build_tree, CappedLegal, SearchParams, SimulatorDynamics};
use tugwar::GameConfig;

fn main() -> tugwar::Result<()> {
    let config = GameConfig::default();
    let game = new_game(config.clone(), 1)?;
    let q = QFunction::new(32, 1)?;
    let params = SearchParams { candidate_limit: 32, ..SearchParams::default() };
    let actions = CappedLegal { config, limit: params.candidate_limit };
    let tree = build_tree(&game, &SimulatorDynamics { perspective: PlayerId::P1 }, &q, &actions, &params)?;

    println!("{} nodes, {} leaves", tree.nodes.len(), tree.leaves().count());
    for row in tree.root_action_table() {
        println!("rank {:2}  value {:.3}  share {:.3}  {:?}", row.rank, row.agent_value, row.win_share, row.action);
    }
    for id in tree.principal_variation().into_iter().skip(1) {
        let e = tree.nodes[id].edge.expect("non-root");
        println!("pv: {:?} vs {:?}", e.friendly, e.enemy);
    }
    Ok(())
}
