//! A recorded game with a search tree per decision, linted and ranked by
//! interest.
//!
//! Pass a models directory written by `tow train` (for example
//! `library/models`) to use trained networks. Without one the networks are
//! untrained and every value is flat.

use tugwar::game::PlayerId;
use tugwar::lint::{interest_scores, lint_replay, rank_decisions, DetectorId, LintConfig};
use tugwar::models::{QFunction, TransitionModel};
use tugwar::replay::{play_recorded, Opponent, SearchAgent};
use tugwar::search::SearchParams;
use tugwar::training::{Agent, TrainedSystem};
use tugwar::GameConfig;

fn main() -> tugwar::Result<()> {
    let config = GameConfig::default();
    let (q, model) = match std::env::args().nth(1) {
        Some(dir) => {
            let (pool, model) = TrainedSystem::load_models(dir)?;
            (pool.latest_trained().ok_or(tugwar::Error::Empty("trained agents"))?.clone(), model)
        }
        None => (QFunction::new(32, 1)?, TransitionModel::new(32, 2)?),
    };
    let agent = SearchAgent { q, model, params: SearchParams { candidate_limit: 24, ..SearchParams::default() } };
    let replay = play_recorded(&config, &agent, &Opponent::Agent(Agent::Random), PlayerId::P1, 5, "demo")?;
    println!("{} decisions, winner {:?}, config {}", replay.decisions.len(), replay.outcome.winner, &replay.config_hash[..12]);

    let lint = lint_replay(&replay, &DetectorId::ALL, &LintConfig::default());
    for (d, n) in &lint.counts {
        println!("{d}: {n}");
    }
    for s in rank_decisions(&interest_scores(&replay)).iter().take(5) {
        println!("decision {:2}: drop {:?} fluctuation {:.3} criticality {:.3}", s.decision, s.value_drop, s.fluctuation, s.criticality);
    }
    Ok(())
}
