//! A short decomposed-reward DQN run against a pool holding only the random
//! agent, then an evaluation against random play.

use tugwar::training::{evaluate_against, run_tournament, Agent, TournamentPool, TrainConfig};
use tugwar::GameConfig;

fn main() -> tugwar::Result<()> {
    let config = GameConfig::default();
    let train = TrainConfig { max_steps: 8_000, ..TrainConfig::desk() };
    let mut pool = TournamentPool::seeded();
    let results = run_tournament(&mut pool, 1, &train, &config)?;
    let r = &results[0];
    for line in r.log.iter().step_by(50) {
        println!("game {:4} step {:6} epsilon {:.2} win rate {:.2}", line.game, line.step, line.epsilon, line.win_rate);
    }
    let agent = Agent::Greedy { q: r.q.clone(), candidate_limit: train.candidate_limit };
    let rate = evaluate_against(&config, &agent, &Agent::Random, 100, 99)?;
    println!("threshold reached: {}, wins vs random: {:.0}%", r.reached_threshold, rate * 100.0);
    Ok(())
}
