//! Two uniformly random players, one line per wave.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tugwar::game::{new_game, sample_legal_action, PlayerId};
use tugwar::GameConfig;

fn main() -> tugwar::Result<()> {
    let config = GameConfig::default();
    let mut game = new_game(config.clone(), 7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    loop {
        let [a1, a2] = PlayerId::BOTH.map(|p| {
            let s = game.player(p);
            sample_legal_action(&config, s.currency, s.pylons, &mut rng)
        });
        let outcome = game.step(&a1, &a2)?;
        let [p1, p2] = PlayerId::BOTH.map(|p| game.player(p).clone());
        println!(
            "wave {:2}  P1 health {:6.0} {:6.0} currency {:4}  P2 health {:6.0} {:6.0} currency {:4}  units {:3}",
            game.wave,
            p1.base_health[0],
            p1.base_health[1],
            p1.currency,
            p2.base_health[0],
            p2.base_health[1],
            p2.currency,
            game.lanes.iter().map(Vec::len).sum::<usize>()
        );
        if let Some(o) = outcome {
            println!("{:?} wins by {:?}", o.winner, o.condition);
            return Ok(());
        }
    }
}
