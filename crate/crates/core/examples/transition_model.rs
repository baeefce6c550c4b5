//! Collects transitions from random play and fits the transition model.

use tugwar::training::{collect_transition_dataset, fit_transition_model, FitConfig, TournamentPool};
use tugwar::GameConfig;

fn main() -> tugwar::Result<()> {
    let config = GameConfig::default();
    let data = collect_transition_dataset(&config, &TournamentPool::seeded(), 600, 64, 3)?;
    let (_, report) = fit_transition_model(&data, &FitConfig { hidden: 64, epochs: 8, ..FitConfig::default() })?;
    for (i, loss) in report.epoch_loss.iter().enumerate() {
        println!("epoch {i}: loss {loss:.5}");
    }
    let h = &report.holdout;
    println!(
        "{} train / {} held out; held-out MAE: base health {:.4}, unit grid {:.4}, buildings {:.4}, currency {:.4}",
        report.train_records, report.holdout_records, h.base_health, h.unit_grid, h.buildings, h.currency
    );
    Ok(())
}
