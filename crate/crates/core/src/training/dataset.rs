use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{play_game, Agent, TournamentPool, TransitionRecord};
use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::models::{
    decode_state, encode_state, TransitionModel, BUILDING_RANGE, CURRENCY_INDEX, GRID_RANGE, HEALTH_RANGE,
    OUTCOMES, PYLON_RANGE, STATE_FEATURES,
};
use crate::neural::Adam;

pub const DATASET_VERSION: u32 = 1;

/// Ground-truth transitions from `games` simulated games. Even games pit two
/// pool members against each other, odd games a pool member against the
/// uniform-random agent, so the data covers both strong and erratic play.
/// Members and sides rotate with the game index; the result does not depend
/// on the thread count.
pub fn collect_transition_dataset(
    config: &GameConfig,
    pool: &TournamentPool,
    games: usize,
    candidate_limit: usize,
    seed: u64,
) -> Result<Vec<TransitionRecord>> {
    if pool.is_empty() {
        return Err(Error::Empty("tournament pool"));
    }
    let agents = pool.agents(candidate_limit);
    let n = agents.len();
    let per_game = (0..games)
        .into_par_iter()
        .map(|g| {
            let a = &agents[g % n];
            let b = if g % 2 == 0 { &agents[(g / 2 + g / n) % n] } else { &Agent::Random };
            let (p1, p2) = if (g / 2) % 2 == 0 { (a, b) } else { (b, a) };
            play_game(config, p1, p2, seed.wrapping_add(g as u64), true).map(|r| r.transitions)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_game.into_iter().flatten().collect())
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    version: u32,
    records: usize,
}

/// Line-delimited JSON: a header line, then one record per line.
pub fn save_dataset(path: impl AsRef<Path>, records: &[TransitionRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &DatasetHeader { version: DATASET_VERSION, records: records.len() })?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<TransitionRecord>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header: DatasetHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(Error::Empty("dataset file")),
    };
    if header.version != DATASET_VERSION {
        return Err(Error::Version { found: header.version, expected: DATASET_VERSION });
    }
    let records = lines
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect::<Result<Vec<TransitionRecord>>>()?;
    if records.len() != header.records {
        return Err(Error::Shape { expected: header.records, got: records.len() });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { hidden: crate::models::DEFAULT_HIDDEN, lr: 1e-3, epochs: 20, batch_size: 64, holdout_fraction: 0.1, seed: 0 }
    }
}

/// Mean absolute error per feature group, in normalized feature units, of
/// the decoded prediction (counts rounded, health clamped) against truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldErrors {
    pub base_health: f64,
    pub unit_grid: f64,
    pub buildings: f64,
    pub currency: f64,
    pub pylons: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train_records: usize,
    pub holdout_records: usize,
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub train: FieldErrors,
    pub holdout: FieldErrors,
}

fn target_of(r: &TransitionRecord) -> Vec<f64> {
    let mut t = encode_state(&r.next);
    t.extend(r.reward.0);
    t
}

fn mean_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Field errors of `model` over `records`.
pub fn field_errors(model: &TransitionModel, records: &[&TransitionRecord]) -> FieldErrors {
    if records.is_empty() {
        return FieldErrors::default();
    }
    let sums = records
        .par_iter()
        .map(|r| {
            let raw = model.predict_raw(&r.state, &r.friendly, &r.enemy);
            let mut predicted = decode_state(&raw, r.state.perspective).expect("output has state features");
            predicted.wave = r.next.wave;
            let p = encode_state(&predicted);
            let t = encode_state(&r.next);
            let (_, reward) = model.predict_transition(&r.state, &r.friendly, &r.enemy);
            [
                mean_abs(&p[HEALTH_RANGE], &t[HEALTH_RANGE]),
                mean_abs(&p[GRID_RANGE], &t[GRID_RANGE]),
                mean_abs(&p[BUILDING_RANGE], &t[BUILDING_RANGE]),
                (p[CURRENCY_INDEX] - t[CURRENCY_INDEX]).abs(),
                mean_abs(&p[PYLON_RANGE], &t[PYLON_RANGE]),
                mean_abs(&reward.0, &r.reward.0),
            ]
        })
        .reduce(|| [0.0; 6], |a, b| std::array::from_fn(|i| a[i] + b[i]));
    let n = records.len() as f64;
    FieldErrors {
        base_health: sums[0] / n,
        unit_grid: sums[1] / n,
        buildings: sums[2] / n,
        currency: sums[3] / n,
        pylons: sums[4] / n,
        reward: sums[5] / n,
    }
}

/// Fits a transition model by minibatch Adam on mean squared error over the
/// next-state features and the outcome head, holding out a shuffled
/// fraction of the records for evaluation.
pub fn fit_transition_model(records: &[TransitionRecord], config: &FitConfig) -> Result<(TransitionModel, FitReport)> {
    if records.is_empty() {
        return Err(Error::Empty("transition dataset"));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) || config.batch_size == 0 {
        return Err(Error::InvalidConfig("holdout_fraction must be in [0, 1) and batch_size > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut rng);
    let holdout_n = (records.len() as f64 * config.holdout_fraction).round() as usize;
    let (holdout_idx, train_idx) = order.split_at(holdout_n);
    let mut train_idx = train_idx.to_vec();

    let mut model = TransitionModel::new(config.hidden, config.seed)?;
    let mut adam = Adam::new(config.lr);
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in train_idx.chunks(config.batch_size) {
            let inputs: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&i| TransitionModel::input(&records[i].state, &records[i].friendly, &records[i].enemy))
                .collect();
            let targets: Vec<Vec<f64>> = chunk.iter().map(|&i| target_of(&records[i])).collect();
            total += model.net_mut().train_step(&mut adam, &inputs, &targets)?;
            batches += 1;
        }
        epoch_loss.push(total / batches.max(1) as f64);
    }
    debug_assert_eq!(model.net().output_size(), STATE_FEATURES + OUTCOMES);

    let pick = |idx: &[usize]| idx.iter().map(|&i| &records[i]).collect::<Vec<_>>();
    let report = FitReport {
        train_records: train_idx.len(),
        holdout_records: holdout_idx.len(),
        epoch_loss,
        train: field_errors(&model, &pick(&train_idx)),
        holdout: field_errors(&model, &pick(holdout_idx)),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dataset() -> Vec<TransitionRecord> {
        collect_transition_dataset(&GameConfig::default(), &TournamentPool::seeded(), 20, 8, 7).unwrap()
    }

    #[test]
    fn collection_is_deterministic() {
        let a = small_dataset();
        assert!(a.len() > 100);
        assert_eq!(a, small_dataset());
    }

    #[test]
    fn dataset_round_trips_through_disk() {
        let data = small_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        save_dataset(&path, &data).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), data);

        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, truncated).unwrap();
        assert!(load_dataset(&path).is_err());
    }

    #[test]
    fn fitting_reduces_loss_and_reports_holdout() {
        let data = small_dataset();
        let cfg = FitConfig { hidden: 32, epochs: 40, ..FitConfig::default() };
        let (model, report) = fit_transition_model(&data, &cfg).unwrap();
        assert!(report.epoch_loss.last().unwrap() < &report.epoch_loss[0]);
        assert_eq!(report.train_records + report.holdout_records, data.len());
        assert!(report.holdout.base_health < 0.2, "{report:?}");
        let (again, _) = fit_transition_model(&data, &cfg).unwrap();
        assert_eq!(model, again);
    }
}
