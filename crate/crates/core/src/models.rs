//! The learned components the agent searches with: the action ranker and
//! state evaluator (one Q-function with a decomposed outcome head) and the
//! transition model, plus the feature encoders that define their inputs.
//!
//! State features are always written from the perspective player's side:
//! own fields first, and unit-grid cells ordered from the own base outward.
//!
//! | index  | field                                                     | scale   |
//! |--------|-----------------------------------------------------------|---------|
//! | 0      | wave                                                      | / 40    |
//! | 1..5   | base health: own top, own bottom, enemy top, enemy bottom | 1       |
//! | 5      | own currency                                              | / 2000  |
//! | 6..18  | buildings `[own, enemy][top, bottom][M, B, I]`            | / 20    |
//! | 18..20 | pylons own, enemy                                         | / 3     |
//! | 20..68 | unit grid `[own, enemy][M, B, I][top 0..4, bottom 0..4]`  | / 30    |
//!
//! Action features: lane one-hot (top, bottom), buildings added (M, B, I),
//! pylons added, unscaled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AbstractState, Lane, PlayerAction, PlayerId, WinCondition, CELLS_PER_LANE, GRID_CELLS};
use crate::neural::{Mlp, MlpSpec};

pub const STATE_FEATURES: usize = 68;
pub const ACTION_FEATURES: usize = 6;
pub const OUTCOMES: usize = 6;
pub const Q_INPUTS: usize = STATE_FEATURES + ACTION_FEATURES;
pub const TRANSITION_INPUTS: usize = STATE_FEATURES + 2 * ACTION_FEATURES;
pub const TRANSITION_OUTPUTS: usize = STATE_FEATURES + OUTCOMES;

pub const WAVE_SCALE: f64 = 40.0;
pub const CURRENCY_SCALE: f64 = 2000.0;
pub const BUILDING_SCALE: f64 = 20.0;
pub const PYLON_SCALE: f64 = 3.0;
pub const GRID_SCALE: f64 = 30.0;

pub const HEALTH_RANGE: std::ops::Range<usize> = 1..5;
pub const CURRENCY_INDEX: usize = 5;
pub const BUILDING_RANGE: std::ops::Range<usize> = 6..18;
pub const PYLON_RANGE: std::ops::Range<usize> = 18..20;
pub const GRID_RANGE: std::ops::Range<usize> = 20..68;

pub const DEFAULT_HIDDEN: usize = 128;

/// Probabilities of the six endings, from an agent's point of view: its own
/// three win conditions (destroy top, destroy bottom, timeout) first, then the
/// opponent's three.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomeVector(pub [f64; OUTCOMES]);

impl OutcomeVector {
    pub const ZERO: OutcomeVector = OutcomeVector([0.0; OUTCOMES]);

    /// One-hot on `condition`, seen by `perspective`.
    pub fn one_hot(condition: WinCondition, perspective: PlayerId) -> Self {
        let mut v = [0.0; OUTCOMES];
        v[condition.relative_index(perspective)] = 1.0;
        OutcomeVector(v)
    }

    /// The agent's chance of winning: the sum of its own components.
    pub fn agent_value(&self) -> f64 {
        self.0[..3].iter().sum()
    }

    pub fn opponent_value(&self) -> f64 {
        self.0[3..].iter().sum()
    }

    pub fn clamped(self) -> Self {
        OutcomeVector(self.0.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    /// The same vector from the opponent's point of view.
    pub fn flipped(self) -> Self {
        let v = self.0;
        OutcomeVector([v[3], v[4], v[5], v[0], v[1], v[2]])
    }

    /// Rescaled to sum to one, for display.
    pub fn normalized(self) -> Self {
        let s: f64 = self.0.iter().sum();
        if s > 0.0 {
            OutcomeVector(self.0.map(|v| v / s))
        } else {
            OutcomeVector([1.0 / OUTCOMES as f64; OUTCOMES])
        }
    }

    /// Most likely ending (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..OUTCOMES {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn l1_distance(&self, other: &OutcomeVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// Grid cell index as seen from `perspective` (cells counted from own base).
fn oriented_cell(cell: usize, perspective: PlayerId) -> usize {
    match perspective {
        PlayerId::P1 => cell,
        PlayerId::P2 => {
            let lane = cell / CELLS_PER_LANE;
            lane * CELLS_PER_LANE + (CELLS_PER_LANE - 1 - cell % CELLS_PER_LANE)
        }
    }
}

pub fn encode_state(s: &AbstractState) -> Vec<f64> {
    let me = s.perspective;
    let order = [me, me.other()];
    let mut f = Vec::with_capacity(STATE_FEATURES);
    f.push(s.wave as f64 / WAVE_SCALE);
    for p in order {
        f.extend(s.base_health[p.index()]);
    }
    f.push(s.currency as f64 / CURRENCY_SCALE);
    for p in order {
        for lane in &s.buildings[p.index()] {
            f.extend(lane.iter().map(|&n| n as f64 / BUILDING_SCALE));
        }
    }
    for p in order {
        f.push(s.pylons[p.index()] as f64 / PYLON_SCALE);
    }
    for p in order {
        for cells in &s.unit_grid[p.index()] {
            let mut oriented = [0.0; GRID_CELLS];
            for (c, &n) in cells.iter().enumerate() {
                oriented[oriented_cell(c, me)] = n as f64 / GRID_SCALE;
            }
            f.extend(oriented);
        }
    }
    debug_assert_eq!(f.len(), STATE_FEATURES);
    f
}

fn count(x: f64, scale: f64) -> u32 {
    let v = (x * scale).round();
    if v.is_finite() && v > 0.0 {
        v.min(u32::MAX as f64) as u32
    } else {
        0
    }
}

/// Inverse of [`encode_state`]: counts are rounded and clamped at zero,
/// health is clamped to `[0, 1]`.
pub fn decode_state(f: &[f64], perspective: PlayerId) -> Result<AbstractState> {
    if f.len() < STATE_FEATURES {
        return Err(Error::Shape { expected: STATE_FEATURES, got: f.len() });
    }
    let order = [perspective, perspective.other()];
    let mut s = AbstractState {
        wave: count(f[0], WAVE_SCALE),
        perspective,
        base_health: [[0.0; 2]; 2],
        currency: count(f[CURRENCY_INDEX], CURRENCY_SCALE),
        buildings: [[[0; 3]; 2]; 2],
        pylons: [0; 2],
        unit_grid: [[[0; GRID_CELLS]; 3]; 2],
    };
    for (k, p) in order.iter().enumerate() {
        for lane in 0..2 {
            let h = f[HEALTH_RANGE.start + 2 * k + lane];
            s.base_health[p.index()][lane] = if h.is_nan() { 0.0 } else { h.clamp(0.0, 1.0) };
            for t in 0..3 {
                let i = BUILDING_RANGE.start + k * 6 + lane * 3 + t;
                s.buildings[p.index()][lane][t] = count(f[i], BUILDING_SCALE);
            }
        }
        s.pylons[p.index()] = count(f[PYLON_RANGE.start + k], PYLON_SCALE);
        for t in 0..3 {
            for c in 0..GRID_CELLS {
                let i = GRID_RANGE.start + k * 3 * GRID_CELLS + t * GRID_CELLS + oriented_cell(c, perspective);
                s.unit_grid[p.index()][t][c] = count(f[i], GRID_SCALE);
            }
        }
    }
    Ok(s)
}

pub fn encode_action(a: &PlayerAction) -> [f64; ACTION_FEATURES] {
    let lane = match a.lane {
        Lane::Top => [1.0, 0.0],
        Lane::Bottom => [0.0, 1.0],
    };
    [
        lane[0],
        lane[1],
        a.buildings[0] as f64,
        a.buildings[1] as f64,
        a.buildings[2] as f64,
        a.pylons as f64,
    ]
}

/// A candidate action together with its estimated outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedAction {
    /// Position in the candidate list that was ranked.
    pub index: usize,
    pub action: PlayerAction,
    pub value: OutcomeVector,
}

/// Indices of the top `k` entries by value, descending; ties broken by the
/// canonical action order.
pub fn rank_indices(actions: &[PlayerAction], values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..actions.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(actions[a].cmp(&actions[b])));
    idx.truncate(k);
    idx
}

/// The action ranker and state evaluator: `Q(s, a)` with a six-way outcome head.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    net: Mlp,
}

impl QFunction {
    pub fn new(hidden: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            net: Mlp::init(MlpSpec::three_layer(Q_INPUTS, hidden, OUTCOMES), seed)?,
        })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.input_size() != Q_INPUTS || net.output_size() != OUTCOMES {
            return Err(Error::Shape { expected: Q_INPUTS, got: net.input_size() });
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn input(s: &AbstractState, a: &PlayerAction) -> Vec<f64> {
        let mut x = encode_state(s);
        x.extend(encode_action(a));
        x
    }

    pub fn q_value(&self, s: &AbstractState, a: &PlayerAction) -> OutcomeVector {
        self.q_values(s, std::slice::from_ref(a))[0]
    }

    /// `q_value` for many actions in the same state, sharing the state part
    /// of the first layer.
    pub fn q_values(&self, s: &AbstractState, actions: &[PlayerAction]) -> Vec<OutcomeVector> {
        let partial = self.net.first_layer_partial(&encode_state(s));
        actions
            .iter()
            .map(|a| {
                let out = self.net.forward_with_partial(&partial, &encode_action(a));
                OutcomeVector(out.try_into().expect("six outputs")).clamped()
            })
            .collect()
    }

    pub fn rank_actions(&self, s: &AbstractState, candidates: &[PlayerAction], k: usize) -> Vec<RankedAction> {
        let values = self.q_values(s, candidates);
        let scalar: Vec<f64> = values.iter().map(OutcomeVector::agent_value).collect();
        rank_indices(candidates, &scalar, k)
            .into_iter()
            .map(|i| RankedAction { index: i, action: candidates[i], value: values[i] })
            .collect()
    }

    /// Value of a state: the outcome vector of its best candidate action.
    pub fn evaluate_state(&self, s: &AbstractState, candidates: &[PlayerAction]) -> Result<OutcomeVector> {
        self.best_action(s, candidates).map(|r| r.value)
    }

    pub fn best_action(&self, s: &AbstractState, candidates: &[PlayerAction]) -> Result<RankedAction> {
        if candidates.is_empty() {
            return Err(Error::Empty("candidate actions"));
        }
        Ok(self.rank_actions(s, candidates, 1)[0])
    }
}

/// Deterministic next-state predictor `(s, a_f, a_e) -> (s', r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    net: Mlp,
}

impl TransitionModel {
    pub fn new(hidden: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            net: Mlp::init(MlpSpec::three_layer(TRANSITION_INPUTS, hidden, TRANSITION_OUTPUTS), seed)?,
        })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.input_size() != TRANSITION_INPUTS || net.output_size() != TRANSITION_OUTPUTS {
            return Err(Error::Shape { expected: TRANSITION_INPUTS, got: net.input_size() });
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn input(s: &AbstractState, a_f: &PlayerAction, a_e: &PlayerAction) -> Vec<f64> {
        let mut x = encode_state(s);
        x.extend(encode_action(a_f));
        x.extend(encode_action(a_e));
        x
    }

    /// Raw network output (state features then outcome head), unclamped.
    pub fn predict_raw(&self, s: &AbstractState, a_f: &PlayerAction, a_e: &PlayerAction) -> Vec<f64> {
        self.net.forward(&Self::input(s, a_f, a_e)).expect("input shape is fixed")
    }

    pub fn predict_transition(
        &self,
        s: &AbstractState,
        a_f: &PlayerAction,
        a_e: &PlayerAction,
    ) -> (AbstractState, OutcomeVector) {
        self.predict_many(s, a_f, std::slice::from_ref(a_e)).pop().unwrap()
    }

    /// Predictions for one friendly action against several enemy actions.
    pub fn predict_many(
        &self,
        s: &AbstractState,
        a_f: &PlayerAction,
        enemy: &[PlayerAction],
    ) -> Vec<(AbstractState, OutcomeVector)> {
        let mut prefix = encode_state(s);
        prefix.extend(encode_action(a_f));
        let partial = self.net.first_layer_partial(&prefix);
        enemy
            .iter()
            .map(|a_e| {
                let out = self.net.forward_with_partial(&partial, &encode_action(a_e));
                self.decode_output(s, &out)
            })
            .collect()
    }

    fn decode_output(&self, s: &AbstractState, out: &[f64]) -> (AbstractState, OutcomeVector) {
        let mut next = decode_state(out, s.perspective).expect("output has state features");
        next.wave = s.wave + 1;
        let reward: [f64; OUTCOMES] = out[STATE_FEATURES..].try_into().expect("six outputs");
        (next, OutcomeVector(reward).clamped())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GameConfig;
    use crate::game::{abstract_state, legal_actions_for, new_game, sample_legal_action};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn states(n: u64) -> Vec<AbstractState> {
        let cfg = GameConfig::default();
        let mut out = Vec::new();
        for seed in 0..n {
            let mut s = new_game(cfg.clone(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while !s.is_terminal() {
                out.push(abstract_state(&s, PlayerId::P1));
                out.push(abstract_state(&s, PlayerId::P2));
                let a1 = sample_legal_action(&cfg, s.players[0].currency, s.players[0].pylons, &mut rng);
                let a2 = sample_legal_action(&cfg, s.players[1].currency, s.players[1].pylons, &mut rng);
                s.step(&a1, &a2).unwrap();
            }
        }
        out
    }

    #[test]
    fn initial_state_features() {
        let s = abstract_state(&new_game(GameConfig::default(), 0).unwrap(), PlayerId::P1);
        let f = encode_state(&s);
        assert_eq!(f.len(), STATE_FEATURES);
        assert_eq!(f[0], 1.0 / 40.0);
        assert!(f[HEALTH_RANGE].iter().all(|&h| h == 1.0));
        assert_eq!(encode_action(&PlayerAction::NULL).len(), ACTION_FEATURES);
    }

    #[test]
    fn encoding_round_trips() {
        for s in states(15) {
            assert_eq!(decode_state(&encode_state(&s), s.perspective).unwrap(), s);
        }
    }

    #[test]
    fn perspectives_mirror_each_other() {
        // Both players looking at the same board see each other's side as their own.
        let mut s = abstract_state(&new_game(GameConfig::default(), 0).unwrap(), PlayerId::P1);
        s.unit_grid[0][0][0] = 3; // P1 marines at P1's top edge
        s.base_health[1][1] = 0.5;
        let mut mirror = s.flipped(s.currency);
        mirror.unit_grid = [s.unit_grid[1], s.unit_grid[0]];
        mirror.base_health = [s.base_health[1], s.base_health[0]];
        mirror.unit_grid[1][0][3] = 3;
        mirror.unit_grid[1][0][0] = 0;
        mirror.perspective = PlayerId::P2;
        assert_eq!(encode_state(&s), encode_state(&mirror));
    }

    #[test]
    fn outcome_vector_helpers() {
        let v = OutcomeVector([0.1, 0.2, 0.3, 0.0, 0.4, 0.0]);
        assert!((v.agent_value() - 0.6).abs() < 1e-15);
        assert_eq!(v.flipped().flipped(), v);
        assert!((v.flipped().agent_value() - 0.4).abs() < 1e-15);
        assert!((v.normalized().0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let c = OutcomeVector([-0.5, 1.7, f64::NAN, 0.2, 0.2, 0.2]).clamped();
        assert_eq!(c.0, [0.0, 1.0, 0.0, 0.2, 0.2, 0.2]);
        assert_eq!(OutcomeVector::one_hot(WinCondition::P2DestroysBottom, PlayerId::P2).0, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(OutcomeVector::one_hot(WinCondition::P2DestroysBottom, PlayerId::P1).0, [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn rank_small_example() {
        let acts = [
            PlayerAction::new(Lane::Top, [1, 0, 0], 0),
            PlayerAction::new(Lane::Top, [2, 0, 0], 0),
            PlayerAction::new(Lane::Top, [3, 0, 0], 0),
        ];
        assert_eq!(rank_indices(&acts, &[0.2, 0.9, 0.5], 2), vec![1, 2]);
        // Ties fall back to canonical order, whatever the input order.
        assert_eq!(rank_indices(&[acts[2], acts[0], acts[1]], &[0.5, 0.5, 0.5], 3), vec![1, 2, 0]);
    }

    #[test]
    fn q_function_determinism_and_bounds() {
        let q = QFunction::new(32, 1).unwrap();
        let cfg = GameConfig::default();
        for s in states(3) {
            let cands = legal_actions_for(&cfg, s.currency.min(400), s.pylons[s.perspective.index()]);
            let vals = q.q_values(&s, &cands);
            for (a, v) in cands.iter().zip(&vals) {
                assert_eq!(*v, q.q_value(&s, a));
                assert!(v.0.iter().all(|x| (0.0..=1.0).contains(x)));
            }
            let best = q.evaluate_state(&s, &cands).unwrap();
            let brute = vals.iter().map(OutcomeVector::agent_value).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(best.agent_value(), brute);
            let all = q.rank_actions(&s, &cands, cands.len() + 5);
            assert_eq!(all.len(), cands.len());
        }
        let s = &states(1)[0];
        assert!(q.evaluate_state(s, &[]).is_err());
        assert_eq!(q.evaluate_state(s, &[PlayerAction::NULL]).unwrap(), q.q_value(s, &PlayerAction::NULL));
    }

    #[test]
    fn transition_outputs_are_clamped_and_wave_advances() {
        let t = TransitionModel::new(16, 3).unwrap();
        for s in states(2) {
            let a = PlayerAction::new(Lane::Bottom, [1, 1, 0], 0);
            let (next, r) = t.predict_transition(&s, &a, &PlayerAction::NULL);
            assert_eq!(next.wave, s.wave + 1);
            assert_eq!(next.perspective, s.perspective);
            assert!(next.base_health.iter().flatten().all(|h| (0.0..=1.0).contains(h)));
            assert!(r.0.iter().all(|x| (0.0..=1.0).contains(x)));
            assert_eq!((next.clone(), r), t.predict_transition(&s, &a, &PlayerAction::NULL));
        }
    }
}
