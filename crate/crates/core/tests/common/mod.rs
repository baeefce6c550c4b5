//! Independent oracles shared by the integration tests and the acceptance
//! suite. None of them call the code paths they check.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tugwar::config::PerUnit;
use tugwar::game::{
    action_cost, legal_actions, new_game, sample_legal_action, Lane, MicroState, PlayerAction, PlayerId, UnitType,
    WinCondition,
};
use tugwar::models::{OutcomeVector, QFunction};
use tugwar::neural::{Mlp, MlpSpec, OutputActivation};
use tugwar::search::TERMINAL_HEALTH;
use tugwar::GameConfig;

// ---------------------------------------------------------------- rules

/// Plays one uniformly random game and returns every rule violation seen.
pub fn random_game_violations(config: &GameConfig, seed: u64) -> Vec<String> {
    let mut out = Vec::new();
    let mut game = new_game(config.clone(), seed).expect("valid config");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let mut steps = 0u32;
    while !game.is_terminal() {
        let actions = PlayerId::BOTH.map(|p| {
            let s = game.player(p);
            sample_legal_action(config, s.currency, s.pylons, &mut rng)
        });
        let before = game.clone();
        game.step(&actions[0], &actions[1]).expect("legal actions");
        steps += 1;
        for (p, a) in PlayerId::BOTH.into_iter().zip(&actions) {
            let (b, n) = (before.player(p), game.player(p));
            for lane in 0..2 {
                if n.base_health[lane] > b.base_health[lane] {
                    out.push(format!("seed {seed} wave {}: {p:?} base health rose", before.wave));
                }
                if !(0.0..=config.base_health_max).contains(&n.base_health[lane]) {
                    out.push(format!("seed {seed}: {p:?} base health {} out of range", n.base_health[lane]));
                }
                for t in 0..3 {
                    let expected = b.buildings[lane][t] + if a.lane.index() == lane { a.buildings[t] } else { 0 };
                    if n.buildings[lane][t] != expected {
                        out.push(format!("seed {seed}: {p:?} buildings {} -> {}", b.buildings[lane][t], n.buildings[lane][t]));
                    }
                }
            }
            let cost = a.buildings[0] * config.building_costs.marine
                + a.buildings[1] * config.building_costs.baneling
                + a.buildings[2] * config.building_costs.immortal
                + a.pylons * config.pylon_cost;
            if cost > b.currency {
                out.push(format!("seed {seed}: {p:?} overspent"));
                continue;
            }
            let stipend = config.base_stipend + n.pylons * config.pylon_stipend_bonus;
            if n.currency != b.currency - cost + stipend {
                out.push(format!("seed {seed}: {p:?} currency {} -> {} after spending {cost}", b.currency, n.currency));
            }
            if n.pylons != b.pylons + a.pylons || n.pylons > 3 {
                out.push(format!("seed {seed}: {p:?} pylons {}", n.pylons));
            }
        }
        for lane in &game.lanes {
            if lane.iter().any(|u| !(0.0..=config.lane_length).contains(&u.pos) || u.hp <= 0.0) {
                out.push(format!("seed {seed}: unit out of bounds or dead"));
            }
        }
        if steps > 40 {
            out.push(format!("seed {seed}: game still running after {steps} waves"));
            break;
        }
    }
    if game.wave > 41 {
        out.push(format!("seed {seed}: ended at wave {}", game.wave));
    }
    out
}

// ---------------------------------------------------------------- search

/// A config where no reachable state within a few waves has more than a
/// handful of legal actions: one purchase at most, and no pylons.
pub fn shrunk_config() -> GameConfig {
    GameConfig {
        start_currency: 150,
        base_stipend: 5,
        pylon_stipend_bonus: 1,
        building_costs: PerUnit { marine: 100, baneling: 150, immortal: 250 },
        pylon_cost: 300,
        ..GameConfig::default()
    }
}

/// A seeded non-terminal root after a few random waves.
pub fn random_root(config: &GameConfig, seed: u64) -> MicroState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut game = new_game(config.clone(), rng.gen()).unwrap();
        for _ in 0..rng.gen_range(0..4) {
            let a = PlayerId::BOTH.map(|p| {
                let s = game.player(p);
                sample_legal_action(config, s.currency, s.pylons, &mut rng)
            });
            if game.step(&a[0], &a[1]).unwrap().is_some() {
                break;
            }
        }
        if !game.is_terminal() {
            return game;
        }
    }
}

fn one_hot(condition: WinCondition, perspective: PlayerId) -> OutcomeVector {
    OutcomeVector::one_hot(condition, perspective)
}

/// Normalized health of the weakest base at or below the terminal
/// threshold, scanning P1 before P2 and top before bottom.
fn fallen(state: &MicroState) -> Option<(PlayerId, Lane)> {
    let mut best: Option<(f64, PlayerId, Lane)> = None;
    for p in PlayerId::BOTH {
        for lane in Lane::BOTH {
            let h = state.player(p).base_health[lane.index()] / state.config.base_health_max;
            if h <= TERMINAL_HEALTH && best.is_none_or(|(b, _, _)| h < b) {
                best = Some((h, p, lane));
            }
        }
    }
    best.map(|(_, p, l)| (p, l))
}

pub struct OracleResult {
    pub value: OutcomeVector,
    /// Every root action whose minimax value equals the best.
    pub best_actions: Vec<PlayerAction>,
    pub max_legal: usize,
}

/// Plain recursive minimax over the simulator with every legal action on
/// both sides, maximizing the searcher's win probability against the
/// opponent's minimizing reply. Leaves take the value of their best action
/// under `q`.
pub fn brute_force(root: &MicroState, me: PlayerId, q: &QFunction, depth: usize) -> OracleResult {
    let mut max_legal = 0;
    let (value, best) = node_value(root, me, q, 0, depth, &mut max_legal);
    OracleResult { value, best_actions: best, max_legal }
}

fn node_value(
    s: &MicroState,
    me: PlayerId,
    q: &QFunction,
    depth: usize,
    max_depth: usize,
    max_legal: &mut usize,
) -> (OutcomeVector, Vec<PlayerAction>) {
    if let Some(o) = s.outcome() {
        return (one_hot(o.condition, me), vec![]);
    }
    if depth > 0 {
        if let Some((loser, lane)) = fallen(s) {
            return (one_hot(WinCondition::destroyed(loser.other(), lane), me), vec![]);
        }
    }
    let mine = legal_actions(s, me).unwrap();
    let theirs = legal_actions(s, me.other()).unwrap();
    *max_legal = (*max_legal).max(mine.len()).max(theirs.len());
    let view = tugwar::game::abstract_state(s, me);
    if depth == max_depth {
        let mut best: Option<OutcomeVector> = None;
        for a in &mine {
            let v = q.q_value(&view, a);
            if best.is_none_or(|b| v.agent_value() > b.agent_value()) {
                best = Some(v);
            }
        }
        return (best.unwrap(), vec![]);
    }
    let mut results: Vec<(PlayerAction, OutcomeVector)> = Vec::new();
    for a in &mine {
        let mut worst: Option<OutcomeVector> = None;
        for b in &theirs {
            let (a1, a2) = if me == PlayerId::P1 { (a, b) } else { (b, a) };
            let (next, _) = s.resolve_wave(a1, a2).unwrap();
            let (v, _) = node_value(&next, me, q, depth + 1, max_depth, max_legal);
            if worst.is_none_or(|w| v.agent_value() < w.agent_value()) {
                worst = Some(v);
            }
        }
        results.push((*a, worst.unwrap()));
    }
    let top = results.iter().map(|r| r.1.agent_value()).fold(f64::NEG_INFINITY, f64::max);
    let value = results.iter().find(|r| r.1.agent_value() == top).unwrap().1;
    (value, results.iter().filter(|r| r.1.agent_value() == top).map(|r| r.0).collect())
}

/// Cost as the rules define it, for cross-checks.
pub fn cost(config: &GameConfig, a: &PlayerAction) -> u32 {
    action_cost(a, config)
}

pub fn unit_types() -> [UnitType; 3] {
    UnitType::ALL
}

// ---------------------------------------------------------------- neural

/// A random network no larger than `[8, 8, 4]` in every dimension, with
/// random input, hidden and output widths and either output activation.
pub fn random_small_net(seed: u64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = vec![rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=4)];
    let output = if rng.gen() { OutputActivation::Softmax } else { OutputActivation::Identity };
    let mut net = Mlp::init(MlpSpec::new(sizes, output), seed).unwrap();
    // Non-zero biases so every path is exercised.
    for layer in net.layers_mut() {
        for b in &mut layer.biases {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    net
}

fn param(net: &mut Mlp, layer: usize, which: usize, i: usize) -> &mut f64 {
    let l = &mut net.layers_mut()[layer];
    if which == 0 {
        &mut l.weights[i]
    } else {
        &mut l.biases[i]
    }
}

/// Largest relative error between analytic and central-difference
/// gradients of the batch loss. Relative error is `|a - n| / max(|a|, |n|)`,
/// with absolute error used where both are below `floor`.
pub fn gradient_check(net: &Mlp, seed: u64, eps: f64, floor: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = rng.gen_range(1..6);
    let (n_in, n_out) = (net.input_size(), net.output_size());
    let xs: Vec<Vec<f64>> = (0..batch).map(|_| (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<Vec<f64>> = (0..batch).map(|_| (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let (_, grads) = net.loss_and_gradient(&xs, &ys).unwrap();
    let loss = |n: &Mlp| n.loss_and_gradient(&xs, &ys).unwrap().0;

    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for k in 0..net.layers().len() {
        for which in 0..2 {
            let len = if which == 0 { net.layers()[k].weights.len() } else { net.layers()[k].biases.len() };
            for i in 0..len {
                let original = *param(&mut probe, k, which, i);
                *param(&mut probe, k, which, i) = original + eps;
                let up = loss(&probe);
                *param(&mut probe, k, which, i) = original - eps;
                let down = loss(&probe);
                *param(&mut probe, k, which, i) = original;
                let numeric = (up - down) / (2.0 * eps);
                let g = &grads.layers[k];
                let analytic = if which == 0 { g.weights[i] } else { g.biases[i] };
                let scale = analytic.abs().max(numeric.abs());
                let err = if scale < floor { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
                worst = worst.max(err);
            }
        }
    }
    worst
}
