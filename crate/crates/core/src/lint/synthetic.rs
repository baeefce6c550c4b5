//! Reference trees built over the simulator, and controlled corruption of
//! them with a manifest of exactly which reports each corruption must cause.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pair_lanes, DetectorId, LintConfig};
use crate::config::GameConfig;
use crate::error::Result;
use crate::game::{new_game, sample_legal_action, Lane, PlayerId, UnitType, WinCondition, CELLS_PER_LANE};
use crate::models::{OutcomeVector, QFunction};
use crate::search::{build_tree, minimax_backup, CappedLegal, SearchParams, SearchTree, SimulatorDynamics};

/// Search parameters for reference trees: small enough to build hundreds.
pub fn reference_params() -> SearchParams {
    SearchParams { depth: 2, friendly: vec![5, 3], enemy: vec![4, 2], guard_terminals: true, candidate_limit: 48 }
}

/// A simulator-edge tree rooted after a few random waves of game `seed`.
pub fn reference_tree(config: &GameConfig, q: &QFunction, params: &SearchParams, seed: u64) -> Result<SearchTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempt = 0u64;
    loop {
        let mut game = new_game(config.clone(), seed.wrapping_mul(7919).wrapping_add(attempt))?;
        let warmup = rng.gen_range(1..7);
        for _ in 0..warmup {
            if game.is_terminal() {
                break;
            }
            let a = PlayerId::BOTH.map(|p| {
                let s = game.player(p);
                sample_legal_action(config, s.currency, s.pylons, &mut rng)
            });
            game.step(&a[0], &a[1])?;
        }
        if game.is_terminal() {
            attempt += 1;
            continue;
        }
        let perspective = if seed.is_multiple_of(2) { PlayerId::P1 } else { PlayerId::P2 };
        let actions = CappedLegal { config: config.clone(), limit: params.candidate_limit };
        return build_tree(&game, &SimulatorDynamics { perspective }, q, &actions, params);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub detector: DetectorId,
    /// The corrupted node; every expected report names it.
    pub node: usize,
    pub expected_reports: usize,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub injections: Vec<Injection>,
}

impl Manifest {
    pub fn expected_counts(&self) -> BTreeMap<DetectorId, usize> {
        let mut out: BTreeMap<DetectorId, usize> = DetectorId::RULE_BASED.iter().map(|&d| (d, 0)).collect();
        for i in &self.injections {
            *out.entry(i.detector).or_default() += i.expected_reports;
        }
        out
    }
}

fn fallen(tree: &SearchTree, id: usize, cfg: &LintConfig) -> bool {
    tree.nodes[id].state.min_health() <= cfg.terminal_health
}

fn lanes_of(tree: &SearchTree, id: usize) -> Vec<Lane> {
    let e = tree.nodes[id].edge.expect("non-root");
    pair_lanes(&e.friendly, &e.enemy)
}

/// The lane a corruption of node `id` may touch without disturbing any
/// sibling comparison: its own purchase lane, or any lane if it is in no
/// single-lane group. `None` for nodes in both groups.
fn free_lane<R: Rng>(tree: &SearchTree, id: usize, rng: &mut R) -> Option<Lane> {
    match lanes_of(tree, id).as_slice() {
        [] => Some(if rng.gen() { Lane::Top } else { Lane::Bottom }),
        [l] => Some(*l),
        _ => None,
    }
}

fn subtree(tree: &SearchTree, id: usize) -> Vec<usize> {
    let mut out = vec![id];
    let mut i = 0;
    while i < out.len() {
        out.extend(tree.nodes[out[i]].children.iter().copied());
        i += 1;
    }
    out
}

/// Corrupts `tree` once per rule-based class where a clean spot exists and
/// returns what the detectors must find. Corruptions touch disjoint nodes
/// and lanes no other check reads, so expected counts simply add up.
pub fn inject_flaws(tree: &mut SearchTree, cfg: &LintConfig, seed: u64) -> Manifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = Manifest::default();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    let perspective = tree.perspective;

    // Fallen base on an expanded node, carried through its subtree so that
    // only the expansion itself is wrong.
    let mut interior: Vec<usize> = tree
        .nodes
        .iter()
        .filter(|n| n.depth >= 1 && !n.children.is_empty())
        .map(|n| n.id)
        .filter(|&id| subtree(tree, id).iter().all(|&d| !fallen(tree, d, cfg)) && lanes_of(tree, id).len() < 2)
        .collect();
    interior.shuffle(&mut rng);
    if let Some(&n) = interior.first() {
        let lane = free_lane(tree, n, &mut rng).expect("filtered");
        let loser = if rng.gen() { PlayerId::P1 } else { PlayerId::P2 };
        let loss = OutcomeVector::one_hot(WinCondition::destroyed(loser.other(), lane), perspective);
        let nodes = subtree(tree, n);
        let mut expanded = 0;
        for &d in &nodes {
            let node = &mut tree.nodes[d];
            node.state.base_health[loser.index()][lane.index()] = 0.0;
            if node.children.is_empty() {
                node.value = Some(loss);
            } else {
                expanded += 1;
            }
            used.insert(d);
        }
        minimax_backup(tree).expect("leaves stay valued");
        manifest.injections.push(Injection {
            detector: DetectorId::MissingTerminal,
            node: n,
            expected_reports: expanded,
            description: format!("{loser:?} {lane:?} base set to 0 below an expanded node"),
        });
    }

    let mut leaves: Vec<usize> = tree
        .nodes
        .iter()
        .filter(|n| n.depth >= 1 && n.children.is_empty() && !used.contains(&n.id))
        .map(|n| n.id)
        .filter(|&id| !fallen(tree, id, cfg) && !fallen(tree, tree.nodes[id].parent.unwrap(), cfg))
        .filter(|&id| lanes_of(tree, id).len() < 2)
        .collect();
    leaves.shuffle(&mut rng);
    let mut leaves = leaves.into_iter();

    // Health rise.
    if let Some(id) = leaves.next() {
        let lane = free_lane(tree, id, &mut rng).expect("filtered");
        let p = if rng.gen() { PlayerId::P1 } else { PlayerId::P2 };
        let parent = tree.nodes[id].parent.unwrap();
        let rise = rng.gen_range(0.02..0.3);
        tree.nodes[id].state.base_health[p.index()][lane.index()] =
            tree.nodes[parent].state.health(p, lane) + rise;
        used.insert(id);
        manifest.injections.push(Injection {
            detector: DetectorId::HealthIncrease,
            node: id,
            expected_reports: 1,
            description: format!("{p:?} {lane:?} health raised {rise:.3} above the parent"),
        });
    }

    // Building or pylon loss.
    for id in leaves.by_ref() {
        let parent = tree.nodes[id].parent.unwrap();
        let p = if rng.gen() { PlayerId::P1 } else { PlayerId::P2 };
        let before = tree.nodes[parent].state.clone();
        if before.pylons[p.index()] >= 1 {
            tree.nodes[id].state.pylons[p.index()] = before.pylons[p.index()] - 1;
        } else {
            let lane = free_lane(tree, id, &mut rng).expect("filtered");
            let s = &tree.nodes[id].state;
            let pick = UnitType::ALL.into_iter().find(|&t| {
                let b = before.buildings[p.index()][lane.index()][t.index()];
                b >= 2 || (b == 1 && s.lane_cells(p, t, lane).iter().all(|&c| c == 0))
            });
            let Some(t) = pick else { continue };
            tree.nodes[id].state.buildings[p.index()][lane.index()][t.index()] =
                before.buildings[p.index()][lane.index()][t.index()] - 1;
        }
        used.insert(id);
        manifest.injections.push(Injection {
            detector: DetectorId::BuildingDecrease,
            node: id,
            expected_reports: 1,
            description: format!("{p:?} lost a building or pylon"),
        });
        break;
    }

    // Units without a building.
    for id in leaves.by_ref() {
        let lane = free_lane(tree, id, &mut rng).expect("filtered");
        let s = &tree.nodes[id].state;
        let options: Vec<(PlayerId, UnitType)> = PlayerId::BOTH
            .into_iter()
            .flat_map(|p| UnitType::ALL.map(|t| (p, t)))
            .filter(|&(p, t)| s.buildings[p.index()][lane.index()][t.index()] == 0)
            .collect();
        let Some(&(p, t)) = options.choose(&mut rng) else { continue };
        let cell = lane.index() * CELLS_PER_LANE + rng.gen_range(0..CELLS_PER_LANE);
        let n = rng.gen_range(1..4);
        tree.nodes[id].state.unit_grid[p.index()][t.index()][cell] += n;
        used.insert(id);
        manifest.injections.push(Injection {
            detector: DetectorId::InfeasibleUnits,
            node: id,
            expected_reports: 1,
            description: format!("{n} {p:?} {t:?} units in the {lane:?} lane without a building"),
        });
        break;
    }

    // One sibling of a single-lane group disagrees about the other lane.
    let mut groups: Vec<(Lane, Vec<usize>)> = Vec::new();
    for node in &tree.nodes {
        for lane in Lane::BOTH {
            let members: Vec<usize> =
                node.children.iter().copied().filter(|&c| lanes_of(tree, c).contains(&lane)).collect();
            if members.len() >= 2 {
                groups.push((lane, members));
            }
        }
    }
    groups.shuffle(&mut rng);
    'groups: for (lane, members) in groups {
        let other = lane.other();
        for &x in &members {
            if used.contains(&x) {
                continue;
            }
            let s = &tree.nodes[x].state;
            let feasible: Vec<(PlayerId, UnitType)> = PlayerId::BOTH
                .into_iter()
                .flat_map(|p| UnitType::ALL.map(|t| (p, t)))
                .filter(|&(p, t)| s.buildings[p.index()][other.index()][t.index()] >= 1)
                .collect();
            let Some(&(p, t)) = feasible.choose(&mut rng) else { continue };
            let cell = other.index() * CELLS_PER_LANE + rng.gen_range(0..CELLS_PER_LANE);
            tree.nodes[x].state.unit_grid[p.index()][t.index()][cell] += 1;
            used.insert(x);
            manifest.injections.push(Injection {
                detector: DetectorId::LaneIndependence,
                node: x,
                expected_reports: members.len() - 1,
                description: format!("extra {p:?} {t:?} unit in the {other:?} lane of a {lane:?}-only sibling"),
            });
            break 'groups;
        }
    }
    manifest
}
