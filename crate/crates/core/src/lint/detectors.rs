use rayon::prelude::*;

use super::{DetectorId, FlawReport, LintConfig};
use crate::game::{AbstractState, Lane, PlayerAction, PlayerId, UnitType};
use crate::models::encode_state;
use crate::search::{SearchTree, TreeNode};

fn report(detector: DetectorId, nodes: Vec<usize>, severity: f64, severe: bool, message: String) -> FlawReport {
    FlawReport { detector, game_id: String::new(), decision: 0, nodes, severity, severe, message }
}

fn edges(tree: &SearchTree) -> impl Iterator<Item = (&TreeNode, &TreeNode)> {
    tree.nodes.iter().filter_map(|n| n.parent.map(|p| (&tree.nodes[p], n)))
}

fn base_name(p: PlayerId, lane: Lane) -> String {
    format!("{p:?} {lane:?}")
}

/// Any base health rising from parent to child by more than the tolerance.
/// One report per edge, severity = the largest absolute rise.
pub fn detect_health_increase(tree: &SearchTree, cfg: &LintConfig) -> Vec<FlawReport> {
    let mut out = Vec::new();
    for (parent, child) in edges(tree) {
        let mut worst: Option<(f64, PlayerId, Lane)> = None;
        for p in PlayerId::BOTH {
            for lane in Lane::BOTH {
                let rise = child.state.health(p, lane) - parent.state.health(p, lane);
                if rise > cfg.health_tolerance && worst.is_none_or(|(w, _, _)| rise > w) {
                    worst = Some((rise, p, lane));
                }
            }
        }
        if let Some((rise, p, lane)) = worst {
            out.push(report(
                DetectorId::HealthIncrease,
                vec![parent.id, child.id],
                rise,
                rise > cfg.severe_rise,
                format!("{} base health rises by {rise:.3}", base_name(p, lane)),
            ));
        }
    }
    out
}

/// Lanes an action pair leaves untouched apart from pylons: both actions
/// build only in lane `L` or build nothing.
pub fn pair_lanes(friendly: &PlayerAction, enemy: &PlayerAction) -> Vec<Lane> {
    Lane::BOTH
        .into_iter()
        .filter(|&l| [friendly, enemy].iter().all(|a| a.built_lane().is_none_or(|b| b == l)))
        .collect()
}

fn lane_portion_differs(a: &AbstractState, b: &AbstractState, lane: Lane, tolerance: f64) -> bool {
    PlayerId::BOTH.into_iter().any(|p| {
        (a.health(p, lane) - b.health(p, lane)).abs() > tolerance
            || a.buildings[p.index()][lane.index()] != b.buildings[p.index()][lane.index()]
            || UnitType::ALL.into_iter().any(|t| a.lane_cells(p, t, lane) != b.lane_cells(p, t, lane))
    })
}

/// Siblings whose action pairs purchase only in lane `L` must agree on the
/// other lane. One report per differing pair.
pub fn detect_lane_independence(tree: &SearchTree, cfg: &LintConfig) -> Vec<FlawReport> {
    let mut out = Vec::new();
    for node in &tree.nodes {
        for lane in Lane::BOTH {
            let group: Vec<&TreeNode> = node
                .children
                .iter()
                .map(|&c| &tree.nodes[c])
                .filter(|c| {
                    let e = c.edge.expect("child edge");
                    pair_lanes(&e.friendly, &e.enemy).contains(&lane)
                })
                .collect();
            let untouched = lane.other();
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    if lane_portion_differs(&a.state, &b.state, untouched, cfg.health_tolerance) {
                        out.push(report(
                            DetectorId::LaneIndependence,
                            vec![node.id, a.id, b.id],
                            1.0,
                            false,
                            format!("purchases only in {lane:?}, yet the {untouched:?} lane differs"),
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Units of a type in a lane whose owner has no building of that type there.
/// One report per node, owner, lane and type.
pub fn detect_infeasible_units(tree: &SearchTree, _cfg: &LintConfig) -> Vec<FlawReport> {
    let mut out = Vec::new();
    for node in &tree.nodes {
        let s = &node.state;
        for p in PlayerId::BOTH {
            for lane in Lane::BOTH {
                for t in UnitType::ALL {
                    let units: u32 = s.lane_cells(p, t, lane).iter().sum();
                    if units > 0 && s.buildings[p.index()][lane.index()][t.index()] == 0 {
                        out.push(report(
                            DetectorId::InfeasibleUnits,
                            vec![node.id],
                            units as f64,
                            false,
                            format!("{} has {units} {t:?} units without a {t:?} building", base_name(p, lane)),
                        ));
                    }
                }
            }
        }
    }
    out
}

/// Nodes past a fallen base that (a) are expanded further or (b) do not
/// value the fallen side as the loser. The root is the real position and is
/// judged by the rules, so it is skipped.
pub fn detect_missing_terminal(tree: &SearchTree, cfg: &LintConfig) -> Vec<FlawReport> {
    let mut out = Vec::new();
    for node in tree.nodes.iter().skip(1) {
        let s = &node.state;
        let fallen: Vec<PlayerId> = PlayerId::BOTH
            .into_iter()
            .filter(|&p| Lane::BOTH.iter().any(|&l| s.health(p, l) <= cfg.terminal_health))
            .collect();
        if fallen.is_empty() {
            continue;
        }
        if !node.children.is_empty() {
            out.push(report(
                DetectorId::MissingTerminal,
                vec![node.id],
                1.0,
                true,
                "(a) a base has fallen but the node is expanded".into(),
            ));
        }
        if let ([loser], Some(v)) = (fallen.as_slice(), node.value) {
            let (loser_wins, loser_loses) = if *loser == s.perspective {
                (v.agent_value(), v.opponent_value())
            } else {
                (v.opponent_value(), v.agent_value())
            };
            if loser_loses <= loser_wins {
                out.push(report(
                    DetectorId::MissingTerminal,
                    vec![node.id],
                    loser_wins - loser_loses,
                    false,
                    format!("(b) {loser:?} has a fallen base yet loses with {loser_loses:.3} against {loser_wins:.3}"),
                ));
            }
        }
    }
    out
}

/// Near-identical leaves whose evaluations disagree. Leaves are compared
/// when they hang off the same state node, that is, they share a
/// grandparent once the action pair on each edge is counted as a node.
/// Advisory.
pub fn detect_eval_inconsistency(tree: &SearchTree, cfg: &LintConfig) -> Vec<FlawReport> {
    let features: Vec<Vec<f64>> = tree.nodes.par_iter().map(|n| encode_state(&n.state)).collect();
    let mut out = Vec::new();
    for g in &tree.nodes {
        let leaves: Vec<&TreeNode> = g
            .children
            .iter()
            .map(|&c| &tree.nodes[c])
            .filter(|n| n.is_leaf() && n.value.is_some())
            .collect();
        let found: Vec<FlawReport> = (0..leaves.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let a = leaves[i];
                let features = &features;
                leaves[i + 1..].iter().filter_map(move |b| {
                    let (fa, fb) = (&features[a.id], &features[b.id]);
                    let dist = fa.iter().zip(fb).map(|(x, y)| (x - y).abs()).sum::<f64>() / fa.len() as f64;
                    let within = if cfg.tau_state == 0.0 { dist == 0.0 } else { dist < cfg.tau_state };
                    if !within {
                        return None;
                    }
                    let (va, vb) = (a.value.unwrap(), b.value.unwrap());
                    let l1 = va.l1_distance(&vb);
                    (va.argmax() != vb.argmax() || l1 > cfg.tau_outcome).then(|| {
                        report(
                            DetectorId::EvalInconsistency,
                            vec![g.id, a.id, b.id],
                            l1,
                            false,
                            format!(
                                "state distance {dist:.4} but outcomes differ by {l1:.3} (argmax {} vs {})",
                                va.argmax(),
                                vb.argmax()
                            ),
                        )
                    })
                })
            })
            .collect();
        out.extend(found);
    }
    out
}

/// Any building or pylon count falling from parent to child. One report per
/// edge.
pub fn detect_building_decrease(tree: &SearchTree, _cfg: &LintConfig) -> Vec<FlawReport> {
    let mut out = Vec::new();
    for (parent, child) in edges(tree) {
        let (a, b) = (&parent.state, &child.state);
        let fell = PlayerId::BOTH.into_iter().find_map(|p| {
            let i = p.index();
            if b.pylons[i] < a.pylons[i] {
                return Some(format!("{p:?} pylons {} -> {}", a.pylons[i], b.pylons[i]));
            }
            Lane::BOTH.into_iter().find_map(|l| {
                UnitType::ALL.into_iter().find_map(|t| {
                    let (x, y) = (a.buildings[i][l.index()][t.index()], b.buildings[i][l.index()][t.index()]);
                    (y < x).then(|| format!("{} {t:?} buildings {x} -> {y}", base_name(p, l)))
                })
            })
        });
        if let Some(message) = fell {
            out.push(report(DetectorId::BuildingDecrease, vec![parent.id, child.id], 1.0, false, message));
        }
    }
    out
}
