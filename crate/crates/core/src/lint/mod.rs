//! Scripted checks over explanation trees, decision-point interest scores,
//! and library-wide scans.
//!
//! Five detectors test laws of the game that any correct transition must
//! keep: base health never rises, buildings and pylons never disappear,
//! purchases in one lane leave the other lane alone, units need a building
//! of their type in their lane, and a fallen base ends the game. On trees
//! whose edges come from the simulator they never fire. The sixth,
//! evaluation inconsistency, is a heuristic and only advisory.

mod detectors;
pub mod synthetic;

pub use detectors::{
    detect_building_decrease, detect_eval_inconsistency, detect_health_increase, detect_infeasible_units,
    detect_lane_independence, detect_missing_terminal, pair_lanes,
};

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::Replay;
use crate::search::{SearchTree, TERMINAL_HEALTH};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorId {
    HealthIncrease,
    LaneIndependence,
    InfeasibleUnits,
    MissingTerminal,
    EvalInconsistency,
    BuildingDecrease,
}

impl DetectorId {
    pub const ALL: [DetectorId; 6] = [
        DetectorId::HealthIncrease,
        DetectorId::LaneIndependence,
        DetectorId::InfeasibleUnits,
        DetectorId::MissingTerminal,
        DetectorId::EvalInconsistency,
        DetectorId::BuildingDecrease,
    ];

    /// Detectors that never fire on simulator-generated trees.
    pub const RULE_BASED: [DetectorId; 5] = [
        DetectorId::HealthIncrease,
        DetectorId::LaneIndependence,
        DetectorId::InfeasibleUnits,
        DetectorId::MissingTerminal,
        DetectorId::BuildingDecrease,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorId::HealthIncrease => "health_increase",
            DetectorId::LaneIndependence => "lane_independence",
            DetectorId::InfeasibleUnits => "infeasible_units",
            DetectorId::MissingTerminal => "missing_terminal",
            DetectorId::EvalInconsistency => "eval_inconsistency",
            DetectorId::BuildingDecrease => "building_decrease",
        }
    }

    /// The first word of [`DetectorId::name`], accepted on command lines.
    pub fn short_name(self) -> &'static str {
        self.name().split('_').next().expect("non-empty name")
    }

    pub fn advisory(self) -> bool {
        self == DetectorId::EvalInconsistency
    }

    pub fn run(self, tree: &SearchTree, cfg: &LintConfig) -> Vec<FlawReport> {
        match self {
            DetectorId::HealthIncrease => detect_health_increase(tree, cfg),
            DetectorId::LaneIndependence => detect_lane_independence(tree, cfg),
            DetectorId::InfeasibleUnits => detect_infeasible_units(tree, cfg),
            DetectorId::MissingTerminal => detect_missing_terminal(tree, cfg),
            DetectorId::EvalInconsistency => detect_eval_inconsistency(tree, cfg),
            DetectorId::BuildingDecrease => detect_building_decrease(tree, cfg),
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.name() == s || d.short_name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown detector {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LintConfig {
    /// Health rises at or below this are rounding, not flaws.
    pub health_tolerance: f64,
    /// Rises above this are severe.
    pub severe_rise: f64,
    pub terminal_health: f64,
    /// Mean absolute feature distance under which two leaves count as similar.
    pub tau_state: f64,
    /// Outcome-vector L1 distance above which similar leaves disagree.
    pub tau_outcome: f64,
}

impl LintConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.health_tolerance, self.severe_rise, self.terminal_health, self.tau_state, self.tau_outcome];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("lint thresholds must be finite and >= 0".into()))
        }
    }
}

impl Default for LintConfig {
    fn default() -> Self {
        Self { health_tolerance: 0.005, severe_rise: 0.10, terminal_health: TERMINAL_HEALTH, tau_state: 0.05, tau_outcome: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlawReport {
    pub detector: DetectorId,
    pub game_id: String,
    pub decision: usize,
    /// Ids in the decision's tree: the edge's parent and child, the sibling
    /// pair with their parent, or the single offending node.
    pub nodes: Vec<usize>,
    pub severity: f64,
    pub severe: bool,
    pub message: String,
}

/// Runs `detectors` over one tree, in detector order.
pub fn run_detectors(tree: &SearchTree, detectors: &[DetectorId], cfg: &LintConfig) -> Vec<FlawReport> {
    detectors.iter().flat_map(|d| d.run(tree, cfg)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterestScore {
    pub decision: usize,
    /// Fall in the best root value since the previous decision.
    pub value_drop: Option<f64>,
    /// Spread of the root table.
    pub fluctuation: f64,
    /// Best root value minus the mean.
    pub criticality: f64,
}

/// Interest scores from per-decision root-table win probabilities.
pub fn interest_from_tables(tables: &[Vec<f64>]) -> Vec<InterestScore> {
    let best: Vec<f64> = tables.iter().map(|t| t.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    tables
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.is_empty() {
                return InterestScore { decision: i, value_drop: None, fluctuation: 0.0, criticality: 0.0 };
            }
            let min = t.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            InterestScore {
                decision: i,
                value_drop: (i > 0 && best[i - 1].is_finite()).then(|| best[i - 1] - best[i]),
                fluctuation: best[i] - min,
                criticality: best[i] - mean,
            }
        })
        .collect()
}

pub fn interest_scores(replay: &Replay) -> Vec<InterestScore> {
    let tables: Vec<Vec<f64>> = replay
        .decisions
        .iter()
        .map(|d| d.root_table.iter().map(|r| r.agent_value).collect())
        .collect();
    interest_from_tables(&tables)
}

/// Decisions ranked by the largest of their three scores, most interesting
/// first; ties by decision index.
pub fn rank_decisions(scores: &[InterestScore]) -> Vec<InterestScore> {
    let key = |s: &InterestScore| s.value_drop.unwrap_or(f64::NEG_INFINITY).max(s.fluctuation).max(s.criticality);
    let mut out = scores.to_vec();
    out.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.decision.cmp(&b.decision)));
    out
}

/// Upper bin edges for severity histograms; the last bin is open.
pub const SEVERITY_BINS: [f64; 6] = [0.01, 0.02, 0.05, 0.10, 0.25, 0.50];

fn histogram(severities: impl Iterator<Item = f64>) -> Vec<usize> {
    let mut bins = vec![0; SEVERITY_BINS.len() + 1];
    for s in severities {
        bins[SEVERITY_BINS.iter().position(|&e| s <= e).unwrap_or(SEVERITY_BINS.len())] += 1;
    }
    bins
}

/// What the final tree of a lost game says about base health.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalDecisionRise {
    pub decision: usize,
    /// A health rise on the principal variation of the last decision.
    pub rise_on_pv: bool,
    /// A health rise anywhere in that tree.
    pub rise_anywhere: bool,
    pub max_rise: f64,
    pub severe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameLint {
    pub game_id: String,
    pub lost: bool,
    pub decisions: usize,
    pub counts: BTreeMap<DetectorId, usize>,
    /// Present for lost games when health increase is scanned.
    pub final_decision: Option<FinalDecisionRise>,
    pub reports: Vec<FlawReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRiseSummary {
    pub losing_games: usize,
    pub rise_on_pv: usize,
    pub rise_anywhere: usize,
    pub severe: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintReport {
    pub version: u32,
    pub config: LintConfig,
    pub detectors: Vec<DetectorId>,
    pub games: Vec<GameLint>,
    pub totals: BTreeMap<DetectorId, usize>,
    pub severe_totals: BTreeMap<DetectorId, usize>,
    /// Counts per [`SEVERITY_BINS`] bin.
    pub severity_histograms: BTreeMap<DetectorId, Vec<usize>>,
    pub final_decision: FinalRiseSummary,
}

impl LintReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: LintReport = serde_json::from_str(text)?;
        if report.version != REPORT_VERSION {
            return Err(Error::Version { found: report.version, expected: REPORT_VERSION });
        }
        Ok(report)
    }
}

/// Lints every decision of one replay.
pub fn lint_replay(replay: &Replay, detectors: &[DetectorId], cfg: &LintConfig) -> GameLint {
    let trees = replay.decisions.iter().map(|d| Ok::<_, Error>((d.index, &d.tree)));
    lint_game(&replay.game_id, replay.lost(), trees, detectors, cfg).expect("in-memory trees")
}

/// Lints a game whose trees arrive one decision at a time, in order, so a
/// caller can stream them from storage. Only the latest tree is kept.
pub fn lint_game<T, E>(
    game_id: &str,
    lost: bool,
    trees: impl IntoIterator<Item = std::result::Result<(usize, T), E>>,
    detectors: &[DetectorId],
    cfg: &LintConfig,
) -> std::result::Result<GameLint, E>
where
    T: Borrow<SearchTree>,
{
    let mut reports = Vec::new();
    let mut decisions = 0;
    let mut last: Option<(usize, T)> = None;
    for item in trees {
        let (index, tree) = item?;
        for mut r in run_detectors(tree.borrow(), detectors, cfg) {
            r.game_id = game_id.to_string();
            r.decision = index;
            reports.push(r);
        }
        decisions += 1;
        last = Some((index, tree));
    }
    let mut counts: BTreeMap<DetectorId, usize> = detectors.iter().map(|&d| (d, 0)).collect();
    for r in &reports {
        *counts.entry(r.detector).or_default() += 1;
    }
    let final_decision = match (lost, last) {
        (true, Some((index, tree))) if detectors.contains(&DetectorId::HealthIncrease) => {
            let tree = tree.borrow();
            let rises: Vec<&FlawReport> = reports
                .iter()
                .filter(|r| r.detector == DetectorId::HealthIncrease && r.decision == index)
                .collect();
            let on_pv = rises.iter().any(|r| r.nodes.iter().all(|&n| tree.nodes[n].pv));
            let max_rise = rises.iter().map(|r| r.severity).fold(0.0, f64::max);
            Some(FinalDecisionRise {
                decision: index,
                rise_on_pv: on_pv,
                rise_anywhere: !rises.is_empty(),
                max_rise,
                severe: max_rise > cfg.severe_rise,
            })
        }
        _ => None,
    };
    Ok(GameLint { game_id: game_id.to_string(), lost, decisions, counts, final_decision, reports })
}

/// Lints a library of replays, one game per task.
pub fn scan_library(replays: &[Replay], detectors: &[DetectorId], cfg: &LintConfig) -> LintReport {
    let games: Vec<GameLint> = replays.par_iter().map(|r| lint_replay(r, detectors, cfg)).collect();
    summarize(games, detectors, cfg)
}

/// Library totals from per-game results, for callers that lint one game at
/// a time.
pub fn summarize(games: Vec<GameLint>, detectors: &[DetectorId], cfg: &LintConfig) -> LintReport {
    let mut totals: BTreeMap<DetectorId, usize> = detectors.iter().map(|&d| (d, 0)).collect();
    let mut severe_totals = totals.clone();
    let mut severity_histograms = BTreeMap::new();
    for &d in detectors {
        let all = || games.iter().flat_map(|g| &g.reports).filter(move |r| r.detector == d);
        totals.insert(d, all().count());
        severe_totals.insert(d, all().filter(|r| r.severe).count());
        severity_histograms.insert(d, histogram(all().map(|r| r.severity)));
    }
    let finals: Vec<&FinalDecisionRise> = games.iter().filter_map(|g| g.final_decision.as_ref()).collect();
    let final_decision = FinalRiseSummary {
        losing_games: games.iter().filter(|g| g.lost).count(),
        rise_on_pv: finals.iter().filter(|f| f.rise_on_pv).count(),
        rise_anywhere: finals.iter().filter(|f| f.rise_anywhere).count(),
        severe: finals.iter().filter(|f| f.severe).count(),
    };
    LintReport {
        version: REPORT_VERSION,
        config: cfg.clone(),
        detectors: detectors.to_vec(),
        games,
        totals,
        severe_totals,
        severity_histograms,
        final_decision,
    }
}
