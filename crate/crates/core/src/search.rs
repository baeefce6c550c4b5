//! Depth-limited minimax over ranked action pairs.
//!
//! At a state node of depth `d` the Q-function ranks the searching player's
//! candidate actions and keeps the top `friendly[d]`; it ranks the enemy's
//! candidates from the enemy's side of the board and keeps the top
//! `enemy[d]`. Every pair becomes an edge to the successor produced by the
//! dynamics. Depth-`D` nodes are valued by the Q-function. Values back up as
//! max over friendly actions of min over enemy replies, comparing agent
//! values, with ties going to the lower ranked index.
//!
//! The tree doubles as the explanation document: it serializes as-is, with
//! nodes in preorder so every parent precedes its children.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::strided_candidates;
use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::game::{
    abstract_state, action_cost, AbstractState, Lane, MicroState, PlayerAction, PlayerId, WinCondition,
};
use crate::models::{OutcomeVector, QFunction, TransitionModel};

pub const TREE_VERSION: u32 = 1;

/// A base at or below this normalized health counts as destroyed.
pub const TERMINAL_HEALTH: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    pub depth: usize,
    /// Friendly actions expanded per depth.
    pub friendly: Vec<usize>,
    /// Enemy actions expanded per depth.
    pub enemy: Vec<usize>,
    /// Stop at nodes with a base at or below [`TERMINAL_HEALTH`]. Turning
    /// this off reproduces search that expands past lost positions.
    pub guard_terminals: bool,
    /// Legal actions considered for ranking and leaf evaluation per node
    /// (0 = all).
    pub candidate_limit: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { depth: 2, friendly: vec![20, 5], enemy: vec![10, 3], guard_terminals: true, candidate_limit: 128 }
    }
}

impl SearchParams {
    pub fn uniform(depth: usize, friendly: usize, enemy: usize) -> Self {
        Self { depth, friendly: vec![friendly; depth], enemy: vec![enemy; depth], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::InvalidConfig("search depth must be at least 1".into()));
        }
        if self.friendly.len() != self.depth || self.enemy.len() != self.depth {
            return Err(Error::InvalidConfig("branch counts must have one entry per depth".into()));
        }
        if self.friendly.iter().chain(&self.enemy).any(|&n| n == 0) {
            return Err(Error::InvalidConfig("branch counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where a player's candidate actions come from.
pub trait ActionSource: Sync {
    fn actions(&self, currency: u32, pylons_owned: u32) -> Vec<PlayerAction>;
}

/// All legal actions, thinned to an even stride when there are more than
/// `limit`. Deterministic.
#[derive(Debug, Clone)]
pub struct CappedLegal {
    pub config: GameConfig,
    pub limit: usize,
}

impl ActionSource for CappedLegal {
    fn actions(&self, currency: u32, pylons_owned: u32) -> Vec<PlayerAction> {
        strided_candidates(&self.config, currency, pylons_owned, self.limit)
    }
}

/// What a tree node looks like to the searcher, plus the enemy currency
/// used to enumerate enemy purchases.
#[derive(Debug, Clone)]
pub struct Observation {
    pub state: AbstractState,
    pub enemy_currency: u32,
}

/// A successor function the tree can be built over.
pub trait Dynamics: Sync {
    type State: Clone + Send + Sync;

    fn observe(&self, state: &Self::State) -> Observation;

    /// Successor and edge reward after one wave.
    fn step(&self, state: &Self::State, friendly: &PlayerAction, enemy: &PlayerAction) -> Result<(Self::State, OutcomeVector)>;

    /// Final outcome vector if the rules say the game is over here.
    fn rules_outcome(&self, state: &Self::State) -> Option<OutcomeVector>;
}

/// Successors predicted by the learned transition model. Own currency comes
/// from the predicted features; the enemy's is carried by accounting for
/// their purchase and stipend.
#[derive(Debug, Clone, Copy)]
pub struct LearnedDynamics<'a> {
    pub model: &'a TransitionModel,
    pub config: &'a GameConfig,
}

/// State for [`LearnedDynamics`]: the searcher's view and the enemy's
/// estimated currency.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedState {
    pub state: AbstractState,
    pub enemy_currency: u32,
}

impl Dynamics for LearnedDynamics<'_> {
    type State = LearnedState;

    fn observe(&self, s: &LearnedState) -> Observation {
        Observation { state: s.state.clone(), enemy_currency: s.enemy_currency }
    }

    fn step(&self, s: &LearnedState, friendly: &PlayerAction, enemy: &PlayerAction) -> Result<(LearnedState, OutcomeVector)> {
        let (next, reward) = self.model.predict_transition(&s.state, friendly, enemy);
        let pylons = (s.state.pylons[s.state.enemy().index()] + enemy.pylons).min(self.config.max_pylons);
        let enemy_currency =
            s.enemy_currency.saturating_sub(action_cost(enemy, self.config)) + self.config.stipend(pylons);
        Ok((LearnedState { state: next, enemy_currency }, reward))
    }

    fn rules_outcome(&self, s: &LearnedState) -> Option<OutcomeVector> {
        (s.state.wave > self.config.max_waves).then(|| timeout_outcome(&s.state))
    }
}

/// Successors from the simulator itself, for reference trees whose every
/// edge obeys the rules.
#[derive(Debug, Clone, Copy)]
pub struct SimulatorDynamics {
    pub perspective: PlayerId,
}

impl Dynamics for SimulatorDynamics {
    type State = MicroState;

    fn observe(&self, s: &MicroState) -> Observation {
        Observation {
            state: abstract_state(s, self.perspective),
            enemy_currency: s.player(self.perspective.other()).currency,
        }
    }

    fn step(&self, s: &MicroState, friendly: &PlayerAction, enemy: &PlayerAction) -> Result<(MicroState, OutcomeVector)> {
        let (a1, a2) = match self.perspective {
            PlayerId::P1 => (friendly, enemy),
            PlayerId::P2 => (enemy, friendly),
        };
        let (next, outcome) = s.resolve_wave(a1, a2)?;
        let reward = outcome.map_or(OutcomeVector::ZERO, |o| OutcomeVector::one_hot(o.condition, self.perspective));
        Ok((next, reward))
    }

    fn rules_outcome(&self, s: &MicroState) -> Option<OutcomeVector> {
        s.outcome().map(|o| OutcomeVector::one_hot(o.condition, self.perspective))
    }
}

/// Outcome when the last wave has passed: the owner of the weakest base
/// loses, then lower total health, then Player 1 wins an exact tie.
pub fn timeout_outcome(s: &AbstractState) -> OutcomeVector {
    let min = |p: PlayerId| s.base_health[p.index()].iter().copied().fold(f64::INFINITY, f64::min);
    let total = |p: PlayerId| s.base_health[p.index()].iter().sum::<f64>();
    let (m1, m2) = (min(PlayerId::P1), min(PlayerId::P2));
    let loser = if m1 < m2 {
        PlayerId::P1
    } else if m2 < m1 {
        PlayerId::P2
    } else if total(PlayerId::P2) <= total(PlayerId::P1) {
        PlayerId::P2
    } else {
        PlayerId::P1
    };
    OutcomeVector::one_hot(WinCondition::timeout(loser.other()), s.perspective)
}

/// The weakest base at or below [`TERMINAL_HEALTH`], as `(owner, lane)`.
/// Ties go to Player 1, then the top lane.
pub fn fallen_base(s: &AbstractState) -> Option<(PlayerId, Lane)> {
    let mut best: Option<(f64, PlayerId, Lane)> = None;
    for p in PlayerId::BOTH {
        for lane in Lane::BOTH {
            let h = s.health(p, lane);
            if h <= TERMINAL_HEALTH && best.is_none_or(|(b, _, _)| h < b) {
                best = Some((h, p, lane));
            }
        }
    }
    best.map(|(_, p, l)| (p, l))
}

/// One-hot outcome for a position with a fallen base.
pub fn fallen_outcome(s: &AbstractState) -> Option<OutcomeVector> {
    fallen_base(s).map(|(loser, lane)| OutcomeVector::one_hot(WinCondition::destroyed(loser.other(), lane), s.perspective))
}

/// The action pair on the edge into a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPair {
    pub friendly: PlayerAction,
    pub enemy: PlayerAction,
    /// Positions in the parent's friendly and enemy rankings.
    pub friendly_rank: usize,
    pub enemy_rank: usize,
    /// Reward observed or predicted on this edge.
    pub reward: OutcomeVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub state: AbstractState,
    pub enemy_currency: u32,
    /// `None` only before backup on interior nodes.
    pub value: Option<OutcomeVector>,
    pub terminal: bool,
    /// On the principal variation.
    pub pv: bool,
    /// `None` at the root.
    pub edge: Option<ActionPair>,
    /// In friendly-rank then enemy-rank order.
    pub children: Vec<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    pub version: u32,
    pub perspective: PlayerId,
    pub params: SearchParams,
    /// Preorder; the root is `nodes[0]`.
    pub nodes: Vec<TreeNode>,
}

/// One row of the root chart: a friendly root action and its minimax value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootEntry {
    pub action: PlayerAction,
    pub rank: usize,
    pub value: OutcomeVector,
    /// Sum of the agent's clamped components, so it may exceed 1.
    pub agent_value: f64,
    /// Agent share of the renormalized vector, in [0, 1]. Display only.
    pub win_share: f64,
}

struct Builder<'a, D: Dynamics> {
    dynamics: &'a D,
    q: &'a QFunction,
    actions: &'a dyn ActionSource,
    params: &'a SearchParams,
}

impl<D: Dynamics> Builder<'_, D> {
    /// Subtree rooted at `state`, preorder with ids relative to its root.
    fn subtree(&self, state: &D::State, depth: usize, edge: Option<ActionPair>) -> Result<Vec<TreeNode>> {
        let obs = self.dynamics.observe(state);
        let mut node = TreeNode {
            id: 0,
            parent: None,
            depth,
            state: obs.state.clone(),
            enemy_currency: obs.enemy_currency,
            value: None,
            terminal: false,
            pv: false,
            edge,
            children: Vec::new(),
        };
        let s = &obs.state;
        let terminal_value = self
            .dynamics
            .rules_outcome(state)
            .or_else(|| if self.params.guard_terminals && depth > 0 { fallen_outcome(s) } else { None });
        if let Some(v) = terminal_value {
            node.terminal = true;
            node.value = Some(v);
            return Ok(vec![node]);
        }
        let own = self.actions.actions(s.currency, s.pylons[s.perspective.index()]);
        if depth == self.params.depth {
            node.value = Some(self.q.evaluate_state(s, &own)?);
            return Ok(vec![node]);
        }

        let friendly = self.q.rank_actions(s, &own, self.params.friendly[depth]);
        let theirs = self.actions.actions(obs.enemy_currency, s.pylons[s.enemy().index()]);
        let enemy = self.q.rank_actions(&s.flipped(obs.enemy_currency), &theirs, self.params.enemy[depth]);
        let pairs: Vec<ActionPair> = friendly
            .iter()
            .enumerate()
            .flat_map(|(fi, f)| {
                enemy.iter().enumerate().map(move |(ei, e)| ActionPair {
                    friendly: f.action,
                    enemy: e.action,
                    friendly_rank: fi,
                    enemy_rank: ei,
                    reward: OutcomeVector::ZERO,
                })
            })
            .collect();
        let subtrees = pairs
            .par_iter()
            .map(|pair| {
                let (next, reward) = self.dynamics.step(state, &pair.friendly, &pair.enemy)?;
                self.subtree(&next, depth + 1, Some(ActionPair { reward, ..*pair }))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut nodes = vec![node];
        for sub in subtrees {
            let offset = nodes.len();
            nodes[0].children.push(offset);
            nodes.extend(sub.into_iter().map(|mut n| {
                n.id += offset;
                n.parent = Some(n.parent.map_or(0, |p| p + offset));
                n.children.iter_mut().for_each(|c| *c += offset);
                n
            }));
        }
        Ok(nodes)
    }
}

/// Builds and backs up a search tree from `root`.
pub fn build_tree<D: Dynamics>(
    root: &D::State,
    dynamics: &D,
    q: &QFunction,
    actions: &dyn ActionSource,
    params: &SearchParams,
) -> Result<SearchTree> {
    params.validate()?;
    let obs = dynamics.observe(root);
    if dynamics.rules_outcome(root).is_some() {
        return Err(Error::Terminal);
    }
    let builder = Builder { dynamics, q, actions, params };
    let nodes = builder.subtree(root, 0, None)?;
    let mut tree = SearchTree { version: TREE_VERSION, perspective: obs.state.perspective, params: params.clone(), nodes };
    minimax_backup(&mut tree)?;
    Ok(tree)
}

/// Tree over the learned models from the searcher's view of the game.
pub fn build_learned_tree(
    root: &AbstractState,
    enemy_currency: u32,
    q: &QFunction,
    model: &TransitionModel,
    config: &GameConfig,
    params: &SearchParams,
) -> Result<SearchTree> {
    let dynamics = LearnedDynamics { model, config };
    let actions = CappedLegal { config: config.clone(), limit: params.candidate_limit };
    let root = LearnedState { state: root.clone(), enemy_currency };
    build_tree(&root, &dynamics, q, &actions, params)
}

/// The child the minimax choice at `id` passes through: the worst reply to
/// the best friendly action.
fn chosen_child(tree: &SearchTree, id: usize) -> Option<usize> {
    let node = &tree.nodes[id];
    let value = |c: usize| tree.nodes[c].value.expect("children are backed up").agent_value();
    let rank = |c: usize| tree.nodes[c].edge.expect("children have edges").friendly_rank;
    let mut best: Option<usize> = None;
    let mut i = 0;
    while i < node.children.len() {
        let r = rank(node.children[i]);
        let mut worst = node.children[i];
        let mut j = i + 1;
        while j < node.children.len() && rank(node.children[j]) == r {
            if value(node.children[j]) < value(worst) {
                worst = node.children[j];
            }
            j += 1;
        }
        if best.is_none_or(|b| value(worst) > value(b)) {
            best = Some(worst);
        }
        i = j;
    }
    best
}

/// Recomputes interior values bottom-up and marks the principal variation.
pub fn minimax_backup(tree: &mut SearchTree) -> Result<()> {
    for id in (0..tree.nodes.len()).rev() {
        tree.nodes[id].pv = false;
        if tree.nodes[id].is_leaf() {
            if tree.nodes[id].value.is_none() {
                return Err(Error::UnvaluedLeaf(id));
            }
            continue;
        }
        let c = chosen_child(tree, id).expect("interior node has children");
        tree.nodes[id].value = tree.nodes[c].value;
    }
    let mut at = Some(0);
    while let Some(id) = at {
        tree.nodes[id].pv = true;
        at = if tree.nodes[id].is_leaf() { None } else { chosen_child(tree, id) };
    }
    Ok(())
}

impl SearchTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> Option<&TreeNode> {
        self.nodes.get(id)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Node ids along the principal variation, root first.
    pub fn principal_variation(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.pv).map(|n| n.id).collect()
    }

    /// The chosen root action and the root's backed-up value.
    pub fn best_action(&self) -> Result<(PlayerAction, OutcomeVector)> {
        let root = self.root();
        let value = root.value.ok_or(Error::UnvaluedLeaf(0))?;
        let c = chosen_child(self, 0).ok_or(Error::Empty("root children"))?;
        Ok((self.nodes[c].edge.expect("child edge").friendly, value))
    }

    /// Minimax value of every expanded root action, best first. Ties keep
    /// ranking order.
    pub fn root_action_table(&self) -> Vec<RootEntry> {
        let mut rows: Vec<RootEntry> = Vec::new();
        for &c in &self.root().children {
            let node = &self.nodes[c];
            let edge = node.edge.expect("child edge");
            let value = node.value.expect("backed up");
            match rows.last_mut() {
                Some(row) if row.rank == edge.friendly_rank => {
                    if value.agent_value() < row.agent_value {
                        row.value = value;
                        row.agent_value = value.agent_value();
                        row.win_share = value.normalized().agent_value();
                    }
                }
                _ => rows.push(RootEntry {
                    action: edge.friendly,
                    rank: edge.friendly_rank,
                    value,
                    agent_value: value.agent_value(),
                    win_share: value.normalized().agent_value(),
                }),
            }
        }
        rows.sort_by(|a, b| b.agent_value.total_cmp(&a.agent_value).then(a.rank.cmp(&b.rank)));
        rows
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.version != TREE_VERSION {
            return Err(Error::Version { found: probe.version, expected: TREE_VERSION });
        }
        let tree: SearchTree = serde_json::from_str(text)?;
        tree.check()?;
        Ok(tree)
    }

    /// Structural checks: ids match positions, links agree, parents precede
    /// children.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("malformed tree: {m}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return bad(format!("node {i} has id {}", n.id));
            }
            match (i, n.parent, n.edge) {
                (0, None, None) => {}
                (0, _, _) => return bad("root has a parent or edge".into()),
                (_, Some(p), Some(_)) if p < i && self.nodes[p].children.contains(&i) => {}
                _ => return bad(format!("node {i} has a bad parent link")),
            }
            for &c in &n.children {
                if c <= i || c >= self.nodes.len() || self.nodes[c].parent != Some(i) {
                    return bad(format!("node {i} has a bad child {c}"));
                }
            }
        }
        Ok(())
    }
}
