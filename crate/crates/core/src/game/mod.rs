//! Native Tug of War: rules, the micro-tick simulator and the abstraction
//! the agent observes.

mod abstraction;
mod actions;
mod currency;
mod sim;

pub use abstraction::{abstract_state, realize, AbstractState, CELLS_PER_LANE, GRID_CELLS};
pub use actions::{action_cost, legal_actions, legal_actions_for, sample_legal_action};
pub use currency::{estimate_enemy_currency, observed_purchase, CurrencyEstimate, EnemyCurrencyTracker};
pub use sim::{new_game, terminal_outcome, MicroState, PlayerState, Unit};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlayerId {
    P1,
    P2,
}

impl PlayerId {
    pub const BOTH: [PlayerId; 2] = [PlayerId::P1, PlayerId::P2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> PlayerId {
        match self {
            PlayerId::P1 => PlayerId::P2,
            PlayerId::P2 => PlayerId::P1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lane {
    Top,
    Bottom,
}

impl Lane {
    pub const BOTH: [Lane; 2] = [Lane::Top, Lane::Bottom];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> Lane {
        match self {
            Lane::Top => Lane::Bottom,
            Lane::Bottom => Lane::Top,
        }
    }
}

/// Unit types, also used for the production buildings that spawn them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnitType {
    Marine,
    Baneling,
    Immortal,
}

impl UnitType {
    pub const ALL: [UnitType; 3] = [UnitType::Marine, UnitType::Baneling, UnitType::Immortal];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The type this one deals bonus damage to: Marine > Immortal > Baneling > Marine.
    pub fn beats(self) -> UnitType {
        match self {
            UnitType::Marine => UnitType::Immortal,
            UnitType::Immortal => UnitType::Baneling,
            UnitType::Baneling => UnitType::Marine,
        }
    }
}

/// One player's purchase for a wave.
///
/// The derived ordering is the canonical action order used for tie-breaks:
/// lane (Top first), then building counts lexicographically in
/// Marine/Baneling/Immortal order, then pylons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlayerAction {
    pub lane: Lane,
    pub buildings: [u32; 3],
    pub pylons: u32,
}

impl PlayerAction {
    pub const NULL: PlayerAction = PlayerAction {
        lane: Lane::Top,
        buildings: [0; 3],
        pylons: 0,
    };

    pub fn new(lane: Lane, buildings: [u32; 3], pylons: u32) -> Self {
        Self {
            lane,
            buildings,
            pylons,
        }
        .canonical()
    }

    /// Purchases nothing at all.
    pub fn is_null(&self) -> bool {
        self.buildings == [0; 3] && self.pylons == 0
    }

    /// Buys no production buildings, so no lane is affected.
    pub fn builds_nothing(&self) -> bool {
        self.buildings == [0; 3]
    }

    /// Actions that build nothing (the null action, pylon-only purchases)
    /// touch no lane, so they are reported on the top lane to have a single form.
    pub fn canonical(self) -> Self {
        if self.builds_nothing() {
            Self { lane: Lane::Top, ..self }
        } else {
            self
        }
    }

    /// The lane this action adds buildings to, if any.
    pub fn built_lane(&self) -> Option<Lane> {
        (!self.builds_nothing()).then_some(self.lane)
    }
}

/// The six ways a game can end, from Player 1's point of view first.
/// "DestroysTop" means destroying the opponent's top-lane base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WinCondition {
    P1DestroysTop,
    P1DestroysBottom,
    P1Timeout,
    P2DestroysTop,
    P2DestroysBottom,
    P2Timeout,
}

impl WinCondition {
    pub const ALL: [WinCondition; 6] = [
        WinCondition::P1DestroysTop,
        WinCondition::P1DestroysBottom,
        WinCondition::P1Timeout,
        WinCondition::P2DestroysTop,
        WinCondition::P2DestroysBottom,
        WinCondition::P2Timeout,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn winner(self) -> PlayerId {
        if self.index() < 3 {
            PlayerId::P1
        } else {
            PlayerId::P2
        }
    }

    pub fn destroyed(winner: PlayerId, lane: Lane) -> Self {
        Self::ALL[winner.index() * 3 + lane.index()]
    }

    pub fn timeout(winner: PlayerId) -> Self {
        Self::ALL[winner.index() * 3 + 2]
    }

    /// The same ending with the players' roles swapped.
    pub fn flipped(self) -> Self {
        Self::ALL[(self.index() + 3) % 6]
    }

    /// Index into an outcome vector expressed from `perspective`'s point of
    /// view (own conditions first).
    pub fn relative_index(self, perspective: PlayerId) -> usize {
        match perspective {
            PlayerId::P1 => self.index(),
            PlayerId::P2 => self.flipped().index(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub winner: PlayerId,
    pub condition: WinCondition,
}
