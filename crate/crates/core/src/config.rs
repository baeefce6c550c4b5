//! Game configuration.
//!
//! The on-disk form is TOML. Every key is optional (missing keys take the
//! defaults below) but unknown keys are rejected. See `docs/config.md` for
//! the full schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::UnitType;

/// Number of waves before the timeout rule applies. Fixed by the game rules.
pub const MAX_WAVES: u32 = 40;
/// Maximum number of pylons a player may own. Fixed by the game rules.
pub const MAX_PYLONS: u32 = 3;

/// One value per unit (and building) type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerUnit<T> {
    pub marine: T,
    pub baneling: T,
    pub immortal: T,
}

impl<T> PerUnit<T> {
    pub fn get(&self, kind: UnitType) -> &T {
        match kind {
            UnitType::Marine => &self.marine,
            UnitType::Baneling => &self.baneling,
            UnitType::Immortal => &self.immortal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitStats {
    pub hp: f64,
    /// Lane distance covered per tick.
    pub move_speed: f64,
    pub attack_range: f64,
    /// Damage per tick before jitter and the rock-paper-scissors bonus.
    pub base_damage: f64,
    /// Multiplier applied against the type this unit beats.
    pub rps_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub max_waves: u32,
    pub ticks_per_wave: u32,
    pub lane_length: f64,
    pub base_health_max: f64,
    pub start_currency: u32,
    pub base_stipend: u32,
    pub pylon_stipend_bonus: u32,
    pub max_pylons: u32,
    pub building_costs: PerUnit<u32>,
    pub pylon_cost: u32,
    pub units: PerUnit<UnitStats>,
    pub damage_jitter: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            max_waves: MAX_WAVES,
            ticks_per_wave: 30,
            lane_length: 1.0,
            base_health_max: 2000.0,
            start_currency: 100,
            base_stipend: 100,
            pylon_stipend_bonus: 75,
            max_pylons: MAX_PYLONS,
            building_costs: PerUnit {
                marine: 50,
                baneling: 75,
                immortal: 200,
            },
            pylon_cost: 150,
            units: PerUnit {
                marine: UnitStats {
                    hp: 20.0,
                    move_speed: 0.025,
                    attack_range: 0.05,
                    base_damage: 1.0,
                    rps_multiplier: 2.0,
                },
                baneling: UnitStats {
                    hp: 15.0,
                    move_speed: 0.03,
                    attack_range: 0.05,
                    base_damage: 1.5,
                    rps_multiplier: 2.0,
                },
                immortal: UnitStats {
                    hp: 22.5,
                    move_speed: 0.02,
                    attack_range: 0.05,
                    base_damage: 1.0,
                    rps_multiplier: 2.0,
                },
            },
            damage_jitter: 0.2,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.max_waves != MAX_WAVES {
            return bad("max_waves is fixed at 40");
        }
        if self.max_pylons != MAX_PYLONS {
            return bad("max_pylons is fixed at 3");
        }
        if self.ticks_per_wave == 0 {
            return bad("ticks_per_wave must be > 0");
        }
        if !(self.lane_length.is_finite() && self.lane_length > 0.0) {
            return bad("lane_length must be > 0");
        }
        if !(self.base_health_max.is_finite() && self.base_health_max > 0.0) {
            return bad("base_health_max must be > 0");
        }
        if self.start_currency == 0 || self.base_stipend == 0 || self.pylon_stipend_bonus == 0 {
            return bad("currency amounts must be > 0");
        }
        if self.pylon_cost == 0 || UnitType::ALL.iter().any(|&t| *self.building_costs.get(t) == 0) {
            return bad("costs must be > 0");
        }
        for t in UnitType::ALL {
            let s = self.units.get(t);
            let positive = [s.hp, s.move_speed, s.attack_range, s.base_damage, s.rps_multiplier]
                .iter()
                .all(|v| v.is_finite() && *v > 0.0);
            if !positive {
                return bad(&format!("unit stats for {t:?} must be finite and > 0"));
            }
        }
        if !(0.0..1.0).contains(&self.damage_jitter) {
            return bad("damage_jitter must be in [0, 1)");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: GameConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn building_cost(&self, kind: UnitType) -> u32 {
        *self.building_costs.get(kind)
    }

    pub fn stipend(&self, pylons: u32) -> u32 {
        self.base_stipend + pylons * self.pylon_stipend_bonus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        GameConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_fourth_pylon() {
        let cfg = GameConfig {
            max_pylons: 4,
            ..GameConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rejects_jitter_of_one() {
        let cfg = GameConfig {
            damage_jitter: 1.0,
            ..GameConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = GameConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(GameConfig::from_toml_str(&text).unwrap(), cfg);

        let partial = GameConfig::from_toml_str("start_currency = 300\n").unwrap();
        assert_eq!(partial.start_currency, 300);
        assert_eq!(partial.base_stipend, 100);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(GameConfig::from_toml_str("start_cash = 300\n").is_err());
        assert!(GameConfig::from_toml_str("[units.zergling]\nhp = 1.0\n").is_err());
    }
}
