use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tugwar::lint::LintConfig;
use tugwar::search::SearchParams;
use tugwar::training::PipelineConfig;
use tugwar::GameConfig;

use crate::error::Result;

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "TOW_CONFIG";

/// One TOML file with a table per subsystem. Missing tables take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub game: GameConfig,
    pub search: SearchParams,
    pub lint: LintConfig,
    pub pipeline: PipelineConfig,
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ServiceConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The explicit path if given, else `$TOW_CONFIG`, else defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        let from_env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        match path.map(Path::to_path_buf).or(from_env) {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        self.search.validate()?;
        self.lint.validate()?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = ServiceConfig::from_toml_str("[search]\ndepth = 1\nfriendly = [4]\nenemy = [2]\n").unwrap();
        assert_eq!(cfg.search.depth, 1);
        assert_eq!(cfg.game, GameConfig::default());
        assert_eq!(ServiceConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        assert!(ServiceConfig::from_toml_str("[lint]\ntau_state = -1.0\n").is_err());
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(ServiceConfig::from_toml_str("[search]\ndepth = 3\n").is_err());
        assert!(ServiceConfig::from_toml_str("[nonsense]\n").is_err());
        assert!(ServiceConfig::from_toml_str("[game]\nmax_pylons = 4\n").is_err());
    }
}
