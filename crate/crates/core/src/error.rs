use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("illegal action for {player:?}: {reason}")]
    IllegalAction {
        player: crate::game::PlayerId,
        reason: String,
    },
    #[error("game is already over")]
    Terminal,
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error("unsupported document version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("tree has an unvalued leaf at node {0}")]
    UnvaluedLeaf(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
