//! Tug of War: a two-lane strategy game, an agent that decides by pruned
//! minimax search over learned models, and scripted detectors that look for
//! flaws in the trees that agent produces.

pub mod candidates;
pub mod config;
pub mod error;
pub mod game;
pub mod lint;
pub mod models;
pub mod neural;
pub mod replay;
pub mod search;
pub mod training;

pub use config::GameConfig;
pub use error::{Error, Result};
