//! A simulator for the game between a classifier that hunts damaging post
//! deletions and a challenger that hides them among decoy deletions.
//!
//! [`engine::run_game`] plays one configured game and returns per-interval
//! precision, recall and F-score; [`cli::run_experiment`] sweeps a grid of
//! configurations across seeds.

pub mod adversary;
pub mod challenger;
pub mod cli;
pub mod config;
pub mod datagen;
pub mod domain;
pub mod engine;
pub mod error;
pub mod model;
pub mod rng;
pub mod stats;

pub use config::{AdversaryMode, ChallengerMode, GameConfig};
pub use datagen::{ScenarioKind, ScenarioSpec};
pub use domain::{Metrics, Origin, Post, PostId};
pub use engine::{run_game, run_game_detailed, GameRun, GameTrace};
pub use error::{GameError, Result};
