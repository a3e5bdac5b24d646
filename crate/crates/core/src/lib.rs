//! Agent-based simulation of echo-chamber formation on directed follow
//! networks, with pluggable opinion engines, ingestion of labelled post
//! records, network metrics and embedding-cluster analysis.

pub mod embedding;
pub mod engine;
pub mod graph;
pub mod ingest;
pub mod llm;
pub mod metrics;
pub mod opinion;
pub mod report;
pub mod simulation;
pub mod synthetic;

/// Every random draw in the crate goes through this generator.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub use engine::{EngineKind, EquationEngine, EquationParams, OpinionEngine};
pub use graph::{Post, SocialGraph, UserId, UserState};
pub use opinion::{Compatibility, Influence, Opinion, StanceLabel};
pub use simulation::{RunResult, SimConfig, Simulation, StepEvent};
