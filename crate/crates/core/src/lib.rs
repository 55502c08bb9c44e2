//! Deterministic agent-based simulation of a social network feed.
//!
//! A population of agent profiles consumes recommended content day by day
//! under one of three recommendation policies (plurality, balanced,
//! similarity). Every agent carries a polarization score and an engagement
//! score in `[-1, 1]`; both evolve through a convex-combination recurrence
//! driven by the affinity between the agent and what it was shown. The
//! crate tracks every interaction in a replay-verifiable transcript and
//! aggregates reaction tallies into report tables.
//!
//! Everything is seeded: two runs with the same config produce byte
//! identical transcripts. Agent decisions come from a pluggable backend —
//! a deterministic rule engine, or a chat-completions client with
//! record/replay cassettes.

pub mod agents;
pub mod config;
pub mod content;
pub mod decision;
pub mod dynamics;
pub mod engine;
pub mod metrics;
pub mod recommender;
pub mod rng;

pub use agents::{AgentId, AgentPrompt, DynamicTraits, StaticTraits};
pub use config::{BackendChoice, RunConfig};
pub use content::{ContentPool, Post, PostId, SourceKind};
pub use decision::{DecisionBackend, InteractionOutcome, ReactionKind};
pub use dynamics::DynamicsParams;
pub use engine::{RunResult, SimulationState};
pub use metrics::ReactionTally;
pub use recommender::ScenarioKind;
