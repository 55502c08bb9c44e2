//! Interaction decisions: given an agent and a post, decide whether to
//! engage and how — reaction, comment, share, friend request.
//!
//! Two backends implement the same contract: a deterministic rule engine
//! (pure function of agent, post, and the agent's seeded stream) and a
//! chat-completions client with record/replay cassettes.

mod deterministic;
mod llm;
mod parse;

pub use deterministic::{decide_deterministic, DeterministicBackend};
pub use llm::{
    render_post_prompt, render_profile_description, render_trait_report_prompt, CassetteStore,
    ChatRequest, ChatTransport, HttpChatTransport, LlmBackend, RecordingTransport,
    ReplayTransport, ScriptedTransport, API_KEY_ENV,
};
pub use parse::{parse_completion, parse_trait_report, render_outcome};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentPrompt, DynamicTraits};
use crate::content::{Post, SourceKind};

/// The reaction options, including doing nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReactionKind {
    None,
    Like,
    Love,
    Care,
    Haha,
    Wow,
    Angry,
    Sad,
}

impl ReactionKind {
    /// Tally-column order: Haha, Like, Wow, Care, Love, Sad, Angry.
    pub const COUNTED: [ReactionKind; 7] = [
        ReactionKind::Haha,
        ReactionKind::Like,
        ReactionKind::Wow,
        ReactionKind::Care,
        ReactionKind::Love,
        ReactionKind::Sad,
        ReactionKind::Angry,
    ];

    pub fn counter_slot(self) -> Option<usize> {
        ReactionKind::COUNTED.iter().position(|&k| k == self)
    }

    /// Positive set: Haha, Like, Wow, Care, Love.
    pub fn is_positive(self) -> bool {
        matches!(
            self,
            ReactionKind::Haha
                | ReactionKind::Like
                | ReactionKind::Wow
                | ReactionKind::Care
                | ReactionKind::Love
        )
    }

    /// Negative set: Sad, Angry.
    pub fn is_negative(self) -> bool {
        matches!(self, ReactionKind::Sad | ReactionKind::Angry)
    }

    pub fn name(self) -> &'static str {
        match self {
            ReactionKind::None => "Nothing",
            ReactionKind::Like => "Like",
            ReactionKind::Love => "Love",
            ReactionKind::Care => "Care",
            ReactionKind::Haha => "Haha",
            ReactionKind::Wow => "Wow",
            ReactionKind::Angry => "Angry",
            ReactionKind::Sad => "Sad",
        }
    }
}

/// What one agent did with one post.
///
/// A skipped post carries nothing downstream: no comment, share, or friend
/// request. A present comment implies the comments were read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionOutcome {
    pub reaction: ReactionKind,
    pub read_comments: bool,
    pub comment_text: Option<String>,
    pub shared: bool,
    pub friend_requested: bool,
}

impl InteractionOutcome {
    pub fn skip() -> Self {
        InteractionOutcome {
            reaction: ReactionKind::None,
            read_comments: false,
            comment_text: None,
            shared: false,
            friend_requested: false,
        }
    }

    pub fn engaged(&self) -> bool {
        self.reaction != ReactionKind::None
    }

    pub fn validate(&self) -> Result<(), DecisionError> {
        if self.reaction == ReactionKind::None
            && (self.comment_text.is_some()
                || self.shared
                || self.friend_requested
                || self.read_comments)
        {
            return Err(DecisionError::InvalidOutcome(
                "skipped post cannot carry downstream actions".into(),
            ));
        }
        if self.comment_text.is_some() && !self.read_comments {
            return Err(DecisionError::InvalidOutcome(
                "commenting implies having read the comments".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error("could not parse completion into an interaction: {text:?}")]
    ParseError { text: String },
    #[error("transport failure: {0}")]
    TransportError(String),
    #[error("rate limited (retry after {retry_after_secs}s)")]
    RateLimited { retry_after_secs: u64 },
    #[error("cassette miss for key {key} in replay mode")]
    CassetteMiss { key: String },
    #[error("cassette store error: {0}")]
    CassetteError(String),
    #[error("invalid interaction outcome: {0}")]
    InvalidOutcome(String),
}

/// Tunable constants of the deterministic rule engine. This block is the
/// calibration surface behind the scenario orderings; every threshold used
/// anywhere in the rule engine lives here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecisionRules {
    /// Base engagement probability before trait and affinity adjustments.
    pub engage_base: f64,
    /// Weight of |affinity| in the engagement probability: alignment and
    /// outrage both pull agents in.
    pub engage_affinity_weight: f64,
    pub engage_extraversion_weight: f64,
    pub engage_emotive_weight: f64,
    pub engage_floor: f64,
    pub engage_ceiling: f64,
    /// Affinity at or above this earns Love.
    pub love_threshold: f64,
    /// Affinity in `[care_threshold, love_threshold)` earns Care for
    /// emotional thinkers, Like otherwise.
    pub care_threshold: f64,
    /// Affinity at or below this earns Angry for highly reactive agents,
    /// Sad otherwise. Between this and `care_threshold` sits Wow.
    pub negative_threshold: f64,
    /// Cognitive-style floor for Care over Like.
    pub care_cognitive_min: u8,
    /// Emotive-reaction floor for Angry over Sad.
    pub angry_emotive_min: f64,
    /// Comment probability = `comment_factor` × engagement probability.
    pub comment_factor: f64,
    /// Agreeableness floor for sharing a loved/cared-for post.
    pub share_agreeableness_min: u8,
    /// Social-connectivity floor for friend-requesting a trending author.
    pub friend_request_connectivity_min: f64,
}

impl Default for DecisionRules {
    fn default() -> Self {
        DecisionRules {
            engage_base: 0.5,
            engage_affinity_weight: 0.35,
            engage_extraversion_weight: 0.1,
            engage_emotive_weight: 0.05,
            engage_floor: 0.05,
            engage_ceiling: 0.95,
            love_threshold: 0.6,
            care_threshold: 0.25,
            negative_threshold: -0.25,
            care_cognitive_min: 4,
            angry_emotive_min: 4.0,
            comment_factor: 0.5,
            share_agreeableness_min: 5,
            friend_request_connectivity_min: 5.0,
        }
    }
}

impl DecisionRules {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("engage_base", self.engage_base),
            ("engage_affinity_weight", self.engage_affinity_weight),
            ("engage_extraversion_weight", self.engage_extraversion_weight),
            ("engage_emotive_weight", self.engage_emotive_weight),
            ("engage_floor", self.engage_floor),
            ("engage_ceiling", self.engage_ceiling),
            ("comment_factor", self.comment_factor),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(format!("decision_rules.{name} must be in [0, 1], got {v}"));
            }
        }
        if self.engage_floor > self.engage_ceiling {
            return Err("decision_rules: engage_floor must not exceed engage_ceiling".into());
        }
        if !(self.negative_threshold <= self.care_threshold
            && self.care_threshold <= self.love_threshold)
        {
            return Err(
                "decision_rules: thresholds must be ordered negative <= care <= love".into(),
            );
        }
        Ok(())
    }
}

/// Where and when a post was served.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext {
    pub day: u32,
    /// The source surface this post arrived through — a friend-authored
    /// post served from the trending list counts as trending here.
    pub served_from: SourceKind,
    /// Affinity already computed by the caller (under the same weights the
    /// backend carries). Recomputed internally when absent.
    pub affinity: Option<f64>,
}

impl DecisionContext {
    pub fn standalone(post: &Post) -> Self {
        DecisionContext {
            day: 0,
            served_from: post.source_kind,
            affinity: None,
        }
    }
}

/// Aggregate view of one agent's consumption session, for the self-report
/// prompt.
#[derive(Debug, Clone, Copy, Default)]
pub struct SessionSummary {
    pub day: u32,
    pub posts_consumed: usize,
    pub positive_reactions: usize,
    pub negative_reactions: usize,
    pub comments: usize,
    pub shares: usize,
    pub friend_requests: usize,
}

/// Behavioral contract of a decision backend.
pub trait DecisionBackend: Send + Sync {
    fn decide(
        &self,
        agent: &AgentPrompt,
        post: &Post,
        ctx: &DecisionContext,
        rng: &mut ChaCha8Rng,
    ) -> Result<InteractionOutcome, DecisionError>;

    /// Post-session self-report of the dynamic traits. `None` means the
    /// backend has no opinion and trait drift applies instead.
    fn report_trait_deltas(
        &self,
        agent: &AgentPrompt,
        summary: &SessionSummary,
    ) -> Result<Option<DynamicTraits>, DecisionError>;

    fn name(&self) -> &'static str;
}
