//! Agent–post affinity and the three recommendation policies.
//!
//! Affinity blends two terms: closeness on the 1–7 political axis and
//! overlap between the post's tags and the agent's interests, yielding a
//! value in `[-1, 1]`. The three policies select from a candidate set by
//! affinity — similarity takes the top, plurality the bottom, balanced a
//! split — and the mean affinity of whatever was consumed is the scalar
//! impact that drives the score recurrences.

use serde::{Deserialize, Serialize};
use std::str::FromStr;
use thiserror::Error;

use crate::agents::AgentPrompt;
use crate::content::Post;

/// The three recommender setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    Plurality,
    Balanced,
    Similarity,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Plurality,
        ScenarioKind::Balanced,
        ScenarioKind::Similarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Plurality => "Plurality",
            ScenarioKind::Balanced => "Balanced",
            ScenarioKind::Similarity => "Similarity",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plurality" => Ok(ScenarioKind::Plurality),
            "balanced" => Ok(ScenarioKind::Balanced),
            "similarity" => Ok(ScenarioKind::Similarity),
            other => Err(format!(
                "unknown scenario {other:?} (expected plurality, balanced, or similarity)"
            )),
        }
    }
}

/// Agent–post alignment in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Affinity(f64);

impl Affinity {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Weights of the two affinity terms. They must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityWeights {
    pub stance: f64,
    pub overlap: f64,
}

impl Default for AffinityWeights {
    fn default() -> Self {
        AffinityWeights {
            stance: 0.6,
            overlap: 0.4,
        }
    }
}

impl AffinityWeights {
    pub fn from_stance_weight(stance: f64) -> Self {
        AffinityWeights {
            stance,
            overlap: 1.0 - stance,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.stance) || !(0.0..=1.0).contains(&self.overlap) {
            return Err(format!(
                "affinity weights must be in [0, 1], got stance={} overlap={}",
                self.stance, self.overlap
            ));
        }
        if (self.stance + self.overlap - 1.0).abs() > 1e-9 {
            return Err("affinity weights must sum to 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("requested {k} posts but only {available} candidates")]
    InsufficientCandidates { k: usize, available: usize },
    #[error("cannot compute impact of an empty selection")]
    EmptySelection,
}

/// Pure affinity between an agent and a post:
/// `w_s·(1 − 2·|pa − stance|/6) + w_o·(2·overlap − 1)`, clamped to
/// `[-1, 1]`, where `overlap` is the matched fraction of the post's tags.
pub fn affinity(agent: &AgentPrompt, post: &Post, weights: &AffinityWeights) -> Affinity {
    let distance = (agent.dynamic_traits.political_attitude - post.stance).abs();
    let stance_term = 1.0 - 2.0 * distance / 6.0;
    let matched = post
        .tags
        .iter()
        .filter(|tag| agent.interests.contains(*tag))
        .count();
    let overlap = matched as f64 / post.tags.len() as f64;
    let overlap_term = 2.0 * overlap - 1.0;
    let value = weights.stance * stance_term + weights.overlap * overlap_term;
    Affinity(value.clamp(-1.0, 1.0))
}

fn scored<'a>(
    agent: &AgentPrompt,
    candidates: &[&'a Post],
    weights: &AffinityWeights,
) -> Vec<(f64, &'a Post)> {
    candidates
        .iter()
        .map(|post| (affinity(agent, post, weights).value(), *post))
        .collect()
}

fn sort_descending(entries: &mut [(f64, &Post)]) {
    entries.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.id.cmp(&b.1.id)));
}

fn sort_ascending(entries: &mut [(f64, &Post)]) {
    entries.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
}

/// Select `k` posts from `candidates` according to the scenario policy.
///
/// Similarity takes the `k` highest-affinity candidates, plurality the `k`
/// lowest, balanced `round(balance_ratio·k)` highest plus the remainder
/// lowest. Ties break toward the smaller post id; the returned order is
/// descending affinity, then ascending post id.
pub fn select<'a>(
    kind: ScenarioKind,
    agent: &AgentPrompt,
    candidates: &[&'a Post],
    k: usize,
    balance_ratio: f64,
    weights: &AffinityWeights,
) -> Result<Vec<&'a Post>, SelectError> {
    if k > candidates.len() {
        return Err(SelectError::InsufficientCandidates {
            k,
            available: candidates.len(),
        });
    }
    let mut entries = scored(agent, candidates, weights);
    let mut chosen: Vec<(f64, &Post)> = match kind {
        ScenarioKind::Similarity => {
            sort_descending(&mut entries);
            entries.truncate(k);
            entries
        }
        ScenarioKind::Plurality => {
            sort_ascending(&mut entries);
            entries.truncate(k);
            entries
        }
        ScenarioKind::Balanced => {
            let top_count = (balance_ratio * k as f64).round() as usize;
            let top_count = top_count.min(k);
            sort_descending(&mut entries);
            let mut picked: Vec<(f64, &Post)> = entries[..top_count].to_vec();
            let bottom_needed = k - top_count;
            if bottom_needed > 0 {
                let mut rest: Vec<(f64, &Post)> = entries[top_count..].to_vec();
                sort_ascending(&mut rest);
                picked.extend(rest.into_iter().take(bottom_needed));
            }
            picked
        }
    };
    sort_descending(&mut chosen);
    Ok(chosen.into_iter().map(|(_, post)| post).collect())
}

/// Scalar impact of a consumed selection: the mean affinity between the
/// agent and each selected post, clamped to `[-1, 1]`. All three scenario
/// setups share this averaging form; they differ only in what `select`
/// handed them.
pub fn impact(
    _kind: ScenarioKind,
    agent: &AgentPrompt,
    selected: &[&Post],
    weights: &AffinityWeights,
) -> Result<f64, SelectError> {
    if selected.is_empty() {
        return Err(SelectError::EmptySelection);
    }
    let sum: f64 = selected
        .iter()
        .map(|post| affinity(agent, post, weights).value())
        .sum();
    Ok((sum / selected.len() as f64).clamp(-1.0, 1.0))
}
