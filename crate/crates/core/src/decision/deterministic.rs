//! The rule-based decision backend: a pure function of the agent, the
//! post, and the agent's dedicated seeded stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{AgentPrompt, DynamicTraits};
use crate::content::{Post, SourceKind};
use crate::recommender::{affinity, AffinityWeights};

use super::{
    DecisionBackend, DecisionContext, DecisionError, DecisionRules, InteractionOutcome,
    ReactionKind, SessionSummary,
};

/// Deterministic backend configured by one rule block and the affinity
/// weights the run uses.
#[derive(Debug, Clone, Default)]
pub struct DeterministicBackend {
    pub rules: DecisionRules,
    pub weights: AffinityWeights,
}

impl DeterministicBackend {
    pub fn new(rules: DecisionRules, weights: AffinityWeights) -> Self {
        DeterministicBackend { rules, weights }
    }
}

fn likert_offset(value: f64) -> f64 {
    (value - 4.0) / 3.0
}

/// Engagement probability:
/// `clamp(0.5 + 0.35·|affinity| + 0.1·(e−4)/3 + 0.05·(er−4)/3, 0.05, 0.95)`
/// under default rules. Disagreement engages too — the affinity term is
/// absolute, so outrage pulls an agent in as strongly as alignment.
pub fn engage_probability(agent: &AgentPrompt, affinity_value: f64, rules: &DecisionRules) -> f64 {
    let p = rules.engage_base
        + rules.engage_affinity_weight * affinity_value.abs()
        + rules.engage_extraversion_weight * likert_offset(agent.static_traits.extraversion as f64)
        + rules.engage_emotive_weight * likert_offset(agent.dynamic_traits.emotive_reaction);
    p.clamp(rules.engage_floor, rules.engage_ceiling)
}

fn reaction_for(agent: &AgentPrompt, affinity_value: f64, rules: &DecisionRules) -> ReactionKind {
    if affinity_value >= rules.love_threshold {
        ReactionKind::Love
    } else if affinity_value >= rules.care_threshold {
        if agent.static_traits.cognitive_style >= rules.care_cognitive_min {
            ReactionKind::Care
        } else {
            ReactionKind::Like
        }
    } else if affinity_value > rules.negative_threshold {
        ReactionKind::Wow
    } else if agent.dynamic_traits.emotive_reaction >= rules.angry_emotive_min {
        ReactionKind::Angry
    } else {
        ReactionKind::Sad
    }
}

fn stance_direction(post: &Post) -> &'static str {
    if post.stance >= 4.5 {
        "right-leaning"
    } else if post.stance <= 3.5 {
        "left-leaning"
    } else {
        "middle-of-the-road"
    }
}

fn comment_text(post: &Post, reaction: ReactionKind) -> String {
    let direction = stance_direction(post);
    let phrase = if reaction.is_negative() {
        format!("cannot get behind this {direction} take")
    } else if reaction == ReactionKind::Wow {
        format!("still chewing on this {direction} take")
    } else {
        format!("right there with this {direction} take")
    };
    format!("Re {}: {}", post.key, phrase)
}

/// Decide one interaction.
///
/// Draw order on the stream is fixed: one engagement draw; if engaged, one
/// read-comments draw and one comment draw. Reaction kind, sharing, and
/// friend-requesting are threshold rules with no randomness.
pub fn decide_deterministic(
    agent: &AgentPrompt,
    post: &Post,
    ctx: &DecisionContext,
    rng: &mut ChaCha8Rng,
    rules: &DecisionRules,
    weights: &AffinityWeights,
) -> InteractionOutcome {
    let affinity_value = ctx
        .affinity
        .unwrap_or_else(|| affinity(agent, post, weights).value());
    let p = engage_probability(agent, affinity_value, rules);
    if rng.gen::<f64>() >= p {
        return InteractionOutcome::skip();
    }
    let reaction = reaction_for(agent, affinity_value, rules);
    let mut read_comments = rng.gen::<f64>() < p;
    let commented = rng.gen::<f64>() < rules.comment_factor * p;
    let comment = if commented {
        read_comments = true;
        Some(comment_text(post, reaction))
    } else {
        None
    };
    let shared = matches!(reaction, ReactionKind::Love | ReactionKind::Care)
        && agent.static_traits.agreeableness >= rules.share_agreeableness_min;
    let friend_requested = ctx.served_from == SourceKind::Trending
        && reaction.is_positive()
        && agent.dynamic_traits.social_connectivity >= rules.friend_request_connectivity_min
        && post.author_id().is_some();
    InteractionOutcome {
        reaction,
        read_comments,
        comment_text: comment,
        shared,
        friend_requested,
    }
}

impl DecisionBackend for DeterministicBackend {
    fn decide(
        &self,
        agent: &AgentPrompt,
        post: &Post,
        ctx: &DecisionContext,
        rng: &mut ChaCha8Rng,
    ) -> Result<InteractionOutcome, DecisionError> {
        Ok(decide_deterministic(
            agent,
            post,
            ctx,
            rng,
            &self.rules,
            &self.weights,
        ))
    }

    fn report_trait_deltas(
        &self,
        _agent: &AgentPrompt,
        _summary: &SessionSummary,
    ) -> Result<Option<DynamicTraits>, DecisionError> {
        // Trait movement comes from the drift law instead.
        Ok(None)
    }

    fn name(&self) -> &'static str {
        "deterministic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{new_agent, AgentDescriptor, AgentId, StaticTraits};
    use crate::content::{ContentPool, NewsId, PostOrigin};
    use crate::rng;

    fn agent_with(e: u8, cs: u8, a: u8, er: f64, sc: f64, pa: f64) -> AgentPrompt {
        new_agent(AgentDescriptor {
            id: AgentId(0),
            key: "T".into(),
            nickname: "t".into(),
            bio: String::new(),
            interests: vec!["art".into()],
            static_traits: StaticTraits {
                openness: 4,
                conscientiousness: 4,
                extraversion: e,
                agreeableness: a,
                neuroticism: 4,
                cognitive_style: cs,
                open_mindedness: 4,
            },
            dynamic_traits: DynamicTraits {
                political_attitude: pa,
                social_connectivity: sc,
                emotive_reaction: er,
            },
            polarization: None,
            engagement: None,
            friends: Vec::new(),
            activity_factor: 0.5,
        })
        .unwrap()
    }

    fn one_post(stance: f64, tags: &[&str]) -> ContentPool {
        let mut pool = ContentPool::empty();
        let tags: Vec<String> = tags.iter().map(|s| s.to_string()).collect();
        pool.add_imposed_post("x1", PostOrigin::News(NewsId(0)), None, stance, &tags, "text")
            .unwrap();
        pool
    }

    fn decide_engaged(
        agent: &AgentPrompt,
        pool: &ContentPool,
        affinity_value: f64,
    ) -> InteractionOutcome {
        // Walk seeds until the engagement draw lands; thresholds are
        // deterministic so the reaction is seed-independent.
        let post = pool.post(crate::content::PostId(0));
        let ctx = DecisionContext {
            day: 0,
            served_from: post.source_kind,
            affinity: Some(affinity_value),
        };
        let rules = DecisionRules::default();
        let weights = AffinityWeights::default();
        for seed in 0..64 {
            let mut stream = rng::stream(seed, rng::purpose::DECIDE, 0, 0);
            let outcome = decide_deterministic(agent, post, &ctx, &mut stream, &rules, &weights);
            if outcome.engaged() {
                return outcome;
            }
        }
        panic!("no engagement in 64 seeds despite high probability");
    }

    #[test]
    fn full_alignment_earns_love() {
        let agent = agent_with(4, 4, 4, 4.0, 4.0, 7.0);
        let pool = one_post(7.0, &["art"]);
        let outcome = decide_engaged(&agent, &pool, 1.0);
        assert_eq!(outcome.reaction, ReactionKind::Love);
    }

    #[test]
    fn strong_disagreement_with_high_reactivity_earns_angry() {
        let agent = agent_with(4, 7, 2, 7.0, 4.0, 7.0);
        let pool = one_post(1.0, &["sports"]);
        let outcome = decide_engaged(&agent, &pool, -1.0);
        assert_eq!(outcome.reaction, ReactionKind::Angry);
    }

    #[test]
    fn strong_disagreement_with_low_reactivity_earns_sad() {
        let agent = agent_with(4, 4, 4, 2.0, 4.0, 1.0);
        let pool = one_post(7.0, &["sports"]);
        let outcome = decide_engaged(&agent, &pool, -0.9);
        assert_eq!(outcome.reaction, ReactionKind::Sad);
    }

    #[test]
    fn threshold_table() {
        let emotional = agent_with(4, 5, 4, 5.0, 4.0, 4.0);
        let analytical = agent_with(4, 2, 4, 2.0, 4.0, 4.0);
        let rules = DecisionRules::default();
        assert_eq!(reaction_for(&emotional, 0.6, &rules), ReactionKind::Love);
        assert_eq!(reaction_for(&emotional, 0.4, &rules), ReactionKind::Care);
        assert_eq!(reaction_for(&analytical, 0.4, &rules), ReactionKind::Like);
        assert_eq!(reaction_for(&emotional, 0.0, &rules), ReactionKind::Wow);
        assert_eq!(reaction_for(&emotional, -0.25, &rules), ReactionKind::Angry);
        assert_eq!(reaction_for(&analytical, -0.25, &rules), ReactionKind::Sad);
    }

    #[test]
    fn identical_inputs_identical_outcomes() {
        let agent = agent_with(6, 4, 6, 5.0, 6.0, 5.0);
        let pool = one_post(5.0, &["art"]);
        let post = pool.post(crate::content::PostId(0));
        let ctx = DecisionContext::standalone(post);
        let rules = DecisionRules::default();
        let weights = AffinityWeights::default();
        for seed in 0..16 {
            let mut r1 = rng::stream(seed, rng::purpose::DECIDE, 1, 2);
            let mut r2 = rng::stream(seed, rng::purpose::DECIDE, 1, 2);
            let o1 = decide_deterministic(&agent, post, &ctx, &mut r1, &rules, &weights);
            let o2 = decide_deterministic(&agent, post, &ctx, &mut r2, &rules, &weights);
            assert_eq!(o1, o2);
        }
    }

    #[test]
    fn sharing_requires_warm_reaction_and_agreeableness() {
        let agreeable = agent_with(4, 5, 6, 4.0, 4.0, 7.0);
        let pool = one_post(7.0, &["art"]);
        let outcome = decide_engaged(&agreeable, &pool, 1.0);
        assert!(outcome.shared);

        let disagreeable = agent_with(4, 5, 2, 4.0, 4.0, 7.0);
        let outcome = decide_engaged(&disagreeable, &pool, 1.0);
        assert!(!outcome.shared);
    }

    #[test]
    fn friend_requests_only_for_trending_posts() {
        let connected = agent_with(4, 4, 6, 4.0, 7.0, 7.0);
        // Imposed serving surface: no request even when loved.
        let pool = one_post(7.0, &["art"]);
        let outcome = decide_engaged(&connected, &pool, 1.0);
        assert!(!outcome.friend_requested);
    }

    #[test]
    fn outcomes_always_satisfy_invariants() {
        let agent = agent_with(5, 5, 5, 5.0, 5.0, 3.0);
        let pool = one_post(6.0, &["sports"]);
        let post = pool.post(crate::content::PostId(0));
        let ctx = DecisionContext::standalone(post);
        let rules = DecisionRules::default();
        let weights = AffinityWeights::default();
        for seed in 0..512 {
            let mut stream = rng::stream(seed, rng::purpose::DECIDE, 0, 0);
            let outcome = decide_deterministic(&agent, post, &ctx, &mut stream, &rules, &weights);
            outcome.validate().unwrap();
        }
    }

    /// Engagement frequency over 10^4 draws tracks the declared
    /// probability within two percentage points.
    #[test]
    fn engagement_rate_matches_declared_probability() {
        let agent = agent_with(6, 4, 4, 5.0, 4.0, 5.0);
        let pool = one_post(3.0, &["art"]);
        let post = pool.post(crate::content::PostId(0));
        let rules = DecisionRules::default();
        let weights = AffinityWeights::default();
        let ctx = DecisionContext::standalone(post);
        let affinity_value = affinity(&agent, post, &weights).value();
        let expected = engage_probability(&agent, affinity_value, &rules);

        let mut stream = rng::stream(77, rng::purpose::DECIDE, 0, 0);
        let trials = 10_000;
        let mut engaged = 0;
        for _ in 0..trials {
            let outcome = decide_deterministic(&agent, post, &ctx, &mut stream, &rules, &weights);
            if outcome.engaged() {
                engaged += 1;
            }
        }
        let rate = engaged as f64 / trials as f64;
        assert!(
            (rate - expected).abs() < 0.02,
            "rate {rate} vs declared {expected}"
        );
    }
}
