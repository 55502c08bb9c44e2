//! Agent profiles: identity, personality traits, dynamic state, and the
//! population sources (random generation and the bundled 22-profile
//! fixture).
//!
//! Each profile combines descriptive dimensions (nickname, bio, interests)
//! with seven static personality traits on a 1–7 scale and three dynamic
//! traits (political attitude, social connectivity, emotive reaction) that
//! drift during a simulation. Two run-level scores ride along: a
//! polarization score and an engagement score, both in `[-1, 1]` where
//! `-1` means extremely polarized / not engaged at all.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Opaque agent identifier. Ordering follows roster order (fixture file
/// order, or generation order), which is the canonical iteration order of
/// the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Errors raised while constructing or loading agents.
#[derive(Debug, Error)]
pub enum AgentError {
    #[error("{field} out of range: {value} (expected {min}..={max})")]
    RangeError {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("interests must not be empty")]
    EmptyInterests,
    #[error("agent cannot be its own friend")]
    SelfFriend,
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("agent fixture corrupt: {0}")]
    FixtureCorrupt(String),
}

fn check_range(
    field: &'static str,
    value: f64,
    min: f64,
    max: f64,
) -> Result<(), AgentError> {
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(AgentError::RangeError {
            field,
            value,
            min,
            max,
        })
    }
}

fn check_likert_int(field: &'static str, value: u8) -> Result<(), AgentError> {
    if (1..=7).contains(&value) {
        Ok(())
    } else {
        Err(AgentError::RangeError {
            field,
            value: value as f64,
            min: 1.0,
            max: 7.0,
        })
    }
}

/// The seven fixed personality traits, each an integer on the 1–7 scale.
/// `cognitive_style` runs from very analytical (1) to very emotional (7);
/// `open_mindedness` from very closed-minded (1) to very open-minded (7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticTraits {
    pub openness: u8,
    pub conscientiousness: u8,
    pub extraversion: u8,
    pub agreeableness: u8,
    pub neuroticism: u8,
    pub cognitive_style: u8,
    pub open_mindedness: u8,
}

impl StaticTraits {
    pub fn validate(&self) -> Result<(), AgentError> {
        check_likert_int("openness", self.openness)?;
        check_likert_int("conscientiousness", self.conscientiousness)?;
        check_likert_int("extraversion", self.extraversion)?;
        check_likert_int("agreeableness", self.agreeableness)?;
        check_likert_int("neuroticism", self.neuroticism)?;
        check_likert_int("cognitive_style", self.cognitive_style)?;
        check_likert_int("open_mindedness", self.open_mindedness)?;
        Ok(())
    }
}

/// The three traits that evolve during a run. Stored as reals so drift can
/// be gradual; fixture values start on integer scale points. Political
/// attitude runs from extremely liberal (1) to extremely conservative (7).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicTraits {
    pub political_attitude: f64,
    pub social_connectivity: f64,
    pub emotive_reaction: f64,
}

impl DynamicTraits {
    pub fn validate(&self) -> Result<(), AgentError> {
        check_range("political_attitude", self.political_attitude, 1.0, 7.0)?;
        check_range("social_connectivity", self.social_connectivity, 1.0, 7.0)?;
        check_range("emotive_reaction", self.emotive_reaction, 1.0, 7.0)?;
        Ok(())
    }

    /// Clamp every trait back into the 1–7 band.
    pub fn clamped(self) -> Self {
        DynamicTraits {
            political_attitude: self.political_attitude.clamp(1.0, 7.0),
            social_connectivity: self.social_connectivity.clamp(1.0, 7.0),
            emotive_reaction: self.emotive_reaction.clamp(1.0, 7.0),
        }
    }
}

/// Friend list kept as a sorted vector: cheap to iterate and index during
/// candidate sampling, set semantics enforced on insert.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FriendSet(Vec<AgentId>);

impl FriendSet {
    pub fn new() -> Self {
        FriendSet(Vec::new())
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    /// Insert, returning true when the id was not already present.
    pub fn insert(&mut self, id: AgentId) -> bool {
        match self.0.binary_search(&id) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, id);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[AgentId] {
        &self.0
    }
}

impl FromIterator<AgentId> for FriendSet {
    fn from_iter<T: IntoIterator<Item = AgentId>>(iter: T) -> Self {
        let mut set = FriendSet::new();
        for id in iter {
            set.insert(id);
        }
        set
    }
}

/// A fully validated agent profile.
///
/// Values are immutable snapshots from the caller's point of view; the
/// engine owns the single mutable copy per agent and only touches it in
/// its serial apply phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPrompt {
    pub id: AgentId,
    /// Stable external identifier, e.g. `PROFILE_1` or `A000042`. Used in
    /// transcripts and reports.
    pub key: String,
    pub nickname: String,
    pub bio: String,
    pub interests: BTreeSet<String>,
    pub static_traits: StaticTraits,
    pub dynamic_traits: DynamicTraits,
    /// Polarization score in `[-1, 1]`; -1 = extremely polarized.
    pub polarization: f64,
    /// Engagement score in `[-1, 1]`; -1 = not engaged at all.
    pub engagement: f64,
    pub friends: FriendSet,
    /// Daily-activity time factor in `[0, 1]`: the fraction of the maximum
    /// daily browsing capacity this agent spends on the network.
    pub activity_factor: f64,
}

/// Everything needed to construct one agent. `polarization`/`engagement`
/// default to 0.0 when absent.
#[derive(Debug, Clone)]
pub struct AgentDescriptor {
    pub id: AgentId,
    pub key: String,
    pub nickname: String,
    pub bio: String,
    pub interests: Vec<String>,
    pub static_traits: StaticTraits,
    pub dynamic_traits: DynamicTraits,
    pub polarization: Option<f64>,
    pub engagement: Option<f64>,
    pub friends: Vec<AgentId>,
    pub activity_factor: f64,
}

/// Validate a descriptor and build the agent.
pub fn new_agent(descriptor: AgentDescriptor) -> Result<AgentPrompt, AgentError> {
    descriptor.static_traits.validate()?;
    descriptor.dynamic_traits.validate()?;
    let polarization = descriptor.polarization.unwrap_or(0.0);
    let engagement = descriptor.engagement.unwrap_or(0.0);
    check_range("polarization", polarization, -1.0, 1.0)?;
    check_range("engagement", engagement, -1.0, 1.0)?;
    check_range("activity_factor", descriptor.activity_factor, 0.0, 1.0)?;
    if descriptor.interests.is_empty() {
        return Err(AgentError::EmptyInterests);
    }
    if descriptor.friends.contains(&descriptor.id) {
        return Err(AgentError::SelfFriend);
    }
    let interests: BTreeSet<String> = descriptor
        .interests
        .iter()
        .map(|tag| tag.trim().to_lowercase())
        .filter(|tag| !tag.is_empty())
        .collect();
    if interests.is_empty() {
        return Err(AgentError::EmptyInterests);
    }
    Ok(AgentPrompt {
        id: descriptor.id,
        key: descriptor.key,
        nickname: descriptor.nickname,
        bio: descriptor.bio,
        interests,
        static_traits: descriptor.static_traits,
        dynamic_traits: descriptor.dynamic_traits,
        polarization,
        engagement,
        friends: descriptor.friends.into_iter().collect(),
        activity_factor: descriptor.activity_factor,
    })
}

/// Fixed interest vocabulary shared by the population generator and the
/// content fixture. Lowercase, sorted.
pub const TAG_VOCABULARY: &[&str] = &[
    "activism",
    "art",
    "borders",
    "business",
    "climate",
    "community",
    "conspiracy",
    "culture",
    "economy",
    "education",
    "energy",
    "environment",
    "faith",
    "family",
    "freedom",
    "health",
    "healthcare",
    "immigration",
    "justice",
    "media",
    "nature",
    "patriotism",
    "science",
    "security",
    "sports",
    "technology",
    "tradition",
    "travel",
];

const NICK_ADJECTIVES: &[&str] = &[
    "Quiet", "Bold", "Sunny", "Mellow", "Sharp", "Wandering", "Curious", "Steady", "Vivid",
    "Rustic", "Urban", "Northern", "Candid", "Gentle", "Restless", "Witty",
];

const NICK_NOUNS: &[&str] = &[
    "Fox", "Heron", "Cedar", "Harbor", "Comet", "Maple", "Falcon", "River", "Summit", "Willow",
    "Badger", "Lantern", "Anchor", "Meadow", "Compass", "Ember",
];

/// Generate `n` agents fully determined by `(n, seed)`.
///
/// Each agent draws from its own derived stream, so the first `k` agents of
/// a size-`n` population are identical to the size-`k` population for the
/// same seed.
pub fn generate_population(n: usize, seed: u64) -> Result<Vec<AgentPrompt>, AgentError> {
    if n == 0 {
        return Err(AgentError::EmptyPopulation);
    }
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = rng::stream(seed, rng::purpose::POPULATION, i as u64, 0);
        let static_traits = StaticTraits {
            openness: rng.gen_range(1..=7),
            conscientiousness: rng.gen_range(1..=7),
            extraversion: rng.gen_range(1..=7),
            agreeableness: rng.gen_range(1..=7),
            neuroticism: rng.gen_range(1..=7),
            cognitive_style: rng.gen_range(1..=7),
            open_mindedness: rng.gen_range(1..=7),
        };
        let dynamic_traits = DynamicTraits {
            political_attitude: rng.gen_range(1..=7) as f64,
            social_connectivity: rng.gen_range(1..=7) as f64,
            emotive_reaction: rng.gen_range(1..=7) as f64,
        };
        let activity_factor = rng.gen_range(0.2..=1.0);
        let tag_count = rng.gen_range(2..=6usize);
        let interests: Vec<String> = sample(&mut rng, TAG_VOCABULARY.len(), tag_count)
            .into_iter()
            .map(|idx| TAG_VOCABULARY[idx].to_string())
            .collect();
        let adjective = NICK_ADJECTIVES[rng.gen_range(0..NICK_ADJECTIVES.len())];
        let noun = NICK_NOUNS[rng.gen_range(0..NICK_NOUNS.len())];
        let nickname = format!("{adjective}{noun}{}", i + 1);
        let bio = format!("Mostly here for {}.", interests.join(" and "));
        let agent = new_agent(AgentDescriptor {
            id: AgentId(i as u32),
            key: format!("A{:06}", i + 1),
            nickname,
            bio,
            interests,
            static_traits,
            dynamic_traits,
            polarization: None,
            engagement: None,
            friends: Vec::new(),
            activity_factor,
        })?;
        agents.push(agent);
    }
    Ok(agents)
}

/// Row shape of `fixtures/agents_22.json`. Key set is exact; anything else
/// is a schema mismatch.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureAgentRow {
    id: String,
    nickname: String,
    bio: String,
    interests: Vec<String>,
    o: u8,
    c: u8,
    e: u8,
    a: u8,
    n: u8,
    cs: u8,
    om: u8,
    pa: f64,
    sc: f64,
    er: f64,
    #[serde(rename = "T")]
    t: f64,
}

const AGENTS_FIXTURE: &str = include_str!("../fixtures/agents_22.json");

/// Load the bundled 22-profile experimental fixture.
pub fn load_fixture_profiles() -> Result<Vec<AgentPrompt>, AgentError> {
    parse_fixture_profiles(AGENTS_FIXTURE)
}

/// Parse agent profiles from a fixture document (see
/// `fixtures/agents_22.json` for the schema).
pub fn parse_fixture_profiles(json: &str) -> Result<Vec<AgentPrompt>, AgentError> {
    let rows: Vec<FixtureAgentRow> =
        serde_json::from_str(json).map_err(|e| AgentError::FixtureCorrupt(e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut agents = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        if !seen.insert(row.id.clone()) {
            return Err(AgentError::FixtureCorrupt(format!(
                "duplicate agent id {}",
                row.id
            )));
        }
        let agent = new_agent(AgentDescriptor {
            id: AgentId(i as u32),
            key: row.id,
            nickname: row.nickname,
            bio: row.bio,
            interests: row.interests,
            static_traits: StaticTraits {
                openness: row.o,
                conscientiousness: row.c,
                extraversion: row.e,
                agreeableness: row.a,
                neuroticism: row.n,
                cognitive_style: row.cs,
                open_mindedness: row.om,
            },
            dynamic_traits: DynamicTraits {
                political_attitude: row.pa,
                social_connectivity: row.sc,
                emotive_reaction: row.er,
            },
            polarization: None,
            engagement: None,
            friends: Vec::new(),
            activity_factor: row.t,
        })
        .map_err(|e| AgentError::FixtureCorrupt(e.to_string()))?;
        agents.push(agent);
    }
    Ok(agents)
}

/// Caps on how many posts an agent consumes per day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostCaps {
    pub min: usize,
    pub max: usize,
}

impl Default for PostCaps {
    fn default() -> Self {
        PostCaps { min: 5, max: 30 }
    }
}

/// Number of posts the agent consumes today: `round(min + T·(max−min))`,
/// half away from zero. Monotone non-decreasing in the activity factor.
pub fn posts_per_day(agent: &AgentPrompt, caps: PostCaps) -> usize {
    assert!(
        caps.min >= 1 && caps.min <= caps.max,
        "post caps must satisfy 1 <= min <= max"
    );
    let span = (caps.max - caps.min) as f64;
    (caps.min as f64 + agent.activity_factor * span).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base_descriptor() -> AgentDescriptor {
        AgentDescriptor {
            id: AgentId(0),
            key: "T1".into(),
            nickname: "Tester".into(),
            bio: "bio".into(),
            interests: vec!["art".into(), "science".into()],
            static_traits: StaticTraits {
                openness: 4,
                conscientiousness: 4,
                extraversion: 4,
                agreeableness: 4,
                neuroticism: 4,
                cognitive_style: 4,
                open_mindedness: 4,
            },
            dynamic_traits: DynamicTraits {
                political_attitude: 4.0,
                social_connectivity: 4.0,
                emotive_reaction: 4.0,
            },
            polarization: None,
            engagement: None,
            friends: Vec::new(),
            activity_factor: 0.5,
        }
    }

    #[test]
    fn rejects_out_of_scale_openness() {
        let mut d = base_descriptor();
        d.static_traits.openness = 8;
        match new_agent(d) {
            Err(AgentError::RangeError { field, .. }) => assert_eq!(field, "openness"),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_interests() {
        let mut d = base_descriptor();
        d.interests.clear();
        assert!(matches!(new_agent(d), Err(AgentError::EmptyInterests)));
    }

    #[test]
    fn rejects_self_friendship() {
        let mut d = base_descriptor();
        d.friends = vec![AgentId(0)];
        assert!(matches!(new_agent(d), Err(AgentError::SelfFriend)));
    }

    #[test]
    fn defaults_scores_to_zero() {
        let agent = new_agent(base_descriptor()).unwrap();
        assert_eq!(agent.polarization, 0.0);
        assert_eq!(agent.engagement, 0.0);
    }

    /// One trait at a time, sweep the whole 0..=8 grid: exactly the values
    /// outside 1..=7 must be rejected.
    #[test]
    fn static_trait_grid_acceptance() {
        type Setter = fn(&mut StaticTraits, u8);
        let setters: [(&str, Setter); 7] = [
            ("openness", |t, v| t.openness = v),
            ("conscientiousness", |t, v| t.conscientiousness = v),
            ("extraversion", |t, v| t.extraversion = v),
            ("agreeableness", |t, v| t.agreeableness = v),
            ("neuroticism", |t, v| t.neuroticism = v),
            ("cognitive_style", |t, v| t.cognitive_style = v),
            ("open_mindedness", |t, v| t.open_mindedness = v),
        ];
        for (field, set) in setters {
            for value in 0..=8u8 {
                let mut d = base_descriptor();
                set(&mut d.static_traits, value);
                let result = new_agent(d);
                if (1..=7).contains(&value) {
                    assert!(result.is_ok(), "{field}={value} should be accepted");
                } else {
                    match result {
                        Err(AgentError::RangeError { field: f, .. }) => assert_eq!(f, field),
                        other => panic!("{field}={value} should be rejected, got {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn population_is_deterministic() {
        let a = generate_population(5, 7).unwrap();
        let b = generate_population(5, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn population_varies_with_seed() {
        let a = generate_population(5, 7).unwrap();
        let b = generate_population(5, 8).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn population_prefix_stable_under_growth() {
        let small = generate_population(5, 7).unwrap();
        let large = generate_population(8, 7).unwrap();
        assert_eq!(&large[..5], &small[..]);
    }

    #[test]
    fn population_at_scale_is_valid() {
        let agents = generate_population(10_000, 1).unwrap();
        assert_eq!(agents.len(), 10_000);
        let mut keys = BTreeSet::new();
        for agent in &agents {
            agent.static_traits.validate().unwrap();
            agent.dynamic_traits.validate().unwrap();
            assert!((0.2..=1.0).contains(&agent.activity_factor));
            let count = agent.interests.len();
            assert!((2..=6).contains(&count));
            assert!(keys.insert(agent.key.clone()), "duplicate key {}", agent.key);
        }
    }

    #[test]
    fn rejects_empty_population() {
        assert!(matches!(
            generate_population(0, 1),
            Err(AgentError::EmptyPopulation)
        ));
    }

    #[test]
    fn fixture_has_22_unique_profiles() {
        let agents = load_fixture_profiles().unwrap();
        assert_eq!(agents.len(), 22);
        let keys: BTreeSet<_> = agents.iter().map(|a| a.key.as_str()).collect();
        assert_eq!(keys.len(), 22);
    }

    #[test]
    fn fixture_anchor_profiles_match_their_descriptions() {
        let agents = load_fixture_profiles().unwrap();
        let get = |key: &str| agents.iter().find(|a| a.key == key).unwrap();

        let anna = get("PROFILE_1");
        assert_eq!(anna.nickname, "ArtLoverAnna");
        assert!(anna.static_traits.openness >= 6);
        assert!(anna.static_traits.agreeableness >= 6);
        assert_eq!(anna.static_traits.conscientiousness, 4);
        assert_eq!(anna.static_traits.extraversion, 4);
        assert!(anna.dynamic_traits.political_attitude < 4.0);
        assert!(anna.dynamic_traits.social_connectivity >= 6.0);
        assert_eq!(anna.dynamic_traits.emotive_reaction, 4.0);

        let tom = get("PROFILE_21");
        assert_eq!(tom.nickname, "TruthSeekerTom");
        assert!(tom.static_traits.openness <= 2);
        assert!(tom.static_traits.agreeableness <= 2);
        assert!(tom.static_traits.neuroticism >= 6);
        assert!(tom.static_traits.cognitive_style >= 6);
        assert_eq!(tom.dynamic_traits.political_attitude, 7.0);
        assert_eq!(tom.dynamic_traits.emotive_reaction, 7.0);

        let alex = get("PROFILE_22");
        assert_eq!(alex.nickname, "ActivistAlex");
        assert_eq!(alex.static_traits.openness, 7);
        assert_eq!(alex.static_traits.agreeableness, 7);
        assert_eq!(alex.static_traits.extraversion, 7);
        assert_eq!(alex.dynamic_traits.political_attitude, 1.0);
    }

    #[test]
    fn fixture_rejects_unknown_keys() {
        let doc = r#"[{"id":"X","nickname":"n","bio":"b","interests":["art"],
            "o":4,"c":4,"e":4,"a":4,"n":4,"cs":4,"om":4,
            "pa":4,"sc":4,"er":4,"T":0.5,"bogus":1}]"#;
        assert!(matches!(
            parse_fixture_profiles(doc),
            Err(AgentError::FixtureCorrupt(_))
        ));
    }

    #[test]
    fn posts_per_day_bounds_and_rounding() {
        let mut agent = new_agent(base_descriptor()).unwrap();
        let caps = PostCaps { min: 5, max: 30 };
        agent.activity_factor = 0.0;
        assert_eq!(posts_per_day(&agent, caps), 5);
        agent.activity_factor = 1.0;
        assert_eq!(posts_per_day(&agent, caps), 30);
        // 5 + 0.5·25 = 17.5, rounds half-up.
        agent.activity_factor = 0.5;
        assert_eq!(posts_per_day(&agent, caps), 18);
    }

    proptest! {
        #[test]
        fn generated_traits_always_in_range(seed in any::<u64>(), n in 1usize..200) {
            let agents = generate_population(n, seed).unwrap();
            for agent in agents {
                agent.static_traits.validate().unwrap();
                agent.dynamic_traits.validate().unwrap();
                prop_assert!((0.0..=1.0).contains(&agent.activity_factor));
                prop_assert!(!agent.interests.is_empty());
            }
        }

        #[test]
        fn posts_per_day_monotone_and_bounded(
            t1 in 0.0f64..=1.0,
            t2 in 0.0f64..=1.0,
            min in 1usize..20,
            extra in 0usize..40,
        ) {
            let caps = PostCaps { min, max: min + extra };
            let mut agent = new_agent(base_descriptor()).unwrap();
            agent.activity_factor = t1;
            let low = posts_per_day(&agent, caps);
            agent.activity_factor = t2;
            let high = posts_per_day(&agent, caps);
            prop_assert!((caps.min..=caps.max).contains(&low));
            prop_assert!((caps.min..=caps.max).contains(&high));
            if t1 <= t2 {
                prop_assert!(low <= high);
            }
        }
    }
}
