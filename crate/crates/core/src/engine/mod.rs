//! The simulation loop.
//!
//! One day, per agent: assemble candidates, select by scenario policy,
//! decide each interaction through the backend, update both scores from
//! the day's impact, drift (or self-report) the dynamic traits, then apply
//! all mutations serially — friendships, newly authored posts, transcript
//! records — in ascending agent order. The planning phase fans out across
//! threads because every agent reads the frozen day-start snapshot; the
//! apply phase is single-writer, so outputs never depend on thread count.

pub mod transcript;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::agents::{
    generate_population, load_fixture_profiles, posts_per_day, AgentError, AgentId, AgentPrompt,
    DynamicTraits,
};
use crate::config::{BackendChoice, ConfigError, PopulationSource, RunConfig};
use crate::content::{
    build_fixture_pool, Candidate, CandidateRequest, ContentError, ContentPool, Post, PostId,
    SourceKind,
};
use crate::decision::{
    CassetteStore, DecisionBackend, DecisionContext, DecisionError, DeterministicBackend,
    HttpChatTransport, InteractionOutcome, LlmBackend, RecordingTransport, ReplayTransport,
    SessionSummary,
};
use crate::dynamics::{
    drift_dynamic_traits, update_engagement, update_polarization, DynamicsError, StepActivity,
};
use crate::metrics::{score_summary, DailyMeans, ReactionTally, ScoreSummary};
use crate::recommender::{affinity, impact, select, ScenarioKind, SelectError};
use crate::rng;

pub use transcript::{
    verify_file, AuditReport, InteractionRecord, RecordRow, TranscriptError, TranscriptHandle,
    TranscriptMeta, TranscriptSink,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("agents: {0}")]
    Agent(#[from] AgentError),
    #[error("content: {0}")]
    Content(#[from] ContentError),
    #[error("recommender: {0}")]
    Select(#[from] SelectError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("decision backend (day {day}, agent {agent}): {source}")]
    Backend {
        day: u32,
        agent: String,
        source: DecisionError,
    },
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("transcript: {0}")]
    Transcript(#[from] TranscriptError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Mutable world state owned by the engine.
pub struct SimulationState {
    pub day: u32,
    pub agents: Vec<AgentPrompt>,
    pub pool: ContentPool,
    pub root_seed: u64,
    /// Per agent, the sorted ids of every post already served to it. Keeps
    /// feeds fresh and guarantees no second reaction to the same post.
    seen: Vec<Vec<PostId>>,
}

impl SimulationState {
    pub fn new(agents: Vec<AgentPrompt>, pool: ContentPool, root_seed: u64) -> Self {
        let seen = vec![Vec::new(); agents.len()];
        SimulationState {
            day: 0,
            agents,
            pool,
            root_seed,
            seen,
        }
    }

    pub fn seen_by(&self, agent: AgentId) -> &[PostId] {
        &self.seen[agent.index()]
    }
}

/// Everything one agent wants to change about the world after its day,
/// computed against the frozen day-start snapshot.
struct DayPlan {
    idx: usize,
    /// (post, served surface, affinity) in selection order.
    selected: Vec<(PostId, SourceKind, f64)>,
    /// Sorted by post id for transcript order.
    outcomes: Vec<(PostId, InteractionOutcome)>,
    impact: f64,
    new_polarization: f64,
    new_engagement: f64,
    new_traits: DynamicTraits,
    own_post: Option<OwnPostPlan>,
    friend_targets: Vec<AgentId>,
}

struct OwnPostPlan {
    text: String,
    stance: f64,
    tags: Vec<String>,
}

fn plan_own_post(agent: &AgentPrompt, day: u32, root_seed: u64) -> Option<OwnPostPlan> {
    let mut rng = rng::stream(root_seed, rng::purpose::OWN_POST, agent.id.0 as u64, day as u64);
    let chance =
        (agent.static_traits.extraversion as f64 / 7.0) * agent.activity_factor;
    if rng.gen::<f64>() >= chance {
        return None;
    }
    let interests: Vec<&String> = agent.interests.iter().collect();
    let count = interests.len().min(3).max(1);
    let tags: Vec<String> = sample(&mut rng, interests.len(), count)
        .into_iter()
        .map(|i| interests[i].clone())
        .collect();
    let stance = agent.dynamic_traits.political_attitude;
    let subject = tags.first().cloned().unwrap_or_default();
    let text = format!("{} here, thinking about {} today.", agent.nickname, subject);
    Some(OwnPostPlan { text, stance, tags })
}

fn plan_agent(
    state: &SimulationState,
    config: &RunConfig,
    backend: &dyn DecisionBackend,
    idx: usize,
) -> Result<DayPlan, SimError> {
    let agent = &state.agents[idx];
    let day = state.day;
    let weights = config.affinity_weights();
    let own_post = plan_own_post(agent, day, state.root_seed);

    let wanted = posts_per_day(agent, config.posts_per_day);
    let request = CandidateRequest {
        target: wanted * config.oversample_factor,
        mix: config.source_mix,
        exclude: &state.seen[idx],
    };
    let candidates: Vec<Candidate> =
        state.pool.daily_candidates(agent, day, state.root_seed, &request)?;

    if candidates.is_empty() {
        // Feed exhausted: a pause day. Scores hold, the agent may still post.
        return Ok(DayPlan {
            idx,
            selected: Vec::new(),
            outcomes: Vec::new(),
            impact: 0.0,
            new_polarization: agent.polarization,
            new_engagement: agent.engagement,
            new_traits: agent.dynamic_traits,
            own_post,
            friend_targets: Vec::new(),
        });
    }

    let posts: Vec<&Post> = candidates.iter().map(|c| state.pool.post(c.post)).collect();
    let k = wanted.min(candidates.len());
    let picked = select(
        config.scenario,
        agent,
        &posts,
        k,
        config.balance_ratio,
        &weights,
    )?;
    let day_impact = impact(config.scenario, agent, &picked, &weights)?;

    let served_from = |id: PostId| {
        candidates
            .iter()
            .find(|c| c.post == id)
            .map(|c| c.served_from)
            .unwrap_or(SourceKind::Imposed)
    };

    let mut decide_rng = rng::stream(state.root_seed, rng::purpose::DECIDE, idx as u64, day as u64);
    let mut selected = Vec::with_capacity(picked.len());
    let mut outcomes = Vec::with_capacity(picked.len());
    let mut activity = StepActivity::default();
    let mut summary = SessionSummary {
        day,
        posts_consumed: picked.len(),
        ..SessionSummary::default()
    };
    let mut friend_targets: Vec<AgentId> = Vec::new();
    for post in &picked {
        let value = affinity(agent, post, &weights).value();
        let source = served_from(post.id);
        let ctx = DecisionContext {
            day,
            served_from: source,
            affinity: Some(value),
        };
        let outcome = backend
            .decide(agent, post, &ctx, &mut decide_rng)
            .map_err(|source| SimError::Backend {
                day,
                agent: agent.key.clone(),
                source,
            })?;
        if outcome.reaction.is_positive() {
            activity.positive_reactions += 1;
            summary.positive_reactions += 1;
        }
        if outcome.reaction.is_negative() {
            activity.negative_reactions += 1;
            summary.negative_reactions += 1;
        }
        if outcome.comment_text.is_some() {
            summary.comments += 1;
        }
        if outcome.shared {
            summary.shares += 1;
        }
        if outcome.friend_requested {
            activity.friend_requests_sent += 1;
            summary.friend_requests += 1;
            if let Some(author) = post.author_id() {
                if author != agent.id && !agent.friends.contains(author) {
                    friend_targets.push(author);
                }
            }
        }
        selected.push((post.id, source, value));
        outcomes.push((post.id, outcome));
    }
    friend_targets.sort_unstable();
    friend_targets.dedup();
    outcomes.sort_unstable_by_key(|(id, _)| *id);

    let new_polarization = update_polarization(agent.polarization, config.alpha, day_impact)?;
    let new_engagement = update_engagement(
        agent.engagement,
        config.beta,
        agent.activity_factor,
        day_impact,
    )?;
    let overrides = backend
        .report_trait_deltas(agent, &summary)
        .map_err(|source| SimError::Backend {
            day,
            agent: agent.key.clone(),
            source,
        })?;
    let new_traits = match overrides {
        Some(traits) => traits.clamped(),
        None => drift_dynamic_traits(agent, &picked, &activity, &config.dynamics())?,
    };

    Ok(DayPlan {
        idx,
        selected,
        outcomes,
        impact: day_impact,
        new_polarization,
        new_engagement,
        new_traits,
        own_post,
        friend_targets,
    })
}

fn merge_seen(seen: &mut Vec<PostId>, batch: &mut Vec<PostId>) {
    if batch.is_empty() {
        return;
    }
    batch.sort_unstable();
    let old = std::mem::take(seen);
    seen.reserve(old.len() + batch.len());
    let (mut i, mut j) = (0, 0);
    while i < old.len() && j < batch.len() {
        if old[i] <= batch[j] {
            seen.push(old[i]);
            i += 1;
        } else {
            seen.push(batch[j]);
            j += 1;
        }
    }
    seen.extend_from_slice(&old[i..]);
    seen.extend_from_slice(&batch[j..]);
}

/// Optional per-day score series output.
pub enum SeriesSink {
    Disabled,
    File {
        writer: BufWriter<File>,
        tmp: PathBuf,
        path: PathBuf,
    },
}

impl SeriesSink {
    pub fn disabled() -> Self {
        SeriesSink::Disabled
    }

    pub fn file(path: impl Into<PathBuf>) -> Result<Self, SimError> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let tmp = path.with_extension("csv.tmp");
        let mut writer = BufWriter::new(File::create(&tmp)?);
        writer.write_all(b"day,agent_id,p_s,e_s,f\n")?;
        Ok(SeriesSink::File { writer, tmp, path })
    }

    fn row(&mut self, day: u32, agent: &str, p: f64, e: f64, f: f64) -> Result<(), SimError> {
        if let SeriesSink::File { writer, .. } = self {
            writeln!(writer, "{day},{agent},{p},{e},{f}")?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Option<PathBuf>, SimError> {
        match self {
            SeriesSink::Disabled => Ok(None),
            SeriesSink::File {
                mut writer,
                tmp,
                path,
            } => {
                writer.flush()?;
                drop(writer);
                std::fs::rename(&tmp, &path)?;
                Ok(Some(path))
            }
        }
    }
}

/// Advance the state by one day. Planning happens against the day-start
/// snapshot; any backend error aborts before a single mutation lands, so
/// a failed day rolls back to its start and the transcript is untouched.
pub fn run_day(
    state: &mut SimulationState,
    config: &RunConfig,
    backend: &dyn DecisionBackend,
    sink: &mut TranscriptSink,
    series: &mut SeriesSink,
    tallies: &mut [ReactionTally],
) -> Result<DailyMeans, SimError> {
    let day = state.day;
    let plans: Vec<DayPlan> = {
        let snapshot = &*state;
        (0..snapshot.agents.len())
            .into_par_iter()
            .map(|idx| plan_agent(snapshot, config, backend, idx))
            .collect::<Result<Vec<_>, _>>()?
    };

    let mut consuming = 0usize;
    let mut impact_sum = 0.0f64;

    // Scores, traits, transcript, pool bookkeeping — ascending agent id.
    for plan in &plans {
        let idx = plan.idx;
        if !plan.selected.is_empty() {
            let agent = &mut state.agents[idx];
            agent.polarization = plan.new_polarization;
            agent.engagement = plan.new_engagement;
            agent.dynamic_traits = plan.new_traits;
            consuming += 1;
            impact_sum += plan.impact;
        }
        let agent_id = AgentId(idx as u32);
        let agent_key = state.agents[idx].key.clone();
        for (post_id, outcome) in &plan.outcomes {
            if outcome.engaged() {
                state.pool.record_reaction(*post_id, outcome.reaction);
            }
            if outcome.comment_text.is_some() {
                state.pool.record_comment(*post_id, day, agent_id);
            }
            tallies[idx].add_outcome(outcome);
            sink.append(InteractionRecord {
                day,
                agent: agent_id,
                agent_key: agent_key.clone(),
                post: *post_id,
                post_key: state.pool.post(*post_id).key.clone(),
                outcome: outcome.clone(),
                impact: plan.impact,
                polarization: plan.new_polarization,
                engagement: plan.new_engagement,
            })?;
        }
        if !plan.selected.is_empty() {
            series.row(
                day,
                &agent_key,
                plan.new_polarization,
                plan.new_engagement,
                plan.impact,
            )?;
            let mut batch: Vec<PostId> = plan.selected.iter().map(|(id, _, _)| *id).collect();
            merge_seen(&mut state.seen[idx], &mut batch);
        }
    }

    // Friend requests auto-accept; the graph stays symmetric at day close.
    for plan in &plans {
        let requester = AgentId(plan.idx as u32);
        for &target in &plan.friend_targets {
            if target == requester {
                continue;
            }
            state.agents[plan.idx].friends.insert(target);
            state.agents[target.index()].friends.insert(requester);
        }
    }

    // New posts join the pool at day close and become reachable tomorrow.
    for plan in &plans {
        if let Some(own) = &plan.own_post {
            let author = &state.agents[plan.idx];
            let author_snapshot = author.clone();
            state.pool.add_agent_post(
                &author_snapshot,
                own.text.clone(),
                own.stance,
                &own.tags,
                day,
                config.trending_threshold,
            )?;
        }
    }

    state.day += 1;

    let n = state.agents.len() as f64;
    let mean_polarization = state.agents.iter().map(|a| a.polarization).sum::<f64>() / n;
    let mean_engagement = state.agents.iter().map(|a| a.engagement).sum::<f64>() / n;
    let mean_impact = if consuming > 0 {
        impact_sum / consuming as f64
    } else {
        0.0
    };
    Ok(DailyMeans {
        day,
        mean_polarization,
        mean_engagement,
        mean_impact,
    })
}

/// Everything a finished run produced.
pub struct RunResult {
    pub scenario: ScenarioKind,
    pub days: u32,
    pub seed: u64,
    pub agents: Vec<AgentPrompt>,
    pub daily_means: Vec<DailyMeans>,
    /// Per-agent tallies in roster order, plus the population total.
    pub tallies: Vec<(String, ReactionTally)>,
    pub total_tally: ReactionTally,
    pub transcript: TranscriptHandle,
    pub meta: TranscriptMeta,
    pub series_path: Option<PathBuf>,
}

impl RunResult {
    pub fn final_scores(&self) -> BTreeMap<String, (f64, f64)> {
        self.agents
            .iter()
            .map(|a| (a.key.clone(), (a.polarization, a.engagement)))
            .collect()
    }

    pub fn score_summary(&self) -> ScoreSummary {
        score_summary(self.scenario, &self.final_scores())
    }
}

/// Build the decision backend a config asks for.
pub fn build_backend(config: &RunConfig) -> Result<Box<dyn DecisionBackend>, SimError> {
    match &config.backend {
        BackendChoice::Deterministic => Ok(Box::new(DeterministicBackend::new(
            config.decision_rules,
            config.affinity_weights(),
        ))),
        BackendChoice::Llm {
            endpoint,
            model,
            max_in_flight,
            timeout_secs,
            record_dir,
        } => {
            let transport = HttpChatTransport::from_env(
                endpoint.clone(),
                *max_in_flight,
                Duration::from_secs(*timeout_secs),
            )
            .map_err(|source| SimError::Backend {
                day: 0,
                agent: String::new(),
                source,
            })?;
            let transport: Box<dyn crate::decision::ChatTransport> = match record_dir {
                Some(dir) => Box::new(RecordingTransport::new(transport, CassetteStore::new(dir))),
                None => Box::new(transport),
            };
            Ok(Box::new(LlmBackend::new(transport, model.clone())))
        }
        BackendChoice::Replay {
            cassette_dir,
            model,
        } => {
            let transport = ReplayTransport::new(CassetteStore::new(cassette_dir));
            Ok(Box::new(LlmBackend::new(Box::new(transport), model.clone())))
        }
    }
}

fn build_population(config: &RunConfig) -> Result<Vec<AgentPrompt>, SimError> {
    let mut agents = match &config.population {
        PopulationSource::Fixture => load_fixture_profiles()?,
        PopulationSource::Generated { n, seed } => generate_population(*n, *seed)?,
    };
    for agent in &mut agents {
        agent.polarization = config.initial_polarization;
        agent.engagement = config.initial_engagement;
    }
    Ok(agents)
}

/// Execute a full run. Fully determined by the config with the
/// deterministic backend, or by config plus cassettes in replay mode.
pub fn run(config: &RunConfig) -> Result<RunResult, SimError> {
    config.validate()?;
    let agents = build_population(config)?;
    let pool = build_fixture_pool()?;
    let backend = build_backend(config)?;
    let meta = TranscriptMeta::for_run(
        config.scenario,
        config.seed,
        config.days,
        config.alpha,
        config.beta,
        backend.name(),
        &agents,
    );

    let out_dir = config.output.dir.as_ref().map(PathBuf::from);
    let scenario_slug = config.scenario.name().to_lowercase();
    let mut sink = if !config.output.write_transcript {
        TranscriptSink::counting()
    } else if let Some(dir) = &out_dir {
        TranscriptSink::file(dir.join(format!("transcript_{scenario_slug}.jsonl")), &meta)?
    } else {
        TranscriptSink::memory()
    };
    let mut series = match (&out_dir, config.output.write_series) {
        (Some(dir), true) => SeriesSink::file(dir.join(format!("series_{scenario_slug}.csv")))?,
        _ => SeriesSink::disabled(),
    };

    let mut state = SimulationState::new(agents, pool, config.seed);
    let mut tallies = vec![ReactionTally::default(); state.agents.len()];
    let mut daily_means = Vec::with_capacity(config.days as usize);
    for _ in 0..config.days {
        daily_means.push(run_day(
            &mut state,
            config,
            backend.as_ref(),
            &mut sink,
            &mut series,
            &mut tallies,
        )?);
    }

    let transcript = sink.finish()?;
    let series_path = series.finish()?;
    let mut total_tally = ReactionTally::default();
    for tally in &tallies {
        total_tally.merge(tally);
    }
    let tallies = state
        .agents
        .iter()
        .zip(tallies)
        .map(|(agent, tally)| (agent.key.clone(), tally))
        .collect();

    Ok(RunResult {
        scenario: config.scenario,
        days: config.days,
        seed: config.seed,
        agents: state.agents,
        daily_means,
        tallies,
        total_tally,
        transcript,
        meta,
        series_path,
    })
}

/// The three profiles the replication sessions focus on.
pub const REPLICATION_PROFILES: [&str; 3] = ["PROFILE_1", "PROFILE_21", "PROFILE_22"];
/// Posts served per profile per scenario session.
pub const REPLICATION_POSTS: usize = 30;

/// One profile's single-session result under one scenario.
pub struct ProfileSession {
    pub profile: String,
    pub tally: ReactionTally,
    pub impact: f64,
    pub polarization_after: f64,
    pub engagement_after: f64,
    pub records: Vec<InteractionRecord>,
}

pub struct ScenarioReplication {
    pub scenario: ScenarioKind,
    pub sessions: Vec<ProfileSession>,
}

impl ScenarioReplication {
    pub fn rows(&self) -> Vec<(String, ReactionTally)> {
        self.sessions
            .iter()
            .map(|s| (s.profile.clone(), s.tally))
            .collect()
    }

    pub fn total(&self) -> ReactionTally {
        let mut total = ReactionTally::default();
        for session in &self.sessions {
            total.merge(&session.tally);
        }
        total
    }
}

pub struct ReplicationResult {
    pub scenarios: Vec<ScenarioReplication>,
}

impl ReplicationResult {
    pub fn scenario(&self, kind: ScenarioKind) -> &ScenarioReplication {
        self.scenarios
            .iter()
            .find(|s| s.scenario == kind)
            .expect("all three scenarios are always present")
    }
}

/// Run the three focus profiles through one 30-post session per scenario:
/// selection over the full 150-post fixture pool, one decision per post,
/// one score update per session.
pub fn replicate_experiment(
    backend: &dyn DecisionBackend,
    seed: u64,
    config: &RunConfig,
) -> Result<ReplicationResult, SimError> {
    let profiles = load_fixture_profiles()?;
    let pool = build_fixture_pool()?;
    let weights = config.affinity_weights();
    let all_posts: Vec<&Post> = pool.posts().iter().collect();

    let mut scenarios = Vec::new();
    for (scenario_idx, scenario) in ScenarioKind::ALL.iter().enumerate() {
        let mut sessions = Vec::new();
        for profile_key in REPLICATION_PROFILES {
            let agent = profiles
                .iter()
                .find(|a| a.key == profile_key)
                .expect("fixture carries the three focus profiles")
                .clone();
            let picked = select(
                *scenario,
                &agent,
                &all_posts,
                REPLICATION_POSTS,
                config.balance_ratio,
                &weights,
            )?;
            let session_impact = impact(*scenario, &agent, &picked, &weights)?;
            let mut tally = ReactionTally::default();
            let mut records = Vec::with_capacity(picked.len());
            let polarization_after =
                update_polarization(agent.polarization, config.alpha, session_impact)?;
            let engagement_after = update_engagement(
                agent.engagement,
                config.beta,
                agent.activity_factor,
                session_impact,
            )?;
            for post in &picked {
                let value = affinity(&agent, post, &weights).value();
                let ctx = DecisionContext {
                    day: scenario_idx as u32,
                    served_from: post.source_kind,
                    affinity: Some(value),
                };
                // One stream per (agent, post): scenarios share draws on
                // shared posts, so their comparison rides on the feeds
                // alone rather than on resampling noise.
                let mut rng = rng::stream(
                    seed,
                    rng::purpose::DECIDE,
                    agent.id.0 as u64,
                    post.id.0 as u64,
                );
                let outcome = backend
                    .decide(&agent, post, &ctx, &mut rng)
                    .map_err(|source| SimError::Backend {
                        day: scenario_idx as u32,
                        agent: agent.key.clone(),
                        source,
                    })?;
                tally.add_outcome(&outcome);
                records.push(InteractionRecord {
                    day: scenario_idx as u32,
                    agent: agent.id,
                    agent_key: agent.key.clone(),
                    post: post.id,
                    post_key: post.key.clone(),
                    outcome,
                    impact: session_impact,
                    polarization: polarization_after,
                    engagement: engagement_after,
                });
            }
            records.sort_by_key(|r| r.post);
            sessions.push(ProfileSession {
                profile: profile_key.to_string(),
                tally,
                impact: session_impact,
                polarization_after,
                engagement_after,
                records,
            });
        }
        scenarios.push(ScenarioReplication {
            scenario: *scenario,
            sessions,
        });
    }
    Ok(ReplicationResult { scenarios })
}
