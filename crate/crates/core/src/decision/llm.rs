//! Chat-completions decision backend: prompt rendering, an HTTPS
//! transport with retry, and a cassette store for record/replay.
//!
//! One request is sent per (agent, post); replies are parsed with
//! [`parse_completion`](super::parse_completion). Replay mode never
//! touches the network and fails loudly on a cache miss, which is what
//! makes LLM-backed runs reproducible and testable offline.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentPrompt, DynamicTraits};
use crate::content::Post;

use super::{
    parse_completion, parse_trait_report, DecisionBackend, DecisionContext, DecisionError,
    InteractionOutcome, SessionSummary,
};

/// Environment variable holding the API key for the live transport.
pub const API_KEY_ENV: &str = "RECSYS_LLM_API_KEY";

/// One chat-completion request: a system message (the profile
/// description) and a user message (the post plus the option list).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
}

impl ChatRequest {
    /// Content-addressed cassette key: hex SHA-256 over the rendered
    /// request. Identical prompts replay identical completions.
    pub fn cache_key(&self) -> String {
        let mut hasher = Sha256::new();
        for part in [&self.model, &self.system, &self.user] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Anything that can answer a chat request with a completion text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, DecisionError>;
}

/// Render the system message: the full profile with every dimension and
/// the scale context behind it. The scenario kind is deliberately absent —
/// backends never learn which policy picked the post.
pub fn render_profile_description(agent: &AgentPrompt) -> String {
    let interests: Vec<&str> = agent.interests.iter().map(String::as_str).collect();
    let st = &agent.static_traits;
    let dy = &agent.dynamic_traits;
    format!(
        "You are roleplaying a social network user. Stay in character.\n\
         Nickname: {nick}\n\
         Bio: {bio}\n\
         Interests: {interests}\n\
         Personality, each on a 1-7 scale: openness {o} (1 very low, 7 very high), \
         conscientiousness {c}, extraversion {e}, agreeableness {a}, neuroticism {n}.\n\
         Thinking style {cs} (1 very analytical, 7 very emotional). \
         Open-mindedness {om} (1 very closed-minded, 7 very open-minded).\n\
         Current political attitude {pa:.1} (1 extremely liberal, 7 extremely conservative). \
         Social connectivity {sc:.1} (1 very low, 7 very high). \
         Emotional reactivity {er:.1} (1 very low, 7 very high).",
        nick = agent.nickname,
        bio = agent.bio,
        interests = interests.join(", "),
        o = st.openness,
        c = st.conscientiousness,
        e = st.extraversion,
        a = st.agreeableness,
        n = st.neuroticism,
        cs = st.cognitive_style,
        om = st.open_mindedness,
        pa = dy.political_attitude,
        sc = dy.social_connectivity,
        er = dy.emotive_reaction,
    )
}

/// Render the user message for one post: the text plus the closed option
/// list, including doing nothing.
pub fn render_post_prompt(post: &Post) -> String {
    format!(
        "A post appears in your feed:\n---\n{text}\n---\n\
         React with exactly one option word: Like, Love, Care, Haha, Wow, Angry, Sad, \
         or Nothing (to skip it).\n\
         After the option you may add, separated by periods: 'share', 'friend request', \
         'read comments', and last 'comment: <your comment>'.",
        text = post.text
    )
}

/// Render the post-session self-report request.
pub fn render_trait_report_prompt(agent: &AgentPrompt, summary: &SessionSummary) -> String {
    format!(
        "Your session ended. You saw {posts} posts, reacted positively {pos} times and \
         negatively {neg} times, wrote {comments} comments, and sent {requests} friend \
         requests.\n\
         {nick}, report your current traits on the 1-7 scale, exactly in this form:\n\
         pa: <number>, sc: <number>, er: <number>",
        posts = summary.posts_consumed,
        pos = summary.positive_reactions,
        neg = summary.negative_reactions,
        comments = summary.comments,
        requests = summary.friend_requests,
        nick = agent.nickname,
    )
}

/// Directory of completion files keyed by request content hash.
#[derive(Debug, Clone)]
pub struct CassetteStore {
    dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct CassetteEntry {
    request: ChatRequest,
    response: String,
}

impl CassetteStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CassetteStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn load(&self, request: &ChatRequest) -> Result<Option<String>, DecisionError> {
        let path = self.path_for(&request.cache_key());
        if !path.exists() {
            return Ok(None);
        }
        let raw = std::fs::read_to_string(&path)
            .map_err(|e| DecisionError::CassetteError(format!("{}: {e}", path.display())))?;
        let entry: CassetteEntry = serde_json::from_str(&raw)
            .map_err(|e| DecisionError::CassetteError(format!("{}: {e}", path.display())))?;
        Ok(Some(entry.response))
    }

    pub fn store(&self, request: &ChatRequest, response: &str) -> Result<(), DecisionError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| DecisionError::CassetteError(format!("{}: {e}", self.dir.display())))?;
        let entry = CassetteEntry {
            request: request.clone(),
            response: response.to_string(),
        };
        let path = self.path_for(&request.cache_key());
        let body = serde_json::to_string_pretty(&entry)
            .map_err(|e| DecisionError::CassetteError(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, body)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| DecisionError::CassetteError(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|entries| {
                entries
                    .filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|ext| ext == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Replay-only transport: cassette hit or loud failure, never the network.
#[derive(Debug, Clone)]
pub struct ReplayTransport {
    store: CassetteStore,
}

impl ReplayTransport {
    pub fn new(store: CassetteStore) -> Self {
        ReplayTransport { store }
    }
}

impl ChatTransport for ReplayTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, DecisionError> {
        match self.store.load(request)? {
            Some(response) => Ok(response),
            None => Err(DecisionError::CassetteMiss {
                key: request.cache_key(),
            }),
        }
    }
}

/// Wraps a live transport and records every completion into the store.
/// Existing cassettes short-circuit the inner transport.
pub struct RecordingTransport<T: ChatTransport> {
    inner: T,
    store: CassetteStore,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T, store: CassetteStore) -> Self {
        RecordingTransport { inner, store }
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, DecisionError> {
        if let Some(hit) = self.store.load(request)? {
            return Ok(hit);
        }
        let response = self.inner.complete(request)?;
        self.store.store(request, &response)?;
        Ok(response)
    }
}

/// Scripted transport for tests and cassette authoring: answers requests
/// from a fixed queue.
pub struct ScriptedTransport {
    replies: Mutex<VecDeque<String>>,
}

impl ScriptedTransport {
    pub fn new(replies: impl IntoIterator<Item = String>) -> Self {
        ScriptedTransport {
            replies: Mutex::new(replies.into_iter().collect()),
        }
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, _request: &ChatRequest) -> Result<String, DecisionError> {
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| DecisionError::TransportError("scripted replies exhausted".into()))
    }
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(slots: usize) -> Self {
        Gate {
            slots: Mutex::new(slots.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut slots = self.slots.lock().unwrap();
        while *slots == 0 {
            slots = self.freed.wait(slots).unwrap();
        }
        *slots -= 1;
    }

    fn release(&self) {
        *self.slots.lock().unwrap() += 1;
        self.freed.notify_one();
    }
}

/// Live HTTPS transport speaking the chat-completions wire shape, with
/// bounded concurrency and retry on transient failures.
pub struct HttpChatTransport {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
    gate: Gate,
    max_retries: u32,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 2],
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

impl HttpChatTransport {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: impl Into<String>,
        max_in_flight: usize,
        timeout: Duration,
    ) -> Result<Self, DecisionError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| DecisionError::TransportError(e.to_string()))?;
        Ok(HttpChatTransport {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            client,
            gate: Gate::new(max_in_flight),
            max_retries: 2,
        })
    }

    /// Build a transport reading the API key from `RECSYS_LLM_API_KEY`.
    pub fn from_env(
        endpoint: impl Into<String>,
        max_in_flight: usize,
        timeout: Duration,
    ) -> Result<Self, DecisionError> {
        let api_key = std::env::var(API_KEY_ENV).map_err(|_| {
            DecisionError::TransportError(format!("missing {API_KEY_ENV} environment variable"))
        })?;
        Self::new(endpoint, api_key, max_in_flight, timeout)
    }

    fn send_once(&self, request: &ChatRequest) -> Result<String, DecisionError> {
        let body = WireRequest {
            model: &request.model,
            messages: [
                WireMessage {
                    role: "system",
                    content: &request.system,
                },
                WireMessage {
                    role: "user",
                    content: &request.user,
                },
            ],
        };
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| DecisionError::TransportError(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 {
            let retry_after_secs = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse::<u64>().ok())
                .unwrap_or(1);
            return Err(DecisionError::RateLimited { retry_after_secs });
        }
        if !status.is_success() {
            return Err(DecisionError::TransportError(format!(
                "{} returned {status}",
                self.endpoint
            )));
        }
        let wire: WireResponse = response
            .json()
            .map_err(|e| DecisionError::TransportError(e.to_string()))?;
        wire.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| DecisionError::TransportError("empty choices in response".into()))
    }
}

impl ChatTransport for HttpChatTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, DecisionError> {
        self.gate.acquire();
        let result = (|| {
            let mut last = None;
            for attempt in 0..=self.max_retries {
                match self.send_once(request) {
                    Ok(text) => return Ok(text),
                    Err(DecisionError::RateLimited { retry_after_secs })
                        if attempt < self.max_retries =>
                    {
                        std::thread::sleep(Duration::from_secs(retry_after_secs.min(10)));
                        last = Some(DecisionError::RateLimited { retry_after_secs });
                    }
                    Err(e @ DecisionError::TransportError(_)) if attempt < self.max_retries => {
                        last = Some(e);
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(last.unwrap_or_else(|| DecisionError::TransportError("retries exhausted".into())))
        })();
        self.gate.release();
        result
    }
}

/// Decision backend driven by a chat transport. Parse failures are retried
/// up to two times (a fresh request each time) before surfacing.
pub struct LlmBackend {
    transport: Box<dyn ChatTransport>,
    model: String,
    parse_retries: u32,
}

impl LlmBackend {
    pub fn new(transport: Box<dyn ChatTransport>, model: impl Into<String>) -> Self {
        LlmBackend {
            transport,
            model: model.into(),
            parse_retries: 2,
        }
    }

    pub fn request_for(&self, agent: &AgentPrompt, post: &Post) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            system: render_profile_description(agent),
            user: render_post_prompt(post),
        }
    }
}

impl DecisionBackend for LlmBackend {
    fn decide(
        &self,
        agent: &AgentPrompt,
        post: &Post,
        _ctx: &DecisionContext,
        _rng: &mut ChaCha8Rng,
    ) -> Result<InteractionOutcome, DecisionError> {
        let request = self.request_for(agent, post);
        let mut last_text = String::new();
        for _ in 0..=self.parse_retries {
            let reply = self.transport.complete(&request)?;
            match parse_completion(&reply) {
                Ok(outcome) => return Ok(outcome),
                Err(_) => last_text = reply,
            }
        }
        Err(DecisionError::ParseError { text: last_text })
    }

    fn report_trait_deltas(
        &self,
        agent: &AgentPrompt,
        summary: &SessionSummary,
    ) -> Result<Option<DynamicTraits>, DecisionError> {
        let request = ChatRequest {
            model: self.model.clone(),
            system: render_profile_description(agent),
            user: render_trait_report_prompt(agent, summary),
        };
        let reply = self.transport.complete(&request)?;
        parse_trait_report(&reply).map(Some)
    }

    fn name(&self) -> &'static str {
        "llm"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::load_fixture_profiles;
    use crate::content::build_fixture_pool;
    use crate::decision::ReactionKind;
    use crate::rng;

    #[test]
    fn prompts_never_disclose_the_scenario() {
        let agents = load_fixture_profiles().unwrap();
        let pool = build_fixture_pool().unwrap();
        for agent in agents.iter().take(3) {
            let system = render_profile_description(agent);
            let user = render_post_prompt(pool.post(crate::content::PostId(0)));
            for banned in ["plurality", "balanced", "similarity"] {
                assert!(!system.to_lowercase().contains(banned));
                assert!(!user.to_lowercase().contains(banned));
            }
        }
    }

    #[test]
    fn cache_key_is_stable_and_content_sensitive() {
        let request = ChatRequest {
            model: "m".into(),
            system: "s".into(),
            user: "u".into(),
        };
        assert_eq!(request.cache_key(), request.cache_key());
        let other = ChatRequest {
            user: "u2".into(),
            ..request.clone()
        };
        assert_ne!(request.cache_key(), other.cache_key());
    }

    #[test]
    fn record_then_replay_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let store = CassetteStore::new(dir.path());
        let scripted = ScriptedTransport::new(["Love. comment: lovely".to_string()]);
        let recorder = RecordingTransport::new(scripted, store.clone());
        let request = ChatRequest {
            model: "m".into(),
            system: "sys".into(),
            user: "post".into(),
        };
        let live = recorder.complete(&request).unwrap();
        assert_eq!(live, "Love. comment: lovely");

        let replay = ReplayTransport::new(store);
        assert_eq!(replay.complete(&request).unwrap(), live);
    }

    #[test]
    fn replay_miss_fails_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayTransport::new(CassetteStore::new(dir.path()));
        let request = ChatRequest {
            model: "m".into(),
            system: "sys".into(),
            user: "unseen".into(),
        };
        assert!(matches!(
            replay.complete(&request),
            Err(DecisionError::CassetteMiss { .. })
        ));
    }

    #[test]
    fn llm_backend_parses_replayed_outcomes() {
        let agents = load_fixture_profiles().unwrap();
        let pool = build_fixture_pool().unwrap();
        let post = pool.post(crate::content::PostId(0));
        let ctx = DecisionContext::standalone(post);
        let mut stream = rng::stream(1, rng::purpose::DECIDE, 0, 0);

        let backend = LlmBackend::new(
            Box::new(ScriptedTransport::new(["nothing".to_string()])),
            "test-model",
        );
        let outcome = backend.decide(&agents[0], post, &ctx, &mut stream).unwrap();
        assert_eq!(outcome, InteractionOutcome::skip());

        let backend = LlmBackend::new(
            Box::new(ScriptedTransport::new([
                "Love. comment: 'Beautiful initiative!'".to_string(),
            ])),
            "test-model",
        );
        let outcome = backend.decide(&agents[0], post, &ctx, &mut stream).unwrap();
        assert_eq!(outcome.reaction, ReactionKind::Love);
        assert!(outcome.comment_text.is_some());
    }

    #[test]
    fn unparseable_reply_errors_after_retries() {
        let agents = load_fixture_profiles().unwrap();
        let pool = build_fixture_pool().unwrap();
        let post = pool.post(crate::content::PostId(0));
        let ctx = DecisionContext::standalone(post);
        let mut stream = rng::stream(1, rng::purpose::DECIDE, 0, 0);
        // Three attempts, three junk replies.
        let backend = LlmBackend::new(
            Box::new(ScriptedTransport::new([
                "Meh".to_string(),
                "Meh".to_string(),
                "Meh".to_string(),
            ])),
            "test-model",
        );
        assert!(matches!(
            backend.decide(&agents[0], post, &ctx, &mut stream),
            Err(DecisionError::ParseError { .. })
        ));
    }

    #[test]
    fn trait_self_report_is_parsed_and_clamped() {
        let agents = load_fixture_profiles().unwrap();
        let backend = LlmBackend::new(
            Box::new(ScriptedTransport::new(["pa: 9, sc: 6.5, er: 7".to_string()])),
            "test-model",
        );
        let summary = SessionSummary {
            posts_consumed: 30,
            ..SessionSummary::default()
        };
        let traits = backend
            .report_trait_deltas(&agents[0], &summary)
            .unwrap()
            .unwrap();
        assert_eq!(traits.political_attitude, 7.0);
        assert_eq!(traits.social_connectivity, 6.5);
    }
}
