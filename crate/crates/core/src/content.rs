//! The content universe: issues, news articles, posts, and the pool that
//! indexes them by source.
//!
//! Posts reach agents through three sources: posts authored by friends,
//! a global trending list, and imposed topical content (the bundled
//! 3-issue / 15-news / 150-post fixture). Daily candidate feeds are drawn
//! from a seeded blend of the three.

use std::collections::BTreeSet;
use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentId, AgentPrompt};
use crate::decision::ReactionKind;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IssueId(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NewsId(pub u16);

/// Opaque post identifier; ordering follows pool insertion order and is the
/// tie-break order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PostId(pub u32);

impl PostId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("stance out of range: {0} (expected 1..=7)")]
    RangeError(f64),
    #[error("post tags must not be empty")]
    EmptyTags,
    #[error("content fixture corrupt: {0}")]
    FixtureCorrupt(String),
    #[error("no content available from any source")]
    EmptyPool,
    #[error("unknown author {0:?}")]
    UnknownAuthor(AgentId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub id: IssueId,
    pub key: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: NewsId,
    pub key: String,
    pub issue: IssueId,
    pub headline: String,
    pub body: String,
}

/// Which feed surface a post belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    Friend,
    Trending,
    Imposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PostOrigin {
    News(NewsId),
    Agent(AgentId),
}

/// Who commented on a post, and when. Comment bodies live in the run
/// transcript, which is the system of record for interactions; the pool
/// keeps only the structural trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub day: u32,
    pub author: AgentId,
}

/// Per-post reaction counters, one slot per non-skip reaction kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionCounts([u32; 7]);

impl ReactionCounts {
    pub fn add(&mut self, kind: ReactionKind) {
        if let Some(slot) = kind.counter_slot() {
            self.0[slot] += 1;
        }
    }

    pub fn get(&self, kind: ReactionKind) -> u32 {
        kind.counter_slot().map(|slot| self.0[slot]).unwrap_or(0)
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// One unit of content. `stance` places the post on the 1–7 political
/// axis; `tags` is a sorted, deduplicated, non-empty set of interest tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: PostId,
    pub key: String,
    pub origin: PostOrigin,
    pub source_kind: SourceKind,
    pub issue: Option<IssueId>,
    pub stance: f64,
    pub tags: Vec<String>,
    pub text: String,
    pub comments: Vec<CommentRecord>,
    pub reactions: ReactionCounts,
}

impl Post {
    pub fn author_id(&self) -> Option<AgentId> {
        match self.origin {
            PostOrigin::Agent(id) => Some(id),
            PostOrigin::News(_) => None,
        }
    }

    /// True when `tag` is among the post's tags.
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.binary_search_by(|t| t.as_str().cmp(tag)).is_ok()
    }
}

fn normalize_tags(tags: &[String]) -> Result<Vec<String>, ContentError> {
    let set: BTreeSet<String> = tags
        .iter()
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    if set.is_empty() {
        return Err(ContentError::EmptyTags);
    }
    Ok(set.into_iter().collect())
}

fn check_stance(stance: f64) -> Result<(), ContentError> {
    if stance.is_finite() && (1.0..=7.0).contains(&stance) {
        Ok(())
    } else {
        Err(ContentError::RangeError(stance))
    }
}

/// How a daily candidate feed is blended across the three sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceMix {
    pub friend: f64,
    pub trending: f64,
    pub imposed: f64,
}

impl Default for SourceMix {
    fn default() -> Self {
        SourceMix {
            friend: 0.4,
            trending: 0.3,
            imposed: 0.3,
        }
    }
}

impl SourceMix {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("friend", self.friend),
            ("trending", self.trending),
            ("imposed", self.imposed),
        ] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(format!("source_mix.{name} must be in [0, 1], got {v}"));
            }
        }
        let sum = self.friend + self.trending + self.imposed;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("source_mix ratios must sum to 1, got {sum}"));
        }
        Ok(())
    }
}

/// Parameters for one candidate draw.
#[derive(Debug, Clone, Copy)]
pub struct CandidateRequest<'a> {
    /// How many candidates to aim for (oversample factor already applied).
    pub target: usize,
    pub mix: SourceMix,
    /// Sorted list of post ids this agent must not see again.
    pub exclude: &'a [PostId],
}

/// One candidate and the source surface that served it. A friend-authored
/// post that arrived via the trending list counts as trending here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub post: PostId,
    pub served_from: SourceKind,
}

/// The persistent content universe plus the per-source indices used for
/// candidate sampling. Single-writer: only the engine mutates it, between
/// read-only phases.
#[derive(Debug, Clone, Default)]
pub struct ContentPool {
    posts: Vec<Post>,
    issues: Vec<Issue>,
    news: Vec<NewsArticle>,
    by_issue: Vec<Vec<PostId>>,
    by_author: Vec<Vec<PostId>>,
    trending: Vec<PostId>,
    imposed: Vec<PostId>,
}

impl ContentPool {
    pub fn empty() -> Self {
        ContentPool::default()
    }

    pub fn post(&self, id: PostId) -> &Post {
        &self.posts[id.index()]
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn issues(&self) -> &[Issue] {
        &self.issues
    }

    pub fn news(&self) -> &[NewsArticle] {
        &self.news
    }

    pub fn trending(&self) -> &[PostId] {
        &self.trending
    }

    pub fn imposed(&self) -> &[PostId] {
        &self.imposed
    }

    pub fn posts_by_issue(&self, issue: IssueId) -> &[PostId] {
        &self.by_issue[issue.0 as usize]
    }

    pub fn posts_by_author(&self, author: AgentId) -> &[PostId] {
        self.by_author
            .get(author.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all_post_ids(&self) -> impl Iterator<Item = PostId> + '_ {
        (0..self.posts.len() as u32).map(PostId)
    }

    fn push_post(&mut self, post: Post) -> PostId {
        let id = post.id;
        debug_assert_eq!(id.index(), self.posts.len());
        if let Some(issue) = post.issue {
            let slot = issue.0 as usize;
            if self.by_issue.len() <= slot {
                self.by_issue.resize_with(slot + 1, Vec::new);
            }
            self.by_issue[slot].push(id);
        }
        match post.source_kind {
            SourceKind::Imposed => self.imposed.push(id),
            SourceKind::Friend => {
                let author = post
                    .author_id()
                    .expect("friend-sourced post must have an author");
                let slot = author.index();
                if self.by_author.len() <= slot {
                    self.by_author.resize_with(slot + 1, Vec::new);
                }
                self.by_author[slot].push(id);
            }
            SourceKind::Trending => self.trending.push(id),
        }
        self.posts.push(post);
        id
    }

    /// Insert an imposed (topic) post. Used by the fixture loader and by
    /// tests that build small pools by hand.
    pub fn add_imposed_post(
        &mut self,
        key: impl Into<String>,
        origin: PostOrigin,
        issue: Option<IssueId>,
        stance: f64,
        tags: &[String],
        text: impl Into<String>,
    ) -> Result<PostId, ContentError> {
        check_stance(stance)?;
        let tags = normalize_tags(tags)?;
        let id = PostId(self.posts.len() as u32);
        Ok(self.push_post(Post {
            id,
            key: key.into(),
            origin,
            source_kind: SourceKind::Imposed,
            issue,
            stance,
            tags,
            text: text.into(),
            comments: Vec::new(),
            reactions: ReactionCounts::default(),
        }))
    }

    /// Insert a post authored by an agent. It lands in the author's feed
    /// (visible to friends); when the author's social connectivity is at or
    /// above `trending_threshold` it is additionally listed as trending.
    pub fn add_agent_post(
        &mut self,
        author: &AgentPrompt,
        text: impl Into<String>,
        stance: f64,
        tags: &[String],
        day: u32,
        trending_threshold: f64,
    ) -> Result<PostId, ContentError> {
        check_stance(stance)?;
        let tags = normalize_tags(tags)?;
        let id = PostId(self.posts.len() as u32);
        let seq = self.posts_by_author(author.id).len();
        let key = format!("{}-d{day}-{seq}", author.key);
        self.push_post(Post {
            id,
            key,
            origin: PostOrigin::Agent(author.id),
            source_kind: SourceKind::Friend,
            issue: None,
            stance,
            tags,
            text: text.into(),
            comments: Vec::new(),
            reactions: ReactionCounts::default(),
        });
        if author.dynamic_traits.social_connectivity >= trending_threshold {
            self.trending.push(id);
        }
        Ok(id)
    }

    pub fn record_reaction(&mut self, id: PostId, kind: ReactionKind) {
        self.posts[id.index()].reactions.add(kind);
    }

    pub fn record_comment(&mut self, id: PostId, day: u32, author: AgentId) {
        self.posts[id.index()].comments.push(CommentRecord { day, author });
    }

    /// Assemble the candidate superset for one agent-day: a deterministic
    /// blend of friend-feed, trending, and imposed posts. Shortfall in the
    /// friend or trending source falls back to the imposed source, so small
    /// or young pools still fill feeds. The result never contains
    /// duplicates, excluded posts, or posts authored by the agent.
    pub fn daily_candidates(
        &self,
        agent: &AgentPrompt,
        day: u32,
        seed: u64,
        request: &CandidateRequest,
    ) -> Result<Vec<Candidate>, ContentError> {
        let friend_count: usize = agent
            .friends
            .iter()
            .map(|f| self.posts_by_author(f).len())
            .sum();
        if friend_count == 0 && self.trending.is_empty() && self.imposed.is_empty() {
            return Err(ContentError::EmptyPool);
        }
        let mut rng = rng::stream(seed, rng::purpose::CANDIDATES, agent.id.0 as u64, day as u64);
        let target = request.target;
        let quota_friend = (request.mix.friend * target as f64).floor() as usize;
        let quota_trending = (request.mix.trending * target as f64).floor() as usize;

        let mut picked: Vec<Candidate> = Vec::with_capacity(target);
        let mut taken: HashSet<u32> = HashSet::with_capacity(target * 2);
        let admit = |id: PostId,
                     served_from: SourceKind,
                         picked: &mut Vec<Candidate>,
                         taken: &mut HashSet<u32>|
         -> bool {
            if taken.contains(&id.0) || request.exclude.binary_search(&id).is_ok() {
                return false;
            }
            if self.post(id).author_id() == Some(agent.id) {
                return false;
            }
            taken.insert(id.0);
            picked.push(Candidate {
                post: id,
                served_from,
            });
            true
        };

        // Friend feed: pick a friend, then one of their posts. Uniform over
        // friends rather than over posts, which is all the blend needs.
        if friend_count > 0 && quota_friend > 0 {
            let friends = agent.friends.as_slice();
            let mut budget = quota_friend * 8;
            let mut got = 0;
            while got < quota_friend && budget > 0 {
                budget -= 1;
                let friend = friends[rng.gen_range(0..friends.len())];
                let feed = self.posts_by_author(friend);
                if feed.is_empty() {
                    continue;
                }
                let id = feed[rng.gen_range(0..feed.len())];
                if admit(id, SourceKind::Friend, &mut picked, &mut taken) {
                    got += 1;
                }
            }
        }

        if !self.trending.is_empty() && quota_trending > 0 {
            let mut budget = quota_trending * 8;
            let mut got = 0;
            while got < quota_trending && budget > 0 {
                budget -= 1;
                let id = self.trending[rng.gen_range(0..self.trending.len())];
                if admit(id, SourceKind::Trending, &mut picked, &mut taken) {
                    got += 1;
                }
            }
        }

        // Imposed posts absorb their own quota plus whatever the other
        // sources could not supply.
        if !self.imposed.is_empty() && picked.len() < target {
            let want = target - picked.len();
            let mut budget = want * 8 + self.imposed.len();
            let mut got = 0;
            while got < want && budget > 0 {
                budget -= 1;
                let id = self.imposed[rng.gen_range(0..self.imposed.len())];
                if admit(id, SourceKind::Imposed, &mut picked, &mut taken) {
                    got += 1;
                }
            }
        }

        Ok(picked)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureDoc {
    issues: Vec<FixtureIssue>,
    news: Vec<FixtureNews>,
    posts: Vec<FixturePost>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureIssue {
    id: String,
    name: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureNews {
    id: String,
    issue_id: String,
    headline: String,
    body: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixturePost {
    id: String,
    news_id: String,
    issue_id: String,
    stance: f64,
    tags: Vec<String>,
    text: String,
}

const CONTENT_FIXTURE: &str = include_str!("../fixtures/content_150.json");

/// Load the bundled content fixture: 3 issues, 5 news articles per issue,
/// 10 posts per article.
pub fn build_fixture_pool() -> Result<ContentPool, ContentError> {
    parse_fixture_pool(CONTENT_FIXTURE)
}

/// Parse a content fixture document and validate its shape.
pub fn parse_fixture_pool(json: &str) -> Result<ContentPool, ContentError> {
    let doc: FixtureDoc =
        serde_json::from_str(json).map_err(|e| ContentError::FixtureCorrupt(e.to_string()))?;
    let corrupt = |msg: String| ContentError::FixtureCorrupt(msg);

    if doc.issues.len() != 3 {
        return Err(corrupt(format!("expected 3 issues, found {}", doc.issues.len())));
    }
    let mut pool = ContentPool::empty();
    let mut issue_keys: Vec<String> = Vec::new();
    for (i, row) in doc.issues.iter().enumerate() {
        if issue_keys.contains(&row.id) {
            return Err(corrupt(format!("duplicate issue id {}", row.id)));
        }
        issue_keys.push(row.id.clone());
        pool.issues.push(Issue {
            id: IssueId(i as u8),
            key: row.id.clone(),
            name: row.name.clone(),
        });
    }

    let mut news_keys: Vec<String> = Vec::new();
    for (i, row) in doc.news.iter().enumerate() {
        let issue_idx = issue_keys
            .iter()
            .position(|k| *k == row.issue_id)
            .ok_or_else(|| corrupt(format!("news {} references unknown issue {}", row.id, row.issue_id)))?;
        if news_keys.contains(&row.id) {
            return Err(corrupt(format!("duplicate news id {}", row.id)));
        }
        news_keys.push(row.id.clone());
        pool.news.push(NewsArticle {
            id: NewsId(i as u16),
            key: row.id.clone(),
            issue: IssueId(issue_idx as u8),
            headline: row.headline.clone(),
            body: row.body.clone(),
        });
    }
    for issue in &pool.issues {
        let count = pool.news.iter().filter(|n| n.issue == issue.id).count();
        if count != 5 {
            return Err(corrupt(format!(
                "issue {} has {count} news articles, expected 5",
                issue.key
            )));
        }
    }

    let mut post_keys: HashSet<String> = HashSet::new();
    for row in &doc.posts {
        let news_idx = news_keys
            .iter()
            .position(|k| *k == row.news_id)
            .ok_or_else(|| corrupt(format!("post {} references unknown news {}", row.id, row.news_id)))?;
        let news = &pool.news[news_idx];
        let issue_key = &issue_keys[news.issue.0 as usize];
        if *issue_key != row.issue_id {
            return Err(corrupt(format!(
                "post {} says issue {} but its news belongs to {}",
                row.id, row.issue_id, issue_key
            )));
        }
        if !post_keys.insert(row.id.clone()) {
            return Err(corrupt(format!("duplicate post id {}", row.id)));
        }
        let news_id = news.id;
        let issue_id = news.issue;
        pool.add_imposed_post(
            row.id.clone(),
            PostOrigin::News(news_id),
            Some(issue_id),
            row.stance,
            &row.tags,
            row.text.clone(),
        )
        .map_err(|e| corrupt(format!("post {}: {e}", row.id)))?;
    }
    for news in &pool.news {
        let count = pool
            .posts
            .iter()
            .filter(|p| matches!(p.origin, PostOrigin::News(id) if id == news.id))
            .count();
        if count != 10 {
            return Err(corrupt(format!(
                "news {} has {count} posts, expected 10",
                news.key
            )));
        }
    }
    Ok(pool)
}
