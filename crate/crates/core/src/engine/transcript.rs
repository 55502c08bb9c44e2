//! The run transcript: an append-only, replay-verifiable record of every
//! interaction.
//!
//! On disk a transcript is newline-delimited JSON with stable key order.
//! The first line holds run metadata (scenario, memory parameters, the
//! roster with activity factors and initial scores); every following line
//! is one interaction. That makes a transcript self-contained: the audit
//! in [`verify_file`] re-derives every score update from the recorded
//! impacts alone and reports the maximum deviation, which must be zero.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentId, AgentPrompt};
use crate::content::PostId;
use crate::decision::{InteractionOutcome, ReactionKind};
use crate::dynamics::{update_engagement, update_polarization};
use crate::recommender::ScenarioKind;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("transcript audit failed at line {line}: {reason}")]
    AuditViolation { line: usize, reason: String },
}

/// One interaction, as kept in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub day: u32,
    pub agent: AgentId,
    pub agent_key: String,
    pub post: PostId,
    pub post_key: String,
    pub outcome: InteractionOutcome,
    /// The day's impact value for this agent (shared by every record of
    /// the same agent-day).
    pub impact: f64,
    /// Polarization score after this day's update.
    pub polarization: f64,
    /// Engagement score after this day's update.
    pub engagement: f64,
}

/// Roster entry in the metadata line: everything the audit needs to
/// re-derive an agent's score trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaAgent {
    pub id: String,
    pub t: f64,
    pub p0: f64,
    pub e0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub format: u32,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub days: u32,
    pub alpha: f64,
    pub beta: f64,
    pub backend: String,
    pub agents: Vec<MetaAgent>,
}

impl TranscriptMeta {
    pub fn for_run(
        scenario: ScenarioKind,
        seed: u64,
        days: u32,
        alpha: f64,
        beta: f64,
        backend: &str,
        agents: &[AgentPrompt],
    ) -> Self {
        TranscriptMeta {
            format: 1,
            scenario,
            seed,
            days,
            alpha,
            beta,
            backend: backend.to_string(),
            agents: agents
                .iter()
                .map(|a| MetaAgent {
                    id: a.key.clone(),
                    t: a.activity_factor,
                    p0: a.polarization,
                    e0: a.engagement,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct MetaLine<'a> {
    meta: &'a TranscriptMeta,
}

#[derive(Deserialize)]
struct MetaLineOwned {
    meta: TranscriptMeta,
}

/// Wire form of one record line. Field order is the stable key order.
#[derive(Serialize)]
struct RecordLine<'a> {
    day: u32,
    agent: &'a str,
    post_id: u32,
    post: &'a str,
    reaction: &'a str,
    read_comments: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    comment: Option<&'a str>,
    shared: bool,
    friend_requested: bool,
    f: f64,
    p_s: f64,
    e_s: f64,
}

/// Owned record row as read back from a transcript file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordRow {
    pub day: u32,
    pub agent: String,
    pub post_id: u32,
    pub post: String,
    pub reaction: String,
    pub read_comments: bool,
    #[serde(default)]
    pub comment: Option<String>,
    pub shared: bool,
    pub friend_requested: bool,
    pub f: f64,
    pub p_s: f64,
    pub e_s: f64,
}

fn reaction_token(kind: ReactionKind) -> &'static str {
    kind.name()
}

pub fn render_record_line(record: &InteractionRecord) -> String {
    let line = RecordLine {
        day: record.day,
        agent: &record.agent_key,
        post_id: record.post.0,
        post: &record.post_key,
        reaction: reaction_token(record.outcome.reaction),
        read_comments: record.outcome.read_comments,
        comment: record.outcome.comment_text.as_deref(),
        shared: record.outcome.shared,
        friend_requested: record.outcome.friend_requested,
        f: record.impact,
        p_s: record.polarization,
        e_s: record.engagement,
    };
    serde_json::to_string(&line).expect("record serialization cannot fail")
}

/// Where interaction records go during a run.
pub enum TranscriptSink {
    /// Keep every record in memory (small runs, replication, tests).
    Memory(Vec<InteractionRecord>),
    /// Stream to a file; the final path appears only on successful finish
    /// (temp + rename), so a killed run never leaves a truncated
    /// transcript behind the real name.
    File {
        writer: BufWriter<File>,
        tmp: PathBuf,
        path: PathBuf,
        count: u64,
    },
    /// Count records without retaining them (full-scale performance runs).
    Counting(u64),
}

impl TranscriptSink {
    pub fn memory() -> Self {
        TranscriptSink::Memory(Vec::new())
    }

    pub fn counting() -> Self {
        TranscriptSink::Counting(0)
    }

    pub fn file(path: impl Into<PathBuf>, meta: &TranscriptMeta) -> Result<Self, TranscriptError> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let tmp = path.with_extension("jsonl.tmp");
        let mut writer = BufWriter::new(File::create(&tmp)?);
        serde_json::to_writer(&mut writer, &MetaLine { meta })
            .map_err(|e| TranscriptError::Malformed {
                line: 1,
                reason: e.to_string(),
            })?;
        writer.write_all(b"\n")?;
        Ok(TranscriptSink::File {
            writer,
            tmp,
            path,
            count: 0,
        })
    }

    pub fn append(&mut self, record: InteractionRecord) -> Result<(), TranscriptError> {
        match self {
            TranscriptSink::Memory(records) => records.push(record),
            TranscriptSink::File { writer, count, .. } => {
                let line = render_record_line(&record);
                writer.write_all(line.as_bytes())?;
                writer.write_all(b"\n")?;
                *count += 1;
            }
            TranscriptSink::Counting(count) => *count += 1,
        }
        Ok(())
    }

    pub fn finish(self) -> Result<TranscriptHandle, TranscriptError> {
        match self {
            TranscriptSink::Memory(records) => Ok(TranscriptHandle::Memory(records)),
            TranscriptSink::File {
                mut writer,
                tmp,
                path,
                count,
            } => {
                writer.flush()?;
                drop(writer);
                std::fs::rename(&tmp, &path)?;
                Ok(TranscriptHandle::File { path, records: count })
            }
            TranscriptSink::Counting(count) => Ok(TranscriptHandle::Counted { records: count }),
        }
    }
}

/// What a finished run hands back for its transcript.
#[derive(Debug)]
pub enum TranscriptHandle {
    Memory(Vec<InteractionRecord>),
    File { path: PathBuf, records: u64 },
    Counted { records: u64 },
}

impl TranscriptHandle {
    pub fn record_count(&self) -> u64 {
        match self {
            TranscriptHandle::Memory(records) => records.len() as u64,
            TranscriptHandle::File { records, .. } => *records,
            TranscriptHandle::Counted { records } => *records,
        }
    }

    /// In-memory records, when this handle retained them.
    pub fn records(&self) -> Option<&[InteractionRecord]> {
        match self {
            TranscriptHandle::Memory(records) => Some(records),
            _ => None,
        }
    }
}

/// Read a transcript file back: metadata line plus all record rows.
pub fn read_file(path: &Path) -> Result<(TranscriptMeta, Vec<RecordRow>), TranscriptError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| TranscriptError::Malformed {
            line: 1,
            reason: "empty transcript".into(),
        })??;
    let meta: MetaLineOwned =
        serde_json::from_str(&first).map_err(|e| TranscriptError::Malformed {
            line: 1,
            reason: e.to_string(),
        })?;
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row: RecordRow =
            serde_json::from_str(&line).map_err(|e| TranscriptError::Malformed {
                line: idx + 2,
                reason: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok((meta.meta, rows))
}

/// Result of a transcript audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub records: u64,
    /// Maximum absolute difference between recorded scores and the
    /// re-derived recurrence values. Zero for any transcript the engine
    /// wrote.
    pub max_deviation: f64,
}

/// Re-derive every score update in a transcript from the recorded impact
/// values and the metadata, checking ordering and the no-duplicate-
/// reaction invariant along the way.
pub fn verify_file(path: &Path) -> Result<AuditReport, TranscriptError> {
    let (meta, rows) = read_file(path)?;
    verify_rows(&meta, &rows)
}

pub fn verify_rows(
    meta: &TranscriptMeta,
    rows: &[RecordRow],
) -> Result<AuditReport, TranscriptError> {
    let agent_index = |key: &str| meta.agents.iter().position(|a| a.id == key);
    // Running state per agent: (last_day_seen, last_f, p, e). Chaining on
    // the recorded values keeps each step's check independent.
    let mut state: Vec<(Option<u32>, f64, f64, f64)> = meta
        .agents
        .iter()
        .map(|a| (None, 0.0, a.p0, a.e0))
        .collect();
    let mut last_order: Option<(u32, usize, u32)> = None;
    let mut reacted: HashSet<(usize, u32)> = HashSet::new();
    let mut max_deviation = 0.0f64;

    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        let violation = |reason: String| TranscriptError::AuditViolation { line, reason };
        let idx = agent_index(&row.agent)
            .ok_or_else(|| violation(format!("agent {} not in roster", row.agent)))?;

        let order = (row.day, idx, row.post_id);
        if let Some(prev) = last_order {
            if order <= prev {
                return Err(violation(format!(
                    "records not strictly ordered by (day, agent, post): {order:?} after {prev:?}"
                )));
            }
        }
        last_order = Some(order);

        if row.reaction != "Nothing" && !reacted.insert((idx, row.post_id)) {
            return Err(violation(format!(
                "agent {} reacted twice to post {}",
                row.agent, row.post
            )));
        }

        let (last_day, f, p, e) = state[idx];
        if last_day == Some(row.day) {
            // Same day: the scores and impact must repeat verbatim.
            if row.p_s != p || row.e_s != e || row.f != f {
                return Err(violation(format!(
                    "agent {} day {} carries inconsistent scores",
                    row.agent, row.day
                )));
            }
            continue;
        }
        let expected_p = update_polarization(p, meta.alpha, row.f)
            .map_err(|e| violation(format!("recurrence input: {e}")))?;
        let t = meta.agents[idx].t;
        let expected_e = update_engagement(e, meta.beta, t, row.f)
            .map_err(|e| violation(format!("recurrence input: {e}")))?;
        max_deviation = max_deviation
            .max((expected_p - row.p_s).abs())
            .max((expected_e - row.e_s).abs());
        state[idx] = (Some(row.day), row.f, row.p_s, row.e_s);
    }

    Ok(AuditReport {
        records: rows.len() as u64,
        max_deviation,
    })
}
