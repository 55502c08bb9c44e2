//! Reaction tallies and report tables.
//!
//! Total reactions counts every non-skip reaction plus every comment;
//! positives are Haha + Like + Wow + Care + Love, negatives Sad + Angry.
//! The negative total doubles as the count-based polarization measure
//! reported next to the score-based one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{InteractionOutcome, ReactionKind};
use crate::engine::InteractionRecord;
use crate::recommender::ScenarioKind;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
}

/// Per-profile, per-scenario reaction counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionTally {
    pub haha: u64,
    pub like: u64,
    pub wow: u64,
    pub care: u64,
    pub love: u64,
    pub sad: u64,
    pub angry: u64,
    pub comments: u64,
    /// Shares and friend requests are tracked but excluded from
    /// `total_reactions`, which counts exactly reactions + comments.
    pub shares: u64,
    pub friend_requests: u64,
}

impl ReactionTally {
    pub fn add_outcome(&mut self, outcome: &InteractionOutcome) {
        match outcome.reaction {
            ReactionKind::None => {}
            ReactionKind::Haha => self.haha += 1,
            ReactionKind::Like => self.like += 1,
            ReactionKind::Wow => self.wow += 1,
            ReactionKind::Care => self.care += 1,
            ReactionKind::Love => self.love += 1,
            ReactionKind::Sad => self.sad += 1,
            ReactionKind::Angry => self.angry += 1,
        }
        if outcome.comment_text.is_some() {
            self.comments += 1;
        }
        if outcome.shared {
            self.shares += 1;
        }
        if outcome.friend_requested {
            self.friend_requests += 1;
        }
    }

    pub fn merge(&mut self, other: &ReactionTally) {
        self.haha += other.haha;
        self.like += other.like;
        self.wow += other.wow;
        self.care += other.care;
        self.love += other.love;
        self.sad += other.sad;
        self.angry += other.angry;
        self.comments += other.comments;
        self.shares += other.shares;
        self.friend_requests += other.friend_requests;
    }

    pub fn reaction_count(&self) -> u64 {
        self.haha + self.like + self.wow + self.care + self.love + self.sad + self.angry
    }

    /// Engagement measure: all reactions plus all comments.
    pub fn total_reactions(&self) -> u64 {
        self.reaction_count() + self.comments
    }

    pub fn total_positive(&self) -> u64 {
        self.haha + self.like + self.wow + self.care + self.love
    }

    /// Polarization measure: Sad + Angry.
    pub fn total_negative(&self) -> u64 {
        self.sad + self.angry
    }
}

/// Count one profile's interactions in a transcript slice.
///
/// `known_profiles` is the roster of the run; asking about a profile that
/// was never part of it is an error, while a known profile with no
/// records tallies to zero.
pub fn tally(
    records: &[InteractionRecord],
    known_profiles: &[String],
    profile: &str,
) -> Result<ReactionTally, MetricsError> {
    if !known_profiles.iter().any(|k| k == profile) {
        return Err(MetricsError::UnknownProfile(profile.to_string()));
    }
    let mut tally = ReactionTally::default();
    for record in records.iter().filter(|r| r.agent_key == profile) {
        tally.add_outcome(&record.outcome);
    }
    Ok(tally)
}

/// A rendered per-scenario table: one row per profile plus the total row.
#[derive(Debug, Clone)]
pub struct ReportDoc {
    pub scenario: ScenarioKind,
    pub text: String,
    pub csv: String,
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "Haha",
    "Like",
    "Wow",
    "Care",
    "Love",
    "Sad",
    "Angry",
    "Comments",
    "Total Reactions",
    "Total Positive",
    "Total Negative",
];

fn row_label(key: &str) -> String {
    key.replace('_', " ")
}

/// Render one scenario's tallies as an aligned text table and as CSV.
/// The final `In total` row sums the three total columns, the way the
/// per-scenario result tables are laid out.
pub fn render_report(scenario: ScenarioKind, rows: &[(String, ReactionTally)]) -> ReportDoc {
    assert!(!rows.is_empty(), "render_report needs at least one tally");
    let mut cells: Vec<(String, Vec<String>)> = Vec::new();
    for (key, tally) in rows {
        let values = vec![
            tally.haha.to_string(),
            tally.like.to_string(),
            tally.wow.to_string(),
            tally.care.to_string(),
            tally.love.to_string(),
            tally.sad.to_string(),
            tally.angry.to_string(),
            tally.comments.to_string(),
            tally.total_reactions().to_string(),
            tally.total_positive().to_string(),
            tally.total_negative().to_string(),
        ];
        cells.push((row_label(key), values));
    }
    let mut total = ReactionTally::default();
    for (_, tally) in rows {
        total.merge(tally);
    }
    let total_cells = vec![
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        total.total_reactions().to_string(),
        total.total_positive().to_string(),
        total.total_negative().to_string(),
    ];
    cells.push(("In total".to_string(), total_cells));

    let label_width = cells
        .iter()
        .map(|(label, _)| label.len())
        .max()
        .unwrap_or(0)
        .max(8);
    let widths: Vec<usize> = REPORT_COLUMNS
        .iter()
        .enumerate()
        .map(|(i, header)| {
            cells
                .iter()
                .map(|(_, values)| values[i].len())
                .max()
                .unwrap_or(0)
                .max(header.len())
        })
        .collect();

    let mut text = String::new();
    text.push_str(&format!("{scenario} Scenario\n"));
    text.push_str(&format!("{:<label_width$}", ""));
    for (header, width) in REPORT_COLUMNS.iter().zip(&widths) {
        text.push_str(&format!("  {header:>width$}"));
    }
    text.push('\n');
    for (label, values) in &cells {
        text.push_str(&format!("{label:<label_width$}"));
        for (value, width) in values.iter().zip(&widths) {
            text.push_str(&format!("  {value:>width$}"));
        }
        text.push('\n');
    }

    let mut csv = String::from("profile");
    for header in REPORT_COLUMNS {
        csv.push(',');
        csv.push_str(header);
    }
    csv.push('\n');
    for (label, values) in &cells {
        csv.push_str(label);
        for value in values {
            csv.push(',');
            csv.push_str(value);
        }
        csv.push('\n');
    }

    ReportDoc {
        scenario,
        text,
        csv,
    }
}

/// Parse a report CSV back into labeled tallies (the lossless inverse of
/// `render_report` for every row except `In total`, which carries only
/// the three totals).
pub fn parse_report_csv(csv: &str) -> Vec<(String, Vec<Option<u64>>)> {
    let mut rows = Vec::new();
    for line in csv.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let label = parts.next().unwrap_or_default().to_string();
        let values: Vec<Option<u64>> = parts.map(|p| p.parse::<u64>().ok()).collect();
        rows.push((label, values));
    }
    rows
}

/// Summary statistics over a finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub scenario: ScenarioKind,
    pub mean_polarization: f64,
    pub min_polarization: f64,
    pub max_polarization: f64,
    pub mean_engagement: f64,
    pub min_engagement: f64,
    pub max_engagement: f64,
}

/// Population means for one simulated day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyMeans {
    pub day: u32,
    pub mean_polarization: f64,
    pub mean_engagement: f64,
    pub mean_impact: f64,
}

/// Final-day score statistics for a run.
pub fn score_summary(
    scenario: ScenarioKind,
    final_scores: &BTreeMap<String, (f64, f64)>,
) -> ScoreSummary {
    assert!(!final_scores.is_empty(), "score_summary needs agents");
    let n = final_scores.len() as f64;
    let mut summary = ScoreSummary {
        scenario,
        mean_polarization: 0.0,
        min_polarization: f64::INFINITY,
        max_polarization: f64::NEG_INFINITY,
        mean_engagement: 0.0,
        min_engagement: f64::INFINITY,
        max_engagement: f64::NEG_INFINITY,
    };
    for &(p, e) in final_scores.values() {
        summary.mean_polarization += p;
        summary.min_polarization = summary.min_polarization.min(p);
        summary.max_polarization = summary.max_polarization.max(p);
        summary.mean_engagement += e;
        summary.min_engagement = summary.min_engagement.min(e);
        summary.max_engagement = summary.max_engagement.max(e);
    }
    summary.mean_polarization /= n;
    summary.mean_engagement /= n;
    summary
}

/// CSV of per-day population means: `day,mean_p_s,mean_e_s,mean_f`.
pub fn daily_means_csv(means: &[DailyMeans]) -> String {
    let mut csv = String::from("day,mean_p_s,mean_e_s,mean_f\n");
    for row in means {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.day, row.mean_polarization, row.mean_engagement, row.mean_impact
        ));
    }
    csv
}
