//! Parsing model completions into interaction outcomes, and the inverse
//! rendering used for round-trip checks and cassette fixtures.
//!
//! Grammar (case-insensitive): the first recognized option token decides
//! the reaction — `Nothing`, `Like`, `Love`, `Care`, `Haha`, `Wow`,
//! `Angry`, `Sad`. Before any `comment:` marker, the words `share`,
//! `friend request`, and `read comments` toggle the extras; everything
//! after `comment:` is the comment body (surrounding quotes stripped).

use crate::agents::DynamicTraits;

use super::{DecisionError, InteractionOutcome, ReactionKind};

fn parse_error(text: &str) -> DecisionError {
    DecisionError::ParseError {
        text: text.to_string(),
    }
}

fn token_reaction(token: &str) -> Option<ReactionKind> {
    match token {
        "nothing" | "none" | "skip" => Some(ReactionKind::None),
        "like" => Some(ReactionKind::Like),
        "love" => Some(ReactionKind::Love),
        "care" => Some(ReactionKind::Care),
        "haha" => Some(ReactionKind::Haha),
        "wow" => Some(ReactionKind::Wow),
        "angry" => Some(ReactionKind::Angry),
        "sad" => Some(ReactionKind::Sad),
        _ => None,
    }
}

fn strip_quotes(text: &str) -> &str {
    let trimmed = text.trim();
    for quote in ['"', '\''] {
        if trimmed.len() >= 2 && trimmed.starts_with(quote) && trimmed.ends_with(quote) {
            return &trimmed[1..trimmed.len() - 1];
        }
    }
    trimmed
}

/// Parse a completion into an outcome. Total function: anything not
/// mappable to the option set is a `ParseError` carrying the text.
pub fn parse_completion(text: &str) -> Result<InteractionOutcome, DecisionError> {
    let lower = text.to_lowercase();
    let (head, comment) = match lower.find("comment:") {
        Some(idx) => {
            let body = strip_quotes(&text[idx + "comment:".len()..]);
            let comment = (!body.is_empty()).then(|| body.to_string());
            (&lower[..idx], comment)
        }
        None => (lower.as_str(), None),
    };

    let reaction = head
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .find_map(token_reaction)
        .ok_or_else(|| parse_error(text))?;

    if reaction == ReactionKind::None {
        // An explicit skip carries nothing downstream, whatever else the
        // reply rambles about.
        return Ok(InteractionOutcome::skip());
    }

    let shared = head
        .split(|c: char| !c.is_alphanumeric())
        .any(|t| t == "share");
    let friend_requested = head.contains("friend request");
    let read_comments = head.contains("read comments") || comment.is_some();

    let outcome = InteractionOutcome {
        reaction,
        read_comments,
        comment_text: comment,
        shared,
        friend_requested,
    };
    outcome.validate()?;
    Ok(outcome)
}

/// Canonical rendering of an outcome in the reply grammar.
/// `parse_completion(render_outcome(o)) == o` for every valid outcome
/// whose comment is trimmed, non-empty-after-trim, and not wrapped in
/// matching quotes.
pub fn render_outcome(outcome: &InteractionOutcome) -> String {
    if !outcome.engaged() {
        return "Nothing".to_string();
    }
    let mut parts = vec![outcome.reaction.name().to_string()];
    if outcome.shared {
        parts.push("share".to_string());
    }
    if outcome.friend_requested {
        parts.push("friend request".to_string());
    }
    if outcome.read_comments && outcome.comment_text.is_none() {
        parts.push("read comments".to_string());
    }
    if let Some(comment) = &outcome.comment_text {
        parts.push(format!("comment: {comment}"));
    }
    parts.join(". ")
}

fn labeled_number(lower: &str, label: &str) -> Option<f64> {
    let bytes = lower.as_bytes();
    let mut search = 0;
    while let Some(rel) = lower[search..].find(label) {
        let start = search + rel;
        let end = start + label.len();
        let boundary_before = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
        let boundary_after = end >= lower.len() || !bytes[end].is_ascii_alphanumeric();
        if boundary_before && boundary_after {
            let tail = lower[end..].trim_start_matches([' ', '\t', ':', '=']);
            let digits: String = tail
                .chars()
                .take_while(|c| c.is_ascii_digit() || *c == '.' || *c == '-')
                .collect();
            if let Ok(value) = digits.parse::<f64>() {
                return Some(value);
            }
        }
        search = end;
    }
    None
}

/// Parse a post-session trait self-report of the form
/// `pa: <n>, sc: <n>, er: <n>` (labels in any order, separators loose).
/// Values are clamped into the 1–7 band.
pub fn parse_trait_report(text: &str) -> Result<DynamicTraits, DecisionError> {
    let lower = text.to_lowercase();
    let pa = labeled_number(&lower, "pa").ok_or_else(|| parse_error(text))?;
    let sc = labeled_number(&lower, "sc").ok_or_else(|| parse_error(text))?;
    let er = labeled_number(&lower, "er").ok_or_else(|| parse_error(text))?;
    if !(pa.is_finite() && sc.is_finite() && er.is_finite()) {
        return Err(parse_error(text));
    }
    Ok(DynamicTraits {
        political_attitude: pa,
        social_connectivity: sc,
        emotive_reaction: er,
    }
    .clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_reaction_with_comment() {
        let outcome = parse_completion("ANGRY. comment: outrageous.").unwrap();
        assert_eq!(outcome.reaction, ReactionKind::Angry);
        assert_eq!(outcome.comment_text.as_deref(), Some("outrageous."));
        assert!(outcome.read_comments);
    }

    #[test]
    fn parses_bare_reaction() {
        let outcome = parse_completion("like").unwrap();
        assert_eq!(outcome.reaction, ReactionKind::Like);
        assert!(!outcome.read_comments);
        assert!(!outcome.shared);
        assert!(outcome.comment_text.is_none());
    }

    #[test]
    fn parses_quoted_comment() {
        let outcome = parse_completion("Love + comment: 'Beautiful initiative!'").unwrap();
        assert_eq!(outcome.reaction, ReactionKind::Love);
        assert_eq!(outcome.comment_text.as_deref(), Some("Beautiful initiative!"));
    }

    #[test]
    fn explicit_nothing_is_a_clean_skip() {
        let outcome = parse_completion("nothing").unwrap();
        assert_eq!(outcome, InteractionOutcome::skip());
        // Extras after a skip are discarded rather than violating the
        // skipped-post invariant.
        let outcome = parse_completion("Nothing. share").unwrap();
        assert_eq!(outcome, InteractionOutcome::skip());
    }

    #[test]
    fn unrecognized_text_is_a_parse_error() {
        for text in ["", "Meh", "absolutely", "12345"] {
            assert!(
                matches!(parse_completion(text), Err(DecisionError::ParseError { .. })),
                "{text:?} should not parse"
            );
        }
    }

    #[test]
    fn markers_before_comment_are_extracted() {
        let outcome =
            parse_completion("Care. share. friend request. read comments. comment: lovely")
                .unwrap();
        assert!(outcome.shared);
        assert!(outcome.friend_requested);
        assert!(outcome.read_comments);
        assert_eq!(outcome.comment_text.as_deref(), Some("lovely"));
    }

    #[test]
    fn markers_inside_comment_body_are_ignored() {
        let outcome = parse_completion("Wow. comment: please share this friend request").unwrap();
        assert!(!outcome.shared);
        assert!(!outcome.friend_requested);
        assert_eq!(
            outcome.comment_text.as_deref(),
            Some("please share this friend request")
        );
    }

    #[test]
    fn trait_report_parses_and_clamps() {
        let traits = parse_trait_report("pa: 6, sc: 7, er: 7").unwrap();
        assert_eq!(traits.political_attitude, 6.0);
        assert_eq!(traits.social_connectivity, 7.0);
        assert_eq!(traits.emotive_reaction, 7.0);

        let traits = parse_trait_report("pa: 9, sc: 7, er: 0.5").unwrap();
        assert_eq!(traits.political_attitude, 7.0);
        assert_eq!(traits.emotive_reaction, 1.0);

        assert!(parse_trait_report("pa: 6, sc: 7").is_err());
        assert!(parse_trait_report("no numbers here").is_err());
    }

    fn outcome_strategy() -> impl Strategy<Value = InteractionOutcome> {
        let reaction = prop_oneof![
            Just(ReactionKind::Like),
            Just(ReactionKind::Love),
            Just(ReactionKind::Care),
            Just(ReactionKind::Haha),
            Just(ReactionKind::Wow),
            Just(ReactionKind::Angry),
            Just(ReactionKind::Sad),
        ];
        (
            reaction,
            any::<bool>(),
            proptest::option::of("[a-zA-Z0-9 ,.!?-]{1,40}"),
            any::<bool>(),
            any::<bool>(),
        )
            .prop_filter_map(
                "comment must survive trimming and not look quoted",
                |(reaction, read, comment, shared, friend)| {
                    let comment = match comment {
                        Some(c) => {
                            let trimmed = c.trim();
                            if trimmed.is_empty() || trimmed != c {
                                return None;
                            }
                            Some(c)
                        }
                        None => None,
                    };
                    Some(InteractionOutcome {
                        reaction,
                        read_comments: read || comment.is_some(),
                        comment_text: comment,
                        shared,
                        friend_requested: friend,
                    })
                },
            )
    }

    proptest! {
        /// render → parse is the identity on well-formed outcomes,
        /// including the skip.
        #[test]
        fn round_trip_identity(outcome in outcome_strategy()) {
            let parsed = parse_completion(&render_outcome(&outcome)).unwrap();
            prop_assert_eq!(parsed, outcome);
        }
    }

    #[test]
    fn round_trip_identity_for_skip() {
        let skip = InteractionOutcome::skip();
        assert_eq!(parse_completion(&render_outcome(&skip)).unwrap(), skip);
    }
}
