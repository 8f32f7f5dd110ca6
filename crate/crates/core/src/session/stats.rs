use serde::{Deserialize, Serialize};

use super::SessionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    /// Names a direction, body part or measurable change.
    Positional,
    /// Describes intent or style only.
    HighLevel,
}

const POSITIONAL_WORDS: &[&str] = &[
    "higher", "lower", "raise", "lift", "up", "down", "left", "right", "forward", "forwards", "backward",
    "backwards", "back", "closer", "further", "farther", "wider", "narrower", "apart", "together", "height",
    "position", "above", "below", "front", "behind", "inward", "outward", "rotate", "turn", "tilt", "angle",
    "finger", "fingers", "thumb", "thumbs", "palm", "palms", "wrist", "elbow", "open", "close", "closed",
    "faster", "slower", "speed", "bigger", "smaller", "cm", "centimeters", "meters",
];

/// Keyword heuristic: positional if any word names a direction, body part
/// or quantity, high-level otherwise.
pub fn classify_feedback(text: &str) -> FeedbackKind {
    let positional = text
        .split(|c: char| !c.is_ascii_alphanumeric())
        .map(str::to_ascii_lowercase)
        .any(|w| POSITIONAL_WORDS.contains(&w.as_str()));
    if positional {
        FeedbackKind::Positional
    } else {
        FeedbackKind::HighLevel
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackStats {
    pub sessions: usize,
    pub finalized: usize,
    pub feedback_count: usize,
    /// Mean operator refinements per session that produced a sequence.
    pub mean_refinements: f64,
    pub positional: usize,
    pub high_level: usize,
    pub high_level_fraction: f64,
}

pub fn feedback_stats(records: &[SessionRecord]) -> FeedbackStats {
    let generated: Vec<_> = records.iter().filter(|r| !r.iterations.is_empty()).collect();
    let mut positional = 0;
    let mut high_level = 0;
    for fb in records.iter().flat_map(|r| &r.iterations).filter_map(|it| it.feedback.as_deref()) {
        match classify_feedback(fb) {
            FeedbackKind::Positional => positional += 1,
            FeedbackKind::HighLevel => high_level += 1,
        }
    }
    let feedback_count = positional + high_level;
    let refinements: usize = generated.iter().map(|r| r.refinements()).sum();
    FeedbackStats {
        sessions: records.len(),
        finalized: records.iter().filter(|r| r.finalized.is_some()).count(),
        feedback_count,
        mean_refinements: if generated.is_empty() {
            0.0
        } else {
            refinements as f64 / generated.len() as f64
        },
        positional,
        high_level,
        high_level_fraction: if feedback_count == 0 {
            0.0
        } else {
            high_level as f64 / feedback_count as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_examples() {
        assert_eq!(classify_feedback("Make both hands lower"), FeedbackKind::Positional);
        assert_eq!(classify_feedback("open the fingers more"), FeedbackKind::Positional);
        assert_eq!(classify_feedback("add some random motion"), FeedbackKind::HighLevel);
        assert_eq!(classify_feedback("be more excited!"), FeedbackKind::HighLevel);
        assert_eq!(classify_feedback("upbeat please"), FeedbackKind::HighLevel);
    }

    #[test]
    fn empty_stats() {
        let s = feedback_stats(&[]);
        assert_eq!(s.sessions, 0);
        assert_eq!(s.high_level_fraction, 0.0);
    }
}
