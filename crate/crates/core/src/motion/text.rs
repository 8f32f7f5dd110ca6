//! Canonical text block exchanged with language models.
//!
//! ```text
//! SEQUENCE v1 T=<int> DT=<float>
//! t=<k>: <22 comma-separated floats, 6 decimal places>
//! END
//! ```
//!
//! The parser is lenient: it ignores surrounding prose, code fences, row
//! labels and brackets, accepts comma or whitespace separators, and clamps
//! out-of-range values instead of rejecting them.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    clamp_state, validate_state, MotionSequence, MotionState, Violation, WorkspaceBounds,
    DEFAULT_KEYFRAME_DT, STATE_WIDTH,
};

/// Rows shorter than this are treated as prose when no header is present.
const MIN_HEADERLESS_FIELDS: usize = 6;

static HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:[#>*`]\s*)*SEQUENCE\b(?:.*?\bT\s*=\s*(\d+))?(?:.*?\bDT\s*=\s*([0-9.eE+-]+))?")
        .unwrap()
});
static END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^\s*(?:[#>*`]\s*)*END\b").unwrap());
static ROW_LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:[-*+]\s+)?(?:(?:t|s|step|keyframe|frame|row|state)\s*[=_#]?\s*)?\d+\s*[:)]\s*")
        .unwrap()
});
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$").unwrap());

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no sequence block of numeric rows found")]
    NoSequenceFound,
    #[error("row {row} has {found} numeric fields, expected {STATE_WIDTH}")]
    DimensionMismatch { row: usize, found: usize },
    #[error("sequence has {found} rows, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Required row count, when the caller asked for a specific T.
    pub expected_len: Option<usize>,
    /// Keyframe spacing when the block carries no usable `DT=`.
    pub default_dt: f64,
    pub bounds: WorkspaceBounds,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            expected_len: None,
            default_dt: DEFAULT_KEYFRAME_DT,
            bounds: WorkspaceBounds::default(),
        }
    }
}

impl ParseOptions {
    pub fn expecting(len: usize) -> Self {
        Self {
            expected_len: Some(len),
            ..Self::default()
        }
    }
}

/// A value the parser had to clamp; `keyframe` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub keyframe: usize,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSequence {
    pub sequence: MotionSequence,
    pub clamped: Vec<ClampEvent>,
}

fn format_value(out: &mut String, value: f64) {
    let start = out.len();
    write!(out, "{value:.6}").unwrap();
    if &out[start..] == "-0.000000" {
        out.truncate(start);
        out.push_str("0.000000");
    }
}

/// Renders the canonical block, terminated by a newline.
pub fn serialize_sequence(seq: &MotionSequence) -> String {
    let mut out = String::with_capacity(64 + seq.len() * STATE_WIDTH * 10);
    writeln!(out, "SEQUENCE v1 T={} DT={}", seq.len(), seq.keyframe_dt()).unwrap();
    for (k, state) in seq.states().iter().enumerate() {
        write!(out, "t={}: ", k + 1).unwrap();
        for (i, value) in state.to_array().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            format_value(&mut out, *value);
        }
        out.push('\n');
    }
    out.push_str("END\n");
    out
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```") || line.trim_start().starts_with("~~~")
}

/// Numeric fields of a data row, or `None` if the line is not purely numeric.
fn numeric_fields(line: &str) -> Option<Vec<f64>> {
    let line = line.replace('\u{2212}', "-");
    let body = ROW_LABEL
        .find(&line)
        .map_or(line.as_str(), |m| &line[m.end()..]);
    let mut values = Vec::new();
    for token in body
        .split(|c: char| c == ',' || c == ';' || c == '|' || c.is_whitespace())
        .map(|t| t.trim_matches(|c| matches!(c, '[' | ']' | '(' | ')' | '{' | '}' | '`')))
        .filter(|t| !t.is_empty())
    {
        if !NUMBER.is_match(token) {
            return None;
        }
        values.push(token.parse().ok()?);
    }
    (!values.is_empty()).then_some(values)
}

struct Block {
    rows: Vec<Vec<f64>>,
    dt: Option<f64>,
}

fn block_after_header(lines: &[&str], dt: Option<f64>) -> Block {
    let mut rows = Vec::new();
    for line in lines {
        if END.is_match(line) {
            break;
        }
        if line.trim().is_empty() || is_fence(line) {
            continue;
        }
        match numeric_fields(line) {
            Some(values) => rows.push(values),
            None if rows.is_empty() => continue,
            None => break,
        }
    }
    Block { rows, dt }
}

fn headerless_block(lines: &[&str]) -> Block {
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        match numeric_fields(line) {
            Some(values) if values.len() >= MIN_HEADERLESS_FIELDS => rows.push(values),
            _ if !rows.is_empty() => break,
            _ => {}
        }
    }
    Block { rows, dt: None }
}

fn find_block(text: &str) -> Block {
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if let Some(caps) = HEADER.captures(line) {
            let dt = caps
                .get(2)
                .and_then(|m| m.as_str().parse::<f64>().ok())
                .filter(|dt| dt.is_finite() && *dt > 0.0);
            let block = block_after_header(&lines[i + 1..], dt);
            if !block.rows.is_empty() {
                return block;
            }
        }
    }
    headerless_block(&lines)
}

/// Extracts the first well-formed sequence block from free-form text.
pub fn parse_sequence(text: &str, options: &ParseOptions) -> Result<ParsedSequence, ParseError> {
    let block = find_block(text);
    if block.rows.is_empty() {
        return Err(ParseError::NoSequenceFound);
    }
    let mut states = Vec::with_capacity(block.rows.len());
    let mut clamped = Vec::new();
    for (i, row) in block.rows.iter().enumerate() {
        let raw = MotionState::from_slice(row).ok_or(ParseError::DimensionMismatch {
            row: i + 1,
            found: row.len(),
        })?;
        for violation in validate_state(&raw, &options.bounds).violations {
            clamped.push(ClampEvent {
                keyframe: i + 1,
                violation,
            });
        }
        states.push(clamp_state(&raw, &options.bounds));
    }
    if let Some(expected) = options.expected_len {
        if states.len() != expected {
            return Err(ParseError::LengthMismatch {
                expected,
                found: states.len(),
            });
        }
    }
    let dt = block.dt.unwrap_or(options.default_dt);
    let sequence = MotionSequence::new(states, dt).expect("non-empty rows and validated dt");
    Ok(ParsedSequence { sequence, clamped })
}
