//! The three language-model agents: context analysis, sequence generation
//! from demonstrations, and feedback-driven refinement.
//!
//! Prompt construction is pure; the only I/O happens inside a
//! [`ChatBackend`]. Every agent retries a bounded number of times, quoting
//! the parser's diagnostic back to the model.

mod backend;
mod openai;
mod prompts;
mod select;

pub use backend::{
    BackendError, ChatBackend, ChatMessage, ChatRole, ImagePayload, ScriptedBackend, SCRIPT_SEPARATOR,
};
pub use openai::{OpenAiBackend, OpenAiConfig};
pub use prompts::{render, PromptTemplates, TemplateError};
pub use select::{BackendSpec, UnknownBackend};

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::gesture::{builtin_gestures, find_builtin, Demonstration, GestureSpec};
use crate::motion::{
    parse_sequence, serialize_sequence, ClampEvent, MotionSequence, ParseError, ParseOptions, WorkspaceBounds,
    COLUMN_NAMES, DEFAULT_KEYFRAME_DT, DEFAULT_SEQUENCE_LEN,
};

/// Coordinate conventions given to the models.
pub const FRAME_DEFINITION: &str = "All positions are in the robot's torso frame: the origin is at the \
sternum, +x points forward, +y points to the robot's left, +z points up, in meters. Orientations are \
intrinsic Z-Y-X Euler angles written [roll, pitch, yaw] in radians, each within [-pi, pi]. At zero \
orientation the fingers point forward (+x) and the back of the hand faces up (+z). The left hand \
normally has positive y and the right hand negative y.";

/// Grammar of the sequence block the models must emit.
pub const FORMAT_DESCRIPTION: &str = "SEQUENCE v1 T=<number of keyframes> DT=<seconds between keyframes>
t=1: <22 comma-separated numbers with 6 decimals>
...
t=<T>: <22 comma-separated numbers with 6 decimals>
END";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Total attempts per agent call, including the first.
    pub retry_budget: u32,
    pub sequence_len: usize,
    pub keyframe_dt: f64,
    pub bounds: WorkspaceBounds,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            retry_budget: 3,
            sequence_len: DEFAULT_SEQUENCE_LEN,
            keyframe_dt: DEFAULT_KEYFRAME_DT,
            bounds: WorkspaceBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContextInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImagePayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
}

impl ContextInput {
    pub fn instruction(text: &str) -> Self {
        Self {
            image: None,
            instruction: Some(text.to_string()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_none() && self.instruction.as_deref().is_none_or(|t| t.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextAnalysis {
    pub narrative: String,
    pub gesture: String,
    /// The gesture is not one of the builtins.
    pub novel: bool,
}

/// What the generator is asked to perform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureRequest {
    pub name: String,
    pub description: String,
}

impl From<&GestureSpec> for GestureRequest {
    fn from(spec: &GestureSpec) -> Self {
        Self {
            name: spec.name.clone(),
            description: spec.description.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Analyze,
    Generate,
    Refine,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Analyze => "analyze",
            Stage::Generate => "generate",
            Stage::Refine => "refine",
        })
    }
}

/// One backend round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub stage: Stage,
    /// 1-based attempt within the agent call.
    pub attempt: u32,
    pub model: String,
    pub latency_ms: f64,
    /// Backend or parse error of this attempt, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A previous answer that parsed but was rejected downstream, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub previous_response: String,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub sequence: MotionSequence,
    /// The full model response, kept verbatim.
    pub reasoning: String,
    pub clamped: Vec<ClampEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutput<T> {
    pub value: T,
    pub calls: Vec<CallRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("backend error: {0}")]
    Backend(#[from] BackendError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no gesture tag found after {attempts} attempts")]
    UnparsableAnalysis { attempts: u32, calls: Vec<CallRecord> },
    #[error("generation failed after {attempts} attempts: {last}")]
    GenerationFailed {
        attempts: u32,
        last: ParseError,
        calls: Vec<CallRecord>,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl AgentError {
    /// Backend calls made before the failure, when known.
    pub fn calls(&self) -> &[CallRecord] {
        match self {
            AgentError::UnparsableAnalysis { calls, .. } | AgentError::GenerationFailed { calls, .. } => calls,
            _ => &[],
        }
    }
}

/// Extracts the last `<gesture>name</gesture>` or `⟨name⟩` tag.
pub fn extract_gesture_tag(text: &str) -> Option<String> {
    let re = Regex::new(r"(?is)<gesture>\s*(.*?)\s*</gesture>|⟨\s*([^⟩]*?)\s*⟩").expect("static pattern");
    re.captures_iter(text)
        .filter_map(|c| c.get(1).or_else(|| c.get(2)).map(|m| m.as_str().trim().to_string()))
        .filter(|name| !name.is_empty())
        .last()
}

/// The narrative is the response with the gesture tag removed.
fn parse_analysis(text: &str) -> Option<ContextAnalysis> {
    let raw = extract_gesture_tag(text)?;
    let (gesture, novel) = match find_builtin(&raw) {
        Some(spec) => (spec.name, false),
        None => (raw, true),
    };
    let re = Regex::new(r"(?is)<gesture>.*?</gesture>").expect("static pattern");
    Some(ContextAnalysis {
        narrative: re.replace_all(text, "").trim().to_string(),
        gesture,
        novel,
    })
}

enum RetryFailure<E> {
    Backend(BackendError),
    Exhausted { attempts: u32, last: E, calls: Vec<CallRecord> },
}

/// Prompt builders and retry loops for the three agents.
#[derive(Debug, Clone, Default)]
pub struct Agents {
    pub templates: PromptTemplates,
    pub config: AgentConfig,
}

impl Agents {
    pub fn new(templates: PromptTemplates, config: AgentConfig) -> Self {
        Self { templates, config }
    }

    fn common_values(&self) -> BTreeMap<&'static str, String> {
        let b = &self.config.bounds;
        let mut v = BTreeMap::new();
        v.insert("frame", FRAME_DEFINITION.to_string());
        v.insert("format", FORMAT_DESCRIPTION.to_string());
        v.insert("columns", COLUMN_NAMES.join(","));
        v.insert(
            "bounds",
            format!(
                "x in [{:.2}, {:.2}], y in [{:.2}, {:.2}], z in [{:.2}, {:.2}] m",
                b.min[0], b.max[0], b.min[1], b.max[1], b.min[2], b.max[2]
            ),
        );
        v.insert("dt", format!("{}", self.config.keyframe_dt));
        v.insert("T", self.config.sequence_len.to_string());
        v
    }

    pub fn analyze_messages(&self, input: &ContextInput) -> Result<Vec<ChatMessage>, AgentError> {
        if input.is_empty() {
            return Err(AgentError::InvalidInput("need an image or an instruction".into()));
        }
        let mut values = self.common_values();
        let mut gestures = String::new();
        for g in builtin_gestures() {
            writeln!(gestures, "- {} ({}): {}", g.name, g.category, g.description).unwrap();
        }
        values.insert("gestures", gestures);
        let system = render("analyze", &self.templates.analyze, &values)?;
        let text = match input.instruction.as_deref().map(str::trim).filter(|t| !t.is_empty()) {
            Some(instr) if input.image.is_some() => format!("The attached image is the robot's view. Instruction: {instr}"),
            Some(instr) => format!("Instruction: {instr}"),
            None => "The attached image is the robot's view. No instruction was given.".to_string(),
        };
        let mut user = ChatMessage::user(text);
        if let Some(img) = &input.image {
            user = user.with_image(img.clone());
        }
        Ok(vec![ChatMessage::system(system), user])
    }

    pub fn generate_messages(
        &self,
        gesture: &GestureRequest,
        demos: &[Demonstration],
        len: usize,
    ) -> Result<Vec<ChatMessage>, AgentError> {
        if demos.is_empty() {
            return Err(AgentError::InvalidInput("at least one demonstration is required".into()));
        }
        if len < 2 {
            return Err(AgentError::InvalidInput(format!("T must be at least 2, got {len}")));
        }
        let mut values = self.common_values();
        values.insert("T", len.to_string());
        let mut text = String::new();
        for (k, d) in demos.iter().enumerate() {
            writeln!(text, "Demonstration {}: <gesture>{}</gesture>", k + 1, d.gesture.name).unwrap();
            writeln!(text, "Description: {}", d.gesture.description).unwrap();
            text.push_str(&serialize_sequence(&d.sequence));
            text.push('\n');
        }
        values.insert("demonstrations", text.trim_end().to_string());
        let system = render("generate", &self.templates.generate, &values)?;
        let mut user = format!("Gesture: <gesture>{}</gesture>\n", gesture.name);
        if !gesture.description.trim().is_empty() {
            writeln!(user, "Description: {}", gesture.description.trim()).unwrap();
        }
        write!(user, "Generate the motion sequence with T={len} keyframes.").unwrap();
        Ok(vec![ChatMessage::system(system), ChatMessage::user(user)])
    }

    pub fn refine_messages(&self, history: &[(MotionSequence, String)]) -> Result<Vec<ChatMessage>, AgentError> {
        let Some((last, feedback)) = history.last() else {
            return Err(AgentError::InvalidInput("refinement needs at least one previous sequence".into()));
        };
        if feedback.trim().is_empty() {
            return Err(AgentError::InvalidInput("the latest feedback is empty".into()));
        }
        let mut values = self.common_values();
        values.insert("T", last.len().to_string());
        values.insert("dt", format!("{}", last.keyframe_dt()));
        let mut messages = vec![ChatMessage::system(render("refine", &self.templates.refine, &values)?)];
        for (seq, fb) in history {
            messages.push(ChatMessage::assistant(serialize_sequence(seq)));
            messages.push(ChatMessage::user(fb.trim().to_string()));
        }
        Ok(messages)
    }

    /// Asks, parses, and on parse failure re-asks with the diagnostic, up to
    /// the retry budget.
    fn converse<T, E: fmt::Display>(
        &self,
        stage: Stage,
        backend: &dyn ChatBackend,
        mut messages: Vec<ChatMessage>,
        parse: impl Fn(&str) -> Result<T, E>,
        retry_hint: &str,
    ) -> Result<(T, String, Vec<CallRecord>), RetryFailure<E>> {
        let budget = self.config.retry_budget.max(1);
        let mut calls = Vec::new();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let start = Instant::now();
            let result = backend.complete(&messages);
            let latency_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut record = CallRecord {
                stage,
                attempt,
                model: backend.model().to_string(),
                latency_ms,
                error: None,
            };
            let response = match result {
                Ok(r) => r,
                Err(e) => {
                    tracing::warn!(%stage, attempt, error = %e, "backend call failed");
                    return Err(RetryFailure::Backend(e));
                }
            };
            match parse(&response) {
                Ok(value) => {
                    calls.push(record);
                    return Ok((value, response, calls));
                }
                Err(e) => {
                    tracing::info!(%stage, attempt, error = %e, "response rejected");
                    record.error = Some(e.to_string());
                    calls.push(record);
                    if attempt >= budget {
                        return Err(RetryFailure::Exhausted {
                            attempts: attempt,
                            last: e,
                            calls,
                        });
                    }
                    messages.push(ChatMessage::assistant(response));
                    messages.push(ChatMessage::user(format!(
                        "Your answer could not be used: {e}. {retry_hint}"
                    )));
                }
            }
        }
    }

    pub fn analyze_context(
        &self,
        input: &ContextInput,
        backend: &dyn ChatBackend,
    ) -> Result<AgentOutput<ContextAnalysis>, AgentError> {
        if input.image.is_some() && !backend.supports_images() {
            return Err(AgentError::InvalidInput(format!(
                "model {} does not accept images",
                backend.model()
            )));
        }
        let messages = self.analyze_messages(input)?;
        let parse = |text: &str| parse_analysis(text).ok_or("no <gesture>name</gesture> tag found");
        match self.converse(
            Stage::Analyze,
            backend,
            messages,
            parse,
            "End your answer with one line of the form <gesture>gesture-name</gesture>.",
        ) {
            Ok((value, _, calls)) => Ok(AgentOutput { value, calls }),
            Err(RetryFailure::Backend(e)) => Err(e.into()),
            Err(RetryFailure::Exhausted { attempts, calls, .. }) => {
                Err(AgentError::UnparsableAnalysis { attempts, calls })
            }
        }
    }

    fn sequence_call(
        &self,
        stage: Stage,
        backend: &dyn ChatBackend,
        mut messages: Vec<ChatMessage>,
        len: usize,
        default_dt: f64,
        correction: Option<&Correction>,
    ) -> Result<AgentOutput<Generated>, AgentError> {
        if let Some(c) = correction {
            messages.push(ChatMessage::assistant(c.previous_response.clone()));
            messages.push(ChatMessage::user(format!(
                "That sequence cannot be executed: {}. Keep the gesture but fix the problem, and answer \
                 with one corrected sequence block.",
                c.diagnostic
            )));
        }
        let options = ParseOptions {
            expected_len: Some(len),
            default_dt,
            bounds: self.config.bounds,
        };
        let hint = format!(
            "Reply with exactly one SEQUENCE block of T={len} rows, each with 22 comma-separated numbers, followed by END."
        );
        match self.converse(stage, backend, messages, |text| parse_sequence(text, &options), &hint) {
            Ok((parsed, reasoning, calls)) => Ok(AgentOutput {
                value: Generated {
                    sequence: parsed.sequence,
                    reasoning,
                    clamped: parsed.clamped,
                },
                calls,
            }),
            Err(RetryFailure::Backend(e)) => Err(e.into()),
            Err(RetryFailure::Exhausted { attempts, last, calls }) => {
                Err(AgentError::GenerationFailed { attempts, last, calls })
            }
        }
    }

    /// Initial sequence for `gesture`, conditioned on `demos`.
    pub fn generate_sequence(
        &self,
        gesture: &GestureRequest,
        demos: &[Demonstration],
        backend: &dyn ChatBackend,
        len: usize,
        correction: Option<&Correction>,
    ) -> Result<AgentOutput<Generated>, AgentError> {
        let messages = self.generate_messages(gesture, demos, len)?;
        self.sequence_call(Stage::Generate, backend, messages, len, self.config.keyframe_dt, correction)
    }

    /// Next sequence given the alternating history of sequences and feedback.
    pub fn refine_sequence(
        &self,
        history: &[(MotionSequence, String)],
        backend: &dyn ChatBackend,
        correction: Option<&Correction>,
    ) -> Result<AgentOutput<Generated>, AgentError> {
        let messages = self.refine_messages(history)?;
        let last = &history.last().expect("checked by refine_messages").0;
        self.sequence_call(Stage::Refine, backend, messages, last.len(), last.keyframe_dt(), correction)
    }
}
