//! Generation sessions: context analysis, the initial sequence, bounded
//! feedback refinements, and the final executable trajectory.
//!
//! Status moves `Analyzing -> AwaitingFeedback -> (Refining ->
//! AwaitingFeedback)* -> Finalized`; `Failed` can be entered from anywhere.
//! Long-running steps are split into a preparation that mutates the record,
//! a pure backend phase, and an apply step, so a server can persist the
//! intermediate status while the model is working.

mod stats;
mod store;

pub use stats::{classify_feedback, feedback_stats, FeedbackKind, FeedbackStats};
pub use store::{SessionStore, StoreError};

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::agents::{
    AgentError, AgentOutput, Agents, CallRecord, ChatBackend, ContextAnalysis, ContextInput, Correction, Generated,
    GestureRequest,
};
use crate::gesture::{builtin_demonstrations, find_builtin, save_gesture, Demonstration, GestureCategory, GestureSpec};
use crate::kinematics::{BodyModel, IkConfig};
use crate::motion::{ClampEvent, MotionSequence};
use crate::trajectory::{
    check_trajectory, compute_metrics, interpolate_within, limit_speed, write_columnar, DenseTrajectory,
    FeasibilityReport, MetricsError, MotionMetrics, TrajectoryError, DEFAULT_RATE,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_I_MAX: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Analyzing,
    AwaitingFeedback,
    Refining,
    Finalized,
    Failed,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Analyzing => "analyzing",
            SessionStatus::AwaitingFeedback => "awaiting_feedback",
            SessionStatus::Refining => "refining",
            SessionStatus::Finalized => "finalized",
            SessionStatus::Failed => "failed",
        }
    }
}

impl std::fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to do when a generated sequence fails the feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FailurePolicy {
    /// Regenerate up to `attempts` times with the diagnostic appended, then
    /// hand the last attempt to the operator.
    Regenerate { attempts: u32 },
    /// Hand the infeasible sequence to the operator straight away.
    Surface,
}

impl Default for FailurePolicy {
    fn default() -> Self {
        FailurePolicy::Regenerate { attempts: 1 }
    }
}

impl FailurePolicy {
    fn regenerations(self) -> u32 {
        match self {
            FailurePolicy::Regenerate { attempts } => attempts,
            FailurePolicy::Surface => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SessionInput {
    /// Run context analysis first.
    Context(ContextInput),
    /// Skip analysis and generate this gesture directly.
    Gesture { name: String },
}

/// A generated sequence that was replaced by an automatic regeneration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedAttempt {
    pub sequence: MotionSequence,
    pub reasoning: String,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub index: usize,
    pub sequence: MotionSequence,
    pub reasoning: String,
    /// Operator feedback on this iteration; absent on the latest one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    pub feasibility: FeasibilityReport,
    pub metrics: MotionMetrics,
    #[serde(default)]
    pub clamped: Vec<ClampEvent>,
    #[serde(default)]
    pub discarded_attempts: Vec<DiscardedAttempt>,
    #[serde(default)]
    pub calls: Vec<CallRecord>,
}

impl IterationRecord {
    pub fn feasible(&self) -> bool {
        self.feasibility.feasible()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportPaths {
    pub gesture: PathBuf,
    pub trajectory: PathBuf,
    pub metrics: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalizedInfo {
    /// Iteration the trajectory was built from.
    pub iteration: usize,
    pub rate: f64,
    pub duration: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exports: Option<ExportPaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u32,
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub input: SessionInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<ContextAnalysis>,
    /// Gesture being generated, once known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gesture: Option<String>,
    #[serde(default)]
    pub novel_gesture: bool,
    pub iterations: Vec<IterationRecord>,
    pub i_max: usize,
    pub status: SessionStatus,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finalized: Option<FinalizedInfo>,
}

impl SessionRecord {
    pub fn new(input: SessionInput, i_max: usize) -> Self {
        let now = Utc::now();
        Self {
            schema_version: SCHEMA_VERSION,
            id: uuid::Uuid::new_v4().to_string(),
            created_at: now,
            updated_at: now,
            input,
            analysis: None,
            gesture: None,
            novel_gesture: false,
            iterations: Vec::new(),
            i_max,
            status: SessionStatus::Analyzing,
            diagnostics: Vec::new(),
            finalized: None,
        }
    }

    /// Operator feedback submitted so far.
    pub fn refinements(&self) -> usize {
        self.iterations.iter().filter(|it| it.feedback.is_some()).count()
    }

    pub fn remaining_refinements(&self) -> usize {
        self.i_max.saturating_sub(self.refinements())
    }

    pub fn latest(&self) -> Option<&IterationRecord> {
        self.iterations.last()
    }

    pub fn latest_feasible(&self) -> Option<&IterationRecord> {
        self.iterations.iter().rev().find(|it| it.feasible())
    }

    /// `(sequence, feedback)` pairs in order, as sent to the refiner.
    pub fn history(&self) -> Vec<(MotionSequence, String)> {
        self.iterations
            .iter()
            .filter_map(|it| it.feedback.as_ref().map(|fb| (it.sequence.clone(), fb.clone())))
            .collect()
    }

    /// Repairs a record left mid-step by a crashed process: an interrupted
    /// refinement withdraws its feedback, an interrupted start fails.
    /// Returns whether anything changed.
    pub fn recover_interrupted(&mut self) -> bool {
        match self.status {
            SessionStatus::Refining => {
                if let Some(latest) = self.iterations.last_mut() {
                    latest.feedback = None;
                }
                self.diagnostics.push("refinement was interrupted; feedback withdrawn".into());
                self.status = SessionStatus::AwaitingFeedback;
                self.touch();
                true
            }
            SessionStatus::Analyzing => {
                self.fail("generation was interrupted".into());
                true
            }
            _ => false,
        }
    }

    fn touch(&mut self) {
        self.updated_at = Utc::now();
    }

    fn fail(&mut self, diagnostic: String) {
        tracing::warn!(session = %self.id, %diagnostic, "session failed");
        self.diagnostics.push(diagnostic);
        self.status = SessionStatus::Failed;
        self.touch();
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("refinement limit reached: i_max = {i_max} feedback iterations already used")]
    IterationLimitExceeded { i_max: usize },
    #[error("cannot {operation} while the session is {status}")]
    InvalidState { status: SessionStatus, operation: &'static str },
    #[error("feedback must not be empty")]
    EmptyFeedback,
    #[error("no feasible iteration to finalize")]
    NoFeasibleIteration,
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("export failed: {0}")]
    Export(String),
    #[error("bundled demonstrations are unusable: {0}")]
    Demonstrations(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub i_max: usize,
    pub failure_policy: FailurePolicy,
    /// Sample rate used for feasibility checks and metrics, Hz.
    pub rate: f64,
    /// Optional per-hand speed cap applied to dense trajectories, m/s.
    pub speed_cap: Option<f64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            i_max: DEFAULT_I_MAX,
            failure_policy: FailurePolicy::default(),
            rate: DEFAULT_RATE,
            speed_cap: None,
        }
    }
}

/// Everything a session needs besides the backend.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub agents: Agents,
    pub demos: Vec<Demonstration>,
    pub body: BodyModel,
    pub ik: IkConfig,
    pub config: SessionConfig,
}

/// Result of the backend phase of a start or refinement.
#[derive(Debug)]
pub struct StepOutcome {
    analysis: Option<ContextAnalysis>,
    gesture: Option<(String, bool)>,
    result: Result<IterationRecord, AgentError>,
    calls: Vec<CallRecord>,
}

impl Pipeline {
    pub fn new(agents: Agents, body: BodyModel, config: SessionConfig) -> Result<Self, SessionError> {
        let demos = builtin_demonstrations().map_err(|e| SessionError::Demonstrations(e.to_string()))?;
        Ok(Self {
            agents,
            demos,
            body,
            ik: IkConfig::default(),
            config,
        })
    }

    /// Dense trajectory of `seq` at `rate`, speed-capped when configured.
    pub fn trajectory(&self, seq: &MotionSequence, rate: f64) -> Result<DenseTrajectory, SessionError> {
        let traj = interpolate_within(seq, rate, &self.agents.config.bounds)?;
        Ok(match self.config.speed_cap {
            Some(cap) => limit_speed(&traj, cap)?,
            None => traj,
        })
    }

    /// Feasibility report and metrics at the configured rate.
    pub fn evaluate(&self, seq: &MotionSequence) -> Result<(FeasibilityReport, MotionMetrics), SessionError> {
        let traj = self.trajectory(seq, self.config.rate)?;
        let report = check_trajectory(&traj, &self.body, &self.ik);
        let metrics = compute_metrics(&traj)?;
        Ok((report, metrics))
    }

    pub fn new_session(&self, input: SessionInput) -> SessionRecord {
        SessionRecord::new(input, self.config.i_max)
    }

    /// Runs `ask` and, while the result is infeasible and the policy allows,
    /// asks again with the diagnostic. Returns the iteration to record.
    fn produce(
        &self,
        index: usize,
        mut ask: impl FnMut(Option<&Correction>) -> Result<AgentOutput<Generated>, AgentError>,
        calls: &mut Vec<CallRecord>,
    ) -> Result<IterationRecord, AgentError> {
        let mut discarded = Vec::new();
        let mut correction: Option<Correction> = None;
        let mut regenerations = 0;
        loop {
            let out = match ask(correction.as_ref()) {
                Ok(out) => out,
                Err(e) => {
                    calls.extend_from_slice(e.calls());
                    return Err(e);
                }
            };
            calls.extend(out.calls.iter().cloned());
            let Generated {
                sequence,
                reasoning,
                clamped,
            } = out.value;
            let (feasibility, metrics) = match self.evaluate(&sequence) {
                Ok(v) => v,
                Err(e) => {
                    // only reachable with a degenerate sequence; treat it as unparsable
                    return Err(AgentError::InvalidInput(e.to_string()));
                }
            };
            if !feasibility.feasible() && regenerations < self.config.failure_policy.regenerations() {
                regenerations += 1;
                let diagnostic = feasibility.summary();
                tracing::info!(index, %diagnostic, "infeasible sequence, regenerating");
                correction = Some(Correction {
                    previous_response: reasoning.clone(),
                    diagnostic: diagnostic.clone(),
                });
                discarded.push(DiscardedAttempt {
                    sequence,
                    reasoning,
                    diagnostic,
                });
                continue;
            }
            return Ok(IterationRecord {
                index,
                sequence,
                reasoning,
                feedback: None,
                feasibility,
                metrics,
                clamped,
                discarded_attempts: discarded,
                calls: Vec::new(),
            });
        }
    }

    /// Backend phase of [`Pipeline::start_session`]; does not touch the record.
    pub fn run_start(&self, input: &SessionInput, backend: &dyn ChatBackend) -> StepOutcome {
        let mut calls = Vec::new();
        let (analysis, name) = match input {
            SessionInput::Gesture { name } => (None, name.clone()),
            SessionInput::Context(ctx) => match self.agents.analyze_context(ctx, backend) {
                Ok(out) => {
                    calls.extend(out.calls);
                    let name = out.value.gesture.clone();
                    (Some(out.value), name)
                }
                Err(e) => {
                    calls.extend_from_slice(e.calls());
                    return StepOutcome {
                        analysis: None,
                        gesture: None,
                        result: Err(e),
                        calls,
                    };
                }
            },
        };
        let (request, novel) = match find_builtin(&name) {
            Some(spec) => (GestureRequest::from(&spec), false),
            None => (
                GestureRequest {
                    name: name.trim().to_string(),
                    description: analysis.as_ref().map(|a| a.narrative.clone()).unwrap_or_default(),
                },
                true,
            ),
        };
        let len = self.agents.config.sequence_len;
        let result = self.produce(
            1,
            |c| self.agents.generate_sequence(&request, &self.demos, backend, len, c),
            &mut calls,
        );
        StepOutcome {
            analysis,
            gesture: Some((request.name, novel)),
            result,
            calls,
        }
    }

    /// Records the outcome of [`Pipeline::run_start`].
    pub fn apply_start(&self, record: &mut SessionRecord, outcome: StepOutcome) {
        record.analysis = outcome.analysis;
        if let Some((name, novel)) = outcome.gesture {
            record.gesture = Some(name);
            record.novel_gesture = novel;
        }
        match outcome.result {
            Ok(mut it) => {
                it.calls = outcome.calls;
                self.note_feasibility(record, &it);
                record.iterations.push(it);
                record.status = SessionStatus::AwaitingFeedback;
                record.touch();
            }
            Err(e) => record.fail(format!("generation failed: {e}")),
        }
    }

    fn note_feasibility(&self, record: &mut SessionRecord, it: &IterationRecord) {
        if !it.feasible() {
            record.diagnostics.push(format!(
                "iteration {} is infeasible ({}); submit feedback to fix it",
                it.index,
                it.feasibility.summary()
            ));
        }
    }

    /// Analysis (unless a gesture is given), generation and evaluation of
    /// iteration 1. Backend failures leave the record `Failed`.
    pub fn start_session(&self, input: SessionInput, backend: &dyn ChatBackend) -> SessionRecord {
        let mut record = self.new_session(input);
        let outcome = self.run_start(&record.input, backend);
        self.apply_start(&mut record, outcome);
        record
    }

    /// Validates and attaches `feedback`, moving the record to `Refining`.
    /// Returns the history to refine from.
    pub fn prepare_feedback(
        &self,
        record: &mut SessionRecord,
        feedback: &str,
    ) -> Result<Vec<(MotionSequence, String)>, SessionError> {
        if record.status != SessionStatus::AwaitingFeedback {
            return Err(SessionError::InvalidState {
                status: record.status,
                operation: "submit feedback",
            });
        }
        if record.refinements() >= record.i_max {
            return Err(SessionError::IterationLimitExceeded { i_max: record.i_max });
        }
        let feedback = feedback.trim();
        if feedback.is_empty() {
            return Err(SessionError::EmptyFeedback);
        }
        let latest = record.iterations.last_mut().ok_or(SessionError::InvalidState {
            status: record.status,
            operation: "submit feedback without an iteration",
        })?;
        latest.feedback = Some(feedback.to_string());
        record.status = SessionStatus::Refining;
        record.touch();
        Ok(record.history())
    }

    /// Backend phase of a refinement.
    pub fn run_refinement(
        &self,
        history: &[(MotionSequence, String)],
        next_index: usize,
        backend: &dyn ChatBackend,
    ) -> StepOutcome {
        let mut calls = Vec::new();
        let result = self.produce(
            next_index,
            |c| self.agents.refine_sequence(history, backend, c),
            &mut calls,
        );
        StepOutcome {
            analysis: None,
            gesture: None,
            result,
            calls,
        }
    }

    /// Records a refinement. On failure the feedback is withdrawn and the
    /// session returns to `AwaitingFeedback` so the operator can retry.
    pub fn apply_refinement(&self, record: &mut SessionRecord, outcome: StepOutcome) -> Result<(), SessionError> {
        match outcome.result {
            Ok(mut it) => {
                it.calls = outcome.calls;
                self.note_feasibility(record, &it);
                record.iterations.push(it);
                record.status = SessionStatus::AwaitingFeedback;
                record.touch();
                Ok(())
            }
            Err(e) => {
                if let Some(latest) = record.iterations.last_mut() {
                    latest.feedback = None;
                }
                record.diagnostics.push(format!("refinement failed: {e}"));
                record.status = SessionStatus::AwaitingFeedback;
                record.touch();
                Err(e.into())
            }
        }
    }

    /// Adds operator feedback and records the refined iteration.
    pub fn submit_feedback(
        &self,
        record: &mut SessionRecord,
        feedback: &str,
        backend: &dyn ChatBackend,
    ) -> Result<(), SessionError> {
        let history = self.prepare_feedback(record, feedback)?;
        let outcome = self.run_refinement(&history, record.iterations.len() + 1, backend);
        self.apply_refinement(record, outcome)
    }

    /// Dense trajectory of the latest feasible iteration, with its
    /// feasibility report attached. Marks the session finalized and, when
    /// `export_dir` is given, writes the export bundle under
    /// `export_dir/<session id>/`. Calling it again rebuilds the same artifact.
    pub fn finalize(
        &self,
        record: &mut SessionRecord,
        rate: f64,
        export_dir: Option<&Path>,
    ) -> Result<DenseTrajectory, SessionError> {
        if matches!(record.status, SessionStatus::Analyzing | SessionStatus::Refining) {
            return Err(SessionError::InvalidState {
                status: record.status,
                operation: "finalize",
            });
        }
        let it = record.latest_feasible().ok_or(SessionError::NoFeasibleIteration)?.clone();
        let traj = self.trajectory(&it.sequence, rate)?;
        let report = check_trajectory(&traj, &self.body, &self.ik);
        let metrics = compute_metrics(&traj)?;
        let traj = traj.with_feasibility(report);
        let exports = match export_dir {
            Some(dir) => Some(self.export(record, &it, &traj, &metrics, dir)?),
            None => record.finalized.as_ref().and_then(|f| f.exports.clone()),
        };
        record.finalized = Some(FinalizedInfo {
            iteration: it.index,
            rate,
            duration: traj.duration,
            samples: traj.samples.len(),
            exports,
        });
        record.status = SessionStatus::Finalized;
        record.touch();
        Ok(traj)
    }

    fn export(
        &self,
        record: &SessionRecord,
        it: &IterationRecord,
        traj: &DenseTrajectory,
        metrics: &MotionMetrics,
        dir: &Path,
    ) -> Result<ExportPaths, SessionError> {
        let err = |e: &dyn std::fmt::Display| SessionError::Export(e.to_string());
        let out = dir.join(&record.id);
        std::fs::create_dir_all(&out).map_err(|e| err(&e))?;
        let name = record.gesture.clone().unwrap_or_else(|| "gesture".into());
        let spec = find_builtin(&name).unwrap_or_else(|| {
            let description = record.analysis.as_ref().map(|a| a.narrative.as_str()).unwrap_or("");
            GestureSpec::new(&name, GestureCategory::Illustrator, description)
        });
        let paths = ExportPaths {
            gesture: out.join(format!("{}.gesture", sanitize(&spec.name))),
            trajectory: out.join("trajectory.csv"),
            metrics: out.join("metrics.json"),
        };
        save_gesture(&paths.gesture, &spec, &it.sequence).map_err(|e| err(&e))?;
        let file = std::fs::File::create(&paths.trajectory).map_err(|e| err(&e))?;
        write_columnar(traj, std::io::BufWriter::new(file)).map_err(|e| err(&e))?;
        let summary = serde_json::json!({
            "session": record.id,
            "iteration": it.index,
            "rate": traj.rate,
            "duration": traj.duration,
            "samples": traj.samples.len(),
            "feasible": traj.feasibility.as_ref().is_some_and(|f| f.feasible()),
            "metrics": metrics,
        });
        let text = serde_json::to_string_pretty(&summary).map_err(|e| err(&e))?;
        std::fs::write(&paths.metrics, text + "\n").map_err(|e| err(&e))?;
        Ok(paths)
    }
}

/// File-name-safe version of a gesture name.
fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect();
    if s.is_empty() {
        "gesture".into()
    } else {
        s
    }
}
