//! Human-readable tables and the structured objects printed with `--json`.

use serde_json::{json, Value};

use gesturegen_core::session::{IterationRecord, SessionRecord};
use gesturegen_core::trajectory::MotionMetrics;

pub fn metrics_table(m: &MotionMetrics) -> String {
    let mut s = format!(
        "{:<6} {:>12} {:>12} {:>12} {:>12}\n",
        "hand", "height (m)", "path (m)", "jerk rms", "peak (m/s)"
    );
    for (name, h) in [("left", &m.left), ("right", &m.right)] {
        s += &format!(
            "{name:<6} {:>12.4} {:>12.4} {:>12.3} {:>12.4}\n",
            h.mean_hand_height, h.path_length, h.jerk_rms, h.peak_speed
        );
    }
    s += &format!("bilateral symmetry {:.3}\n", m.bilateral_symmetry);
    s
}

fn iteration_json(it: &IterationRecord) -> Value {
    json!({
        "index": it.index,
        "feasible": it.feasible(),
        "feasibility": it.feasibility.summary(),
        "unreachable_keyframes": it.feasibility.unreachable_keyframes,
        "collision_samples": it.feasibility.collision_count(),
        "metrics": it.metrics,
        "clamped": it.clamped.len(),
        "discarded_attempts": it.discarded_attempts.iter().map(|d| &d.diagnostic).collect::<Vec<_>>(),
        "feedback": it.feedback,
        "calls": it.calls,
    })
}

pub fn summary_json(r: &SessionRecord) -> Value {
    json!({
        "session_id": r.id,
        "created_at": r.created_at,
        "status": r.status,
        "gesture": r.gesture,
        "novel_gesture": r.novel_gesture,
        "iterations": r.iterations.len(),
        "refinements": r.refinements(),
        "i_max": r.i_max,
        "finalized": r.finalized.is_some(),
    })
}

pub fn session_json(r: &SessionRecord) -> Value {
    let mut v = summary_json(r);
    v["analysis"] = json!(r.analysis);
    v["latest"] = r.latest().map(iteration_json).unwrap_or(Value::Null);
    v["diagnostics"] = json!(r.diagnostics);
    v
}

pub fn session_text(r: &SessionRecord) -> String {
    let mut s = format!("session    {}\n", r.id);
    if let Some(a) = &r.analysis {
        s += &format!("context    {}\n", a.narrative.lines().next().unwrap_or(""));
    }
    if let Some(g) = &r.gesture {
        s += &format!("gesture    {g}{}\n", if r.novel_gesture { " (novel)" } else { "" });
    }
    s += &format!(
        "status     {}\nrefined    {} of {}\n",
        r.status,
        r.refinements(),
        r.i_max
    );
    if let Some(it) = r.latest() {
        s += &format!("iteration  {}: {}\n", it.index, it.feasibility.summary());
        for d in &it.discarded_attempts {
            s += &format!("regenerated after: {}\n", d.diagnostic);
        }
        s += &metrics_table(&it.metrics);
        for c in &it.calls {
            s += &format!(
                "call       {} #{} {} {:.1} ms{}\n",
                c.stage,
                c.attempt,
                c.model,
                c.latency_ms,
                c.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
            );
        }
    }
    for d in &r.diagnostics {
        s += &format!("note       {d}\n");
    }
    s
}

pub fn history_text(r: &SessionRecord) -> String {
    let mut s = session_text(r);
    for it in &r.iterations {
        s += &format!(
            "  #{} {} height {:.3} m{}\n",
            it.index,
            if it.feasible() { "feasible  " } else { "infeasible" },
            it.metrics.mean_hand_height(),
            it.feedback.as_deref().map(|f| format!(" -> \"{f}\"")).unwrap_or_default()
        );
    }
    s
}

pub fn sessions_table(records: &[SessionRecord]) -> String {
    let mut s = format!(
        "{:<36}  {:<20}  {:<17}  {:<14}  {:>5}\n",
        "id", "created", "status", "gesture", "iters"
    );
    for r in records {
        s += &format!(
            "{:<36}  {:<20}  {:<17}  {:<14}  {:>5}\n",
            r.id,
            r.created_at.format("%Y-%m-%d %H:%M:%S"),
            r.status.as_str(),
            r.gesture.as_deref().unwrap_or("-"),
            r.iterations.len()
        );
    }
    s
}
