//! Regenerates the bundled gesture files and the scripted-backend fixtures
//! used by the CLI tests.
//!
//! Every gesture is posed in joint space and converted to hand poses with
//! forward kinematics, so each keyframe is reachable by construction. The
//! result is then checked like any other sequence: validation, keyframe IK
//! and per-sample self-collision.
//!
//! ```text
//! cargo run -p gesturegen-core --example author_assets
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gesturegen_core::gesture::{builtin_gestures, gesture_to_string, GestureCategory, GestureSpec};
use gesturegen_core::kinematics::{hand_pose, BodyModel, IkConfig, JointConfig};
use gesturegen_core::motion::{
    serialize_sequence, validate_sequence, HandState, MotionSequence, MotionState, WorkspaceBounds,
};
use gesturegen_core::trajectory::{check_trajectory, interpolate, DEFAULT_RATE};

const SEPARATOR: &str = "=== RESPONSE ===";

/// `[pitch, roll, yaw, elbow, wrist roll, wrist pitch, wrist yaw]`
type Q = [f64; 7];

#[derive(Clone, Copy)]
struct Key {
    left: Q,
    right: Q,
    left_fingers: [f64; 5],
    right_fingers: [f64; 5],
}

const REST: Q = [0.0, 0.12, 0.0, 0.25, 0.0, 0.0, 0.0];
const RELAXED: [f64; 5] = [0.4; 5];
const OPEN: [f64; 5] = [1.0; 5];
const FIST: [f64; 5] = [0.0; 5];

fn key(left: Q, lf: [f64; 5], right: Q, rf: [f64; 5]) -> Key {
    Key {
        left,
        right,
        left_fingers: lf,
        right_fingers: rf,
    }
}

/// Right hand moves, left arm rests.
fn right(q: Q, f: [f64; 5]) -> Key {
    key(REST, RELAXED, q, f)
}

/// Both arms take the same (mirrored) pose.
fn both(q: Q, f: [f64; 5]) -> Key {
    key(q, f, q, f)
}

fn round6(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn to_sequence(body: &BodyModel, keys: &[Key]) -> MotionSequence {
    let states = keys
        .iter()
        .map(|k| {
            let hand = |arm, q: &Q, f: [f64; 5]| {
                let pose = hand_pose(arm, &JointConfig(*q));
                HandState::new(pose.position.map(round6), pose.orientation.map(round6), f)
            };
            MotionState::new(
                hand(&body.left, &k.left, k.left_fingers),
                hand(&body.right, &k.right, k.right_fingers),
            )
        })
        .collect();
    MotionSequence::new(states, 0.5).unwrap()
}

fn idle() -> Vec<Key> {
    vec![both(REST, RELAXED); 10]
}

fn wave() -> Vec<Key> {
    let up = |roll: f64, yaw: f64| [0.5, roll, yaw, 1.9, 0.0, 0.0, 0.0];
    vec![
        right(REST, RELAXED),
        right([0.3, 0.4, 0.0, 1.2, 0.0, 0.0, 0.0], [0.7; 5]),
        right(up(0.6, 0.0), OPEN),
        right(up(0.9, 0.3), OPEN),
        right(up(0.45, -0.3), OPEN),
        right(up(0.9, 0.3), OPEN),
        right(up(0.45, -0.3), OPEN),
        right(up(0.9, 0.3), OPEN),
        right([0.3, 0.4, 0.0, 1.2, 0.0, 0.0, 0.0], [0.7; 5]),
        right(REST, RELAXED),
    ]
}

fn thumbs_up() -> Vec<Key> {
    let thumb = [1.0, 0.0, 0.0, 0.0, 0.0];
    let raise = |pitch: f64, elbow: f64| [pitch, 0.15, -0.3, elbow, 1.3, 0.0, 0.0];
    vec![
        right(REST, RELAXED),
        right([0.4, 0.15, -0.15, 0.8, 0.6, 0.0, 0.0], [0.6, 0.2, 0.2, 0.2, 0.2]),
        right(raise(0.8, 1.3), thumb),
        right(raise(0.85, 1.45), thumb),
        right(raise(0.8, 1.3), thumb),
        right(raise(0.85, 1.45), thumb),
        right(raise(0.8, 1.3), thumb),
        right(raise(0.8, 1.3), thumb),
        right([0.4, 0.15, -0.15, 0.8, 0.6, 0.0, 0.0], [0.6, 0.2, 0.2, 0.2, 0.2]),
        right(REST, RELAXED),
    ]
}

fn okay() -> Vec<Key> {
    let ring = [0.35, 0.3, 1.0, 1.0, 1.0];
    let up = |pitch: f64| [pitch, 0.35, 0.0, 1.9, 0.2, -0.2, 0.0];
    vec![
        right(REST, RELAXED),
        right([0.3, 0.25, 0.0, 1.1, 0.1, 0.0, 0.0], [0.6; 5]),
        right(up(0.5), [0.5, 0.5, 1.0, 1.0, 1.0]),
        right(up(0.55), ring),
        right(up(0.55), ring),
        right(up(0.6), ring),
        right(up(0.55), ring),
        right(up(0.5), ring),
        right([0.3, 0.25, 0.0, 1.1, 0.1, 0.0, 0.0], [0.6; 5]),
        right(REST, RELAXED),
    ]
}

fn v_sign() -> Vec<Key> {
    let v = [0.1, 1.0, 1.0, 0.0, 0.0];
    let up = |roll: f64| [0.45, roll, 0.0, 2.0, 0.0, -0.1, 0.0];
    vec![
        right(REST, RELAXED),
        right([0.3, 0.3, 0.0, 1.2, 0.0, 0.0, 0.0], [0.5; 5]),
        right(up(0.4), v),
        right(up(0.45), v),
        right(up(0.4), v),
        right(up(0.45), v),
        right(up(0.4), v),
        right(up(0.4), v),
        right([0.3, 0.3, 0.0, 1.2, 0.0, 0.0, 0.0], [0.5; 5]),
        right(REST, RELAXED),
    ]
}

fn air_quotes() -> Vec<Key> {
    let pose = [0.35, 0.35, 0.0, 2.2, 0.0, 0.0, 0.0];
    let up = [0.2, 1.0, 1.0, 0.1, 0.1];
    let curl = [0.2, 0.4, 0.4, 0.1, 0.1];
    vec![
        both(REST, RELAXED),
        both([0.25, 0.3, 0.0, 1.3, 0.0, 0.0, 0.0], [0.5; 5]),
        both(pose, up),
        both(pose, curl),
        both(pose, up),
        both(pose, curl),
        both(pose, up),
        both(pose, up),
        both([0.25, 0.3, 0.0, 1.3, 0.0, 0.0, 0.0], [0.5; 5]),
        both(REST, RELAXED),
    ]
}

fn come_closer() -> Vec<Key> {
    let palm_up = |pitch: f64| [pitch, 0.2, 0.0, 1.2, 1.5, 0.0, 0.0];
    let curled = [0.5, 0.3, 0.3, 0.3, 0.3];
    vec![
        right(REST, RELAXED),
        right([0.25, 0.2, 0.0, 0.9, 0.8, 0.0, 0.0], [0.6; 5]),
        right(palm_up(0.5), OPEN),
        right(palm_up(0.45), curled),
        right(palm_up(0.5), OPEN),
        right(palm_up(0.45), curled),
        right(palm_up(0.5), OPEN),
        right(palm_up(0.45), curled),
        right([0.25, 0.2, 0.0, 0.9, 0.8, 0.0, 0.0], [0.6; 5]),
        right(REST, RELAXED),
    ]
}

fn fist_pump() -> Vec<Key> {
    let high = [0.7, 0.45, 0.0, 2.2, 0.0, 0.0, 0.0];
    let low = [0.35, 0.3, 0.0, 1.6, 0.0, 0.0, 0.0];
    vec![
        right(REST, RELAXED),
        right([0.3, 0.3, 0.0, 1.3, 0.0, 0.0, 0.0], [0.3; 5]),
        right(high, FIST),
        right(low, FIST),
        right(high, FIST),
        right(low, FIST),
        right(high, FIST),
        right(low, FIST),
        right([0.3, 0.3, 0.0, 1.3, 0.0, 0.0, 0.0], [0.3; 5]),
        right(REST, RELAXED),
    ]
}

fn jazz_hands() -> Vec<Key> {
    let shake = |wrist: f64| [0.45, 0.8, 0.0, 1.7, wrist, 0.0, 0.0];
    vec![
        both(REST, RELAXED),
        both([0.3, 0.5, 0.0, 1.1, 0.0, 0.0, 0.0], [0.7; 5]),
        both(shake(0.0), OPEN),
        both(shake(0.4), OPEN),
        both(shake(-0.4), OPEN),
        both(shake(0.4), OPEN),
        both(shake(-0.4), OPEN),
        both(shake(0.0), OPEN),
        both([0.3, 0.5, 0.0, 1.1, 0.0, 0.0, 0.0], [0.7; 5]),
        both(REST, RELAXED),
    ]
}

fn spread_hands() -> Vec<Key> {
    let spread = |roll: f64, wrist: f64| [0.55, roll, 0.0, 1.3, wrist, 0.0, 0.0];
    vec![
        both(REST, RELAXED),
        both([0.3, 0.15, 0.0, 0.9, 0.5, 0.0, 0.0], [0.6; 5]),
        both(spread(0.05, 1.0), [0.8; 5]),
        both(spread(0.3, 1.4), OPEN),
        both(spread(0.6, 1.5), OPEN),
        both(spread(0.7, 1.5), OPEN),
        both(spread(0.7, 1.5), OPEN),
        both(spread(0.6, 1.4), OPEN),
        both([0.3, 0.15, 0.0, 0.9, 0.5, 0.0, 0.0], [0.6; 5]),
        both(REST, RELAXED),
    ]
}

fn stop() -> Vec<Key> {
    let push = |pitch: f64, elbow: f64| [pitch, 0.1, 0.0, elbow, 0.0, -1.0, 0.0];
    vec![
        right(REST, RELAXED),
        right([0.6, 0.1, 0.0, 0.9, 0.0, -0.4, 0.0], [0.7; 5]),
        right(push(1.2, 0.5), OPEN),
        right(push(1.3, 0.3), OPEN),
        right(push(1.3, 0.3), OPEN),
        right(push(1.3, 0.3), OPEN),
        right(push(1.3, 0.3), OPEN),
        right(push(1.2, 0.5), OPEN),
        right([0.6, 0.1, 0.0, 0.9, 0.0, -0.4, 0.0], [0.7; 5]),
        right(REST, RELAXED),
    ]
}

fn listening() -> Vec<Key> {
    let cup = [0.6, 0.55, 0.55, 0.55, 0.55];
    let ear = |roll: f64| [0.15, roll, 0.0, 2.4, 0.3, 0.0, 0.0];
    vec![
        right(REST, RELAXED),
        right([0.15, 0.6, 0.0, 1.4, 0.1, 0.0, 0.0], [0.6; 5]),
        right(ear(1.0), cup),
        right(ear(1.05), cup),
        right(ear(1.05), cup),
        right(ear(1.05), cup),
        right(ear(1.05), cup),
        right(ear(1.0), cup),
        right([0.15, 0.6, 0.0, 1.4, 0.1, 0.0, 0.0], [0.6; 5]),
        right(REST, RELAXED),
    ]
}

fn lateral_sign_changes(seq: &MotionSequence) -> usize {
    let ys: Vec<f64> = seq.states().iter().map(|s| s.right.position[1]).collect();
    let v: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).filter(|d| d.abs() > 1e-9).collect();
    v.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
}

/// Validation, keyframe reachability and sample-level collision; returns the
/// failure summary when any check fails.
fn check(body: &BodyModel, seq: &MotionSequence) -> Result<(), String> {
    let report = validate_sequence(seq, &WorkspaceBounds::default());
    if let Some(v) = report.violations.first() {
        return Err(format!("{} = {}", v.path, v.value));
    }
    let traj = interpolate(seq, DEFAULT_RATE).map_err(|e| e.to_string())?;
    let feas = check_trajectory(&traj, body, &IkConfig::default());
    if feas.feasible() {
        Ok(())
    } else {
        Err(feas.summary())
    }
}

fn shift_z(seq: &MotionSequence, dz: f64) -> MotionSequence {
    seq.map_states(|s| {
        let mut s = *s;
        s.left.position[2] = round6(s.left.position[2] + dz);
        s.right.position[2] = round6(s.right.position[2] + dz);
        s
    })
}

fn response(reasoning: &str, seq: &MotionSequence) -> String {
    format!("{reasoning}\n\n```\n{}```\n", serialize_sequence(seq))
}

/// Generation response followed by five refinements that alternate between
/// a raised (or lowered) variant and the original.
fn fixture(body: &BodyModel, name: &str, seq: &MotionSequence) -> (String, f64) {
    let dz = [0.05, 0.03, -0.03, -0.05]
        .into_iter()
        .find(|&dz| check(body, &shift_z(seq, dz)).is_ok())
        .unwrap_or_else(|| panic!("{name}: no feasible height variant"));
    let moved = shift_z(seq, dz);
    let mut out = response(
        &format!(
            "Reasoning: the {name} gesture is performed by the hands in front of the torso. \
             I start and end at rest so the motion blends with idle."
        ),
        seq,
    );
    let there = if dz > 0.0 { "raise" } else { "lower" };
    let back = if dz > 0.0 { "lower" } else { "raise" };
    for k in 0..5 {
        out.push_str(SEPARATOR);
        out.push('\n');
        if k % 2 == 0 {
            out.push_str(&response(
                &format!("I {there} every hand position by {:.2} m as requested.", dz.abs()),
                &moved,
            ));
        } else {
            out.push_str(&response(
                &format!("I {back} every hand position by {:.2} m as requested.", dz.abs()),
                seq,
            ));
        }
    }
    (out, dz)
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    println!("wrote {}", path.display());
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let gestures_dir = root.join("gestures");
    let fixtures_dir = root.parent().unwrap().join("cli/tests/fixtures");
    std::fs::create_dir_all(&fixtures_dir).unwrap();
    let body = BodyModel::default();

    let demos = [
        (
            GestureSpec::new(
                "idle",
                GestureCategory::Regulator,
                "Both arms hang relaxed at the sides with the hands half open; the robot is at rest.",
            ),
            idle(),
        ),
        (
            GestureSpec::new(
                "right-hand-wave",
                GestureCategory::Emblem,
                "The right hand rises beside the head and waves side to side while the left arm rests.",
            ),
            wave(),
        ),
    ];
    let authored: Vec<(&str, Vec<Key>)> = vec![
        ("thumbs-up", thumbs_up()),
        ("okay", okay()),
        ("v-sign", v_sign()),
        ("air-quotes", air_quotes()),
        ("come-closer", come_closer()),
        ("fist-pump", fist_pump()),
        ("jazz-hands", jazz_hands()),
        ("spread-hands", spread_hands()),
        ("stop", stop()),
        ("listening", listening()),
    ];
    let specs = builtin_gestures();

    let mut all = Vec::new();
    for (spec, keys) in demos {
        all.push((spec, keys));
    }
    for (name, keys) in authored {
        let spec = specs.iter().find(|g| g.name == name).expect("builtin").clone();
        all.push((spec, keys));
    }

    let mut failures = 0;
    let mut summary = String::new();
    for (spec, keys) in &all {
        let seq = to_sequence(&body, keys);
        if let Err(e) = check(&body, &seq) {
            eprintln!("{}: {e}", spec.name);
            failures += 1;
            continue;
        }
        if spec.name == "right-hand-wave" {
            let changes = lateral_sign_changes(&seq);
            assert!(changes >= 2, "wave has only {changes} lateral reversals");
        }
        write(&gestures_dir.join(format!("{}.gesture", spec.name)), &gesture_to_string(spec, &seq));
        if specs.iter().any(|g| g.name == spec.name) {
            let (text, dz) = fixture(&body, &spec.name, &seq);
            write(&fixtures_dir.join(format!("{}.txt", spec.name)), &text);
            writeln!(summary, "{} {:+.2}", spec.name, dz).unwrap();
        }
    }
    if failures > 0 {
        eprintln!("{failures} gesture(s) failed checks");
        std::process::exit(1);
    }

    // per-gesture height shift used by the refine fixtures
    write(&fixtures_dir.join("height_shifts.txt"), &summary);

    // f1 then f2 for the instruction example
    let (_, spread) = &all.iter().find(|(s, _)| s.name == "spread-hands").unwrap();
    let spread = to_sequence(&body, spread);
    let mut text = String::from(
        "The user asks me to express confusion without words. Confusion is an affect display: \
         the arms open outward with the palms turned up, as if asking \"what is going on?\".\n\
         <gesture>Spread Hands</gesture>\n",
    );
    text.push_str(SEPARATOR);
    text.push('\n');
    text.push_str(&response("Both hands open and move apart with palms up.", &spread));
    write(&fixtures_dir.join("confusion.txt"), &text);

    // an unreachable keyframe, then a valid regeneration
    let (_, thumbs) = &all.iter().find(|(s, _)| s.name == "thumbs-up").unwrap();
    let thumbs = to_sequence(&body, thumbs);
    let mut states = thumbs.states().to_vec();
    states[4].right.position = [0.6, -0.7, -0.6];
    let bad = MotionSequence::new(states, thumbs.keyframe_dt()).unwrap();
    assert!(check(&body, &bad).is_err());
    let mut text = response("I stretch the right arm far out to the side.", &bad);
    text.push_str(SEPARATOR);
    text.push('\n');
    text.push_str(&response("Keeping the hand within reach this time.", &thumbs));
    write(&fixtures_dir.join("out_of_reach.txt"), &text);
}
