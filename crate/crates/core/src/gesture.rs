//! Gesture taxonomy, the builtin gesture set, and the bundled demonstrations.
//!
//! A gesture file is a JSON object holding `name`, `category`,
//! `description` and `sequence` (`keyframe_dt` plus a list of states).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::motion::{validate_sequence, MotionSequence, WorkspaceBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GestureCategory {
    Emblem,
    Illustrator,
    AffectDisplay,
    Regulator,
}

impl GestureCategory {
    pub const ALL: [GestureCategory; 4] = [
        GestureCategory::Emblem,
        GestureCategory::Illustrator,
        GestureCategory::AffectDisplay,
        GestureCategory::Regulator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GestureCategory::Emblem => "emblem",
            GestureCategory::Illustrator => "illustrator",
            GestureCategory::AffectDisplay => "affect-display",
            GestureCategory::Regulator => "regulator",
        }
    }
}

impl fmt::Display for GestureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown gesture category {0:?}")]
pub struct UnknownCategory(pub String);

impl FromStr for GestureCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureSpec {
    pub name: String,
    pub category: GestureCategory,
    pub description: String,
}

impl GestureSpec {
    pub fn new(name: &str, category: GestureCategory, description: &str) -> Self {
        Self {
            name: name.to_string(),
            category,
            description: description.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub gesture: GestureSpec,
    pub sequence: MotionSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GestureFile {
    name: String,
    category: GestureCategory,
    description: String,
    sequence: MotionSequence,
}

#[derive(Debug, thiserror::Error)]
pub enum GestureFileError {
    #[error("gesture file not found: {0}")]
    FileNotFound(String),
    #[error("{path}: line {line}, column {column}: {message}")]
    ParseError {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("gesture name must not be empty")]
    EmptyName,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, thiserror::Error)]
#[error("bundled gesture {name} is corrupt: {reason}")]
pub struct CorruptBundle {
    pub name: String,
    pub reason: String,
}

const BUNDLE: [(&str, &str); 12] = [
    ("idle", include_str!("../gestures/idle.gesture")),
    ("right-hand-wave", include_str!("../gestures/right-hand-wave.gesture")),
    ("thumbs-up", include_str!("../gestures/thumbs-up.gesture")),
    ("okay", include_str!("../gestures/okay.gesture")),
    ("v-sign", include_str!("../gestures/v-sign.gesture")),
    ("air-quotes", include_str!("../gestures/air-quotes.gesture")),
    ("come-closer", include_str!("../gestures/come-closer.gesture")),
    ("fist-pump", include_str!("../gestures/fist-pump.gesture")),
    ("jazz-hands", include_str!("../gestures/jazz-hands.gesture")),
    ("spread-hands", include_str!("../gestures/spread-hands.gesture")),
    ("stop", include_str!("../gestures/stop.gesture")),
    ("listening", include_str!("../gestures/listening.gesture")),
];

/// Names of the two demonstrations shown to the generator.
pub const DEMONSTRATION_NAMES: [&str; 2] = ["idle", "right-hand-wave"];

/// The ten target gestures.
pub fn builtin_gestures() -> Vec<GestureSpec> {
    use GestureCategory::*;
    vec![
        GestureSpec::new("thumbs-up", Emblem, "Closed fist raised with the thumb pointing up, signalling approval."),
        GestureSpec::new("okay", Emblem, "Thumb and index finger touch in a ring while the other fingers stay extended."),
        GestureSpec::new("v-sign", Emblem, "Index and middle fingers raised in a V with the palm facing outward."),
        GestureSpec::new(
            "air-quotes",
            Illustrator,
            "Both hands raised beside the head, index and middle fingers flexing twice to mark quotation.",
        ),
        GestureSpec::new(
            "come-closer",
            Illustrator,
            "Palm up in front of the body with the fingers curling inward repeatedly to beckon.",
        ),
        GestureSpec::new("fist-pump", AffectDisplay, "A clenched fist pulled down sharply from shoulder height in celebration."),
        GestureSpec::new("jazz-hands", AffectDisplay, "Both open hands raised to the sides with palms forward, shaking with excitement."),
        GestureSpec::new(
            "spread-hands",
            AffectDisplay,
            "Both hands open and move apart, palms up, expressing confusion or helplessness.",
        ),
        GestureSpec::new("stop", Regulator, "One arm extended forward with the palm flat and facing outward to halt."),
        GestureSpec::new(
            "listening",
            Regulator,
            "One hand cupped behind the ear while leaning in attentively, signalling that the robot is listening.",
        ),
    ]
}

/// Case- and punctuation-insensitive lookup among the builtin gestures and
/// demonstrations.
pub fn find_builtin(name: &str) -> Option<GestureSpec> {
    let key = canonical_key(name);
    if key.is_empty() {
        return None;
    }
    builtin_gestures()
        .into_iter()
        .chain(builtin_demonstrations().ok().into_iter().flatten().map(|d| d.gesture))
        .find(|g| canonical_key(&g.name) == key)
}

/// Lowercase alphanumerics only, so "Thumbs Up!" and "thumbs-up" agree.
pub fn canonical_key(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn parse_gesture(text: &str, path: &str) -> Result<(GestureSpec, MotionSequence), GestureFileError> {
    let file: GestureFile = serde_json::from_str(text).map_err(|e| GestureFileError::ParseError {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.name.trim().is_empty() {
        return Err(GestureFileError::EmptyName);
    }
    Ok((
        GestureSpec {
            name: file.name,
            category: file.category,
            description: file.description,
        },
        file.sequence,
    ))
}

/// Gesture file text: indented JSON with one keyframe per line.
pub fn gesture_to_string(spec: &GestureSpec, seq: &MotionSequence) -> String {
    let states: Vec<String> = seq.states().iter().map(|s| format!("      {}", json(s))).collect();
    format!(
        "{{\n  \"name\": {},\n  \"category\": {},\n  \"description\": {},\n  \"sequence\": {{\n    \"keyframe_dt\": {},\n    \"states\": [\n{}\n    ]\n  }}\n}}\n",
        json(&spec.name),
        json(&spec.category),
        json(&spec.description),
        json(&seq.keyframe_dt()),
        states.join(",\n"),
    )
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data always serializes")
}

pub fn gesture_from_str(text: &str) -> Result<(GestureSpec, MotionSequence), GestureFileError> {
    parse_gesture(text, "<memory>")
}

pub fn load_gesture(path: &Path) -> Result<(GestureSpec, MotionSequence), GestureFileError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => GestureFileError::FileNotFound(shown.clone()),
        _ => GestureFileError::Io {
            path: shown.clone(),
            source: e,
        },
    })?;
    parse_gesture(&text, &shown)
}

pub fn save_gesture(path: &Path, spec: &GestureSpec, seq: &MotionSequence) -> Result<(), GestureFileError> {
    if spec.name.trim().is_empty() {
        return Err(GestureFileError::EmptyName);
    }
    std::fs::write(path, gesture_to_string(spec, seq)).map_err(|e| GestureFileError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn bundled(name: &str) -> Result<(GestureSpec, MotionSequence), CorruptBundle> {
    let corrupt = |reason: String| CorruptBundle {
        name: name.to_string(),
        reason,
    };
    let (_, text) = BUNDLE
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| corrupt("not in the bundle".into()))?;
    let (spec, seq) = parse_gesture(text, name).map_err(|e| corrupt(e.to_string()))?;
    if spec.name != name {
        return Err(corrupt(format!("file names itself {:?}", spec.name)));
    }
    let report = validate_sequence(&seq, &WorkspaceBounds::default());
    if let Some(v) = report.violations.first() {
        return Err(corrupt(format!("{} = {} is out of range", v.path, v.value)));
    }
    Ok((spec, seq))
}

/// The bundled sequence for one of the ten builtin gestures or demonstrations.
pub fn bundled_gesture(name: &str) -> Result<(GestureSpec, MotionSequence), CorruptBundle> {
    bundled(name)
}

/// All twelve bundled files as `(file name, contents)`, for export.
pub fn bundled_files() -> impl Iterator<Item = (String, &'static str)> {
    BUNDLE.iter().map(|(n, text)| (format!("{n}.gesture"), *text))
}

pub fn builtin_demonstrations() -> Result<Vec<Demonstration>, CorruptBundle> {
    DEMONSTRATION_NAMES
        .iter()
        .map(|name| bundled(name).map(|(gesture, sequence)| Demonstration { gesture, sequence }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{HandState, MotionState};

    #[test]
    fn ten_builtins_split_three_two_three_two() {
        let all = builtin_gestures();
        assert_eq!(all.len(), 10);
        let count = |c| all.iter().filter(|g| g.category == c).count();
        assert_eq!(count(GestureCategory::Emblem), 3);
        assert_eq!(count(GestureCategory::Illustrator), 2);
        assert_eq!(count(GestureCategory::AffectDisplay), 3);
        assert_eq!(count(GestureCategory::Regulator), 2);
        let mut names: Vec<_> = all.iter().map(|g| g.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 10);
    }

    #[test]
    fn lookup_ignores_case_and_punctuation() {
        assert_eq!(find_builtin("Thumbs Up").unwrap().name, "thumbs-up");
        assert_eq!(find_builtin("V_SIGN").unwrap().name, "v-sign");
        assert_eq!(find_builtin("listening").unwrap().category, GestureCategory::Regulator);
        assert!(find_builtin("moonwalk").is_none());
        assert!(find_builtin("--").is_none());
    }

    #[test]
    fn category_strings() {
        for c in GestureCategory::ALL {
            assert_eq!(c.as_str().parse::<GestureCategory>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!("gesticulation".parse::<GestureCategory>().is_err());
    }

    #[test]
    fn unknown_category_names_the_string() {
        let text = r#"{
  "name": "x",
  "category": "flourish",
  "description": "",
  "sequence": {"keyframe_dt": 0.5, "states": []}
}"#;
        let err = gesture_from_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, GestureFileError::ParseError { line: 3, .. }), "{msg}");
        assert!(msg.contains("flourish"), "{msg}");
    }

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.gesture");
        let spec = GestureSpec::new("wiggle", GestureCategory::Illustrator, "Fingers wiggle.");
        let s = MotionState::new(
            HandState::new([0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [0.1, 0.2, 0.3, 0.4, 0.5]),
            HandState::new([0.1, -0.2, 0.3], [-0.1, 0.2, -0.3], [0.5; 5]),
        );
        let seq = MotionSequence::constant(s, 3, 0.25).unwrap();
        save_gesture(&path, &spec, &seq).unwrap();
        let (spec2, seq2) = load_gesture(&path).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(seq2, seq);
        assert!(matches!(
            load_gesture(&dir.path().join("missing.gesture")),
            Err(GestureFileError::FileNotFound(_))
        ));
    }

    #[test]
    fn demonstrations_load() {
        let demos = builtin_demonstrations().unwrap();
        assert_eq!(demos.len(), 2);
        assert_eq!(demos[0].gesture.name, "idle");
        assert_eq!(demos[1].gesture.name, "right-hand-wave");
        for d in &demos {
            assert_eq!(d.sequence.len(), 10);
        }
        let idle = &demos[0].sequence;
        assert!(idle.states().iter().all(|s| *s == idle.states()[0]));
    }

    #[test]
    fn every_builtin_is_bundled() {
        for g in builtin_gestures() {
            let (spec, seq) = bundled_gesture(&g.name).unwrap();
            assert_eq!(spec, g);
            assert_eq!(seq.len(), 10);
        }
    }
}
