use std::path::{Path, PathBuf};

use super::{SessionRecord, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("session file {path} has schema version {found}, expected {expected}")]
    SchemaVersionMismatch { path: String, found: u64, expected: u32 },
    #[error("session file {path} is corrupt: {message}")]
    Corrupt { path: String, message: String },
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("session store I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One JSON file per session, `<dir>/<id>.json`. Writes go to a temporary
/// file that is renamed into place, so readers never see a partial record.
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    pub fn save(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let path = self.path(&record.id)?;
        let tmp = self.dir.join(format!(".{}.json.tmp", record.id));
        let text = serde_json::to_string_pretty(record).map_err(|e| StoreError::Corrupt {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::write(&tmp, text).map_err(io(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(io(&path))
    }

    pub fn load(&self, id: &str) -> Result<SessionRecord, StoreError> {
        let path = self.path(id)?;
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(io(&path)(e)),
        };
        parse_record(&path, &text)
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path(id).is_ok_and(|p| p.is_file())
    }

    /// All readable sessions, oldest first. Files that fail to load are
    /// skipped with a warning.
    pub fn list(&self) -> Result<Vec<SessionRecord>, StoreError> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.dir).map_err(io(&self.dir))? {
            let path = entry.map_err(io(&self.dir))?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if name.starts_with('.') || !name.ends_with(".json") {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(io(&path))?;
            match parse_record(&path, &text) {
                Ok(r) => out.push(r),
                Err(e) => tracing::warn!(error = %e, "skipping session file"),
            }
        }
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        Ok(out)
    }
}

fn parse_record(path: &Path, text: &str) -> Result<SessionRecord, StoreError> {
    let corrupt = |message: String| StoreError::Corrupt {
        path: path.display().to_string(),
        message,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let found = value["schema_version"]
        .as_u64()
        .ok_or_else(|| corrupt("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(StoreError::SchemaVersionMismatch {
            path: path.display().to_string(),
            found,
            expected: SCHEMA_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{SessionInput, SessionStatus};

    fn record(name: &str) -> SessionRecord {
        SessionRecord::new(SessionInput::Gesture { name: name.into() }, 5)
    }

    #[test]
    fn save_load_list() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let a = record("stop");
        std::thread::sleep(std::time::Duration::from_millis(2));
        let mut b = record("wave");
        b.status = SessionStatus::Failed;
        store.save(&b).unwrap();
        store.save(&a).unwrap();
        assert_eq!(store.load(&b.id).unwrap(), b);
        let ids: Vec<_> = store.list().unwrap().into_iter().map(|r| r.id).collect();
        assert_eq!(ids, vec![a.id.clone(), b.id.clone()]);
        assert!(std::fs::read_dir(dir.path())
            .unwrap()
            .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
    }

    #[test]
    fn missing_and_mismatched() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("nope"), Err(StoreError::NotFound(_))));
        assert!(matches!(store.load("../etc"), Err(StoreError::InvalidId(_))));
        let r = record("stop");
        let mut v = serde_json::to_value(&r).unwrap();
        v["schema_version"] = 7.into();
        std::fs::write(dir.path().join(format!("{}.json", r.id)), v.to_string()).unwrap();
        let err = store.load(&r.id).unwrap_err();
        assert!(matches!(err, StoreError::SchemaVersionMismatch { found: 7, expected: 1, .. }));
        assert!(store.list().unwrap().is_empty());
    }
}
