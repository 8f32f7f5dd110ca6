use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, ChatBackend, ScriptedBackend};
use super::openai::{OpenAiBackend, OpenAiConfig};

/// Backend selector as written on the command line or in a request body:
/// `openai` or `scripted:<fixture file>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendSpec {
    OpenAi,
    Scripted(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown backend {0:?}; expected `openai` or `scripted:<file>`")]
pub struct UnknownBackend(pub String);

impl FromStr for BackendSpec {
    type Err = UnknownBackend;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("openai") {
            return Ok(BackendSpec::OpenAi);
        }
        match s.strip_prefix("scripted:") {
            Some(path) if !path.is_empty() => Ok(BackendSpec::Scripted(path.into())),
            _ => Err(UnknownBackend(s.to_string())),
        }
    }
}

impl TryFrom<String> for BackendSpec {
    type Error = UnknownBackend;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BackendSpec> for String {
    fn from(b: BackendSpec) -> String {
        b.to_string()
    }
}

impl std::fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendSpec::OpenAi => f.write_str("openai"),
            BackendSpec::Scripted(p) => write!(f, "scripted:{}", p.display()),
        }
    }
}

impl BackendSpec {
    pub fn build(&self, openai: &OpenAiConfig) -> Result<Arc<dyn ChatBackend>, BackendError> {
        Ok(match self {
            BackendSpec::OpenAi => Arc::new(OpenAiBackend::from_env(openai.clone())?),
            BackendSpec::Scripted(path) => Arc::new(ScriptedBackend::load(path)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        assert_eq!("openai".parse::<BackendSpec>().unwrap(), BackendSpec::OpenAi);
        let s: BackendSpec = "scripted:fixtures/a.txt".parse().unwrap();
        assert_eq!(s, BackendSpec::Scripted("fixtures/a.txt".into()));
        assert_eq!(s.to_string(), "scripted:fixtures/a.txt");
        assert!("scripted:".parse::<BackendSpec>().is_err());
        assert!("claude".parse::<BackendSpec>().is_err());
        let json: BackendSpec = serde_json::from_str("\"openai\"").unwrap();
        assert_eq!(json, BackendSpec::OpenAi);
    }
}
