//! Application configuration, read from TOML. Relative paths are resolved
//! against the directory of the configuration file.
//!
//! ```toml
//! sessions_dir = "sessions"
//! export_dir = "exports"
//! # prompts_dir = "prompts"
//! # body_model = "body.toml"
//!
//! [session]
//! i_max = 5
//! rate = 50.0
//! failure_policy = { mode = "regenerate", attempts = 1 }
//!
//! [agents]
//! retry_budget = 3
//!
//! [openai]
//! model = "gpt-4o-2024-05-13"
//!
//! [server]
//! bind = "127.0.0.1:8080"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, Agents, OpenAiConfig, PromptTemplates, TemplateError};
use crate::kinematics::{BodyModel, IkConfig, ModelError};
use crate::session::{Pipeline, SessionConfig, SessionError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    /// Directory of static UI files served under `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub sessions_dir: PathBuf,
    pub export_dir: PathBuf,
    /// Directory with `analyze.txt`, `generate.txt` and `refine.txt`;
    /// the bundled templates are used when unset.
    pub prompts_dir: Option<PathBuf>,
    /// Arm model TOML; the bundled model is used when unset.
    pub body_model: Option<PathBuf>,
    pub session: SessionConfig,
    pub agents: AgentConfig,
    #[serde(default)]
    pub ik: Option<IkConfig>,
    pub openai: OpenAiConfig,
    pub server: ServerConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            sessions_dir: "sessions".into(),
            export_dir: "exports".into(),
            prompts_dir: None,
            body_model: None,
            session: SessionConfig::default(),
            agents: AgentConfig::default(),
            ik: None,
            openai: OpenAiConfig::default(),
            server: ServerConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative_to(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.sessions_dir);
        fix(&mut self.export_dir);
        for p in [&mut self.prompts_dir, &mut self.body_model, &mut self.server.static_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.session.rate > 0.0) {
            return invalid("session.rate must be positive");
        }
        if self.session.speed_cap.is_some_and(|c| !(c > 0.0)) {
            return invalid("session.speed_cap must be positive");
        }
        if self.agents.retry_budget == 0 {
            return invalid("agents.retry_budget must be at least 1");
        }
        if self.agents.sequence_len < 2 {
            return invalid("agents.sequence_len must be at least 2");
        }
        if !(self.agents.keyframe_dt > 0.0) {
            return invalid("agents.keyframe_dt must be positive");
        }
        let b = &self.agents.bounds;
        if (0..3).any(|i| !(b.min[i] < b.max[i])) {
            return invalid("agents.bounds.min must be below agents.bounds.max on every axis");
        }
        Ok(())
    }

    pub fn body(&self) -> Result<BodyModel, ConfigError> {
        Ok(match &self.body_model {
            Some(p) => BodyModel::load(p)?,
            None => BodyModel::default(),
        })
    }

    pub fn templates(&self) -> Result<PromptTemplates, ConfigError> {
        Ok(match &self.prompts_dir {
            Some(dir) => PromptTemplates::load_dir(dir)?,
            None => PromptTemplates::default(),
        })
    }

    pub fn pipeline(&self) -> Result<Pipeline, ConfigError> {
        let agents = Agents::new(self.templates()?, self.agents);
        let mut p = Pipeline::new(agents, self.body()?, self.session)?;
        if let Some(ik) = self.ik {
            p.ik = ik;
        }
        Ok(p)
    }
}
