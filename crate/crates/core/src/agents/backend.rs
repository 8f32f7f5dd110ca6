use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Line that separates responses in a scripted fixture file.
pub const SCRIPT_SEPARATOR: &str = "=== RESPONSE ===";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

impl ChatRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ChatRole::System => "system",
            ChatRole::User => "user",
            ChatRole::Assistant => "assistant",
        }
    }
}

/// Encoded image bytes with their media type, e.g. `image/png`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub media_type: String,
    #[serde(with = "base64_bytes")]
    pub data: Vec<u8>,
}

impl ImagePayload {
    pub fn new(media_type: &str, data: Vec<u8>) -> Self {
        Self {
            media_type: media_type.to_string(),
            data,
        }
    }

    /// Guesses the media type from the file extension.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let media_type = match ext.as_str() {
            "jpg" | "jpeg" => "image/jpeg",
            "gif" => "image/gif",
            "webp" => "image/webp",
            _ => "image/png",
        };
        Ok(Self::new(media_type, std::fs::read(path)?))
    }

    pub fn data_url(&self) -> String {
        use base64::Engine;
        format!(
            "data:{};base64,{}",
            self.media_type,
            base64::engine::general_purpose::STANDARD.encode(&self.data)
        )
    }
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(data: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(data))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImagePayload>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            text: text.into(),
            image: None,
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            text: text.into(),
            image: None,
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            text: text.into(),
            image: None,
        }
    }

    pub fn with_image(mut self, image: ImagePayload) -> Self {
        self.image = Some(image);
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("scripted backend has no responses left")]
    ScriptExhausted,
    #[error("environment variable {0} is not set; export your API key or use --backend scripted:<file>")]
    MissingApiKey(String),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("server returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    InvalidResponse(String),
    #[error("model {0} does not accept images")]
    ImagesUnsupported(String),
    #[error("cannot read script {path}: {message}")]
    Script { path: String, message: String },
}

/// A chat-completion service. Implementations must be usable from several
/// threads; one conversation's calls are made sequentially by the caller.
pub trait ChatBackend: Send + Sync {
    fn model(&self) -> &str;
    fn supports_images(&self) -> bool;
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

/// Replays canned responses in order and records every request.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<String>>,
    history: Mutex<Vec<Vec<ChatMessage>>>,
    delay: Option<Duration>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            history: Mutex::new(Vec::new()),
            delay: None,
        }
    }

    /// Splits fixture text on lines equal to [`SCRIPT_SEPARATOR`].
    pub fn from_script(text: &str) -> Self {
        let mut responses = Vec::new();
        let mut current = String::new();
        for line in text.lines() {
            if line.trim() == SCRIPT_SEPARATOR {
                responses.push(std::mem::take(&mut current));
            } else {
                current.push_str(line);
                current.push('\n');
            }
        }
        if !current.trim().is_empty() {
            responses.push(current);
        }
        Self::new(responses)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Script {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self::from_script(&text))
    }

    /// Sleeps this long before answering; lets tests hold a call in flight.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    /// Drops the first `n` responses, e.g. ones consumed by an earlier process.
    pub fn skip(self, n: usize) -> Self {
        {
            let mut r = self.responses.lock().unwrap();
            let n = n.min(r.len());
            r.drain(..n);
        }
        self
    }

    /// Every request received so far, oldest first.
    pub fn history(&self) -> Vec<Vec<ChatMessage>> {
        self.history.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().unwrap().len()
    }

    /// Responses not yet consumed, in order.
    pub fn remaining_responses(&self) -> Vec<String> {
        self.responses.lock().unwrap().iter().cloned().collect()
    }
}

impl ChatBackend for ScriptedBackend {
    fn model(&self) -> &str {
        "scripted"
    }

    fn supports_images(&self) -> bool {
        true
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        self.history.lock().unwrap().push(messages.to_vec());
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        self.responses.lock().unwrap().pop_front().ok_or(BackendError::ScriptExhausted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_runs_out() {
        let b = ScriptedBackend::new(["one"]);
        assert_eq!(b.complete(&[ChatMessage::user("hi")]).unwrap(), "one");
        assert_eq!(b.complete(&[ChatMessage::user("again")]), Err(BackendError::ScriptExhausted));
        assert_eq!(b.history().len(), 2);
        assert_eq!(b.history()[1][0].text, "again");
    }

    #[test]
    fn fixture_text_splits_on_separator() {
        let b = ScriptedBackend::from_script("first\nline two\n=== RESPONSE ===\nsecond\n");
        assert_eq!(b.remaining_responses(), vec!["first\nline two\n", "second\n"]);
        assert_eq!(b.skip(1).remaining_responses(), vec!["second\n"]);
    }

    #[test]
    fn image_payload_round_trips_as_base64() {
        let img = ImagePayload::new("image/png", vec![0, 1, 2, 250]);
        let json = serde_json::to_string(&img).unwrap();
        assert!(json.contains("AAEC+g=="));
        assert_eq!(serde_json::from_str::<ImagePayload>(&json).unwrap(), img);
        assert_eq!(img.data_url(), "data:image/png;base64,AAEC+g==");
    }
}
