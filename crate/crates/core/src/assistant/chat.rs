//! Chat-completion clients.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ChatError {
    #[error("chat request timed out after {0:?}")]
    Timeout(Duration),
    #[error("chat endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("chat transport error: {0}")]
    Transport(String),
    #[error("unexpected chat response: {0}")]
    BadResponse(String),
    #[error("prompt could not be parsed: {0}")]
    MalformedPrompt(String),
}

impl ChatError {
    fn retryable(&self) -> bool {
        match self {
            ChatError::Timeout(_) | ChatError::Transport(_) => true,
            ChatError::Http { status, .. } => *status == 429 || *status == 408 || *status >= 500,
            _ => false,
        }
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, system_prompt: &str, messages: &[ChatMessage]) -> Result<String, ChatError>;
    /// Provider/model identifier reported in traces.
    fn model_id(&self) -> String;
}

pub const ENV_ENDPOINT: &str = "PANTRY_CHAT_ENDPOINT";
pub const ENV_MODEL: &str = "PANTRY_CHAT_MODEL";
pub const ENV_API_KEY: &str = "PANTRY_CHAT_API_KEY";
pub const ENV_TIMEOUT: &str = "PANTRY_CHAT_TIMEOUT_SECS";
pub const ENV_RETRIES: &str = "PANTRY_CHAT_MAX_RETRIES";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl ChatConfig {
    /// `None` when no endpoint is configured, which selects the stub client.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Option<Self> {
        let endpoint = get(ENV_ENDPOINT).filter(|e| !e.trim().is_empty())?;
        Some(ChatConfig {
            endpoint,
            model: get(ENV_MODEL).unwrap_or_else(|| "gpt-3.5-turbo".to_string()),
            api_key: get(ENV_API_KEY).filter(|k| !k.is_empty()),
            timeout: Duration::from_secs_f64(
                get(ENV_TIMEOUT).and_then(|s| s.parse().ok()).unwrap_or(30.0),
            ),
            max_retries: get(ENV_RETRIES).and_then(|s| s.parse().ok()).unwrap_or(2),
        })
    }

    pub fn from_env() -> Option<Self> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }
}

/// OpenAI-style `chat/completions` client: system + message history in,
/// first choice's content out.
pub struct HttpChatClient {
    config: ChatConfig,
    client: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(config: ChatConfig) -> Result<Self, ChatError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        Ok(HttpChatClient { config, client })
    }

    fn attempt(&self, body: &serde_json::Value, timeout: Duration) -> Result<String, ChatError> {
        let mut req = self.client.post(&self.config.endpoint).timeout(timeout).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ChatError::Timeout(timeout)
            } else {
                ChatError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| {
            if e.is_timeout() {
                ChatError::Timeout(timeout)
            } else {
                ChatError::Transport(e.to_string())
            }
        })?;
        if !status.is_success() {
            return Err(ChatError::Http { status: status.as_u16(), body: text.chars().take(300).collect() });
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ChatError::BadResponse(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| ChatError::BadResponse("missing choices[0].message.content".into()))
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, system_prompt: &str, messages: &[ChatMessage]) -> Result<String, ChatError> {
        let mut msgs = vec![json!({"role": "system", "content": system_prompt})];
        msgs.extend(messages.iter().map(|m| json!({"role": m.role, "content": m.content})));
        let body = json!({"model": self.config.model, "messages": msgs, "temperature": 0});

        // Total time is bounded by timeout x (retries + 1), backoff included.
        let budget = self.config.timeout * (self.config.max_retries + 1);
        let start = Instant::now();
        let mut attempt = 0u32;
        loop {
            let remaining = budget.saturating_sub(start.elapsed());
            if remaining.is_zero() {
                return Err(ChatError::Timeout(budget));
            }
            let result = self.attempt(&body, self.config.timeout.min(remaining));
            match result {
                Err(e) if e.retryable() && attempt < self.config.max_retries => {
                    attempt += 1;
                    let backoff = Duration::from_millis(200 * 2u64.pow(attempt - 1));
                    log::debug!("chat attempt {attempt} failed ({e}); retrying");
                    if start.elapsed() + backoff >= budget {
                        return Err(e);
                    }
                    std::thread::sleep(backoff);
                }
                other => return other,
            }
        }
    }

    fn model_id(&self) -> String {
        format!("http:{}", self.config.model)
    }
}
