//! Chat-completion gateway: request type, providers (remote and a
//! deterministic rule-based mock), JSON extraction from completions and
//! description generation.

mod extract;
mod mock;
pub mod prompts;
pub(crate) mod remote;

use serde::{Deserialize, Serialize};

use crate::serialize::serialize_llm_json;
use crate::table::Table;

pub use extract::extract_json_object;
pub use mock::{describe_template, MockChat};
pub use remote::{RemoteChat, RemoteChatConfig};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 1024;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    Response(String),
    #[error("extraction failed: {0}")]
    Extraction(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl ChatRequest {
    /// Request with the analyst system prompt and default decoding settings.
    pub fn new(user_prompt: impl Into<String>) -> Self {
        ChatRequest {
            system_prompt: prompts::SYSTEM_PROMPT.to_string(),
            user_prompt: user_prompt.into(),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

/// Anything that turns a chat request into completion text.
pub trait ChatProvider: Send + Sync {
    fn chat(&self, req: &ChatRequest) -> Result<String, LlmError>;
}

/// Provider selection as it appears in configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ProviderKind {
    Remote(RemoteChatConfig),
    Mock { seed: u64 },
}

impl ProviderKind {
    pub fn build(&self) -> Result<Box<dyn ChatProvider>, LlmError> {
        Ok(match self {
            ProviderKind::Remote(cfg) => Box::new(RemoteChat::new(cfg.clone())?),
            ProviderKind::Mock { seed } => Box::new(MockChat::new(*seed)),
        })
    }
}

pub fn chat(provider: &dyn ChatProvider, req: &ChatRequest) -> Result<String, LlmError> {
    provider.chat(req)
}

/// How many times an empty description is re-requested.
const DESCRIPTION_ATTEMPTS: usize = 3;

/// First `n` sentences of `text`, whitespace-normalized.
fn first_sentences(text: &str, n: usize) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut sentences = 0;
    for w in words {
        out.push(w);
        if w.ends_with(['.', '!', '?']) {
            sentences += 1;
            if sentences == n {
                break;
            }
        }
    }
    out.join(" ")
}

/// Asks the provider for a short (at most two sentence) description of `t`.
pub fn generate_description(provider: &dyn ChatProvider, t: &Table, seed: u64) -> Result<String, LlmError> {
    let req = ChatRequest::new(prompts::description_prompt(&serialize_llm_json(t, seed)));
    for _ in 0..DESCRIPTION_ATTEMPTS {
        let text = first_sentences(provider.chat(&req)?.trim(), 2);
        if !text.is_empty() {
            return Ok(text);
        }
    }
    Err(LlmError::Generation(format!("empty description for table `{}`", t.id())))
}
