//! Chat-completions client for any server speaking the common
//! `{model, messages, temperature, max_tokens}` request shape.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatProvider, ChatRequest, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteChatConfig {
    /// Base address, e.g. `http://127.0.0.1:8000`.
    pub endpoint: String,
    pub path: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    /// Retries after the first attempt.
    pub retries: u32,
    pub backoff_base_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteChatConfig {
    fn default() -> Self {
        RemoteChatConfig {
            endpoint: "http://127.0.0.1:8000".into(),
            path: "/v1/chat/completions".into(),
            model: "Llama-3.1-8B-Instruct".into(),
            api_key_env: None,
            retries: 3,
            backoff_base_ms: 500,
            timeout_secs: 120,
            max_in_flight: 8,
        }
    }
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
pub(crate) struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    pub(crate) fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    pub(crate) fn run<R>(&self, f: impl FnOnce() -> R) -> R {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}

pub(crate) enum Attempt<T> {
    Done(T),
    Transient(String),
    Fatal(LlmError),
}

/// Runs `op` up to `retries + 1` times with exponential backoff between
/// transient failures.
pub(crate) fn with_retries<T>(retries: u32, base_ms: u64, mut op: impl FnMut() -> Attempt<T>) -> Result<T, LlmError> {
    let mut last = String::new();
    for attempt in 0..=retries {
        if attempt > 0 {
            let delay = base_ms.saturating_mul(1u64 << (attempt - 1).min(16));
            std::thread::sleep(Duration::from_millis(delay));
        }
        match op() {
            Attempt::Done(v) => return Ok(v),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Transient(msg) => {
                log::warn!("attempt {} failed: {msg}", attempt + 1);
                last = msg;
            }
        }
    }
    Err(LlmError::Transport { attempts: retries + 1, message: last })
}

/// Classifies an HTTP outcome: 429 and 5xx are retried.
pub(crate) fn classify(result: reqwest::Result<reqwest::blocking::Response>) -> Attempt<serde_json::Value> {
    let resp = match result {
        Ok(r) => r,
        Err(e) => return Attempt::Transient(e.to_string()),
    };
    let status = resp.status();
    if status.is_success() {
        return match resp.json::<serde_json::Value>() {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Fatal(LlmError::Response(e.to_string())),
        };
    }
    let body = resp.text().unwrap_or_default();
    if status.as_u16() == 429 || status.is_server_error() {
        Attempt::Transient(format!("HTTP {status}: {body}"))
    } else {
        Attempt::Fatal(LlmError::Status { status: status.as_u16(), body })
    }
}

pub(crate) fn bearer(env_name: &Option<String>) -> Result<Option<String>, LlmError> {
    match env_name {
        None => Ok(None),
        Some(name) => std::env::var(name)
            .map(Some)
            .map_err(|_| LlmError::Config(format!("environment variable `{name}` is not set"))),
    }
}

pub(crate) fn join_url(endpoint: &str, path: &str) -> String {
    format!("{}/{}", endpoint.trim_end_matches('/'), path.trim_start_matches('/'))
}

pub struct RemoteChat {
    cfg: RemoteChatConfig,
    url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl RemoteChat {
    pub fn new(cfg: RemoteChatConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(RemoteChat {
            url: join_url(&cfg.endpoint, &cfg.path),
            token: bearer(&cfg.api_key_env)?,
            gate: Gate::new(cfg.max_in_flight),
            client,
            cfg,
        })
    }

    pub fn request_body(&self, req: &ChatRequest) -> serde_json::Value {
        json!({
            "model": self.cfg.model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        })
    }
}

impl ChatProvider for RemoteChat {
    fn chat(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let body = self.request_body(req);
        let value = self.gate.run(|| {
            with_retries(self.cfg.retries, self.cfg.backoff_base_ms, || {
                let mut rb = self.client.post(&self.url).json(&body);
                if let Some(t) = &self.token {
                    rb = rb.bearer_auth(t);
                }
                classify(rb.send())
            })
        })?;
        // chat-completions shape, or a bare `{content}` reply
        value
            .pointer("/choices/0/message/content")
            .or_else(|| value.get("content"))
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::Response("missing choices[0].message.content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn retries_then_transport_error() {
        let calls = Cell::new(0);
        let r: Result<(), _> = with_retries(2, 0, || {
            calls.set(calls.get() + 1);
            Attempt::Transient("down".into())
        });
        assert_eq!(calls.get(), 3);
        assert!(matches!(r, Err(LlmError::Transport { attempts: 3, .. })));
    }

    #[test]
    fn fatal_stops_immediately() {
        let calls = Cell::new(0);
        let r: Result<(), _> = with_retries(5, 0, || {
            calls.set(calls.get() + 1);
            Attempt::Fatal(LlmError::Status { status: 400, body: String::new() })
        });
        assert_eq!(calls.get(), 1);
        assert!(r.is_err());
    }

    #[test]
    fn unreachable_endpoint_fails_after_three_attempts() {
        let cfg = RemoteChatConfig {
            endpoint: "http://127.0.0.1:1".into(),
            retries: 2,
            backoff_base_ms: 1,
            timeout_secs: 2,
            ..Default::default()
        };
        let err = RemoteChat::new(cfg).unwrap().chat(&ChatRequest::new("x")).unwrap_err();
        assert!(matches!(err, LlmError::Transport { attempts: 3, .. }), "{err}");
    }

    #[test]
    fn missing_token_variable_is_config_error() {
        let cfg = RemoteChatConfig { api_key_env: Some("TABLESIM_TEST_UNSET_VAR_9".into()), ..Default::default() };
        assert!(matches!(RemoteChat::new(cfg), Err(LlmError::Config(_))));
    }

    #[test]
    fn url_join() {
        assert_eq!(join_url("http://h:1/", "/v1/x"), "http://h:1/v1/x");
        assert_eq!(join_url("http://h:1", "embed"), "http://h:1/embed");
    }
}
