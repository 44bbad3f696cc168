//! Client for a remote embedding service: `POST {model, texts}` answered
//! by `{vectors}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Embedder, EmbedError, Embedding};
use crate::llm::remote::{bearer, classify, join_url, with_retries};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteEmbedConfig {
    pub endpoint: String,
    pub path: String,
    pub model: String,
    /// Expected vector length; responses of another length are errors.
    pub dimension: usize,
    pub api_key_env: Option<String>,
    pub retries: u32,
    pub backoff_base_ms: u64,
    pub timeout_secs: u64,
    /// Texts per request.
    pub batch_size: usize,
}

impl Default for RemoteEmbedConfig {
    fn default() -> Self {
        RemoteEmbedConfig {
            endpoint: "http://127.0.0.1:8000".into(),
            path: "/embed".into(),
            model: "bge-large-en-v1.5".into(),
            dimension: 1024,
            api_key_env: None,
            retries: 3,
            backoff_base_ms: 500,
            timeout_secs: 120,
            batch_size: 64,
        }
    }
}

pub struct RemoteEmbedder {
    cfg: RemoteEmbedConfig,
    url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(cfg: RemoteEmbedConfig) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| EmbedError::Provider(e.to_string()))?;
        Ok(RemoteEmbedder {
            url: join_url(&cfg.endpoint, &cfg.path),
            token: bearer(&cfg.api_key_env).map_err(|e| EmbedError::Provider(e.to_string()))?,
            client,
            cfg,
        })
    }

    fn request(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = json!({ "model": self.cfg.model, "texts": texts });
        let value = with_retries(self.cfg.retries, self.cfg.backoff_base_ms, || {
            let mut rb = self.client.post(&self.url).json(&body);
            if let Some(t) = &self.token {
                rb = rb.bearer_auth(t);
            }
            classify(rb.send())
        })
        .map_err(|e| EmbedError::Provider(e.to_string()))?;
        #[derive(Deserialize)]
        struct Reply {
            vectors: Vec<Vec<f64>>,
        }
        let reply: Reply = serde_json::from_value(value).map_err(|e| EmbedError::Provider(format!("bad reply: {e}")))?;
        if reply.vectors.len() != texts.len() {
            return Err(EmbedError::Provider(format!(
                "sent {} texts, received {} vectors",
                texts.len(),
                reply.vectors.len()
            )));
        }
        Ok(reply.vectors)
    }
}

impl<T: Scalar> Embedder<T> for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.cfg.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Embedding<T>>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.cfg.batch_size.max(1)) {
            for v in self.request(chunk)? {
                if v.len() != self.cfg.dimension {
                    return Err(EmbedError::Dimension { left: v.len(), right: self.cfg.dimension });
                }
                // the server is not trusted to normalize
                out.push(Embedding::normalized(v.into_iter().map(T::of).collect()));
            }
        }
        Ok(out)
    }
}
