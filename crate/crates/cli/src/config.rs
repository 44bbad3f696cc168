use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use tablesim::embedding::{EmbeddingProviderKind, RemoteEmbedConfig, DEFAULT_DIMENSION, DEFAULT_FUSION_WEIGHT};
use tablesim::llm::{ProviderKind, RemoteChatConfig};
use tablesim::negatives::MiningConfig;
use tablesim::retrieval::SplitRatios;
use tablesim::serialize::{TextView, DEFAULT_TOKEN_CAP};
use tablesim::trainer::{Optimizer, TrainConfig, DEFAULT_D_OUT, DEFAULT_TAU};

/// A missing or contradictory flag, reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ChatProviderName {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedProviderName {
    Hashed,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Sgd,
    Adam,
}

/// Settings shared by every command. Config-file keys use the flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub provider: ChatProviderName,
    pub endpoint: String,
    pub model: String,
    /// Name of the variable holding the bearer token, never the token.
    pub api_key_env: Option<String>,
    pub embed_provider: EmbedProviderName,
    pub embed_endpoint: String,
    pub embed_model: String,
    pub workers: usize,
    pub n_targets: usize,
    pub batch_size: usize,
    pub hard_negatives: usize,
    pub token_cap: usize,
    pub fusion_weight: f64,
    pub k: Vec<usize>,
    pub dimension: usize,
    pub hash_seed: u64,
    pub d_out: usize,
    pub tau: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: OptimizerName,
    /// `train:validation:test`.
    pub ratios: String,
    pub train_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: Vec::new(),
            out: PathBuf::from("out"),
            seed: 0,
            provider: ChatProviderName::Mock,
            endpoint: RemoteChatConfig::default().endpoint,
            model: RemoteChatConfig::default().model,
            api_key_env: None,
            embed_provider: EmbedProviderName::Hashed,
            embed_endpoint: RemoteEmbedConfig::default().endpoint,
            embed_model: RemoteEmbedConfig::default().model,
            workers: 4,
            n_targets: 2,
            batch_size: 4,
            hard_negatives: 15,
            token_cap: DEFAULT_TOKEN_CAP,
            fusion_weight: DEFAULT_FUSION_WEIGHT,
            k: vec![2, 10],
            dimension: DEFAULT_DIMENSION,
            hash_seed: 0,
            d_out: DEFAULT_D_OUT,
            tau: DEFAULT_TAU,
            learning_rate: TrainConfig::default().learning_rate,
            epochs: TrainConfig::default().epochs,
            optimizer: OptimizerName::Sgd,
            ratios: "55:5:10".into(),
            train_fraction: 0.8,
        }
    }
}

/// Flags that override config-file values.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML file whose keys are flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Table corpus (JSONL); repeat to pool several files.
    #[arg(long, global = true)]
    pub corpus: Vec<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ChatProviderName>,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub api_key_env: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub embed_provider: Option<EmbedProviderName>,
    #[arg(long, global = true)]
    pub embed_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub embed_model: Option<String>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub n_targets: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub hard_negatives: Option<usize>,
    #[arg(long, global = true)]
    pub token_cap: Option<usize>,
    #[arg(long, global = true)]
    pub fusion_weight: Option<f64>,
    /// Cutoff for recall and nDCG; repeatable.
    #[arg(long, global = true)]
    pub k: Vec<usize>,
    #[arg(long, global = true)]
    pub dimension: Option<usize>,
    #[arg(long, global = true)]
    pub hash_seed: Option<u64>,
    #[arg(long, global = true)]
    pub d_out: Option<usize>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub optimizer: Option<OptimizerName>,
    #[arg(long, global = true)]
    pub ratios: Option<String>,
    #[arg(long, global = true)]
    pub train_fraction: Option<f64>,
}

macro_rules! override_fields {
    ($cfg:ident, $o:ident; $($f:ident),*) => {
        $(if let Some(v) = $o.$f.clone() { $cfg.$f = v; })*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut cfg = match &o.config {
            Some(p) => Self::load(p)?,
            None => RunConfig::default(),
        };
        override_fields!(cfg, o; out, seed, provider, endpoint, model, embed_provider, embed_endpoint, embed_model,
            workers, n_targets, batch_size, hard_negatives, token_cap, fusion_weight, dimension, hash_seed, d_out,
            tau, learning_rate, epochs, optimizer, ratios, train_fraction);
        if o.api_key_env.is_some() {
            cfg.api_key_env = o.api_key_env.clone();
        }
        if !o.corpus.is_empty() {
            cfg.corpus = o.corpus.clone();
        }
        if !o.k.is_empty() {
            cfg.k = o.k.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.k.iter().any(|&k| k == 0) {
            bail!("--k values must be positive");
        }
        if !(0.0..=1.0).contains(&self.fusion_weight) {
            bail!("--fusion-weight must lie in [0, 1]");
        }
        if self.workers == 0 {
            bail!("--workers must be at least 1");
        }
        self.split_ratios()?;
        Ok(())
    }

    pub fn split_ratios(&self) -> Result<SplitRatios> {
        let parts: Vec<f64> = self
            .ratios
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("--ratios `{}` is not of the form a:b:c", self.ratios))?;
        let [train, validation, test] = parts[..] else {
            bail!("--ratios `{}` needs three parts", self.ratios);
        };
        let r = SplitRatios { train, validation, test };
        r.normalized()?;
        Ok(r)
    }

    pub fn chat_provider(&self) -> ProviderKind {
        match self.provider {
            ChatProviderName::Mock => ProviderKind::Mock { seed: self.seed },
            ChatProviderName::Remote => ProviderKind::Remote(RemoteChatConfig {
                endpoint: self.endpoint.clone(),
                model: self.model.clone(),
                api_key_env: self.api_key_env.clone(),
                max_in_flight: self.workers,
                ..Default::default()
            }),
        }
    }

    pub fn embed_provider(&self) -> EmbeddingProviderKind {
        match self.embed_provider {
            EmbedProviderName::Hashed => EmbeddingProviderKind::HashedBow { dimension: self.dimension, seed: self.hash_seed },
            EmbedProviderName::Remote => EmbeddingProviderKind::Remote(RemoteEmbedConfig {
                endpoint: self.embed_endpoint.clone(),
                model: self.embed_model.clone(),
                dimension: self.dimension,
                api_key_env: self.api_key_env.clone(),
                ..Default::default()
            }),
        }
    }

    pub fn view(&self) -> TextView {
        TextView { seed: self.seed, token_cap: self.token_cap, ..Default::default() }
    }

    pub fn mining(&self) -> MiningConfig {
        MiningConfig { n_hard: self.hard_negatives, ..Default::default() }
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            n_hard: self.hard_negatives,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: self.seed,
            token_cap: self.token_cap,
            optimizer: match self.optimizer {
                OptimizerName::Sgd => Optimizer::Sgd,
                OptimizerName::Adam => Optimizer::adam(),
            },
            in_batch_negatives: true,
        }
    }
}
