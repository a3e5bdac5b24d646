//! The `key = value` run configuration shared by all subcommands.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use echosim::embedding::{DEFAULT_K, DEFAULT_MAX_ITERS};
use echosim::engine::EngineKind;
use echosim::ingest::IngestConfig;
use echosim::simulation::{SimConfig, UpdateMode};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlmOptions {
    pub url: Option<String>,
    pub model: String,
    pub cache: Option<PathBuf>,
    pub context_window: usize,
    pub compat_memo: bool,
    pub generate_temperature: f64,
    pub max_tokens: u32,
    pub max_attempts: u32,
}

impl Default for LlmOptions {
    fn default() -> Self {
        LlmOptions {
            url: None,
            model: String::new(),
            cache: None,
            context_window: 10,
            compat_memo: false,
            generate_temperature: 0.7,
            max_tokens: 512,
            max_attempts: 3,
        }
    }
}

impl LlmOptions {
    /// Fills the endpoint and model from the environment where the config
    /// left them unset.
    pub fn with_env(mut self) -> Self {
        if self.url.is_none() {
            self.url = std::env::var("ECHOSIM_LLM_URL").ok().filter(|s| !s.is_empty());
        }
        if self.model.is_empty() {
            self.model = std::env::var("ECHOSIM_LLM_MODEL").unwrap_or_default();
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub sim: SimConfig,
    pub ingest: IngestConfig,
    pub seeds: Vec<u64>,
    pub checkpoint_every: u64,
    pub llm: LlmOptions,
    pub k: usize,
    pub max_iters: usize,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            sim: SimConfig::default(),
            ingest: IngestConfig::default(),
            seeds: vec![1, 2, 3, 4, 5],
            checkpoint_every: 100,
            llm: LlmOptions::default(),
            k: DEFAULT_K,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| format!("{value:?}: {e}"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("{value:?} is not a boolean")),
    }
}

fn engine_name(kind: EngineKind) -> &'static str {
    match kind {
        EngineKind::Equation => "equation",
        EngineKind::Mock => "mock",
        EngineKind::Llm => "llm",
    }
}

fn mode_name(mode: UpdateMode) -> &'static str {
    match mode {
        UpdateMode::Pairwise => "pairwise",
        UpdateMode::Generative => "generative",
    }
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Applies the file's entries over the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut manifest = RunManifest::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Line { line: k + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            manifest.set(key.trim(), value.trim()).map_err(err)?;
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse)
                    .collect::<Result<_, _>>()?
            }
            "checkpoint_every" => self.checkpoint_every = parse(value)?,
            "max_steps" => self.sim.max_steps = parse(value)?,
            "screen_size" => self.sim.screen_size = parse(value)?,
            "history_window" => self.sim.history_window = parse(value)?,
            "rec_fraction" => self.sim.rec_fraction = parse(value)?,
            "q_unfollow" => self.sim.q_unfollow = parse(value)?,
            "paired_rewiring" => self.sim.paired_rewiring = parse_bool(value)?,
            "mu" => self.sim.params.mu = parse(value)?,
            "epsilon" => self.sim.params.epsilon = parse(value)?,
            "engine" => self.sim.engine = parse(value)?,
            "update_mode" => self.sim.update_mode = parse(value)?,
            "stability_delta" => self.sim.stability_delta = parse(value)?,
            "stability_window" => self.sim.stability_window = parse(value)?,
            "top_k_users" => self.ingest.top_k_users = parse(value)?,
            "min_posts" => self.ingest.min_posts = parse(value)?,
            "history_cap" => self.ingest.history_cap = parse(value)?,
            "llm_url" => self.llm.url = Some(value.to_string()).filter(|s| !s.is_empty()),
            "llm_model" => self.llm.model = value.to_string(),
            "llm_cache" => self.llm.cache = Some(PathBuf::from(value)).filter(|p| !p.as_os_str().is_empty()),
            "context_window" => self.llm.context_window = parse(value)?,
            "compat_memo" => self.llm.compat_memo = parse_bool(value)?,
            "generate_temperature" => self.llm.generate_temperature = parse(value)?,
            "max_tokens" => self.llm.max_tokens = parse(value)?,
            "llm_max_attempts" => self.llm.max_attempts = parse(value)?,
            "k" => self.k = parse(value)?,
            "max_iters" => self.max_iters = parse(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return invalid("seeds must be distinct".into());
        }
        if self.checkpoint_every == 0 {
            return invalid("checkpoint_every must be positive".into());
        }
        if self.k < 2 {
            return invalid(format!("k must be at least 2, got {}", self.k));
        }
        if self.llm.max_attempts == 0 {
            return invalid("llm_max_attempts must be positive".into());
        }
        self.sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Every setting as `key = value` lines, readable by [`Self::from_text`].
    /// The API key is never included.
    pub fn echo(&self) -> Vec<String> {
        let s = &self.sim;
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut lines = vec![
            format!("seeds = {}", seeds.join(",")),
            format!("checkpoint_every = {}", self.checkpoint_every),
            format!("max_steps = {}", s.max_steps),
            format!("screen_size = {}", s.screen_size),
            format!("history_window = {}", s.history_window),
            format!("rec_fraction = {}", s.rec_fraction),
            format!("q_unfollow = {}", s.q_unfollow),
            format!("paired_rewiring = {}", s.paired_rewiring),
            format!("mu = {}", s.params.mu),
            format!("epsilon = {}", s.params.epsilon),
            format!("engine = {}", engine_name(s.engine)),
            format!("update_mode = {}", mode_name(s.update_mode)),
            format!("stability_delta = {}", s.stability_delta),
            format!("stability_window = {}", s.stability_window),
            format!("top_k_users = {}", self.ingest.top_k_users),
            format!("min_posts = {}", self.ingest.min_posts),
            format!("history_cap = {}", self.ingest.history_cap),
            format!("llm_url = {}", self.llm.url.as_deref().unwrap_or("")),
            format!("llm_model = {}", self.llm.model),
            format!("llm_cache = {}", self.llm.cache.as_deref().map(|p| p.display().to_string()).unwrap_or_default()),
            format!("context_window = {}", self.llm.context_window),
            format!("compat_memo = {}", self.llm.compat_memo),
            format!("generate_temperature = {}", self.llm.generate_temperature),
            format!("max_tokens = {}", self.llm.max_tokens),
            format!("llm_max_attempts = {}", self.llm.max_attempts),
            format!("k = {}", self.k),
            format!("max_iters = {}", self.max_iters),
        ];
        lines.retain(|l| !l.ends_with("= "));
        lines
    }
}
