//! Language-model backed opinion engine.

mod client;
mod engine;
mod mock;
mod parse;
mod template;

use thiserror::Error;

#[cfg(feature = "http")]
pub use client::HttpTransport;
pub use client::{
    cache_key, extract_content, CachingClient, EndpointConfig, LlmRequest, ResponseCache, RetryPolicy, Transport,
};
pub use engine::{LlmEngine, LlmSettings};
pub use mock::{describe_stance, MockTransport};
pub use parse::{parse_response, EngineResponse, ParseStatus, Parsed, ResponseKind};
pub use template::{PromptTemplate, TemplateError, TemplateKind, TemplateSet, PLACEHOLDERS};

#[derive(Debug, Error, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("API error {status}: {body}")]
    Api { status: u16, body: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("response cache: {0}")]
    Cache(String),
}
