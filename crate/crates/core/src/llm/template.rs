//! Prompt templates with `{name}` placeholders.
//!
//! Bound text is escaped before substitution: `\` becomes `\\`, `{` becomes
//! `\{` and `}` becomes `\}`. Template bodies may not contain braces other
//! than placeholders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    /// Opinion dynamics (T_o).
    Opinion,
    /// Rewiring compatibility (T_r).
    Rewire,
    /// Content generation (T_g).
    Generate,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("no binding for placeholder {{{0}}}")]
    Missing(String),
    #[error("malformed template body at byte {0}")]
    Malformed(usize),
    #[error("template lacks a step-by-step reasoning instruction")]
    NoReasoning,
    #[error("template lacks the {{output_schema}} placeholder")]
    NoSchema,
}

pub const PLACEHOLDERS: [&str; 5] = ["self_context", "neighbor_context", "screen", "task_instructions", "output_schema"];

#[derive(Clone, Debug, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    kind: TemplateKind,
    body: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    /// Parses `body` without the content checks applied by [`PromptTemplate::new`].
    pub fn raw(kind: TemplateKind, body: impl Into<String>) -> Result<Self, TemplateError> {
        let body = body.into();
        let pieces = split(&body)?;
        Ok(PromptTemplate { kind, body, pieces })
    }

    /// A template that asks for step-by-step reasoning and ends on the
    /// output schema.
    pub fn new(kind: TemplateKind, body: impl Into<String>) -> Result<Self, TemplateError> {
        let template = Self::raw(kind, body)?;
        if !template.body.to_ascii_lowercase().contains("step by step") {
            return Err(TemplateError::NoReasoning);
        }
        if !template.placeholders().any(|p| p == "output_schema") {
            return Err(TemplateError::NoSchema);
        }
        Ok(template)
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(name) => Some(name.as_str()),
            Piece::Text(_) => None,
        })
    }

    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len() + bindings.values().map(String::len).sum::<usize>());
        for piece in &self.pieces {
            match piece {
                Piece::Text(text) => out.push_str(text),
                Piece::Slot(name) => {
                    let value = bindings.get(name.as_str()).ok_or_else(|| TemplateError::Missing(name.clone()))?;
                    escape_into(value, &mut out);
                }
            }
        }
        Ok(out)
    }
}

fn escape_into(value: &str, out: &mut String) {
    for ch in value.chars() {
        if matches!(ch, '\\' | '{' | '}') {
            out.push('\\');
        }
        out.push(ch);
    }
}

fn split(body: &str) -> Result<Vec<Piece>, TemplateError> {
    let mut pieces = Vec::new();
    let mut rest = body;
    let mut offset = 0;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(TemplateError::Malformed(offset + open));
        }
        let close = rest[open..].find('}').map(|c| open + c).ok_or(TemplateError::Malformed(offset + open))?;
        let name = &rest[open + 1..close];
        if name.is_empty() || !name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
            return Err(TemplateError::Malformed(offset + open));
        }
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_string()));
        }
        pieces.push(Piece::Slot(name.to_string()));
        offset += close + 1;
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_string()));
    }
    Ok(pieces)
}

const OPINION_BODY: &str = "\
You are simulating a social media user who posts about a contested public topic.

## Your recent posts
{self_context}

## Recent posts of an account you follow
{neighbor_context}

## Task
{task_instructions}

Think step by step: summarize the stance your posts express, summarize the other account's stance, \
then judge how far reading their posts moves you.

## Output format
{output_schema}
";

const REWIRE_BODY: &str = "\
You are simulating a social media user deciding whom to keep following.

## Your recent posts
{self_context}

## Recent posts of the other account
{neighbor_context}

## Task
{task_instructions}

Think step by step: compare the views expressed in both sets of posts before scoring how compatible they are.

## Output format
{output_schema}
";

const GENERATE_BODY: &str = "\
You are simulating a social media user. Write their next post.

## Your recent posts
{self_context}

## Accounts on your feed
{neighbor_context}

## Your feed right now
{screen}

## Task
{task_instructions}

Think step by step: note what your feed argues, decide whether and how far it changes your view, \
then write a short post in your own voice that reflects your updated view.

## Output format
{output_schema}
";

/// The three shipped templates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    pub opinion: PromptTemplate,
    pub rewire: PromptTemplate,
    pub generate: PromptTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            opinion: PromptTemplate::new(TemplateKind::Opinion, OPINION_BODY).expect("built-in template"),
            rewire: PromptTemplate::new(TemplateKind::Rewire, REWIRE_BODY).expect("built-in template"),
            generate: PromptTemplate::new(TemplateKind::Generate, GENERATE_BODY).expect("built-in template"),
        }
    }
}

impl TemplateSet {
    pub fn get(&self, kind: TemplateKind) -> &PromptTemplate {
        match kind {
            TemplateKind::Opinion => &self.opinion,
            TemplateKind::Rewire => &self.rewire,
            TemplateKind::Generate => &self.generate,
        }
    }
}
