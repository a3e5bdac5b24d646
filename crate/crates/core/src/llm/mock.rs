//! In-process stand-in for a chat-completion endpoint.
//!
//! It reads the numeric stance lines the engine writes into every prompt,
//! applies the equation rules, and answers in the same final-line format a
//! model is asked for. Driving [`super::LlmEngine`] with it exercises the whole
//! render → complete → parse path with known answers.

use std::sync::OnceLock;

use regex::Regex;

use super::client::{LlmRequest, Transport};
use super::LlmError;
use crate::engine::EquationParams;
use crate::opinion::Opinion;

pub const SELF_STANCE_LABEL: &str = "Your current stance:";
pub const OTHER_STANCE_LABEL: &str = "Their current stance:";

#[derive(Clone, Debug, Default)]
pub struct MockTransport {
    params: EquationParams,
    requests: u64,
}

impl MockTransport {
    pub fn new(params: EquationParams) -> Self {
        MockTransport { params, requests: 0 }
    }

    pub fn requests(&self) -> u64 {
        self.requests
    }
}

fn labelled(prompt: &str, label: &'static str) -> Option<Opinion> {
    static SELF: OnceLock<Regex> = OnceLock::new();
    static OTHER: OnceLock<Regex> = OnceLock::new();
    let cell = if label == SELF_STANCE_LABEL { &SELF } else { &OTHER };
    let pattern = cell.get_or_init(|| {
        Regex::new(&format!(r"(?m)^{}[ \t]*([+-]?\d+\.\d+)[ \t]*$", regex::escape(label))).unwrap()
    });
    let caps = pattern.captures(prompt)?;
    caps[1].parse::<f64>().ok().map(Opinion::new)
}

fn screen_stances(prompt: &str) -> Vec<Opinion> {
    static LINE: OnceLock<Regex> = OnceLock::new();
    let line = LINE.get_or_init(|| Regex::new(r"(?m)^- @user\d+ \[stance ([+-]\d+\.\d+)\]").unwrap());
    line.captures_iter(prompt).filter_map(|c| c[1].parse::<f64>().ok()).map(Opinion::new).collect()
}

/// The stance put into words, e.g. "leaning in favor".
pub fn describe_stance(stance: Opinion) -> &'static str {
    let x = stance.get();
    match x.abs() {
        a if a < 0.1 => "undecided",
        a if a < 0.4 && x > 0.0 => "leaning in favor",
        a if a < 0.4 => "leaning against",
        a if a < 0.75 && x > 0.0 => "fairly firmly in favor",
        a if a < 0.75 => "fairly firmly against",
        _ if x > 0.0 => "strongly in favor",
        _ => "strongly against",
    }
}

impl MockTransport {
    fn answer(&self, prompt: &str) -> Option<String> {
        let me = labelled(prompt, SELF_STANCE_LABEL)?;
        if prompt.contains("\nPOST: <") {
            let observed = screen_stances(prompt);
            let stance = self.params.update(me, observed.iter().copied());
            return Some(format!(
                "Step 1: my feed shows {} posts.\nStep 2: after reading them I am {}.\n\
                 POST: Honestly, I am {} on this one ({stance}).\nSTANCE: {stance}",
                observed.len(),
                describe_stance(stance),
                describe_stance(stance),
            ));
        }
        let other = labelled(prompt, OTHER_STANCE_LABEL)?;
        if prompt.contains("\nINFLUENCE: <") {
            let f = self.params.influence(other, me);
            return Some(format!("Step 1: compare stances {me} and {other}.\nINFLUENCE: {:+.6}", f.get()));
        }
        if prompt.contains("\nCOMPATIBILITY: <") {
            let g = self.params.compatibility(me, other);
            return Some(format!("Step 1: compare stances {me} and {other}.\nCOMPATIBILITY: {:.6}", g.get()));
        }
        None
    }
}

impl Transport for MockTransport {
    fn send(&mut self, request: &LlmRequest) -> Result<String, LlmError> {
        self.requests += 1;
        Ok(self.answer(&request.prompt).unwrap_or_else(|| "I cannot help with that.".to_string()))
    }
}
