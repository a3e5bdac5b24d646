//! Extraction of final-line `KEY: value` answers from model output.
//!
//! A strict pass accepts a well-formed `KEY: <number>` line. Failing that, a
//! tolerant pass allows case changes, markdown emphasis, `=` for `:`, and
//! whitespace (including one line break) inside the key and the number.
//! Out-of-range values are clamped and flagged. Nothing is ever guessed: no
//! match means [`ParseStatus::Failed`].

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::opinion::{Compatibility, Influence, Opinion};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Influence,
    Stance,
    Compatibility,
    Generated,
}

impl ResponseKind {
    /// The key of the numeric schema line.
    pub fn key(self) -> &'static str {
        match self {
            ResponseKind::Influence => "INFLUENCE",
            ResponseKind::Stance | ResponseKind::Generated => "STANCE",
            ResponseKind::Compatibility => "COMPATIBILITY",
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            ResponseKind::Influence => (-Influence::BOUND, Influence::BOUND),
            ResponseKind::Stance | ResponseKind::Generated => (-1.0, 1.0),
            ResponseKind::Compatibility => (0.0, 1.0),
        }
    }

    /// Instructions bound to `{output_schema}`.
    pub fn schema(self) -> &'static str {
        match self {
            ResponseKind::Influence => {
                "After your reasoning, end with exactly one line of the form\n\
                 INFLUENCE: <number between -2 and 2>\n\
                 giving the signed shift of your stance, written as a plain decimal."
            }
            ResponseKind::Stance => {
                "After your reasoning, end with exactly one line of the form\n\
                 STANCE: <number between -1 and 1>\n\
                 written as a plain decimal."
            }
            ResponseKind::Compatibility => {
                "After your reasoning, end with exactly one line of the form\n\
                 COMPATIBILITY: <number between 0 and 1>\n\
                 where 1 means fully aligned views and 0 means opposite views."
            }
            ResponseKind::Generated => {
                "After your reasoning, end with exactly two lines of the form\n\
                 POST: <the post text on one line>\n\
                 STANCE: <number between -1 and 1, the stance of the post>"
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parsed {
    Influence(Influence),
    Stance(Opinion),
    Compatibility(Compatibility),
    Generated { text: String, stance: Opinion },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseStatus {
    Clean,
    Recovered,
    Failed,
}

/// `status == Failed` exactly when `parsed` is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineResponse {
    pub raw: String,
    pub parsed: Option<Parsed>,
    pub status: ParseStatus,
}

impl EngineResponse {
    fn failed(raw: &str) -> Self {
        EngineResponse { raw: raw.to_string(), parsed: None, status: ParseStatus::Failed }
    }
}

struct Match {
    value: f64,
    /// Byte range of the whole `KEY: value` match.
    start: usize,
    end: usize,
    strict: bool,
}

const BREAK: &str = r"[ \t]*(?:\r?\n[ \t]*)?";

fn spaced(word: &str) -> String {
    let letters: Vec<String> = word.chars().map(|c| regex::escape(&c.to_string())).collect();
    letters.join(BREAK)
}

fn number_pattern() -> String {
    let w = BREAK;
    format!(r"[+\-\x{{2212}}]?{w}(?:\d(?:{w}\d)*(?:{w}\.{w}\d(?:{w}\d)*)?|\.{w}\d(?:{w}\d)*)")
}

struct KeyPatterns {
    strict: Regex,
    tolerant: Regex,
}

fn patterns(key: &'static str) -> &'static KeyPatterns {
    static INFLUENCE: OnceLock<KeyPatterns> = OnceLock::new();
    static STANCE: OnceLock<KeyPatterns> = OnceLock::new();
    static COMPAT: OnceLock<KeyPatterns> = OnceLock::new();
    static POST: OnceLock<KeyPatterns> = OnceLock::new();
    let cell = match key {
        "INFLUENCE" => &INFLUENCE,
        "STANCE" => &STANCE,
        "COMPATIBILITY" => &COMPAT,
        "POST" => &POST,
        _ => unreachable!("unknown schema key {key}"),
    };
    cell.get_or_init(|| {
        let strict = Regex::new(&format!(r"(?m)^[ \t]*{key}:[ \t]*(?P<num>[+-]?\d+(?:\.\d+)?)[ \t]*\r?$")).unwrap();
        let emph = r"[*_`]*";
        let tolerant = if key == "POST" {
            Regex::new(&format!(r"(?i){emph}{}{emph}{BREAK}[:=]{emph}", spaced(key))).unwrap()
        } else {
            Regex::new(&format!(
                r"(?i){emph}{}{emph}{BREAK}[:=]{emph}{BREAK}(?P<num>{})",
                spaced(key),
                number_pattern()
            ))
            .unwrap()
        };
        KeyPatterns { strict, tolerant }
    })
}

fn clean_number(text: &str) -> Option<f64> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).map(|c| if c == '\u{2212}' { '-' } else { c }).collect();
    compact.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A number must not run straight into more text like `7/10` or `70%`.
fn terminated(raw: &str, end: usize) -> bool {
    match raw[end..].trim_start_matches([' ', '\t']).chars().next() {
        None => true,
        Some(c) => matches!(c, '\r' | '\n' | '.' | ',' | ';' | '(' | ')' | ']' | '*' | '_' | '`' | '"' | '\''),
    }
}

/// Nothing but closing punctuation between `end` and the end of its line.
fn line_ends_after(raw: &str, end: usize) -> bool {
    let rest = raw[end..].split('\n').next().unwrap_or_default();
    rest.trim_matches(|c: char| c.is_whitespace() || matches!(c, '.' | '*' | '_' | '`' | '"' | '\'' | ')')).is_empty()
}

fn find_number(raw: &str, key: &'static str) -> Option<Match> {
    let pats = patterns(key);
    if let Some(caps) = pats.strict.captures_iter(raw).last() {
        let whole = caps.get(0).unwrap();
        let num = caps.name("num").unwrap();
        if let Some(value) = clean_number(num.as_str()) {
            return Some(Match { value, start: whole.start(), end: whole.end(), strict: true });
        }
    }
    pats.tolerant
        .captures_iter(raw)
        .filter_map(|caps| {
            let whole = caps.get(0).unwrap();
            let num = caps.name("num").unwrap();
            // A digit run continued on the next line only counts when that
            // line holds nothing else; otherwise it is a new sentence.
            let (text, end) = match num.as_str().find('\n') {
                Some(cut) if !line_ends_after(raw, num.end()) => {
                    let head = num.as_str()[..cut].trim_end();
                    (head, num.start() + head.len())
                }
                _ => (num.as_str(), num.end()),
            };
            if !terminated(raw, end) {
                return None;
            }
            let value = clean_number(text)?;
            Some(Match { value, start: whole.start(), end: whole.end(), strict: false })
        })
        .last()
}

fn find_post_text(raw: &str, stance: &Match) -> Option<(String, bool)> {
    let head = &raw[..stance.start];
    let marker = patterns("POST").tolerant.find_iter(head).last()?;
    let strict = raw[..marker.end()].lines().last().is_some_and(|line| line.trim_start() == "POST:");
    let text = head[marker.end()..].split_whitespace().collect::<Vec<_>>().join(" ");
    let text = text.trim_matches(|c: char| c == '"' || c == '*' || c == '_').trim().to_string();
    if text.is_empty() {
        return None;
    }
    let single_line = !head[marker.end()..].trim().contains('\n');
    Some((text, strict && single_line))
}

/// Parses `raw` as an answer of the given kind.
pub fn parse_response(raw: &str, expected: ResponseKind) -> EngineResponse {
    let Some(found) = find_number(raw, expected.key()) else {
        return EngineResponse::failed(raw);
    };
    let (lo, hi) = expected.range();
    let in_range = (lo..=hi).contains(&found.value);
    let mut clean = found.strict && in_range && raw[found.end..].trim().is_empty();
    let parsed = match expected {
        ResponseKind::Influence => Parsed::Influence(Influence::new(found.value)),
        ResponseKind::Stance => Parsed::Stance(Opinion::new(found.value)),
        ResponseKind::Compatibility => Parsed::Compatibility(Compatibility::new(found.value)),
        ResponseKind::Generated => {
            let Some((text, strict_post)) = find_post_text(raw, &found) else {
                return EngineResponse::failed(raw);
            };
            clean &= strict_post;
            Parsed::Generated { text, stance: Opinion::new(found.value) }
        }
    };
    EngineResponse {
        raw: raw.to_string(),
        parsed: Some(parsed),
        status: if clean { ParseStatus::Clean } else { ParseStatus::Recovered },
    }
}
