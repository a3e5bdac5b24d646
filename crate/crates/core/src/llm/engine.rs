use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::client::{CachingClient, LlmRequest, ResponseCache, Transport};
use super::mock::{MockTransport, OTHER_STANCE_LABEL, SELF_STANCE_LABEL};
use super::parse::{parse_response, EngineResponse, ParseStatus, Parsed, ResponseKind};
use super::template::{TemplateKind, TemplateSet};
use crate::engine::{EngineError, EngineKind, EngineStats, EquationEngine, EquationParams, OpinionEngine};
use crate::graph::{recent_context, Post, PostSource, Screen, UserId, UserState};
use crate::opinion::{Compatibility, Influence};
use crate::SimRng;

#[derive(Clone, Debug, PartialEq)]
pub struct LlmSettings {
    pub model: String,
    /// Used for influence and compatibility calls.
    pub decision_temperature: f64,
    /// Used for post generation.
    pub generate_temperature: f64,
    pub max_tokens: u32,
    /// Posts per user included as context.
    pub context_window: usize,
    pub seed_slot: u64,
    /// Reuse compatibility answers per pair of opinions rounded to 0.01.
    pub compat_memo: bool,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            model: String::new(),
            decision_temperature: 0.0,
            generate_temperature: 0.7,
            max_tokens: 512,
            context_window: 10,
            seed_slot: 0,
            compat_memo: false,
        }
    }
}

/// Engine whose `f`, `g` and posts come from prompted completions. Parse
/// failures fall back to the equation engine for that one call.
pub struct LlmEngine<T> {
    kind: EngineKind,
    client: CachingClient<T>,
    templates: TemplateSet,
    settings: LlmSettings,
    fallback: EquationEngine,
    stats: EngineStats,
    memo: HashMap<(i32, i32), Compatibility>,
    transcript: Option<Vec<EngineResponse>>,
}

impl LlmEngine<MockTransport> {
    /// The mock engine: the full prompt protocol answered in-process.
    pub fn mock(params: EquationParams, settings: LlmSettings) -> Self {
        let mut engine = LlmEngine::new(MockTransport::new(params), ResponseCache::in_memory(), settings, params);
        engine.kind = EngineKind::Mock;
        engine
    }
}

impl<T: Transport> LlmEngine<T> {
    pub fn new(transport: T, cache: ResponseCache, settings: LlmSettings, fallback: EquationParams) -> Self {
        LlmEngine {
            kind: EngineKind::Llm,
            client: CachingClient::new(transport, cache),
            templates: TemplateSet::default(),
            settings,
            fallback: EquationEngine::new(fallback),
            stats: EngineStats::default(),
            memo: HashMap::new(),
            transcript: None,
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    /// Keep every parsed response for later inspection.
    pub fn record_transcript(mut self) -> Self {
        self.transcript = Some(Vec::new());
        self
    }

    pub fn transcript(&self) -> &[EngineResponse] {
        self.transcript.as_deref().unwrap_or(&[])
    }

    pub fn client(&self) -> &CachingClient<T> {
        &self.client
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    fn ask(
        &mut self,
        template: TemplateKind,
        expected: ResponseKind,
        bindings: BTreeMap<&'static str, String>,
        temperature: f64,
    ) -> Result<EngineResponse, EngineError> {
        let prompt = self.templates.get(template).render(&bindings).map_err(super::LlmError::from)?;
        let request = LlmRequest::new(&self.settings.model, prompt, temperature, self.settings.max_tokens, self.settings.seed_slot);
        let raw = self.client.complete(&request)?;
        let response = parse_response(&raw, expected);
        self.stats.calls += 1;
        match response.status {
            ParseStatus::Clean => self.stats.clean += 1,
            ParseStatus::Recovered => self.stats.recovered += 1,
            ParseStatus::Failed => self.stats.failed += 1,
        }
        if let Some(log) = self.transcript.as_mut() {
            log.push(response.clone());
        }
        Ok(response)
    }

    fn pair_bindings(&self, me: &UserState, other: &UserState, task: String, expected: ResponseKind) -> BTreeMap<&'static str, String> {
        let window = self.settings.context_window;
        let mut bindings = BTreeMap::new();
        bindings.insert("self_context", format_posts(recent_context(me, window), ""));
        bindings.insert("neighbor_context", format_contexts([(other.id, recent_context(other, window))]));
        bindings.insert("screen", String::new());
        bindings.insert(
            "task_instructions",
            format!(
                "{task}\nStances run from -1 (strongly oppose) to +1 (strongly favor).\n{SELF_STANCE_LABEL} {}\n{OTHER_STANCE_LABEL} {}",
                me.opinion, other.opinion
            ),
        );
        bindings.insert("output_schema", expected.schema().to_string());
        bindings
    }
}

/// One line per post, oldest first, with line breaks flattened.
fn format_posts(posts: &[Post], indent: &str) -> String {
    if posts.is_empty() {
        return format!("{indent}(no posts yet)");
    }
    let mut out = String::new();
    for (k, post) in posts.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{indent}- [step {}] {}", post.step, flatten(&post.text));
    }
    out
}

/// Per-user context blocks in ascending user order.
fn format_contexts<'a>(contexts: impl IntoIterator<Item = (UserId, &'a [Post])>) -> String {
    let mut blocks: Vec<(UserId, &[Post])> = contexts.into_iter().collect();
    blocks.sort_by_key(|(id, _)| *id);
    if blocks.is_empty() {
        return "(nobody)".into();
    }
    blocks.iter().map(|(id, posts)| format!("{id}:\n{}", format_posts(posts, "  "))).collect::<Vec<_>>().join("\n")
}

fn format_screen(screen: &Screen) -> String {
    if screen.is_empty() {
        return "(your feed is empty)".into();
    }
    screen
        .iter()
        .map(|(post, source)| {
            let tag = match source {
                PostSource::Friend => "followed",
                PostSource::Recommended => "suggested",
            };
            format!("- @{} [stance {}] ({tag}) {}", post.author, post.stance, flatten(&post.text))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn flatten(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl<T: Transport> OpinionEngine for LlmEngine<T> {
    fn kind(&self) -> EngineKind {
        self.kind
    }

    fn influence(&mut self, source: &UserState, target: &UserState) -> Result<Influence, EngineError> {
        let task = format!(
            "You are {}. Decide how reading the posts of {} shifts your stance, as a signed amount.",
            target.id, source.id
        );
        let bindings = self.pair_bindings(target, source, task, ResponseKind::Influence);
        let temperature = self.settings.decision_temperature;
        let response = self.ask(TemplateKind::Opinion, ResponseKind::Influence, bindings, temperature)?;
        match response.parsed {
            Some(Parsed::Influence(f)) => {
                if response.status == ParseStatus::Recovered && f.get().abs() == Influence::BOUND {
                    self.stats.clipped += 1;
                    log::warn!("influence from {} on {} clipped to {}", source.id, target.id, f.get());
                }
                Ok(f)
            }
            _ => {
                self.stats.fallbacks += 1;
                self.fallback.influence(source, target)
            }
        }
    }

    fn compatibility(&mut self, actor: &UserState, other: &UserState) -> Result<Compatibility, EngineError> {
        let memo_key = ((actor.opinion.get() * 100.0).round() as i32, (other.opinion.get() * 100.0).round() as i32);
        if self.settings.compat_memo {
            if let Some(g) = self.memo.get(&memo_key) {
                return Ok(*g);
            }
        }
        let task = format!(
            "You are {}. Rate how compatible your views are with those of {}.",
            actor.id, other.id
        );
        let bindings = self.pair_bindings(actor, other, task, ResponseKind::Compatibility);
        let temperature = self.settings.decision_temperature;
        let response = self.ask(TemplateKind::Rewire, ResponseKind::Compatibility, bindings, temperature)?;
        let g = match response.parsed {
            Some(Parsed::Compatibility(g)) => g,
            _ => {
                self.stats.fallbacks += 1;
                self.fallback.compatibility(actor, other)?
            }
        };
        if self.settings.compat_memo {
            self.memo.insert(memo_key, g);
        }
        Ok(g)
    }

    fn generate_post(&mut self, user: &UserState, screen: &Screen, step: u64, rng: &mut SimRng) -> Result<Post, EngineError> {
        let window = self.settings.context_window;
        let mut by_author: BTreeMap<UserId, Vec<Post>> = BTreeMap::new();
        for post in &screen.posts {
            by_author.entry(post.author).or_default().push(post.clone());
        }
        let mut bindings = BTreeMap::new();
        bindings.insert("self_context", format_posts(recent_context(user, window), ""));
        bindings.insert(
            "neighbor_context",
            format_contexts(by_author.iter().map(|(id, posts)| (*id, posts.as_slice()))),
        );
        bindings.insert("screen", format_screen(screen));
        bindings.insert(
            "task_instructions",
            format!(
                "You are {}. Read your feed and write your next post.\n\
                 Stances run from -1 (strongly oppose) to +1 (strongly favor).\n{SELF_STANCE_LABEL} {}",
                user.id, user.opinion
            ),
        );
        bindings.insert("output_schema", ResponseKind::Generated.schema().to_string());
        let temperature = self.settings.generate_temperature;
        let response = self.ask(TemplateKind::Generate, ResponseKind::Generated, bindings, temperature)?;
        match response.parsed {
            Some(Parsed::Generated { text, stance }) => Ok(Post::simulated(user.id, step, text, stance)?),
            _ => {
                self.stats.fallbacks += 1;
                self.fallback.generate_post(user, screen, step, rng)
            }
        }
    }

    fn stats(&self) -> EngineStats {
        self.stats
    }
}
