//! The asynchronous simulation loop: one random user per step reads their
//! screen, updates their opinion, posts, and rewires.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{placeholder_post_text, EngineError, EngineKind, EquationParams, OpinionEngine, ParamError};
use crate::graph::{build_screen, GraphError, Post, SocialGraph, UserId};
use crate::opinion::Opinion;
use crate::SimRng;

/// Follow candidates drawn per rewiring decision.
pub const CANDIDATE_POOL: usize = 10;
/// At most this many candidates come from friends-of-friends.
pub const FOF_CANDIDATES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Opinion moves by pairwise influence over `N_i`.
    Pairwise,
    /// Opinion is the stance of the post written after reading the screen.
    Generative,
}

impl std::str::FromStr for UpdateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pairwise" => Ok(UpdateMode::Pairwise),
            "generative" => Ok(UpdateMode::Generative),
            other => Err(format!("unknown update mode {other:?}")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {expected}, got {value}")]
    Range { field: &'static str, expected: &'static str, value: String },
    #[error(transparent)]
    Params(#[from] ParamError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub max_steps: u64,
    pub screen_size: usize,
    pub history_window: usize,
    pub rec_fraction: f64,
    pub q_unfollow: f64,
    pub paired_rewiring: bool,
    pub params: EquationParams,
    pub engine: EngineKind,
    pub update_mode: UpdateMode,
    pub stability_delta: f64,
    pub stability_window: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            max_steps: 2000,
            screen_size: 10,
            history_window: 10,
            rec_fraction: 0.25,
            q_unfollow: 0.3,
            paired_rewiring: true,
            params: EquationParams::default(),
            engine: EngineKind::Equation,
            update_mode: UpdateMode::Generative,
            stability_delta: 0.01,
            stability_window: 100,
        }
    }
}

fn range_err(field: &'static str, expected: &'static str, value: impl ToString) -> ConfigError {
    ConfigError::Range { field, expected, value: value.to_string() }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        if self.screen_size == 0 {
            return Err(range_err("screen_size", "positive", self.screen_size));
        }
        if self.history_window == 0 {
            return Err(range_err("history_window", "positive", self.history_window));
        }
        if self.stability_window == 0 {
            return Err(range_err("stability_window", "positive", self.stability_window));
        }
        if !(0.0..=1.0).contains(&self.rec_fraction) {
            return Err(range_err("rec_fraction", "in [0, 1]", self.rec_fraction));
        }
        if !(0.0..=1.0).contains(&self.q_unfollow) {
            return Err(range_err("q_unfollow", "in [0, 1]", self.q_unfollow));
        }
        if self.stability_delta.is_nan() || self.stability_delta < 0.0 {
            return Err(range_err("stability_delta", "non-negative", self.stability_delta));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: u64,
    pub actor: UserId,
    pub new_post: Post,
    pub unfollowed: Vec<UserId>,
    pub followed: Vec<UserId>,
    pub opinion_before: Opinion,
    pub opinion_after: Opinion,
}

impl StepEvent {
    pub fn edge_changes(&self) -> usize {
        self.unfollowed.len() + self.followed.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    MaxSteps,
    Stabilized,
    /// The engine failed; the events up to the failure are kept.
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub final_graph: SocialGraph,
    pub events: Vec<StepEvent>,
    pub stopped_reason: StopReason,
    pub error: Option<String>,
    pub fallback_count: u64,
    pub failed_parse_fraction: f64,
}

/// Draws each current neighbor's unfollow, pairing it with a follow when
/// configured. Returns `(unfollowed, followed)`; the graph is updated in place.
pub fn rewire(
    graph: &mut SocialGraph,
    actor: UserId,
    engine: &mut dyn OpinionEngine,
    config: &SimConfig,
    rng: &mut SimRng,
) -> Result<(Vec<UserId>, Vec<UserId>), EngineError> {
    let neighbors: Vec<UserId> = graph.neighbors_in(actor)?.iter().copied().collect();
    let mut unfollowed = Vec::new();
    let mut followed = Vec::new();

    for j in neighbors {
        let g = engine.compatibility(graph.user(actor)?, graph.user(j)?)?;
        let p = config.q_unfollow * (1.0 - g.get());
        if rng.gen::<f64>() >= p {
            continue;
        }
        graph.remove_edge(j, actor)?;
        if !config.paired_rewiring {
            unfollowed.push(j);
            continue;
        }
        let pool = candidate_pool(graph, actor, &unfollowed, j, rng)?;
        let mut weights = Vec::with_capacity(pool.len());
        for &k in &pool {
            weights.push(engine.compatibility(graph.user(actor)?, graph.user(k)?)?.get());
        }
        match weighted_pick(&weights, rng) {
            Some(pick) => {
                graph.add_edge(pool[pick], actor)?;
                unfollowed.push(j);
                followed.push(pool[pick]);
            }
            // Nobody to swap in: keep the edge so the count is conserved.
            None => {
                graph.add_edge(j, actor)?;
            }
        }
    }

    if !config.paired_rewiring {
        let pool = candidate_pool(graph, actor, &unfollowed, actor, rng)?;
        for k in pool {
            let g = engine.compatibility(graph.user(actor)?, graph.user(k)?)?;
            if rng.gen::<f64>() < config.q_unfollow * g.get() {
                graph.add_edge(k, actor)?;
                followed.push(k);
            }
        }
    }
    Ok((unfollowed, followed))
}

/// Up to [`FOF_CANDIDATES`] friends-of-friends, topped up with uniform
/// non-neighbors to [`CANDIDATE_POOL`]. Never the actor, a current
/// neighbor, or anyone unfollowed during this step.
fn candidate_pool(
    graph: &SocialGraph,
    actor: UserId,
    unfollowed: &[UserId],
    dropping: UserId,
    rng: &mut SimRng,
) -> Result<Vec<UserId>, GraphError> {
    let neighbors = graph.neighbors_in(actor)?;
    let excluded = |k: UserId| k == actor || k == dropping || neighbors.contains(&k) || unfollowed.contains(&k);

    let mut fof = BTreeSet::new();
    for &j in neighbors {
        for &k in graph.neighbors_in(j)? {
            if !excluded(k) {
                fof.insert(k);
            }
        }
    }
    let fof: Vec<UserId> = fof.into_iter().collect();
    let mut pool: Vec<UserId> = if fof.len() > FOF_CANDIDATES {
        let mut picked: Vec<UserId> = index::sample(rng, fof.len(), FOF_CANDIDATES).into_iter().map(|i| fof[i]).collect();
        picked.sort();
        picked
    } else {
        fof
    };

    let want = CANDIDATE_POOL - pool.len();
    let rest: Vec<UserId> = graph.user_ids().filter(|&k| !excluded(k) && pool.binary_search(&k).is_err()).collect();
    let take = want.min(rest.len());
    if take > 0 {
        pool.extend(index::sample(rng, rest.len(), take).into_iter().map(|i| rest[i]));
    }
    Ok(pool)
}

/// Index drawn with probability proportional to its weight; `None` when all
/// weights are zero.
fn weighted_pick(weights: &[f64], rng: &mut SimRng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut target = rng.gen::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if target < w {
            return Some(k);
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// A run in progress. Owns the working copy of the graph and the RNG stream.
pub struct Simulation {
    graph: SocialGraph,
    config: SimConfig,
    rng: SimRng,
    steps_taken: u64,
    trailing: VecDeque<(f64, usize)>,
}

impl Simulation {
    pub fn new(initial: SocialGraph, config: SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let rng = SimRng::seed_from_u64(config.seed);
        Ok(Simulation { graph: initial, config, rng, steps_taken: 0, trailing: VecDeque::new() })
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    pub fn into_graph(self) -> SocialGraph {
        self.graph
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// Advances one step. On error the graph may hold a partial step.
    pub fn step(&mut self, engine: &mut dyn OpinionEngine) -> Result<StepEvent, EngineError> {
        let n = self.graph.len();
        assert!(n > 0, "cannot step an empty graph");
        let step = self.steps_taken + 1;
        let actor = UserId(self.rng.gen_range(0..n as u32));
        let screen = build_screen(&self.graph, actor, self.config.screen_size, self.config.rec_fraction, &mut self.rng)?;
        let before = self.graph.user(actor)?.opinion;

        let post = match self.config.update_mode {
            UpdateMode::Generative => engine.generate_post(self.graph.user(actor)?, &screen, step, &mut self.rng)?,
            UpdateMode::Pairwise => {
                let neighbor_ids: Vec<UserId> = self.graph.neighbors_in(actor)?.iter().copied().collect();
                let neighbors: Vec<_> = neighbor_ids.iter().map(|&j| self.graph.user(j)).collect::<Result<_, _>>()?;
                let opinion = engine.update_opinion(self.graph.user(actor)?, &neighbors)?;
                Post::simulated(actor, step, placeholder_post_text(opinion), opinion)?
            }
        };
        let after = post.stance;
        self.graph.set_opinion(actor, after)?;

        let (unfollowed, followed) = rewire(&mut self.graph, actor, engine, &self.config, &mut self.rng)?;
        self.graph.push_post(post.clone())?;
        self.steps_taken = step;

        let event = StepEvent {
            step,
            actor,
            new_post: post,
            unfollowed,
            followed,
            opinion_before: before,
            opinion_after: after,
        };
        self.trailing.push_back(((after.get() - before.get()).abs(), event.edge_changes()));
        while self.trailing.len() > self.config.stability_window {
            self.trailing.pop_front();
        }
        Ok(event)
    }

    /// True once the trailing window is full, every opinion move in it is
    /// below `stability_delta`, and no edge changed.
    pub fn is_stable(&self) -> bool {
        self.trailing.len() == self.config.stability_window
            && self.trailing.iter().all(|&(delta, changes)| delta < self.config.stability_delta && changes == 0)
    }
}

/// Runs to `max_steps` or stabilization, calling `observe` after every step.
pub fn run_with(
    initial: SocialGraph,
    config: SimConfig,
    engine: &mut dyn OpinionEngine,
    mut observe: impl FnMut(&StepEvent, &SocialGraph),
) -> Result<RunResult, ConfigError> {
    let mut sim = Simulation::new(initial, config)?;
    let mut events = Vec::new();
    let mut stopped_reason = StopReason::MaxSteps;
    let mut error = None;
    if !sim.graph().is_empty() {
        while sim.steps_taken() < sim.config().max_steps {
            match sim.step(engine) {
                Ok(event) => {
                    observe(&event, sim.graph());
                    events.push(event);
                }
                Err(e) => {
                    stopped_reason = StopReason::Aborted;
                    error = Some(e.to_string());
                    break;
                }
            }
            if sim.is_stable() {
                stopped_reason = StopReason::Stabilized;
                break;
            }
        }
    }
    let stats = engine.stats();
    Ok(RunResult {
        final_graph: sim.into_graph(),
        events,
        stopped_reason,
        error,
        fallback_count: stats.fallbacks,
        failed_parse_fraction: stats.failed_fraction(),
    })
}

pub fn run(initial: SocialGraph, config: SimConfig, engine: &mut dyn OpinionEngine) -> Result<RunResult, ConfigError> {
    run_with(initial, config, engine, |_, _| {})
}

/// Re-applies an event log to the initial graph.
pub fn replay(initial: &SocialGraph, events: &[StepEvent]) -> Result<SocialGraph, GraphError> {
    let mut graph = initial.clone();
    for event in events {
        graph.set_opinion(event.actor, event.opinion_after)?;
        for &j in &event.unfollowed {
            graph.remove_edge(j, event.actor)?;
        }
        for &k in &event.followed {
            graph.add_edge(k, event.actor)?;
        }
        graph.push_post(event.new_post.clone())?;
    }
    Ok(graph)
}
