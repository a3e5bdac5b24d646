//! Opinion engines: the influence function `f`, the compatibility function
//! `g`, and post generation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, Post, Screen, UserState};
use crate::llm::LlmError;
use crate::opinion::{Compatibility, Influence, Opinion};
use crate::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Equation,
    Mock,
    Llm,
}

impl std::str::FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equation" => Ok(EngineKind::Equation),
            "mock" => Ok(EngineKind::Mock),
            "llm" => Ok(EngineKind::Llm),
            other => Err(format!("unknown engine {other:?} (expected equation, mock or llm)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Counters surfaced in run reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineStats {
    pub calls: u64,
    pub clean: u64,
    pub recovered: u64,
    pub failed: u64,
    /// Calls answered by the equation engine after a parse failure.
    pub fallbacks: u64,
    /// Influence values that had to be clipped to `[-2, 2]`.
    pub clipped: u64,
}

impl EngineStats {
    pub fn failed_fraction(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            self.failed as f64 / self.calls as f64
        }
    }
}

pub trait OpinionEngine {
    fn kind(&self) -> EngineKind;

    /// `f(O_j, O_i)`: the pull of `source` (j) on `target` (i).
    fn influence(&mut self, source: &UserState, target: &UserState) -> Result<Influence, EngineError>;

    /// `g(O_i, O_j)` between `actor` (i) and `other` (j).
    fn compatibility(&mut self, actor: &UserState, other: &UserState) -> Result<Compatibility, EngineError>;

    /// A new post for `user` after reading `screen`; its stance is the user's
    /// post-update opinion.
    fn generate_post(&mut self, user: &UserState, screen: &Screen, step: u64, rng: &mut SimRng) -> Result<Post, EngineError>;

    /// `O_i + (1/|N_i|) Σ f(O_j, O_i)`, clamped. Neighbors are visited in the
    /// order given; an empty set leaves the opinion unchanged.
    fn update_opinion(&mut self, user: &UserState, neighbors: &[&UserState]) -> Result<Opinion, EngineError> {
        if neighbors.is_empty() {
            return Ok(user.opinion);
        }
        let mut total = 0.0;
        for neighbor in neighbors {
            total += self.influence(neighbor, user)?.get();
        }
        Ok(Opinion::new(user.opinion.get() + total / neighbors.len() as f64))
    }

    fn stats(&self) -> EngineStats {
        EngineStats::default()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("mu must lie in (0, 1], got {0}")]
    Mu(f64),
    #[error("epsilon must lie in (0, 2], got {0}")]
    Epsilon(f64),
}

/// Uniform influence weight `mu` and bounded-confidence radius `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationParams {
    pub mu: f64,
    pub epsilon: f64,
}

impl Default for EquationParams {
    fn default() -> Self {
        EquationParams { mu: 0.5, epsilon: 0.4 }
    }
}

impl EquationParams {
    pub fn new(mu: f64, epsilon: f64) -> Result<Self, ParamError> {
        let params = EquationParams { mu, epsilon };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(ParamError::Mu(self.mu));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 2.0) {
            return Err(ParamError::Epsilon(self.epsilon));
        }
        Ok(())
    }

    /// `mu (O_j - O_i)` inside the confidence radius, zero outside.
    pub fn influence(&self, source: Opinion, target: Opinion) -> Influence {
        let gap = source.get() - target.get();
        if gap.abs() <= self.epsilon {
            Influence::new(self.mu * gap)
        } else {
            Influence::new(0.0)
        }
    }

    /// `1 - |O_i - O_j| / 2`.
    pub fn compatibility(&self, a: Opinion, b: Opinion) -> Compatibility {
        Compatibility::new(1.0 - (a.get() - b.get()).abs() / 2.0)
    }

    /// Update of `current` against a list of observed stances.
    pub fn update(&self, current: Opinion, observed: impl IntoIterator<Item = Opinion>) -> Opinion {
        let mut total = 0.0;
        let mut count = 0usize;
        for stance in observed {
            total += self.influence(stance, current).get();
            count += 1;
        }
        if count == 0 {
            current
        } else {
            Opinion::new(current.get() + total / count as f64)
        }
    }
}

/// Text of the placeholder post used wherever no language model writes one.
pub fn placeholder_post_text(stance: Opinion) -> String {
    format!("stance update {stance}")
}

/// Rule-based baseline. Contexts are ignored.
#[derive(Clone, Debug, Default)]
pub struct EquationEngine {
    pub params: EquationParams,
}

impl EquationEngine {
    pub fn new(params: EquationParams) -> Self {
        EquationEngine { params }
    }

    /// Stance after reading the screen (the update rule over screen stances).
    pub fn screen_stance(&self, user: &UserState, screen: &Screen) -> Opinion {
        self.params.update(user.opinion, screen.posts.iter().map(|p| p.stance))
    }
}

impl OpinionEngine for EquationEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Equation
    }

    fn influence(&mut self, source: &UserState, target: &UserState) -> Result<Influence, EngineError> {
        Ok(self.params.influence(source.opinion, target.opinion))
    }

    fn compatibility(&mut self, actor: &UserState, other: &UserState) -> Result<Compatibility, EngineError> {
        Ok(self.params.compatibility(actor.opinion, other.opinion))
    }

    fn generate_post(&mut self, user: &UserState, screen: &Screen, step: u64, _rng: &mut SimRng) -> Result<Post, EngineError> {
        let stance = self.screen_stance(user, screen);
        Ok(Post::simulated(user.id, step, placeholder_post_text(stance), stance)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{PostSource, UserId};
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn user(id: u32, opinion: f64) -> UserState {
        UserState::new(UserId(id), Opinion::new(opinion))
    }

    fn engine(mu: f64, epsilon: f64) -> EquationEngine {
        EquationEngine::new(EquationParams::new(mu, epsilon).unwrap())
    }

    #[test]
    fn influence_examples() {
        let mut e = engine(0.5, 0.6);
        assert_eq!(e.influence(&user(1, 0.5), &user(0, 0.1)).unwrap().get(), 0.2);
        assert_eq!(e.influence(&user(1, 0.3), &user(0, 0.3)).unwrap().get(), 0.0);
        let mut narrow = engine(0.5, 0.3);
        assert_eq!(narrow.influence(&user(1, 0.9), &user(0, 0.1)).unwrap().get(), 0.0);
    }

    #[test]
    fn compatibility_examples() {
        let mut e = EquationEngine::default();
        assert_eq!(e.compatibility(&user(0, 0.4), &user(1, 0.4)).unwrap().get(), 1.0);
        assert_eq!(e.compatibility(&user(0, -1.0), &user(1, 1.0)).unwrap().get(), 0.0);
        assert_eq!(e.compatibility(&user(0, 0.2), &user(1, -0.4)).unwrap().get(), 0.7);
    }

    #[test]
    fn update_examples() {
        let mut e = engine(0.5, 2.0);
        let me = user(0, 0.0);
        let (a, b) = (user(1, 0.4), user(2, -0.2));
        assert_eq!(e.update_opinion(&me, &[&a, &b]).unwrap().get(), 0.05);

        let same = user(3, 0.3);
        let me = user(0, 0.3);
        assert_eq!(e.update_opinion(&me, &[&same, &same]).unwrap(), me.opinion);
        assert_eq!(e.update_opinion(&me, &[]).unwrap(), me.opinion);

        let mut full = engine(1.0, 2.0);
        let me = user(0, 0.9);
        let top = user(1, 1.0);
        let got = full.update_opinion(&me, &[&top, &top, &top]).unwrap().get();
        assert!(got <= 1.0);
        assert_eq!(got, 1.0);
    }

    #[test]
    fn generate_post_examples() {
        let mut e = engine(0.5, 2.0);
        let mut rng = SimRng::seed_from_u64(0);
        let me = user(0, 0.0);
        let empty = Screen::empty(me.id);
        assert_eq!(e.generate_post(&me, &empty, 1, &mut rng).unwrap().stance, me.opinion);

        let mut screen = Screen::empty(me.id);
        for j in 1..=3 {
            screen.posts.push(Post::simulated(UserId(j), 0, "yes", Opinion::new(1.0)).unwrap());
            screen.sources.push(PostSource::Friend);
        }
        let a = e.generate_post(&me, &screen, 4, &mut rng).unwrap();
        let b = e.generate_post(&me, &screen, 4, &mut rng).unwrap();
        assert_eq!(a.stance.get(), 0.5);
        assert_eq!(a, b);
        assert_eq!(a.step, 4);
    }

    #[test]
    fn params_are_validated() {
        assert_eq!(EquationParams::new(0.0, 0.4), Err(ParamError::Mu(0.0)));
        assert_eq!(EquationParams::new(0.5, 2.5), Err(ParamError::Epsilon(2.5)));
    }

    proptest! {
        #[test]
        fn influence_is_antisymmetric_inside_bound(a in -1.0f64..=1.0, b in -1.0f64..=1.0, eps in 0.01f64..=2.0) {
            let p = EquationParams::new(0.5, eps).unwrap();
            let (a, b) = (Opinion::new(a), Opinion::new(b));
            let f_ab = p.influence(a, b).get();
            let f_ba = p.influence(b, a).get();
            prop_assert_eq!(f_ab, -f_ba + 0.0);
            prop_assert!(f_ab.abs() <= 2.0);
        }

        #[test]
        fn compatibility_is_symmetric(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
            let p = EquationParams::default();
            let (a, b) = (Opinion::new(a), Opinion::new(b));
            prop_assert_eq!(p.compatibility(a, b), p.compatibility(b, a));
            prop_assert_eq!(p.compatibility(a, a).get(), 1.0);
            let g = p.compatibility(a, b).get();
            prop_assert!((0.0..=1.0).contains(&g));
        }

        // With epsilon = 2 the update contracts toward the neighbor mean
        // (up to the 1e-6 quantization step).
        #[test]
        fn update_contracts_toward_mean(
            me in -1.0f64..=1.0,
            others in proptest::collection::vec(-1.0f64..=1.0, 1..8),
            mu in 0.01f64..=1.0,
        ) {
            let mut e = engine(mu, 2.0);
            let me = user(0, me);
            let states: Vec<UserState> = others.iter().enumerate().map(|(k, &o)| user(k as u32 + 1, o)).collect();
            let refs: Vec<&UserState> = states.iter().collect();
            let mean = states.iter().map(|s| s.opinion.get()).sum::<f64>() / states.len() as f64;
            let next = e.update_opinion(&me, &refs).unwrap().get();
            prop_assert!((next - mean).abs() <= (me.opinion.get() - mean).abs() + 1e-6);
        }
    }
}
