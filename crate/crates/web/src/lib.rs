//! wasm-bindgen surface for the static page in `www/`.

use echosim::engine::{EngineKind, EquationEngine, EquationParams, OpinionEngine};
use echosim::llm::{parse_response, LlmEngine, LlmSettings, ResponseKind};
use echosim::metrics::{detect_communities, modularity_of};
use echosim::simulation::{SimConfig, Simulation};
use echosim::synthetic::random_population;
use echosim::SimRng;
use rand::SeedableRng;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Demo {
    sim: Simulation,
    engine: Box<dyn OpinionEngine>,
    seed: u64,
}

#[wasm_bindgen]
impl Demo {
    /// `engine` is "equation" or "mock".
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, density: f64, seed: u64, epsilon: f64, q_unfollow: f64, engine: &str) -> Result<Demo, JsError> {
        let params = EquationParams::new(0.5, epsilon)?;
        let kind = engine.parse::<EngineKind>().map_err(|e| JsError::new(&e.to_string()))?;
        let engine: Box<dyn OpinionEngine> = match kind {
            EngineKind::Mock => Box::new(LlmEngine::mock(params, LlmSettings::default())),
            EngineKind::Equation => Box::new(EquationEngine::new(params)),
            EngineKind::Llm => return Err(JsError::new("the live engine is not available in the browser")),
        };
        let config = SimConfig {
            seed,
            max_steps: u64::MAX,
            q_unfollow,
            params,
            engine: kind,
            stability_delta: 0.0,
            ..SimConfig::default()
        };
        let sim = Simulation::new(random_population(n, density, seed)?, config)?;
        Ok(Demo { sim, engine, seed })
    }

    /// Advances `count` steps and returns the number of edge changes.
    pub fn step(&mut self, count: u32) -> Result<u32, JsError> {
        let mut changes = 0;
        for _ in 0..count {
            changes += self.sim.step(self.engine.as_mut())?.edge_changes() as u32;
        }
        Ok(changes)
    }

    pub fn steps(&self) -> u64 {
        self.sim.steps_taken()
    }

    pub fn opinions(&self) -> Vec<f64> {
        self.sim.graph().users().iter().map(|u| u.opinion.get()).collect()
    }

    /// Edges as a flat `[source, target, ...]` array.
    pub fn edges(&self) -> Vec<u32> {
        self.sim.graph().edges().flat_map(|(a, b)| [a.0, b.0]).collect()
    }

    /// Community per user from a fresh detection.
    pub fn communities(&self) -> Vec<u32> {
        let mut rng = SimRng::seed_from_u64(self.seed);
        match detect_communities(self.sim.graph(), &mut rng) {
            Ok(p) => p.assignment().iter().map(|&c| c as u32).collect(),
            Err(_) => vec![0; self.sim.graph().len()],
        }
    }

    /// NaN when the graph has no edges.
    pub fn modularity(&self) -> f64 {
        let mut rng = SimRng::seed_from_u64(self.seed);
        detect_communities(self.sim.graph(), &mut rng)
            .and_then(|p| modularity_of(self.sim.graph(), &p))
            .unwrap_or(f64::NAN)
    }
}

/// Runs the tolerant parser and returns the result as JSON.
#[wasm_bindgen]
pub fn parse(raw: &str, kind: &str) -> Result<String, JsError> {
    let kind = match kind {
        "stance" => ResponseKind::Stance,
        "influence" => ResponseKind::Influence,
        "compatibility" => ResponseKind::Compatibility,
        "generated" => ResponseKind::Generated,
        other => return Err(JsError::new(&format!("unknown response kind {other:?}"))),
    };
    Ok(serde_json::to_string(&parse_response(raw, kind))?)
}
