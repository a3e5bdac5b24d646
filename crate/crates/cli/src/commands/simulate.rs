use std::io::Write;
use std::path::Path;

use echosim::engine::{EngineKind, EquationEngine, OpinionEngine};
use echosim::llm::{EndpointConfig, HttpTransport, LlmEngine, LlmSettings, ResponseCache, RetryPolicy};
use echosim::metrics::MetricsReport;
use echosim::report::MetricSeries;
use echosim::simulation::{run_with, StopReason};
use echosim::{SimRng, SocialGraph};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::ingest::GraphFile;
use super::{output_error, write_json, write_with};
use crate::{CliError, RunManifest};

/// Per-seed outcome, written as `summary_seed<s>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub engine: EngineKind,
    pub steps: u64,
    pub stopped_reason: StopReason,
    pub error: Option<String>,
    pub fallback_count: u64,
    pub failed_parse_fraction: f64,
    pub initial_edges: usize,
    pub final_edges: usize,
}

/// Metrics at `step`. The metric RNG stream depends only on seed and step.
pub fn measure(graph: &SocialGraph, seed: u64, step: u64) -> MetricsReport {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(step);
    MetricsReport::measure(graph, step, &mut rng)
}

fn settings(manifest: &RunManifest, seed: u64) -> LlmSettings {
    LlmSettings {
        model: manifest.llm.model.clone(),
        generate_temperature: manifest.llm.generate_temperature,
        max_tokens: manifest.llm.max_tokens,
        context_window: manifest.llm.context_window,
        compat_memo: manifest.llm.compat_memo,
        seed_slot: seed,
        ..LlmSettings::default()
    }
}

fn build_engine(manifest: &RunManifest, seed: u64, out: &Path) -> Result<Box<dyn OpinionEngine>, CliError> {
    let params = manifest.sim.params;
    Ok(match manifest.sim.engine {
        EngineKind::Equation => Box::new(EquationEngine::new(params)),
        EngineKind::Mock => Box::new(LlmEngine::mock(params, settings(manifest, seed))),
        EngineKind::Llm => {
            let url = manifest.llm.url.clone().ok_or_else(|| {
                CliError::Invalid("engine = llm needs llm_url in the config or ECHOSIM_LLM_URL".into())
            })?;
            let endpoint = EndpointConfig {
                url,
                api_key: std::env::var("ECHOSIM_LLM_KEY").ok().filter(|s| !s.is_empty()),
                model: manifest.llm.model.clone(),
            };
            let retry = RetryPolicy { max_attempts: manifest.llm.max_attempts, ..RetryPolicy::default() };
            let cache_path = manifest.llm.cache.clone().unwrap_or_else(|| out.join("llm_cache.jsonl"));
            let cache = ResponseCache::open(&cache_path).map_err(|e| CliError::Invalid(format!("{}: {e}", cache_path.display())))?;
            Box::new(LlmEngine::new(HttpTransport::new(endpoint, retry), cache, settings(manifest, seed), params))
        }
    })
}

/// Runs one seed, streaming its event log and writing its metric series and
/// summary. Engine failures end up in the summary; only I/O failures are
/// returned as errors.
pub fn run_seed(
    initial: &SocialGraph,
    manifest: &RunManifest,
    seed: u64,
    header: &[String],
    out: &Path,
) -> Result<SeedSummary, CliError> {
    let mut engine = build_engine(manifest, seed, out)?;
    let mut config = manifest.sim.clone();
    config.seed = seed;
    let every = manifest.checkpoint_every;

    let events_path = out.join(format!("events_seed{seed}.jsonl"));
    let mut rows = Vec::new();
    let mut write_error = None;
    let result = {
        let file = std::fs::File::create(&events_path).map_err(|e| output_error(&events_path, e))?;
        let mut events = std::io::BufWriter::new(file);
        let result = run_with(initial.clone(), config, engine.as_mut(), |event, graph| {
            if write_error.is_none() {
                let written = serde_json::to_writer(&mut events, event)
                    .map_err(std::io::Error::from)
                    .and_then(|_| events.write_all(b"\n"));
                if let Err(e) = written {
                    write_error = Some(e);
                }
            }
            if event.step % every == 0 {
                rows.push(measure(graph, seed, event.step));
            }
        })
        .map_err(|e| CliError::Invalid(e.to_string()))?;
        if let Err(e) = events.flush() {
            write_error.get_or_insert(e);
        }
        result
    };
    if let Some(e) = write_error {
        return Err(output_error(&events_path, e));
    }
    let last = result.events.last().map_or(0, |e| e.step);
    if rows.last().map(|r| r.step) != Some(last) {
        rows.push(measure(&result.final_graph, seed, last));
    }

    let mut series_header = header.to_vec();
    series_header.push(format!("seed = {seed}"));
    let series = MetricSeries { header: series_header, rows };
    let series_path = out.join(format!("metrics_seed{seed}.csv"));
    write_with(&series_path, |w| series.write(w))?;
    write_json(&out.join(format!("graph_seed{seed}.json")), &result.final_graph)?;

    let summary = SeedSummary {
        seed,
        engine: manifest.sim.engine,
        steps: last,
        stopped_reason: result.stopped_reason,
        error: result.error,
        fallback_count: result.fallback_count,
        failed_parse_fraction: result.failed_parse_fraction,
        initial_edges: initial.edge_count(),
        final_edges: result.final_graph.edge_count(),
    };
    write_json(&out.join(format!("summary_seed{seed}.json")), &summary)?;
    Ok(summary)
}

pub fn run(graph_path: &Path, manifest: &RunManifest, out: &Path) -> Result<(), CliError> {
    let file = GraphFile::load(graph_path)?;
    let manifest = RunManifest { llm: manifest.llm.clone().with_env(), ..manifest.clone() };
    if manifest.sim.engine == EngineKind::Llm && manifest.llm.url.is_none() {
        return Err(CliError::Invalid("engine = llm needs llm_url in the config or ECHOSIM_LLM_URL".into()));
    }

    let command = [format!("echosim simulate {}", graph_path.display())];
    let echo = manifest.echo();
    // manifest.txt doubles as a --config file for the rerun.
    write_with(&out.join("manifest.txt"), |w| {
        writeln!(w, "# {}", command[0])?;
        echo.iter().try_for_each(|line| writeln!(w, "{line}"))
    })?;
    let header: Vec<String> = command.into_iter().chain(echo).collect();

    // The live engine shares one cache file, so its seeds run one at a time.
    let outcomes: Vec<Result<SeedSummary, CliError>> = if manifest.sim.engine == EngineKind::Llm {
        manifest.seeds.iter().map(|&s| run_seed(&file.graph, &manifest, s, &header, out)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = manifest
                .seeds
                .iter()
                .map(|&s| {
                    let (graph, manifest, header) = (&file.graph, &manifest, &header);
                    scope.spawn(move || run_seed(graph, manifest, s, header, out))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("seed thread panicked")).collect()
        })
    };

    let mut failures = Vec::new();
    for (seed, outcome) in manifest.seeds.iter().zip(outcomes) {
        match outcome {
            Ok(summary) => {
                eprintln!(
                    "seed {seed}: {} steps, {:?}, {} fallbacks",
                    summary.steps, summary.stopped_reason, summary.fallback_count
                );
                if let Some(e) = summary.error {
                    failures.push(format!("seed {seed}: {e}"));
                }
            }
            Err(CliError::Invalid(e)) => return Err(CliError::Invalid(e)),
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(failures.join("; ")))
    }
}
