use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use echosim::embedding::{cluster_distances, kmeans, silhouette, ClusterAssignment, EmbeddingError, EmbeddingSet};
use echosim::SimRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{write_json, write_with};
use crate::{CliError, RunManifest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetStats {
    pub file: PathBuf,
    pub points: usize,
    pub silhouette: f64,
    pub intra: f64,
    pub inter: f64,
    pub iterations: usize,
    pub cluster_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedReport {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub dim: usize,
    pub real: SetStats,
    pub simulated: SetStats,
}

fn load(path: &Path) -> Result<EmbeddingSet, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    EmbeddingSet::read(BufReader::new(file)).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn analyze(set: &EmbeddingSet, k: usize, seed: u64, max_iters: usize) -> Result<(ClusterAssignment, f64, f64, f64), EmbeddingError> {
    let assignment = kmeans(set, k, &mut SimRng::seed_from_u64(seed), max_iters)?;
    let s = silhouette(set, &assignment)?;
    let d = cluster_distances(set, &assignment)?;
    Ok((assignment, s, d.intra, d.inter))
}

fn export(path: &Path, set: &EmbeddingSet, labels: &[usize]) -> Result<(), CliError> {
    write_with(path, |w| {
        let dims: Vec<String> = (1..=set.dim()).map(|i| format!("f{i}")).collect();
        writeln!(w, "id,source,cluster,{}", dims.join(","))?;
        for ((id, v), label) in set.ids().iter().zip(set.vectors()).zip(labels) {
            let values: Vec<String> = v.iter().map(f64::to_string).collect();
            writeln!(w, "{id},{},{label},{}", set.source(), values.join(","))?;
        }
        Ok(())
    })
}

pub fn run(real_path: &Path, simulated_path: &Path, manifest: &RunManifest, out: &Path) -> Result<(), CliError> {
    if manifest.k < 2 {
        return Err(CliError::Invalid(format!("k must be at least 2, got {}", manifest.k)));
    }
    let real = load(real_path)?;
    let simulated = load(simulated_path)?;
    if real.dim() != simulated.dim() {
        return Err(CliError::Invalid(format!(
            "DimError: {} has dimension {}, {} has dimension {}",
            real_path.display(),
            real.dim(),
            simulated_path.display(),
            simulated.dim()
        )));
    }
    let seed = manifest.seeds[0];
    let stats = |set: &EmbeddingSet, path: &Path| -> Result<(SetStats, ClusterAssignment), CliError> {
        let (assignment, silhouette, intra, inter) =
            analyze(set, manifest.k, seed, manifest.max_iters).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let stats = SetStats {
            file: path.to_path_buf(),
            points: set.len(),
            silhouette,
            intra,
            inter,
            iterations: assignment.inertia_history.len(),
            cluster_sizes: assignment.sizes(),
        };
        Ok((stats, assignment))
    };
    let (real_stats, real_assignment) = stats(&real, real_path)?;
    let (sim_stats, sim_assignment) = stats(&simulated, simulated_path)?;
    export(&out.join("clusters_real.csv"), &real, &real_assignment.labels)?;
    export(&out.join("clusters_simulated.csv"), &simulated, &sim_assignment.labels)?;
    let report = EmbedReport {
        k: manifest.k,
        seed,
        max_iters: manifest.max_iters,
        dim: real.dim(),
        real: real_stats,
        simulated: sim_stats,
    };
    write_json(&out.join("embed_report.json"), &report)?;
    eprintln!(
        "silhouette real {:.4} simulated {:.4}; intra {:.4} / {:.4}; inter {:.4} / {:.4}",
        report.real.silhouette,
        report.simulated.silhouette,
        report.real.intra,
        report.simulated.intra,
        report.real.inter,
        report.simulated.inter
    );
    Ok(())
}
