use std::io::Write;
use std::path::{Path, PathBuf};

use echosim::ingest::{attach_labels, build_network_with_follows, ground_truth_labels, load_follow_edges, load_records};
use echosim::SocialGraph;
use serde::{Deserialize, Serialize};

use super::{write_json, write_with};
use crate::{CliError, RunManifest};

/// The graph snapshot written by `ingest` and read by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub command: String,
    pub input: PathBuf,
    pub follows: Option<PathBuf>,
    pub config: Vec<String>,
    pub names: Vec<String>,
    pub rejected_lines: usize,
    pub graph: SocialGraph,
}

impl GraphFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{} is not a graph file: {e}", path.display())))
    }
}

pub fn run(input: &Path, follows: Option<&Path>, manifest: &RunManifest, out: &Path) -> Result<(), CliError> {
    let invalid = |e: echosim::ingest::IngestError| CliError::Invalid(e.to_string());
    let loaded = load_records(input).map_err(invalid)?;
    let follow_pairs = match follows {
        Some(path) => load_follow_edges(path).map_err(invalid)?,
        None => Vec::new(),
    };
    let mut network = build_network_with_follows(&loaded.records, &follow_pairs, &manifest.ingest).map_err(invalid)?;
    let labels = ground_truth_labels(&loaded.records, &network.names);
    attach_labels(&mut network.graph, &labels).map_err(|e| CliError::Invalid(e.to_string()))?;

    let rejects_path = out.join("rejects.jsonl");
    write_with(&rejects_path, |w| {
        for reject in &loaded.rejects {
            serde_json::to_writer(&mut *w, reject)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;

    let file = GraphFile {
        command: "ingest".into(),
        input: input.to_path_buf(),
        follows: follows.map(Path::to_path_buf),
        config: manifest.echo(),
        names: network.names,
        rejected_lines: loaded.rejects.len(),
        graph: network.graph,
    };
    write_json(&out.join("graph.json"), &file)?;
    eprintln!(
        "ingested {} records ({} rejected): {} users, {} edges",
        loaded.records.len(),
        loaded.rejects.len(),
        file.graph.len(),
        file.graph.edge_count()
    );
    Ok(())
}
