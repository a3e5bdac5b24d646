//! Loading post records and building the initial network from the most
//! active users and their retweets.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, Post, SocialGraph, UserId, UserState};
use crate::opinion::{Opinion, StanceLabel};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{rejected} of {total} lines rejected; the input does not look like post records")]
    Format { rejected: usize, total: usize },
    #[error("only {kept} user(s) kept; at least 2 are needed")]
    TooSmall { kept: usize },
    #[error("{path} line {line}: expected \"follower,followee\", got {content:?}")]
    EdgeLine { path: PathBuf, line: usize, content: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub user: String,
    pub ts: i64,
    pub text: String,
    pub stance: StanceLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt_user: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number.
    pub line: usize,
    pub error: String,
    pub content: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadedRecords {
    pub records: Vec<RawRecord>,
    pub rejects: Vec<Reject>,
}

fn check(record: &RawRecord) -> Result<(), String> {
    if record.user.trim().is_empty() {
        return Err("empty user".into());
    }
    if record.text.trim().is_empty() {
        return Err("empty text".into());
    }
    if record.rt_user.as_deref().is_some_and(|u| u.trim().is_empty()) {
        return Err("empty rt_user".into());
    }
    Ok(())
}

/// Parses JSON Lines. Blank lines are skipped; every other line is either a
/// record or a reject.
pub fn parse_records(reader: impl BufRead) -> Result<LoadedRecords, std::io::Error> {
    let mut loaded = LoadedRecords::default();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawRecord>(&line).map_err(|e| e.to_string()).and_then(|r| check(&r).map(|_| r));
        match parsed {
            Ok(record) => loaded.records.push(record),
            Err(error) => loaded.rejects.push(Reject { line: k + 1, error, content: line }),
        }
    }
    Ok(loaded)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<LoadedRecords, IngestError> {
    let path = path.as_ref();
    let io = |source| IngestError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io)?;
    let loaded = parse_records(BufReader::new(file)).map_err(io)?;
    let total = loaded.records.len() + loaded.rejects.len();
    if loaded.rejects.len() * 2 > total {
        return Err(IngestError::Format { rejected: loaded.rejects.len(), total });
    }
    Ok(loaded)
}

/// Reads `follower,followee` pairs, one per line. `#` starts a comment.
pub fn load_follow_edges(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut pairs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once(',') {
            Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                pairs.push((a.trim().to_string(), b.trim().to_string()))
            }
            _ => {
                return Err(IngestError::EdgeLine { path: path.to_path_buf(), line: k + 1, content: line.to_string() })
            }
        }
    }
    Ok(pairs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub top_k_users: usize,
    pub min_posts: usize,
    pub history_cap: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { top_k_users: 500, min_posts: 0, history_cap: 10 }
    }
}

/// The built graph plus the dataset name of each user, indexed by `UserId`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub graph: SocialGraph,
    pub names: Vec<String>,
}

impl Network {
    pub fn id_of(&self, name: &str) -> Option<UserId> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok().map(|k| UserId(k as u32))
    }
}

/// Users ranked by post count (ties by name), cut to `top_k_users` with at
/// least `min_posts` posts, returned in name order.
pub fn kept_users(records: &[RawRecord], config: &IngestConfig) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.user.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut kept: Vec<String> = ranked
        .into_iter()
        .filter(|(_, c)| *c >= config.min_posts)
        .take(config.top_k_users)
        .map(|(u, _)| u.to_string())
        .collect();
    kept.sort();
    kept
}

pub fn build_network(records: &[RawRecord], config: &IngestConfig) -> Result<Network, IngestError> {
    build_network_with_follows(records, &[], config)
}

/// Like [`build_network`], with extra `(follower, followee)` pairs unioned in.
pub fn build_network_with_follows(
    records: &[RawRecord],
    follows: &[(String, String)],
    config: &IngestConfig,
) -> Result<Network, IngestError> {
    let names = kept_users(records, config);
    if names.len() < 2 {
        return Err(IngestError::TooSmall { kept: names.len() });
    }
    let index: HashMap<&str, UserId> = names.iter().enumerate().map(|(k, n)| (n.as_str(), UserId(k as u32))).collect();

    let mut by_user: Vec<Vec<&RawRecord>> = vec![Vec::new(); names.len()];
    for r in records {
        if let Some(id) = index.get(r.user.as_str()) {
            by_user[id.index()].push(r);
        }
    }
    let mut users = Vec::with_capacity(names.len());
    for (k, posts) in by_user.iter_mut().enumerate() {
        let id = UserId(k as u32);
        posts.sort_by_key(|r| r.ts);
        let start = posts.len().saturating_sub(config.history_cap);
        let history: Vec<Post> = posts[start..]
            .iter()
            .map(|r| Post::observed(id, r.text.clone(), Opinion::new(r.stance.value())))
            .collect::<Result<_, _>>()?;
        let mean = if history.is_empty() {
            0.0
        } else {
            posts[start..].iter().map(|r| r.stance.value()).sum::<f64>() / history.len() as f64
        };
        let mut user = UserState::new(id, Opinion::new(mean));
        user.history = history;
        users.push(user);
    }

    let mut graph = SocialGraph::new(users)?;
    for r in records {
        let (Some(&reader), Some(source)) = (index.get(r.user.as_str()), r.rt_user.as_deref()) else {
            continue;
        };
        if let Some(&source) = index.get(source) {
            if source != reader {
                graph.add_edge(source, reader)?;
            }
        }
    }
    for (follower, followee) in follows {
        if let (Some(&reader), Some(&source)) = (index.get(follower.as_str()), index.get(followee.as_str())) {
            if source != reader {
                graph.add_edge(source, reader)?;
            }
        }
    }
    Ok(Network { graph, names })
}

/// Majority label over all of each kept user's records; ties go to neutral.
pub fn ground_truth_labels(records: &[RawRecord], kept: &[String]) -> BTreeMap<UserId, StanceLabel> {
    let index: HashMap<&str, usize> = kept.iter().enumerate().map(|(k, n)| (n.as_str(), k)).collect();
    let mut tallies = vec![[0usize; 3]; kept.len()];
    for r in records {
        if let Some(&k) = index.get(r.user.as_str()) {
            let slot = match r.stance {
                StanceLabel::Favor => 0,
                StanceLabel::Neutral => 1,
                StanceLabel::Oppose => 2,
            };
            tallies[k][slot] += 1;
        }
    }
    let mut labels = BTreeMap::new();
    for (k, [favor, neutral, oppose]) in tallies.into_iter().enumerate() {
        if favor + neutral + oppose == 0 {
            continue;
        }
        let label = if favor > neutral && favor > oppose {
            StanceLabel::Favor
        } else if oppose > neutral && oppose > favor {
            StanceLabel::Oppose
        } else {
            StanceLabel::Neutral
        };
        labels.insert(UserId(k as u32), label);
    }
    labels
}

/// Copies labels onto the users' `ground_truth` fields.
pub fn attach_labels(graph: &mut SocialGraph, labels: &BTreeMap<UserId, StanceLabel>) -> Result<(), GraphError> {
    for (&id, &label) in labels {
        graph.user_mut(id)?.ground_truth = Some(label);
    }
    Ok(())
}
