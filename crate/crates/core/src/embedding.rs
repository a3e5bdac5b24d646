//! Clustering of ingested embedding vectors and cluster-quality statistics.
//!
//! All distances are Euclidean on L2-normalized vectors.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SimRng;

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_MAX_ITERS: usize = 300;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("vector {index} has dimension {got}, expected {expected}")]
    Dim { index: usize, expected: usize, got: usize },
    #[error("dimension must be at least 2, got {0}")]
    TooFewDims(usize),
    #[error("vector {0} has a non-finite entry")]
    NonFinite(usize),
    #[error("{vectors} vectors but {ids} ids")]
    Length { vectors: usize, ids: usize },
    #[error("{points} points cannot fill {k} clusters")]
    TooFewPoints { points: usize, k: usize },
    #[error("{0}")]
    Undefined(&'static str),
    #[error("assignment does not fit this set: {0}")]
    Assignment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    Real,
    Simulated,
}

impl FromStr for EmbeddingSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "real" => Ok(EmbeddingSource::Real),
            "simulated" => Ok(EmbeddingSource::Simulated),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingSource::Real => "real",
            EmbeddingSource::Simulated => "simulated",
        })
    }
}

/// Vectors as read, plus their L2-normalized copies. A zero vector stays zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    vectors: Vec<Vec<f64>>,
    normalized: Vec<Vec<f64>>,
    ids: Vec<String>,
    source: EmbeddingSource,
    dim: usize,
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared(a, b).sqrt()
}

fn squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl EmbeddingSet {
    pub fn new(vectors: Vec<Vec<f64>>, ids: Vec<String>, source: EmbeddingSource) -> Result<Self, EmbeddingError> {
        if vectors.len() != ids.len() {
            return Err(EmbeddingError::Length { vectors: vectors.len(), ids: ids.len() });
        }
        let dim = vectors.first().map_or(2, Vec::len);
        if dim < 2 {
            return Err(EmbeddingError::TooFewDims(dim));
        }
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(EmbeddingError::Dim { index, expected: dim, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite(index));
            }
        }
        let normalized = vectors.iter().map(|v| normalize(v)).collect();
        Ok(EmbeddingSet { vectors, normalized, ids, source, dim })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn normalized(&self) -> &[Vec<f64>] {
        &self.normalized
    }

    /// Reads `dim=<d> source=<real|simulated>` followed by `id,f1,...,fd`
    /// lines. Blank lines are ignored.
    pub fn read(reader: impl BufRead) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines().enumerate();
        let (dim, source) = loop {
            let Some((i, line)) = lines.next() else {
                return Err(EmbeddingError::Format { line: 1, message: "missing header".into() });
            };
            let line = line?;
            if !line.trim().is_empty() {
                break parse_header(&line).map_err(|message| EmbeddingError::Format { line: i + 1, message })?;
            }
        };
        let mut vectors = Vec::new();
        let mut ids = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| EmbeddingError::Format { line: i + 1, message };
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default().trim();
            if id.is_empty() {
                return Err(bad("empty post id".into()));
            }
            let values = fields
                .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<f64>, _>>()?;
            if values.len() != dim {
                return Err(bad(format!("{} values, header says dim={dim}", values.len())));
            }
            ids.push(id.to_string());
            vectors.push(values);
        }
        if vectors.is_empty() {
            if dim < 2 {
                return Err(EmbeddingError::TooFewDims(dim));
            }
            return Ok(EmbeddingSet { vectors, normalized: Vec::new(), ids, source, dim });
        }
        EmbeddingSet::new(vectors, ids, source)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "dim={} source={}", self.dim, self.source)?;
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            write!(out, "{id}")?;
            for x in v {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn parse_header(line: &str) -> Result<(usize, EmbeddingSource), String> {
    let mut dim = None;
    let mut source = None;
    for token in line.split_whitespace() {
        match token.split_once('=') {
            Some(("dim", d)) => dim = Some(d.parse::<usize>().map_err(|e| format!("dim {d:?}: {e}"))?),
            Some(("source", s)) => source = Some(s.parse()?),
            _ => return Err(format!("unexpected header token {token:?}")),
        }
    }
    match (dim, source) {
        (Some(d), Some(s)) => Ok((d, s)),
        _ => Err("header needs dim=<d> and source=<real|simulated>".into()),
    }
}

/// Labels and centroids in normalized space. `inertia_history[i]` is the
/// within-cluster sum of squares after the i-th assignment step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia_history: Vec<f64>,
}

impl ClusterAssignment {
    /// Builds an assignment from labels, with centroids as cluster means.
    pub fn from_labels(set: &EmbeddingSet, labels: Vec<usize>) -> Result<Self, EmbeddingError> {
        if labels.len() != set.len() {
            return Err(EmbeddingError::Assignment(format!("{} labels for {} points", labels.len(), set.len())));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let centroids = centroids(set.normalized(), &labels, k, set.dim());
        let assignment = ClusterAssignment { labels, centroids, inertia_history: Vec::new() };
        assignment.check(set)?;
        Ok(assignment)
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    fn check(&self, set: &EmbeddingSet) -> Result<(), EmbeddingError> {
        if self.labels.len() != set.len() {
            return Err(EmbeddingError::Assignment(format!("{} labels for {} points", self.labels.len(), set.len())));
        }
        if self.k() < 2 {
            return Err(EmbeddingError::Undefined("cluster statistics need k >= 2"));
        }
        if let Some(c) = self.sizes().iter().position(|&s| s == 0) {
            return Err(EmbeddingError::Assignment(format!("cluster {c} is empty")));
        }
        Ok(())
    }
}

fn centroids(points: &[Vec<f64>], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    sums
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.gen_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| squared(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = d2.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            if d2[pick] == 0.0 {
                // Rounding ran past the last positive weight.
                pick = d2.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            let free: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// Fills every empty cluster with the point farthest from its centroid in
/// the currently largest cluster.
fn repair_empty(points: &[Vec<f64>], labels: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).expect("k >= 1");
        let victim = (0..points.len())
            .filter(|&i| labels[i] == largest)
            .max_by(|&a, &b| {
                squared(&points[a], &centroids[largest])
                    .total_cmp(&squared(&points[b], &centroids[largest]))
                    .then(b.cmp(&a))
            })
            .expect("largest cluster is non-empty");
        labels[victim] = empty;
        centroids[empty] = points[victim].clone();
    }
}

fn inertia(points: &[Vec<f64>], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| squared(p, &centroids[l])).sum()
}

/// Lloyd iterations from k-means++ seeds on the normalized vectors.
pub fn kmeans(set: &EmbeddingSet, k: usize, rng: &mut SimRng, max_iters: usize) -> Result<ClusterAssignment, EmbeddingError> {
    if k < 2 {
        return Err(EmbeddingError::Undefined("k-means needs k >= 2"));
    }
    if set.len() < k {
        return Err(EmbeddingError::TooFewPoints { points: set.len(), k });
    }
    let points = set.normalized();
    let mut centroids = seed_centroids(points, k, rng);
    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        repair_empty(points, &mut next, &mut centroids);
        history.push(inertia(points, &next, &centroids));
        let unchanged = next == labels;
        labels = next;
        if unchanged {
            break;
        }
        centroids = self::centroids(points, &labels, k, set.dim());
    }
    Ok(ClusterAssignment { labels, centroids, inertia_history: history })
}

/// Mean silhouette over points. A point alone in its cluster scores 0, as
/// does a point with `a = b = 0`.
pub fn silhouette(set: &EmbeddingSet, assignment: &ClusterAssignment) -> Result<f64, EmbeddingError> {
    assignment.check(set)?;
    let points = set.normalized();
    let k = assignment.k();
    let sizes = assignment.sizes();
    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        let own = assignment.labels[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (j, q) in points.iter().enumerate() {
            if j != i {
                sums[assignment.labels[j]] += distance(p, q);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k).filter(|&c| c != own).map(|c| sums[c] / sizes[c] as f64).fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDistances {
    pub intra: f64,
    pub inter: f64,
}

/// `intra`: mean over clusters of the mean pairwise distance inside the
/// cluster (singletons give 0). `inter`: mean pairwise distance between
/// centroids.
pub fn cluster_distances(set: &EmbeddingSet, assignment: &ClusterAssignment) -> Result<ClusterDistances, EmbeddingError> {
    assignment.check(set)?;
    let points = set.normalized();
    let k = assignment.k();
    let mut members = vec![Vec::new(); k];
    for (i, &l) in assignment.labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut intra = 0.0;
    for group in &members {
        if group.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        for (x, &i) in group.iter().enumerate() {
            for &j in &group[x + 1..] {
                sum += distance(&points[i], &points[j]);
            }
        }
        intra += sum / (group.len() * (group.len() - 1) / 2) as f64;
    }
    intra /= k as f64;
    let mut inter = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            inter += distance(&assignment.centroids[a], &assignment.centroids[b]);
        }
    }
    inter /= (k * (k - 1) / 2) as f64;
    Ok(ClusterDistances { intra, inter })
}
