//! Seeded synthetic populations, tweet records and embedding sets.

use rand::distributions::WeightedIndex;
use rand::prelude::*;

use crate::embedding::{EmbeddingSet, EmbeddingSource};
use crate::graph::{GraphError, Post, SocialGraph, UserId, UserState};
use crate::ingest::RawRecord;
use crate::opinion::{Opinion, StanceLabel};
use crate::SimRng;

/// `n` users with opinions uniform in `[-1, 1]`, one seed post each, and
/// `round(density · n(n-1))` directed edges drawn uniformly without
/// replacement.
pub fn random_population(n: usize, density: f64, seed: u64) -> Result<SocialGraph, GraphError> {
    let mut rng = SimRng::seed_from_u64(seed);
    let users: Vec<UserState> = (0..n as u32)
        .map(|k| {
            let id = UserId(k);
            let mut user = UserState::new(id, Opinion::new(rng.gen_range(-1.0..=1.0)));
            user.history.push(Post::observed(id, "initial post", user.opinion).expect("non-empty text"));
            user
        })
        .collect();
    let pairs = n * n.saturating_sub(1);
    let m = ((density.clamp(0.0, 1.0) * pairs as f64).round() as usize).min(pairs);
    let mut graph = SocialGraph::new(users)?;
    if m > 0 {
        for flat in rand::seq::index::sample(&mut rng, pairs, m) {
            let source = flat / (n - 1);
            let mut target = flat % (n - 1);
            if target >= source {
                target += 1;
            }
            graph.add_edge(UserId(source as u32), UserId(target as u32))?;
        }
    }
    Ok(graph)
}

const FAVOR_LINES: &[&str] = &[
    "Got my shot today, zero regrets",
    "The data on this is clear and it works",
    "Protect your family, get vaccinated",
    "Grateful for the scientists behind this",
];
const NEUTRAL_LINES: &[&str] = &[
    "Still reading up before I decide",
    "Interesting thread on trial results",
    "Clinic hours changed again this week",
    "Anyone know where the new center opened",
];
const OPPOSE_LINES: &[&str] = &[
    "Not taking it, my body my choice",
    "Too rushed, nobody knows the long term effects",
    "Mandates are going too far",
    "Why are the side effects never reported",
];

fn line_for(label: StanceLabel, rng: &mut SimRng) -> &'static str {
    let lines = match label {
        StanceLabel::Favor => FAVOR_LINES,
        StanceLabel::Neutral => NEUTRAL_LINES,
        StanceLabel::Oppose => OPPOSE_LINES,
    };
    lines[rng.gen_range(0..lines.len())]
}

/// Tweet-like records from `users` accounts split into three stance camps.
/// Activity is heavy-tailed; retweets stay mostly inside a camp.
pub fn tweet_records(count: usize, users: usize, seed: u64) -> Vec<RawRecord> {
    let mut rng = SimRng::seed_from_u64(seed);
    let camps: Vec<StanceLabel> = (0..users)
        .map(|_| match rng.gen_range(0..10) {
            0..=3 => StanceLabel::Favor,
            4..=5 => StanceLabel::Neutral,
            _ => StanceLabel::Oppose,
        })
        .collect();
    let activity: Vec<f64> = (0..users).map(|rank| 1.0 / (rank as f64 + 5.0)).collect();
    let pick = WeightedIndex::new(&activity).expect("positive weights");
    let name = |u: usize| format!("u{u:04}");

    let mut records = Vec::with_capacity(count);
    let mut ts: i64 = 1_640_995_200;
    for _ in 0..count {
        ts += rng.gen_range(1..120);
        let author = pick.sample(&mut rng);
        let label = if rng.gen_bool(0.8) {
            camps[author]
        } else {
            [StanceLabel::Favor, StanceLabel::Neutral, StanceLabel::Oppose][rng.gen_range(0..3)]
        };
        let rt_user = if rng.gen_bool(0.5) {
            let mut other = pick.sample(&mut rng);
            for _ in 0..20 {
                if other != author && (camps[other] == camps[author] || rng.gen_bool(0.15)) {
                    break;
                }
                other = pick.sample(&mut rng);
            }
            (other != author).then(|| name(other))
        } else {
            None
        };
        let text = match &rt_user {
            Some(src) => format!("RT @{src}: {}", line_for(label, &mut rng)),
            None => line_for(label, &mut rng).to_string(),
        };
        records.push(RawRecord { user: name(author), ts, text, stance: label, rt_user });
    }
    records
}

/// `per_cluster` points around each of `centers`, with Gaussian-ish noise of
/// the given spread.
pub fn embedding_blobs(centers: &[Vec<f64>], per_cluster: usize, spread: f64, source: EmbeddingSource, seed: u64) -> EmbeddingSet {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut vectors = Vec::new();
    let mut ids = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for k in 0..per_cluster {
            // Sum of uniforms: cheap, bounded, roughly normal.
            let v = center
                .iter()
                .map(|x| x + spread * ((0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() / 2.0))
                .collect();
            vectors.push(v);
            ids.push(format!("c{c}-{k}"));
        }
    }
    EmbeddingSet::new(vectors, ids, source).expect("generated vectors are well-formed")
}
