//! Directed social graph, users, posts and the per-step screen.
//!
//! An edge `(j, i)` means `i` follows `j`: `j` is in `N_i` and `i` receives
//! `j`'s posts.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opinion::{Opinion, StanceLabel};
use crate::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl UserId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "user{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown user {0}")]
    NotFound(UserId),
    #[error("self-loop on {0}")]
    SelfLoop(UserId),
    #[error("user table out of order: slot {slot} holds {found}")]
    MisnumberedUser { slot: usize, found: UserId },
    #[error("post text is empty")]
    EmptyPost,
    #[error("history of {0} is not ordered by step")]
    UnorderedHistory(UserId),
}

/// Where a post came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostOrigin {
    /// Ingested from a dataset (or a synthetic seed); always at step 0.
    Observed,
    Simulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub author: UserId,
    pub step: u64,
    pub origin: PostOrigin,
    pub text: String,
    pub stance: Opinion,
}

impl Post {
    pub fn simulated(author: UserId, step: u64, text: impl Into<String>, stance: Opinion) -> Result<Self, GraphError> {
        Self::build(author, step, PostOrigin::Simulated, text.into(), stance)
    }

    pub fn observed(author: UserId, text: impl Into<String>, stance: Opinion) -> Result<Self, GraphError> {
        Self::build(author, 0, PostOrigin::Observed, text.into(), stance)
    }

    fn build(author: UserId, step: u64, origin: PostOrigin, text: String, stance: Opinion) -> Result<Self, GraphError> {
        if text.trim().is_empty() {
            return Err(GraphError::EmptyPost);
        }
        Ok(Post { author, step, origin, text, stance })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub id: UserId,
    pub opinion: Opinion,
    /// Every post the user authored, oldest first.
    pub history: Vec<Post>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<StanceLabel>,
}

impl UserState {
    pub fn new(id: UserId, opinion: Opinion) -> Self {
        UserState { id, opinion, history: Vec::new(), ground_truth: None }
    }

    pub fn latest_post(&self) -> Option<&Post> {
        self.history.last()
    }
}

/// The last `min(window, |history|)` posts, most recent last.
pub fn recent_context(user: &UserState, window: usize) -> &[Post] {
    let start = user.history.len().saturating_sub(window);
    &user.history[start..]
}

/// Directed graph over a dense user table (`UserId(k)` lives in slot `k`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct SocialGraph {
    users: Vec<UserState>,
    incoming: Vec<BTreeSet<UserId>>,
    outgoing: Vec<BTreeSet<UserId>>,
    edge_count: usize,
}

impl SocialGraph {
    pub fn new(users: Vec<UserState>) -> Result<Self, GraphError> {
        for (slot, user) in users.iter().enumerate() {
            if user.id.index() != slot {
                return Err(GraphError::MisnumberedUser { slot, found: user.id });
            }
            if user.history.windows(2).any(|w| w[0].step > w[1].step) {
                return Err(GraphError::UnorderedHistory(user.id));
            }
        }
        let n = users.len();
        Ok(SocialGraph {
            users,
            incoming: vec![BTreeSet::new(); n],
            outgoing: vec![BTreeSet::new(); n],
            edge_count: 0,
        })
    }

    /// Builds a graph from users and `(source, target)` pairs. Duplicates are merged.
    pub fn with_edges(users: Vec<UserState>, edges: impl IntoIterator<Item = (UserId, UserId)>) -> Result<Self, GraphError> {
        let mut graph = Self::new(users)?;
        for (source, target) in edges {
            graph.add_edge(source, target)?;
        }
        Ok(graph)
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    pub fn user_ids(&self) -> impl Iterator<Item = UserId> + '_ {
        (0..self.users.len() as u32).map(UserId)
    }

    pub fn contains(&self, id: UserId) -> bool {
        id.index() < self.users.len()
    }

    fn check(&self, id: UserId) -> Result<(), GraphError> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(GraphError::NotFound(id))
        }
    }

    pub fn user(&self, id: UserId) -> Result<&UserState, GraphError> {
        self.users.get(id.index()).ok_or(GraphError::NotFound(id))
    }

    pub fn user_mut(&mut self, id: UserId) -> Result<&mut UserState, GraphError> {
        self.users.get_mut(id.index()).ok_or(GraphError::NotFound(id))
    }

    pub fn set_opinion(&mut self, id: UserId, opinion: Opinion) -> Result<(), GraphError> {
        self.user_mut(id)?.opinion = opinion;
        Ok(())
    }

    /// Appends to the author's history, keeping it ordered by step.
    pub fn push_post(&mut self, post: Post) -> Result<(), GraphError> {
        let user = self.user_mut(post.author)?;
        if user.history.last().is_some_and(|last| last.step > post.step) {
            return Err(GraphError::UnorderedHistory(post.author));
        }
        user.history.push(post);
        Ok(())
    }

    /// `N_i`: every `j` with an edge `(j, i)`.
    pub fn neighbors_in(&self, id: UserId) -> Result<&BTreeSet<UserId>, GraphError> {
        self.incoming.get(id.index()).ok_or(GraphError::NotFound(id))
    }

    /// Users that receive `id`'s posts.
    pub fn followers(&self, id: UserId) -> Result<&BTreeSet<UserId>, GraphError> {
        self.outgoing.get(id.index()).ok_or(GraphError::NotFound(id))
    }

    pub fn has_edge(&self, source: UserId, target: UserId) -> bool {
        self.incoming.get(target.index()).is_some_and(|s| s.contains(&source))
    }

    /// Returns `false` when the edge already existed.
    pub fn add_edge(&mut self, source: UserId, target: UserId) -> Result<bool, GraphError> {
        self.check(source)?;
        self.check(target)?;
        if source == target {
            return Err(GraphError::SelfLoop(source));
        }
        let inserted = self.incoming[target.index()].insert(source);
        if inserted {
            self.outgoing[source.index()].insert(target);
            self.edge_count += 1;
        }
        Ok(inserted)
    }

    /// Returns `false` when there was no such edge.
    pub fn remove_edge(&mut self, source: UserId, target: UserId) -> Result<bool, GraphError> {
        self.check(source)?;
        self.check(target)?;
        let removed = self.incoming[target.index()].remove(&source);
        if removed {
            self.outgoing[source.index()].remove(&target);
            self.edge_count -= 1;
        }
        Ok(removed)
    }

    /// All edges as `(source, target)`, sorted by target then source.
    pub fn edges(&self) -> impl Iterator<Item = (UserId, UserId)> + '_ {
        self.incoming
            .iter()
            .enumerate()
            .flat_map(|(t, sources)| sources.iter().map(move |&s| (s, UserId(t as u32))))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    users: Vec<UserState>,
    edges: Vec<(UserId, UserId)>,
}

impl TryFrom<GraphRecord> for SocialGraph {
    type Error = GraphError;

    fn try_from(record: GraphRecord) -> Result<Self, Self::Error> {
        SocialGraph::with_edges(record.users, record.edges)
    }
}

impl From<SocialGraph> for GraphRecord {
    fn from(graph: SocialGraph) -> Self {
        let edges = graph.edges().collect();
        GraphRecord { users: graph.users, edges }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostSource {
    Friend,
    Recommended,
}

/// What a user sees during one activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub viewer: UserId,
    pub posts: Vec<Post>,
    pub sources: Vec<PostSource>,
}

impl Screen {
    pub fn empty(viewer: UserId) -> Self {
        Screen { viewer, posts: Vec::new(), sources: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Post, PostSource)> {
        self.posts.iter().zip(self.sources.iter().copied())
    }
}

/// Number of screen slots reserved for friend posts.
pub fn friend_slots(size: usize, rec_fraction: f64) -> usize {
    let raw = (1.0 - rec_fraction.clamp(0.0, 1.0)) * size as f64;
    // (1 - 0.3) * 10 is 7.000000000000001 in binary floating point.
    ((raw - 1e-9).ceil().max(0.0) as usize).min(size)
}

/// Fills the viewer's screen: the most recent friend posts first, then the
/// latest post of uniformly sampled non-neighbors. The viewer's own posts
/// never appear.
pub fn build_screen(
    graph: &SocialGraph,
    viewer: UserId,
    size: usize,
    rec_fraction: f64,
    rng: &mut SimRng,
) -> Result<Screen, GraphError> {
    let friends = graph.neighbors_in(viewer)?;
    let mut screen = Screen::empty(viewer);
    if size == 0 {
        return Ok(screen);
    }
    let friend_slots = friend_slots(size, rec_fraction);
    let rec_slots = size - friend_slots;

    // Only the newest `friend_slots` posts of each friend can win a slot.
    let mut candidates: Vec<(u64, UserId, usize, &Post)> = Vec::new();
    for &friend in friends {
        let history = &graph.users[friend.index()].history;
        let start = history.len().saturating_sub(friend_slots);
        for (offset, post) in history[start..].iter().enumerate() {
            candidates.push((post.step, friend, start + offset, post));
        }
    }
    // Newest step first; equal steps by ascending author, then newest within an author.
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(b.2.cmp(&a.2)));
    for (_, _, _, post) in candidates.into_iter().take(friend_slots) {
        screen.posts.push(post.clone());
        screen.sources.push(PostSource::Friend);
    }

    if rec_slots > 0 {
        let pool: Vec<&UserState> = graph
            .users
            .iter()
            .filter(|u| u.id != viewer && !friends.contains(&u.id) && !u.history.is_empty())
            .collect();
        let amount = rec_slots.min(pool.len());
        if amount > 0 {
            for picked in index::sample(rng, pool.len(), amount) {
                let post = pool[picked].latest_post().expect("pool only holds users with posts");
                screen.posts.push(post.clone());
                screen.sources.push(PostSource::Recommended);
            }
        }
    }
    Ok(screen)
}
