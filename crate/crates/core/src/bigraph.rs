//! Directed bipartite user/content networks and their weighted projections.
//!
//! Users form one partition, posts and comments the other. A user points at
//! every content node they wrote; a content node points at every user whose
//! comment shows they read it. Commenting on a comment counts as reading both
//! the parent comment and the root post.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::distribution::{Distribution, DistributionError, DEFAULT_RATIO};
use crate::ingest::{validate_log, EventLog, ValidationReport};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("log is not validated: {0}")]
    Unvalidated(Box<ValidationReport>),
    #[error("partition has no nodes")]
    EmptyPartition,
    #[error("commons matrix has no nonzero entry")]
    NoCommons,
    #[error("no post has at least {0} comments")]
    NoQualifyingPosts(usize),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BuildMode {
    /// Comments are content nodes in their own right; replies also read the parent comment.
    #[default]
    CommentTree,
    /// Comments collapse into their root post.
    FlattenToPost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Users,
    Content,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    User(u32),
    Content(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: Node,
    pub dst: Node,
    pub multiplicity: u32,
}

#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    mode: BuildMode,
    users: Vec<String>,
    content: Vec<String>,
    /// Index of the root post of each content node (itself for posts).
    content_post: Vec<u32>,
    content_is_post: Vec<bool>,
    /// Writer of each content node (the post author in flattened mode).
    content_author: Vec<u32>,
    /// user -> content, sorted by (user, content)
    authored: Vec<(u32, u32, u32)>,
    /// content -> user, sorted by (content, user)
    read: Vec<(u32, u32, u32)>,
}

fn bump(map: &mut BTreeMap<(u32, u32), u32>, key: (u32, u32)) {
    *map.entry(key).or_default() += 1;
}

/// Builds the directed bipartite network of a validated log.
pub fn build_bipartite(log: &EventLog, mode: BuildMode) -> Result<BipartiteGraph, GraphError> {
    let report = validate_log(log);
    if !report.is_clean() {
        return Err(GraphError::Unvalidated(Box::new(report)));
    }

    let users: Vec<String> = log.users().map(str::to_owned).collect();
    let user_idx: BTreeMap<&str, u32> = users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i as u32))
        .collect();

    let mut content: Vec<&str> = match mode {
        BuildMode::CommentTree => log.events().iter().map(|e| e.event_id.as_str()).collect(),
        BuildMode::FlattenToPost => log.posts().map(|e| e.event_id.as_str()).collect(),
    };
    content.sort_unstable();
    let content_idx: BTreeMap<&str, u32> = content
        .iter()
        .enumerate()
        .map(|(i, c)| (*c, i as u32))
        .collect();

    let n_content = content.len();
    let mut content_post = vec![0u32; n_content];
    let mut content_is_post = vec![false; n_content];
    let mut content_author = vec![0u32; n_content];
    let mut authored = BTreeMap::new();
    let mut read = BTreeMap::new();

    for ev in log.events() {
        let u = user_idx[ev.actor.as_str()];
        let post = content_idx[ev.post.as_str()];
        if ev.is_post() {
            content_is_post[post as usize] = true;
            content_post[post as usize] = post;
            content_author[post as usize] = u;
            bump(&mut authored, (u, post));
            continue;
        }
        match mode {
            BuildMode::CommentTree => {
                let c = content_idx[ev.event_id.as_str()];
                content_post[c as usize] = post;
                content_author[c as usize] = u;
                bump(&mut authored, (u, c));
                bump(&mut read, (post, u));
                if let Some(parent) = &ev.parent {
                    bump(&mut read, (content_idx[parent.as_str()], u));
                }
            }
            BuildMode::FlattenToPost => {
                bump(&mut authored, (u, post));
                bump(&mut read, (post, u));
            }
        }
    }

    Ok(BipartiteGraph {
        mode,
        users,
        content: content.into_iter().map(str::to_owned).collect(),
        content_post,
        content_is_post,
        content_author,
        authored: authored.into_iter().map(|((a, b), m)| (a, b, m)).collect(),
        read: read.into_iter().map(|((a, b), m)| (a, b, m)).collect(),
    })
}

impl BipartiteGraph {
    pub fn mode(&self) -> BuildMode {
        self.mode
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn content(&self) -> &[String] {
        &self.content
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_content(&self) -> usize {
        self.content.len()
    }

    pub fn is_post(&self, content: u32) -> bool {
        self.content_is_post[content as usize]
    }

    pub fn root_post(&self, content: u32) -> u32 {
        self.content_post[content as usize]
    }

    pub fn author(&self, content: u32) -> u32 {
        self.content_author[content as usize]
    }

    pub fn label(&self, node: Node) -> &str {
        match node {
            Node::User(i) => &self.users[i as usize],
            Node::Content(j) => &self.content[j as usize],
        }
    }

    /// All directed edges: authorship edges first, then read edges.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let a = self.authored.iter().map(|&(u, c, m)| Edge {
            src: Node::User(u),
            dst: Node::Content(c),
            multiplicity: m,
        });
        let r = self.read.iter().map(|&(c, u, m)| Edge {
            src: Node::Content(c),
            dst: Node::User(u),
            multiplicity: m,
        });
        a.chain(r)
    }

    pub fn n_edges(&self) -> usize {
        self.authored.len() + self.read.len()
    }

    /// Degree of every node in `partition`, counting multiplicities.
    pub fn degrees(&self, partition: Partition, direction: Direction) -> Vec<u64> {
        let n = match partition {
            Partition::Users => self.n_users(),
            Partition::Content => self.n_content(),
        };
        let mut deg = vec![0u64; n];
        let (list, key_first) = match (partition, direction) {
            (Partition::Users, Direction::Out) => (&self.authored, true),
            (Partition::Users, Direction::In) => (&self.read, false),
            (Partition::Content, Direction::In) => (&self.authored, false),
            (Partition::Content, Direction::Out) => (&self.read, true),
        };
        for &(a, b, m) in list {
            let idx = if key_first { a } else { b };
            deg[idx as usize] += m as u64;
        }
        deg
    }

    /// Comments each user attributed to each root post, derived from the
    /// authorship edges. Identical in both build modes.
    pub fn comment_attributions(&self) -> BTreeMap<(u32, String), u32> {
        let mut out: BTreeMap<(u32, String), u32> = BTreeMap::new();
        for &(u, c, m) in &self.authored {
            let post = self.content_post[c as usize];
            let comments = match self.mode {
                BuildMode::CommentTree if self.content_is_post[c as usize] => 0,
                BuildMode::CommentTree => m,
                BuildMode::FlattenToPost => m - u32::from(self.content_author[c as usize] == u),
            };
            if comments > 0 {
                *out.entry((u, self.content[post as usize].clone()))
                    .or_default() += comments;
            }
        }
        out
    }

    /// Distinct content nodes incident to each user, either direction.
    pub fn user_incidence(&self) -> Vec<Vec<u32>> {
        let mut inc = vec![Vec::new(); self.n_users()];
        for &(u, c, _) in &self.authored {
            inc[u as usize].push(c);
        }
        for &(c, u, _) in &self.read {
            inc[u as usize].push(c);
        }
        for row in &mut inc {
            row.sort_unstable();
            row.dedup();
        }
        inc
    }

    /// Distinct users incident to each content node, either direction.
    pub fn content_incidence(&self) -> Vec<Vec<u32>> {
        let mut inc = vec![Vec::new(); self.n_content()];
        for &(u, c, _) in &self.authored {
            inc[c as usize].push(u);
        }
        for &(c, u, _) in &self.read {
            inc[c as usize].push(u);
        }
        for row in &mut inc {
            row.sort_unstable();
            row.dedup();
        }
        inc
    }
}

/// Degree distribution of one partition in one direction.
pub fn degree_distribution(
    g: &BipartiteGraph,
    partition: Partition,
    direction: Direction,
    cumulative: bool,
) -> Result<Distribution, GraphError> {
    let deg = g.degrees(partition, direction);
    if deg.is_empty() {
        return Err(GraphError::EmptyPartition);
    }
    Ok(Distribution::from_integers(&deg, DEFAULT_RATIO)?.with_cumulative(cumulative))
}

/// Symmetric user-by-user count of shared content nodes, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonsMatrix {
    users: Vec<String>,
    /// Row `i` holds `(j, C_ij)` for every `j != i` with `C_ij > 0`, sorted by `j`.
    rows: Vec<Vec<(u32, u32)>>,
}

impl CommonsMatrix {
    pub fn from_rows(users: Vec<String>, rows: Vec<Vec<(u32, u32)>>) -> Self {
        CommonsMatrix { users, rows }
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn n(&self) -> usize {
        self.users.len()
    }

    pub fn row(&self, i: usize) -> &[(u32, u32)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.rows[i]
            .binary_search_by_key(&(j as u32), |&(k, _)| k)
            .map_or(0, |pos| self.rows[i][pos].1)
    }

    /// Each unordered pair with a nonzero count once, `i < j`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| (j as usize) > i)
                .map(move |&(j, c)| (i, j as usize, c))
        })
    }

    pub fn nnz_pairs(&self) -> usize {
        self.upper_entries().count()
    }
}

/// Counts, for every user pair, the distinct content nodes both touch.
///
/// Row-wise sparse product of the user/content incidence with its transpose,
/// using a dense scratch row so memory stays proportional to the output.
pub fn commons_matrix(g: &BipartiteGraph) -> CommonsMatrix {
    let by_user = g.user_incidence();
    let by_content = g.content_incidence();
    let n = g.n_users();
    let mut scratch = vec![0u32; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut rows = Vec::with_capacity(n);
    for (i, contents) in by_user.iter().enumerate() {
        for &c in contents {
            for &j in &by_content[c as usize] {
                if j as usize == i {
                    continue;
                }
                if scratch[j as usize] == 0 {
                    touched.push(j);
                }
                scratch[j as usize] += 1;
            }
        }
        touched.sort_unstable();
        let row: Vec<(u32, u32)> = touched
            .iter()
            .map(|&j| (j, std::mem::take(&mut scratch[j as usize])))
            .collect();
        touched.clear();
        rows.push(row);
    }
    CommonsMatrix {
        users: g.users.clone(),
        rows,
    }
}

/// Log-binned distribution of the nonzero commons values (one sample per pair).
pub fn commons_distribution(c: &CommonsMatrix) -> Result<Distribution, GraphError> {
    let vals: Vec<u64> = c.upper_entries().map(|(_, _, v)| v as u64).collect();
    if vals.is_empty() {
        return Err(GraphError::NoCommons);
    }
    Ok(Distribution::from_integers(&vals, DEFAULT_RATIO)?)
}

/// Undirected weighted graph consumed by the Laplacian builder.
pub trait WeightedGraph {
    fn node_count(&self) -> usize;
    fn node_label(&self, i: usize) -> String;
    /// Each undirected edge once, `(i, j, w)` with `i < j` and `w > 0`.
    fn weighted_edges(&self) -> Vec<(usize, usize, f64)>;
}

/// User projection: users linked by their commons counts.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedUserGraph {
    nodes: Vec<String>,
    adj: Vec<Vec<(u32, f64)>>,
    strengths: Vec<f64>,
}

impl WeightedUserGraph {
    /// Builds from undirected edges; duplicate pairs accumulate.
    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize, f64)]) -> Self {
        let n = nodes.len();
        let mut acc: Vec<BTreeMap<u32, f64>> = vec![BTreeMap::new(); n];
        for &(i, j, w) in edges {
            if i == j || w <= 0.0 {
                continue;
            }
            *acc[i].entry(j as u32).or_default() += w;
            *acc[j].entry(i as u32).or_default() += w;
        }
        let adj: Vec<Vec<(u32, f64)>> = acc.into_iter().map(|m| m.into_iter().collect()).collect();
        let strengths = adj
            .iter()
            .map(|r| r.iter().map(|&(_, w)| w).sum())
            .collect();
        WeightedUserGraph {
            nodes,
            adj,
            strengths,
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.adj[i]
    }

    /// Node strengths `l_i`, the weighted degrees.
    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

impl WeightedGraph for WeightedUserGraph {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn node_label(&self, i: usize) -> String {
        self.nodes[i].clone()
    }

    fn weighted_edges(&self) -> Vec<(usize, usize, f64)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .filter(move |&&(j, _)| j as usize > i)
                    .map(move |&(j, w)| (i, j as usize, w))
            })
            .collect()
    }
}

/// Projects the commons matrix onto a weighted user graph.
pub fn project_user_graph(c: &CommonsMatrix) -> WeightedUserGraph {
    let edges: Vec<(usize, usize, f64)> = c
        .upper_entries()
        .map(|(i, j, v)| (i, j, v as f64))
        .collect();
    WeightedUserGraph::from_edges(c.users.clone(), &edges)
}

/// Users and popular posts linked by how many comments each user left on each post.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPostWeightedGraph {
    users: Vec<String>,
    posts: Vec<String>,
    /// `(user, post, W)` sorted.
    edges: Vec<(u32, u32, u32)>,
}

impl UserPostWeightedGraph {
    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn posts(&self) -> &[String] {
        &self.posts
    }

    pub fn edges(&self) -> &[(u32, u32, u32)] {
        &self.edges
    }

    pub fn weight(&self, user: &str, post: &str) -> u32 {
        let (Ok(u), Ok(p)) = (
            self.users.binary_search_by(|x| x.as_str().cmp(user)),
            self.posts.binary_search_by(|x| x.as_str().cmp(post)),
        ) else {
            return 0;
        };
        self.edges
            .binary_search_by_key(&(u as u32, p as u32), |&(a, b, _)| (a, b))
            .map_or(0, |i| self.edges[i].2)
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|&(_, _, w)| w as u64).sum()
    }
}

impl WeightedGraph for UserPostWeightedGraph {
    fn node_count(&self) -> usize {
        self.users.len() + self.posts.len()
    }

    /// Users come first, then posts; labels carry a `user:`/`post:` prefix
    /// because the two id spaces may overlap.
    fn node_label(&self, i: usize) -> String {
        if i < self.users.len() {
            format!("user:{}", self.users[i])
        } else {
            format!("post:{}", self.posts[i - self.users.len()])
        }
    }

    fn weighted_edges(&self) -> Vec<(usize, usize, f64)> {
        let off = self.users.len();
        self.edges
            .iter()
            .map(|&(u, p, w)| (u as usize, off + p as usize, w as f64))
            .collect()
    }
}

/// Users x posts with at least `min_comments` comments, weighted by comment counts.
pub fn build_user_post_weighted(
    log: &EventLog,
    min_comments: usize,
) -> Result<UserPostWeightedGraph, GraphError> {
    let posts: Vec<String> = log
        .posts()
        .filter(|p| log.comment_count(&p.post) >= min_comments)
        .map(|p| p.post.clone())
        .collect();
    if posts.is_empty() {
        return Err(GraphError::NoQualifyingPosts(min_comments));
    }
    let mut w: BTreeMap<(&str, u32), u32> = BTreeMap::new();
    for (pi, post) in posts.iter().enumerate() {
        for c in log.post_comments(post) {
            *w.entry((c.actor.as_str(), pi as u32)).or_default() += 1;
        }
    }
    let mut users: Vec<String> = w.keys().map(|(u, _)| (*u).to_owned()).collect();
    users.dedup();
    let edges = w
        .into_iter()
        .map(|((u, p), c)| {
            let ui = users.binary_search_by(|x| x.as_str().cmp(u)).unwrap();
            (ui as u32, p, c)
        })
        .collect();
    Ok(UserPostWeightedGraph {
        users,
        posts,
        edges,
    })
}
