//! Immutable follower graph.
//!
//! An edge `u -> v` means "u follows v". The graph is stored in compressed
//! sparse row form: one sorted followee list per node, so that edge queries
//! are a binary search over the follower's adjacency.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense internal user index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between external user identifiers and dense [`NodeId`]s.
/// Ids are handed out in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a map whose ids start at `offset`, for identifiers that extend
    /// an existing map.
    pub(crate) fn intern(&mut self, name: &str, offset: usize) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NodeId((offset + self.names.len()) as u32);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    /// External name of the `i`-th interned identifier.
    pub(crate) fn name_at(&self, i: usize) -> Option<&str> {
        self.names.get(i).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Column layout of an edge file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeAdapter {
    /// Field delimiter; `None` splits on runs of whitespace.
    pub delimiter: Option<char>,
    pub follower_col: usize,
    pub followee_col: usize,
    /// Number of leading lines to ignore (headers).
    pub skip_lines: usize,
}

impl Default for EdgeAdapter {
    fn default() -> Self {
        EdgeAdapter {
            delimiter: Some('\t'),
            follower_col: 0,
            followee_col: 1,
            skip_lines: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum EdgeFormat {
    /// `follower<TAB>followee`, exactly two columns.
    #[default]
    Canonical,
    Adapter(EdgeAdapter),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphLoadStats {
    pub lines: usize,
    pub comments: usize,
    pub self_loops: usize,
    pub duplicate_edges: usize,
}

/// Links found among a node set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkCount {
    /// Ordered pairs `(u, v)` with `u` following `v`.
    pub ordered: u64,
    /// Unordered pairs linked in both directions.
    pub mutual: u64,
}

impl LinkCount {
    /// Unordered pairs linked in at least one direction.
    pub fn unordered(&self) -> u64 {
        self.ordered - self.mutual
    }
}

#[derive(Clone, Debug)]
pub struct FollowerGraph {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    ids: IdMap,
}

impl FollowerGraph {
    /// Builds a graph over `ids` from raw `(follower, followee)` pairs,
    /// dropping self-loops and duplicates.
    pub fn from_edges(ids: IdMap, edges: Vec<(u32, u32)>) -> (Self, GraphLoadStats) {
        let n = ids.len();
        let mut stats = GraphLoadStats::default();
        let mut edges: Vec<(u32, u32)> = edges
            .into_iter()
            .filter(|&(u, v)| {
                debug_assert!((u as usize) < n && (v as usize) < n);
                if u == v {
                    stats.self_loops += 1;
                    false
                } else {
                    true
                }
            })
            .collect();
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        stats.duplicate_edges = before - edges.len();

        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &edges {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = edges.into_iter().map(|(_, v)| v).collect();
        (FollowerGraph { offsets, targets, ids }, stats)
    }

    pub fn load(path: &Path, format: &EdgeFormat) -> Result<(Self, GraphLoadStats)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), path, format)
    }

    /// Parses an edge list from `reader`; `path` is only used in messages.
    pub fn read<R: BufRead>(
        reader: R,
        path: &Path,
        format: &EdgeFormat,
    ) -> Result<(Self, GraphLoadStats)> {
        let (adapter, strict) = match format {
            EdgeFormat::Canonical => (EdgeAdapter::default(), true),
            EdgeFormat::Adapter(a) => (a.clone(), false),
        };
        let mut ids = IdMap::new();
        let mut edges = Vec::new();
        let mut lines = 0;
        let mut comments = 0;

        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if i < adapter.skip_lines {
                continue;
            }
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if line.starts_with('#') {
                comments += 1;
                continue;
            }
            lines += 1;
            let fields: Vec<&str> = match adapter.delimiter {
                Some(d) => line.split(d).collect(),
                None => line.split_whitespace().collect(),
            };
            if strict && fields.len() != 2 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 2 tab-separated fields, found {}", fields.len()),
                ));
            }
            let field = |col: usize| -> Result<&str> {
                match fields.get(col).map(|s| s.trim()) {
                    Some(s) if !s.is_empty() => Ok(s),
                    _ => Err(Error::parse(path, lineno, format!("missing column {col}"))),
                }
            };
            let u = ids.intern(field(adapter.follower_col)?, 0);
            let v = ids.intern(field(adapter.followee_col)?, 0);
            edges.push((u.0, v.0));
        }

        if lines == 0 {
            return Err(Error::EmptyGraph(path.to_path_buf()));
        }
        let (graph, mut stats) = Self::from_edges(ids, edges);
        stats.lines = lines;
        stats.comments = comments;
        Ok((graph, stats))
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.ids.get(name)
    }

    pub fn name(&self, id: NodeId) -> Option<&str> {
        self.ids.name_at(id.index())
    }

    #[inline]
    fn check(&self, id: NodeId) -> Result<()> {
        if id.index() < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id: id.0,
                node_count: self.node_count(),
            })
        }
    }

    #[inline]
    fn adj(&self, u: u32) -> &[u32] {
        let u = u as usize;
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Sorted followees of `u`.
    pub fn followees(&self, u: NodeId) -> Result<&[u32]> {
        self.check(u)?;
        Ok(self.adj(u.0))
    }

    pub fn out_degree(&self, u: NodeId) -> Result<usize> {
        Ok(self.followees(u)?.len())
    }

    /// Whether `u` follows `v`.
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> Result<bool> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.adj(u.0).binary_search(&v.0).is_ok())
    }

    /// All edges in `(follower, followee)` order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count() as u32)
            .flat_map(move |u| self.adj(u).iter().map(move |&v| (NodeId(u), NodeId(v))))
    }

    /// Number of ordered pairs `(u, v)`, `u != v`, both in `nodes`, where
    /// `u` follows `v`. Duplicates in `nodes` are ignored.
    pub fn count_links_among(&self, nodes: &[NodeId]) -> Result<u64> {
        Ok(self.links_among(nodes)?.ordered)
    }

    /// Ordered and mutual link counts among `nodes`.
    ///
    /// For each member, walks whichever is shorter: its followee list
    /// (probing the member set) or the member set (probing its followees).
    pub fn links_among(&self, nodes: &[NodeId]) -> Result<LinkCount> {
        let mut members: Vec<u32> = Vec::with_capacity(nodes.len());
        for &n in nodes {
            self.check(n)?;
            members.push(n.0);
        }
        members.sort_unstable();
        members.dedup();

        let mut count = LinkCount::default();
        for &u in &members {
            let adj = self.adj(u);
            let mut hit = |v: u32| {
                count.ordered += 1;
                if u < v && self.adj(v).binary_search(&u).is_ok() {
                    count.mutual += 1;
                }
            };
            if adj.len() <= members.len() {
                for &v in adj {
                    if members.binary_search(&v).is_ok() {
                        hit(v);
                    }
                }
            } else {
                for &v in &members {
                    if v != u && adj.binary_search(&v).is_ok() {
                        hit(v);
                    }
                }
            }
        }
        Ok(count)
    }
}
