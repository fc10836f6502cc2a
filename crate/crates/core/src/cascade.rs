//! Retweet cascades: ingestion, popularity counts and time prefixes.
//!
//! The canonical cascade file is a TSV with one record per line:
//!
//! ```text
//! tweet_id  user_id  parent_user_id  unix_timestamp
//! ```
//!
//! The root (original post) uses `-` as its parent. Records of one tweet must
//! be contiguous, which lets the reader hold a single cascade at a time.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Lines, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FollowerGraph, IdMap, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetweetEvent {
    pub user: NodeId,
    /// User whose copy was forwarded.
    pub parent: NodeId,
    /// Seconds since the root post.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cascade {
    pub tweet_id: String,
    pub root: NodeId,
    /// Absolute post time, unix seconds.
    pub post_time: i64,
    /// Sorted by `offset`, ties in input order.
    pub events: Vec<RetweetEvent>,
}

impl Cascade {
    /// Number of retweet events with `offset <= t`. The root post is not counted.
    pub fn popularity_at(&self, t: u64) -> usize {
        self.events.partition_point(|e| e.offset <= t)
    }

    /// Early adopters and their forwarding forest at `t_i` (inclusive).
    pub fn prefix_at(&self, t_i: u64) -> CascadePrefix {
        let cut = self.popularity_at(t_i);
        let mut adopters = vec![self.root];
        let mut parents = vec![0u32];
        let mut index: HashMap<NodeId, u32> = HashMap::with_capacity(cut + 1);
        index.insert(self.root, 0);
        let mut reparented = 0;

        for e in &self.events[..cut] {
            if index.contains_key(&e.user) {
                continue;
            }
            let parent = match index.get(&e.parent) {
                Some(&p) => p,
                None => {
                    reparented += 1;
                    0
                }
            };
            index.insert(e.user, adopters.len() as u32);
            adopters.push(e.user);
            parents.push(parent);
        }

        CascadePrefix {
            t_i,
            adopters,
            parents,
            reparented,
        }
    }

    /// Checks the ordering and attribution invariants of a loaded cascade.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::from([self.root]);
        let mut last = 0;
        for (i, e) in self.events.iter().enumerate() {
            if e.offset < last {
                return Err(Error::Data(format!(
                    "tweet {}: event {i} out of order",
                    self.tweet_id
                )));
            }
            if !seen.contains(&e.parent) {
                return Err(Error::Data(format!(
                    "tweet {}: event {i} forwards from a user who has not adopted",
                    self.tweet_id
                )));
            }
            last = e.offset;
            seen.insert(e.user);
        }
        Ok(())
    }
}

/// A cascade restricted to events at or before `t_i`.
///
/// `adopters[0]` is the root; every other adopter appears once, in order of
/// its earliest event, and `parents[i] < i` indexes its forwarding parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadePrefix {
    t_i: u64,
    adopters: Vec<NodeId>,
    parents: Vec<u32>,
    reparented: usize,
}

impl CascadePrefix {
    pub fn t_i(&self) -> u64 {
        self.t_i
    }

    pub fn root(&self) -> NodeId {
        self.adopters[0]
    }

    /// Distinct adopters, root first.
    pub fn adopters(&self) -> &[NodeId] {
        &self.adopters
    }

    pub fn len(&self) -> usize {
        self.adopters.len()
    }

    /// Always false: the root is an adopter.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the forwarding parent of adopter `i`; `None` for the root.
    pub fn parent_index(&self, i: usize) -> Option<usize> {
        (i > 0).then(|| self.parents[i] as usize)
    }

    /// Prefix events whose parent had not adopted by `t_i`, attached to the root.
    pub fn reparented(&self) -> usize {
        self.reparented
    }
}

/// What to do with an event whose parent has not adopted before it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrphanPolicy {
    #[default]
    Reparent,
    Drop,
}

/// Column layout for non-canonical cascade exports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeAdapter {
    pub delimiter: Option<char>,
    pub tweet_col: usize,
    pub user_col: usize,
    pub parent_col: usize,
    pub time_col: usize,
    /// Parent value marking the root record.
    pub root_marker: String,
    /// `chrono` format for the timestamp column; unix seconds when unset.
    pub time_format: Option<String>,
    pub skip_lines: usize,
}

impl Default for CascadeAdapter {
    fn default() -> Self {
        CascadeAdapter {
            delimiter: Some('\t'),
            tweet_col: 0,
            user_col: 1,
            parent_col: 2,
            time_col: 3,
            root_marker: "-".into(),
            time_format: None,
            skip_lines: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum CascadeFormat {
    #[default]
    Canonical,
    Adapter(CascadeAdapter),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CascadeLoadStats {
    pub lines: usize,
    pub cascades: usize,
    /// Events timestamped before the root post.
    pub clamped_events: usize,
    pub repaired_parents: usize,
    pub dropped_events: usize,
    pub duplicate_roots: usize,
    pub skipped_no_root: usize,
    pub self_retweets: usize,
}

impl CascadeLoadStats {
    pub fn dropped_lines(&self) -> usize {
        self.dropped_events + self.duplicate_roots
    }
}

/// Resolves external user ids: graph ids first, then ids that only appear
/// in cascades, numbered from `graph.node_count()` upwards.
#[derive(Debug)]
pub struct UserIndex<'g> {
    graph: &'g FollowerGraph,
    extra: IdMap,
}

impl<'g> UserIndex<'g> {
    pub fn new(graph: &'g FollowerGraph) -> Self {
        UserIndex {
            graph,
            extra: IdMap::new(),
        }
    }

    pub fn resolve(&mut self, name: &str) -> NodeId {
        match self.graph.node(name) {
            Some(id) => id,
            None => self.extra.intern(name, self.graph.node_count()),
        }
    }

    pub fn name(&self, id: NodeId) -> Option<&str> {
        let n = self.graph.node_count();
        if id.index() < n {
            self.graph.name(id)
        } else {
            self.extra.name_at(id.index() - n)
        }
    }

    /// Users seen in cascades but absent from the graph.
    pub fn extra_users(&self) -> usize {
        self.extra.len()
    }
}

struct Record {
    user: NodeId,
    parent: Option<NodeId>,
    time: i64,
}

/// Streaming cascade reader yielding one cascade per tweet.
pub struct CascadeReader<'g, R> {
    lines: Lines<R>,
    path: PathBuf,
    adapter: CascadeAdapter,
    strict: bool,
    policy: OrphanPolicy,
    users: UserIndex<'g>,
    stats: CascadeLoadStats,
    lineno: usize,
    pending: Option<(String, Record)>,
    finished: HashSet<String>,
}

impl<'g> CascadeReader<'g, BufReader<File>> {
    pub fn open(
        path: &Path,
        format: &CascadeFormat,
        policy: OrphanPolicy,
        graph: &'g FollowerGraph,
    ) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(file), path, format, policy, graph))
    }
}

impl<'g, R: BufRead> CascadeReader<'g, R> {
    pub fn new(
        reader: R,
        path: &Path,
        format: &CascadeFormat,
        policy: OrphanPolicy,
        graph: &'g FollowerGraph,
    ) -> Self {
        let (adapter, strict) = match format {
            CascadeFormat::Canonical => (CascadeAdapter::default(), true),
            CascadeFormat::Adapter(a) => (a.clone(), false),
        };
        CascadeReader {
            lines: reader.lines(),
            path: path.to_path_buf(),
            adapter,
            strict,
            policy,
            users: UserIndex::new(graph),
            stats: CascadeLoadStats::default(),
            lineno: 0,
            pending: None,
            finished: HashSet::new(),
        }
    }

    pub fn stats(&self) -> &CascadeLoadStats {
        &self.stats
    }

    pub fn users(&self) -> &UserIndex<'g> {
        &self.users
    }

    pub fn into_parts(self) -> (UserIndex<'g>, CascadeLoadStats) {
        (self.users, self.stats)
    }

    fn next_record(&mut self) -> Result<Option<(String, Record)>> {
        loop {
            let Some(line) = self.lines.next() else {
                return Ok(None);
            };
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            self.lineno += 1;
            if self.lineno <= self.adapter.skip_lines {
                continue;
            }
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            self.stats.lines += 1;
            return self.parse_record(line).map(Some);
        }
    }

    fn parse_record(&mut self, line: &str) -> Result<(String, Record)> {
        let a = &self.adapter;
        let fields: Vec<&str> = match a.delimiter {
            Some(d) => line.split(d).collect(),
            None => line.split_whitespace().collect(),
        };
        let err = |msg: String| Error::parse(&self.path, self.lineno, msg);
        if self.strict && fields.len() != 4 {
            return Err(err(format!(
                "expected 4 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let field = |col: usize| match fields.get(col).map(|s| s.trim()) {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(err(format!("missing column {col}"))),
        };
        let tweet = field(a.tweet_col)?.to_owned();
        let user = field(a.user_col)?;
        let parent = field(a.parent_col)?;
        let raw_time = field(a.time_col)?;
        let time = match &a.time_format {
            None => raw_time
                .parse::<i64>()
                .map_err(|_| err(format!("bad timestamp `{raw_time}`")))?,
            Some(fmt) => NaiveDateTime::parse_from_str(raw_time, fmt)
                .map_err(|e| err(format!("bad timestamp `{raw_time}`: {e}")))?
                .and_utc()
                .timestamp(),
        };
        let is_root = parent == a.root_marker;
        let user = self.users.resolve(user);
        let parent = (!is_root).then(|| self.users.resolve(parent));
        Ok((tweet, Record { user, parent, time }))
    }

    fn assemble(&mut self, tweet_id: String, records: Vec<Record>) -> Option<Cascade> {
        let mut root: Option<(NodeId, i64)> = None;
        let mut raw = Vec::with_capacity(records.len());
        for r in records {
            match (r.parent, root) {
                (None, None) => root = Some((r.user, r.time)),
                (None, Some(_)) => self.stats.duplicate_roots += 1,
                (Some(p), _) => raw.push((r.user, p, r.time)),
            }
        }
        let Some((root, post_time)) = root else {
            self.stats.skipped_no_root += 1;
            return None;
        };

        let mut events: Vec<RetweetEvent> = raw
            .into_iter()
            .map(|(user, parent, time)| {
                let offset = if time < post_time {
                    self.stats.clamped_events += 1;
                    0
                } else {
                    (time - post_time) as u64
                };
                RetweetEvent {
                    user,
                    parent,
                    offset,
                }
            })
            .collect();
        events.sort_by_key(|e| e.offset);

        let mut seen = HashSet::from([root]);
        let mut kept = Vec::with_capacity(events.len());
        for mut e in events {
            if e.user == root {
                self.stats.self_retweets += 1;
            }
            if !seen.contains(&e.parent) {
                match self.policy {
                    OrphanPolicy::Reparent => {
                        self.stats.repaired_parents += 1;
                        e.parent = root;
                    }
                    OrphanPolicy::Drop => {
                        self.stats.dropped_events += 1;
                        continue;
                    }
                }
            }
            seen.insert(e.user);
            kept.push(e);
        }

        self.stats.cascades += 1;
        Some(Cascade {
            tweet_id,
            root,
            post_time,
            events: kept,
        })
    }

    fn next_cascade(&mut self) -> Result<Option<Cascade>> {
        loop {
            let first = match self.pending.take() {
                Some(p) => p,
                None => match self.next_record()? {
                    Some(r) => r,
                    None => return Ok(None),
                },
            };
            let (tweet_id, record) = first;
            if self.finished.contains(&tweet_id) {
                return Err(Error::parse(
                    &self.path,
                    self.lineno,
                    format!("records of tweet `{tweet_id}` are not contiguous"),
                ));
            }
            let mut records = vec![record];
            loop {
                match self.next_record()? {
                    Some((t, r)) if t == tweet_id => records.push(r),
                    Some(other) => {
                        self.pending = Some(other);
                        break;
                    }
                    None => break,
                }
            }
            self.finished.insert(tweet_id.clone());
            if let Some(c) = self.assemble(tweet_id, records) {
                return Ok(Some(c));
            }
        }
    }
}

impl<R: BufRead> Iterator for CascadeReader<'_, R> {
    type Item = Result<Cascade>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_cascade().transpose()
    }
}

/// Reads every cascade of a file into memory.
pub fn load_cascades<'g>(
    path: &Path,
    format: &CascadeFormat,
    policy: OrphanPolicy,
    graph: &'g FollowerGraph,
) -> Result<(Vec<Cascade>, UserIndex<'g>, CascadeLoadStats)> {
    let mut reader = CascadeReader::open(path, format, policy, graph)?;
    let cascades = reader.by_ref().collect::<Result<Vec<_>>>()?;
    let (users, stats) = reader.into_parts();
    Ok((cascades, users, stats))
}

/// Writes one cascade in canonical form, naming users through `name`.
pub fn write_cascade<W: Write, F>(out: &mut W, cascade: &Cascade, name: F) -> io::Result<()>
where
    F: Fn(NodeId) -> String,
{
    let t = &cascade.tweet_id;
    writeln!(out, "{t}\t{}\t-\t{}", name(cascade.root), cascade.post_time)?;
    for e in &cascade.events {
        writeln!(
            out,
            "{t}\t{}\t{}\t{}",
            name(e.user),
            name(e.parent),
            cascade.post_time + e.offset as i64
        )?;
    }
    Ok(())
}
