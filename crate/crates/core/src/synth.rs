//! Synthetic follower graphs and retweet cascades with known ground truth.
//!
//! Graphs are planted-partition digraphs. Cascades follow an
//! independent-cascade process in continuous time: when a user adopts, each
//! of their followers is exposed once after a random delay and adopts with
//! probability `lambda * (1 + structure_boost * diversity)`, where diversity
//! is the fraction of communities reached by adopters within the first
//! `diversity_window_s` seconds. Freezing it after that window ties the rest
//! of the spread to the cascade's early shape.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::cascade::{write_cascade, Cascade, RetweetEvent};
use crate::error::{Error, Result};
use crate::features::{
    write_feature_header, write_feature_row, Exclusion, FeatureConfig, FeatureRow, PairMode,
};
use crate::graph::{FollowerGraph, IdMap, NodeId};

/// 2011-07-01T00:00:00Z, start of the simulated posting window.
pub const BASE_EPOCH: i64 = 1_309_478_400;
/// Spacing between consecutive simulated root posts.
pub const POST_SPACING_S: i64 = 600;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub n_communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub cascade_count: usize,
    /// Base adoption probability per exposure.
    pub lambda: f64,
    pub structure_boost: f64,
    /// Mean exposure delay in seconds.
    pub mean_delay_s: f64,
    /// Adoptions after this many seconds no longer change the diversity
    /// that scales the adoption probability.
    pub diversity_window_s: u64,
    pub max_sim_time: u64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::bundled()
    }
}

impl SynthConfig {
    /// The fixed-seed corpus the qualitative checks run on.
    pub fn bundled() -> Self {
        SynthConfig {
            n_nodes: 4000,
            n_communities: 500,
            p_in: 1.0 / 3.0,
            p_out: 0.000125,
            cascade_count: 10_000,
            lambda: 0.2,
            structure_boost: 100.0,
            mean_delay_s: 400.0,
            diversity_window_s: 3600,
            max_sim_time: 30 * 24 * 3600,
            seed: 42,
        }
    }

    /// Roughly one million edges and fifty thousand cascades.
    pub fn large() -> Self {
        SynthConfig {
            n_nodes: 100_000,
            n_communities: 5000,
            p_in: 0.42,
            p_out: 0.000025,
            cascade_count: 50_000,
            lambda: 0.093,
            structure_boost: 50.0,
            mean_delay_s: 400.0,
            diversity_window_s: 3600,
            max_sim_time: 30 * 24 * 3600,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {p} is not a probability")))
            }
        };
        prob("p_in", self.p_in)?;
        prob("p_out", self.p_out)?;
        prob("lambda", self.lambda)?;
        if self.n_nodes == 0 || self.n_nodes > u32::MAX as usize {
            return Err(Error::Config(format!("n_nodes = {} out of range", self.n_nodes)));
        }
        if self.n_communities == 0 || self.n_communities > self.n_nodes {
            return Err(Error::Config(format!(
                "n_communities = {} must be in 1..=n_nodes",
                self.n_communities
            )));
        }
        if !(self.structure_boost >= 0.0 && self.structure_boost.is_finite()) {
            return Err(Error::Config("structure_boost must be finite and non-negative".into()));
        }
        if !(self.mean_delay_s >= 0.0 && self.mean_delay_s.is_finite()) {
            return Err(Error::Config("mean_delay_s must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "n_nodes={} n_communities={} p_in={} p_out={} cascade_count={} lambda={} \
             structure_boost={} mean_delay_s={} diversity_window_s={} max_sim_time={} seed={}",
            self.n_nodes,
            self.n_communities,
            self.p_in,
            self.p_out,
            self.cascade_count,
            self.lambda,
            self.structure_boost,
            self.mean_delay_s,
            self.diversity_window_s,
            self.max_sim_time,
            self.seed
        )
    }
}

/// A follower graph with a community label per node. Node `i` carries the
/// external name `i`.
#[derive(Clone, Debug)]
pub struct SyntheticGraph {
    pub graph: FollowerGraph,
    pub community: Vec<u32>,
    pub n_communities: usize,
}

impl SyntheticGraph {
    /// Wraps an existing graph as a single community.
    pub fn from_graph(graph: FollowerGraph) -> Self {
        let n = graph.node_count();
        SyntheticGraph {
            graph,
            community: vec![0; n],
            n_communities: 1,
        }
    }
}

/// Contiguous, balanced community blocks.
fn community_of(i: usize, n: usize, k: usize) -> u32 {
    (i * k / n) as u32
}

/// Failures before the first success of a Bernoulli(`p`) sequence.
fn geometric_skip(rng: &mut ChaCha8Rng, p: f64) -> usize {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    (u.ln() / (1.0 - p).ln()).floor() as usize
}

/// Planted-partition digraph: each ordered pair gets an edge with
/// probability `p_in` inside a community and `p_out` across.
pub fn gen_graph(cfg: &SynthConfig) -> Result<SyntheticGraph> {
    cfg.validate()?;
    let (n, k) = (cfg.n_nodes, cfg.n_communities);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let community: Vec<u32> = (0..n).map(|i| community_of(i, n, k)).collect();
    let mut starts: Vec<usize> = (0..k).map(|c| (c * n).div_ceil(k)).collect();
    starts.push(n);
    debug_assert!((0..n).all(|i| {
        let c = community[i] as usize;
        starts[c] <= i && i < starts[c + 1]
    }));

    let mut edges = Vec::new();
    for u in 0..n {
        for c in 0..k {
            let p = if c as u32 == community[u] { cfg.p_in } else { cfg.p_out };
            if p <= 0.0 {
                continue;
            }
            let (lo, hi) = (starts[c], starts[c + 1]);
            let mut v = lo + geometric_skip(&mut rng, p);
            while v < hi {
                if v != u {
                    edges.push((u as u32, v as u32));
                }
                v += 1 + geometric_skip(&mut rng, p);
            }
        }
    }

    let mut ids = IdMap::new();
    for i in 0..n {
        ids.intern(&i.to_string(), 0);
    }
    let (graph, _) = FollowerGraph::from_edges(ids, edges);
    Ok(SyntheticGraph {
        graph,
        community,
        n_communities: k,
    })
}

/// A generated cascade with the generator's own record of each event's depth.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub cascade: Cascade,
    /// Forwarding depth of `cascade.events[i]`.
    pub depths: Vec<u32>,
}

/// Reverse adjacency: who follows each node.
fn followers(g: &FollowerGraph) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); g.node_count()];
    for (u, v) in g.edges() {
        out[v.index()].push(u.0);
    }
    out
}

pub fn simulate(g: &SyntheticGraph, cfg: &SynthConfig) -> Result<Vec<Simulated>> {
    cfg.validate()?;
    let n = g.graph.node_count();
    if n == 0 {
        return Err(Error::Config("cannot simulate on an empty graph".into()));
    }
    let followers = followers(&g.graph);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut out = Vec::with_capacity(cfg.cascade_count);
    for k in 0..cfg.cascade_count {
        let root = rng.random_range(0..n as u32);
        // (time, sequence, target, source)
        let mut queue: BinaryHeap<Reverse<(u64, u64, u32, u32)>> = BinaryHeap::new();
        let mut seq = 0u64;
        let mut depth_of: HashMap<u32, u32> = HashMap::from([(root, 0)]);
        let mut reached: HashSet<u32> = HashSet::from([g.community[root as usize]]);
        let mut events = Vec::new();
        let mut depths = Vec::new();

        let mut expose = |queue: &mut BinaryHeap<_>, rng: &mut ChaCha8Rng, from: u32, at: u64| {
            for &w in &followers[from as usize] {
                let e: f64 = Exp1.sample(rng);
                let gap = 1 + (e * cfg.mean_delay_s) as u64;
                queue.push(Reverse((at + gap, seq, w, from)));
                seq += 1;
            }
        };
        expose(&mut queue, &mut rng, root, 0);

        while let Some(Reverse((t, _, target, source))) = queue.pop() {
            if t > cfg.max_sim_time {
                break;
            }
            if depth_of.contains_key(&target) {
                continue;
            }
            let diversity = reached.len() as f64 / g.n_communities as f64;
            let p = (cfg.lambda * (1.0 + cfg.structure_boost * diversity)).min(1.0);
            if rng.random::<f64>() >= p {
                continue;
            }
            let d = depth_of[&source] + 1;
            depth_of.insert(target, d);
            if t <= cfg.diversity_window_s {
                reached.insert(g.community[target as usize]);
            }
            events.push(RetweetEvent {
                user: NodeId(target),
                parent: NodeId(source),
                offset: t,
            });
            depths.push(d);
            expose(&mut queue, &mut rng, target, t);
        }

        out.push(Simulated {
            cascade: Cascade {
                tweet_id: format!("t{k}"),
                root: NodeId(root),
                post_time: BASE_EPOCH + k as i64 * POST_SPACING_S,
                events,
            },
            depths,
        });
    }
    Ok(out)
}

pub fn gen_cascades(g: &SyntheticGraph, cfg: &SynthConfig) -> Result<Vec<Cascade>> {
    Ok(simulate(g, cfg)?.into_iter().map(|s| s.cascade).collect())
}

/// Ground-truth feature rows from the generator's own bookkeeping: event
/// depths recorded during simulation and link counts from a hash set of
/// edges, both independent of the prefix and adjacency machinery.
pub fn truth_rows(g: &SyntheticGraph, sims: &[Simulated], cfg: &FeatureConfig) -> Vec<FeatureRow> {
    let edges: HashSet<(u32, u32)> = g.graph.edges().map(|(u, v)| (u.0, v.0)).collect();
    sims.iter()
        .map(|s| {
            let c = &s.cascade;
            let early: Vec<usize> = (0..c.events.len())
                .filter(|&i| c.events[i].offset <= cfg.t_i)
                .collect();
            let final_pop = c.events.iter().filter(|e| e.offset <= cfg.t_r).count();
            let depth = early.iter().map(|&i| s.depths[i]).max().unwrap_or(0);

            let mut members: Vec<u32> = early.iter().map(|&i| c.events[i].user.0).collect();
            if !cfg.density.exclude_root {
                members.push(c.root.0);
            }
            let m = members.len() as u64;
            let density = (m >= 2).then(|| {
                let mut ordered = 0u64;
                let mut either = 0u64;
                for (a, &u) in members.iter().enumerate() {
                    for &v in &members[a + 1..] {
                        let uv = edges.contains(&(u, v));
                        let vu = edges.contains(&(v, u));
                        ordered += uv as u64 + vu as u64;
                        either += (uv || vu) as u64;
                    }
                }
                match cfg.density.pairs {
                    PairMode::Ordered => ordered as f64 / (m * (m - 1)) as f64,
                    PairMode::Unordered => either as f64 / (m * (m - 1) / 2) as f64,
                }
            });
            let excluded = match early.len() {
                0 => Some(Exclusion::NoEarlyAdoption),
                p if p < cfg.min_early => Some(Exclusion::BelowMinEarly),
                _ => None,
            };
            FeatureRow::new(
                c.tweet_id.clone(),
                early.len() + 1,
                early.len(),
                final_pop,
                density,
                depth,
                excluded,
                cfg.density_floor,
            )
        })
        .collect()
}

pub const GRAPH_FILE: &str = "graph.tsv";
pub const CASCADE_FILE: &str = "cascades.tsv";
pub const TRUTH_FILE: &str = "truth.tsv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Generates a corpus and writes `graph.tsv`, `cascades.tsv` and
/// `truth.tsv` into `dir`.
pub fn write_corpus(dir: &Path, synth: &SynthConfig, features: &FeatureConfig) -> Result<CorpusSummary> {
    features.validate()?;
    let g = gen_graph(synth)?;
    let sims = simulate(&g, synth)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(GRAPH_FILE);
    let mut out = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(out, "# cascadepop synthetic graph {}", synth.describe()).map_err(io)?;
    for (u, v) in g.graph.edges() {
        writeln!(out, "{u}\t{v}").map_err(io)?;
    }
    out.flush().map_err(io)?;

    let path = dir.join(CASCADE_FILE);
    let mut out = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(out, "# cascadepop synthetic cascades {}", synth.describe()).map_err(io)?;
    for s in &sims {
        write_cascade(&mut out, &s.cascade, |id| id.to_string()).map_err(io)?;
    }
    out.flush().map_err(io)?;

    let path = dir.join(TRUTH_FILE);
    let mut out = create(&path)?;
    let io = |e| Error::io(&path, e);
    write_feature_header(&mut out, features).map_err(io)?;
    for row in truth_rows(&g, &sims, features) {
        write_feature_row(&mut out, &row).map_err(io)?;
    }
    out.flush().map_err(io)?;

    Ok(CorpusSummary {
        nodes: g.graph.node_count(),
        edges: g.graph.edge_count(),
        cascades: sims.len(),
        events: sims.iter().map(|s| s.cascade.events.len()).sum(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusSummary {
    pub nodes: usize,
    pub edges: usize,
    pub cascades: usize,
    pub events: usize,
}
