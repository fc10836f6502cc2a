//! Early-adopter features: popularity, link density and diffusion depth.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{Cascade, CascadePrefix};
use crate::error::{Error, Result};
use crate::graph::{FollowerGraph, NodeId};

pub const DEFAULT_TI: u64 = 3600;
pub const DEFAULT_TR: u64 = 30 * 24 * 3600;
pub const DEFAULT_DENSITY_FLOOR: f64 = 1e-6;

/// How possible links among `n` adopters are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// `n(n-1)` ordered pairs; each follow relation is one link.
    #[default]
    Ordered,
    /// `n(n-1)/2` pairs; a pair is linked if either follows the other.
    Unordered,
}

impl fmt::Display for PairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairMode::Ordered => "ordered",
            PairMode::Unordered => "unordered",
        })
    }
}

impl FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordered" => Ok(PairMode::Ordered),
            "unordered" => Ok(PairMode::Unordered),
            _ => Err(Error::Config(format!("unknown pair mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DensityOptions {
    pub pairs: PairMode,
    pub exclude_root: bool,
}

/// Everything that determines the content of a feature row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureConfig {
    pub t_i: u64,
    pub t_r: u64,
    pub min_early: usize,
    pub density: DensityOptions,
    pub density_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            t_i: DEFAULT_TI,
            t_r: DEFAULT_TR,
            min_early: 1,
            density: DensityOptions::default(),
            density_floor: DEFAULT_DENSITY_FLOOR,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_i >= self.t_r {
            return Err(Error::Config(format!(
                "indicating time {} must be before reference time {}",
                self.t_i, self.t_r
            )));
        }
        if self.min_early < 1 {
            return Err(Error::Config("min_early must be at least 1".into()));
        }
        if !(self.density_floor > 0.0 && self.density_floor <= 1.0) {
            return Err(Error::Config(format!(
                "density floor {} must lie in (0, 1]",
                self.density_floor
            )));
        }
        Ok(())
    }

    /// Compact `key=value` rendering, embedded in every output header.
    pub fn fingerprint(&self) -> String {
        format!(
            "ti={} tr={} min_early={} pairs={} exclude_root={} floor={}",
            self.t_i,
            self.t_r,
            self.min_early,
            self.density.pairs,
            self.density.exclude_root,
            self.density_floor
        )
    }

    pub fn parse_fingerprint(s: &str) -> Result<Self> {
        let mut cfg = FeatureConfig::default();
        let mut seen = 0;
        for token in s.split_whitespace() {
            let bad = || Error::Data(format!("bad fingerprint token `{token}`"));
            let (key, value) = token.split_once('=').ok_or_else(bad)?;
            match key {
                "ti" => cfg.t_i = value.parse().map_err(|_| bad())?,
                "tr" => cfg.t_r = value.parse().map_err(|_| bad())?,
                "min_early" => cfg.min_early = value.parse().map_err(|_| bad())?,
                "pairs" => cfg.density.pairs = value.parse().map_err(|_| bad())?,
                "exclude_root" => cfg.density.exclude_root = value.parse().map_err(|_| bad())?,
                "floor" => cfg.density_floor = value.parse().map_err(|_| bad())?,
                _ => continue,
            }
            seen += 1;
        }
        if seen != 6 {
            return Err(Error::Data(format!("incomplete feature fingerprint `{s}`")));
        }
        Ok(cfg)
    }
}

/// Link density of the prefix adopters: links among them divided by all
/// possible links.
///
/// Adopters that are not in the graph (cascade-only users) count towards
/// `n` but have no links.
pub fn link_density(g: &FollowerGraph, prefix: &CascadePrefix, opts: DensityOptions) -> Result<f64> {
    let members = if opts.exclude_root {
        &prefix.adopters()[1..]
    } else {
        prefix.adopters()
    };
    let n = members.len() as u64;
    if n < 2 {
        return Err(Error::UndefinedDensity);
    }
    let in_graph: Vec<NodeId> = members
        .iter()
        .copied()
        .filter(|id| id.index() < g.node_count())
        .collect();
    let links = g.links_among(&in_graph)?;
    let (found, possible) = match opts.pairs {
        PairMode::Ordered => (links.ordered, n * (n - 1)),
        PairMode::Unordered => (links.unordered(), n * (n - 1) / 2),
    };
    Ok(found as f64 / possible as f64)
}

/// Longest forwarding chain from the root within the prefix, in hops.
pub fn diffusion_depth(prefix: &CascadePrefix) -> u32 {
    let mut depth = vec![0u32; prefix.len()];
    let mut max = 0;
    for i in 1..prefix.len() {
        let parent = prefix.parent_index(i).unwrap_or(0);
        depth[i] = depth[parent] + 1;
        max = max.max(depth[i]);
    }
    max
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exclusion {
    NoEarlyAdoption,
    BelowMinEarly,
}

impl Exclusion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Exclusion::NoEarlyAdoption => "no early adoption",
            Exclusion::BelowMinEarly => "early popularity below minimum",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "no early adoption" => Some(Exclusion::NoEarlyAdoption),
            "early popularity below minimum" => Some(Exclusion::BelowMinEarly),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub tweet_id: String,
    /// Distinct early adopters including the root.
    pub n_adopters: usize,
    pub early_pop: usize,
    pub final_pop: usize,
    /// `None` when fewer than two adopters take part in the density.
    pub density: Option<f64>,
    pub depth: u32,
    pub excluded: Option<Exclusion>,
    pub ln_early: f64,
    pub ln_final: f64,
    /// `ln` of the density, with zero densities raised to the floor.
    pub ln_density: Option<f64>,
}

impl FeatureRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tweet_id: String,
        n_adopters: usize,
        early_pop: usize,
        final_pop: usize,
        density: Option<f64>,
        depth: u32,
        excluded: Option<Exclusion>,
        density_floor: f64,
    ) -> Self {
        FeatureRow {
            tweet_id,
            n_adopters,
            early_pop,
            final_pop,
            density,
            depth,
            excluded,
            ln_early: (early_pop as f64).ln(),
            ln_final: (final_pop as f64).ln(),
            ln_density: density.map(|d| if d > 0.0 { d } else { density_floor }.ln()),
        }
    }

    pub fn is_included(&self) -> bool {
        self.excluded.is_none()
    }
}

/// Computes feature rows against a shared read-only graph.
pub struct FeatureExtractor<'g> {
    graph: &'g FollowerGraph,
    cfg: FeatureConfig,
}

impl<'g> FeatureExtractor<'g> {
    pub fn new(graph: &'g FollowerGraph, cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FeatureExtractor { graph, cfg })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn row(&self, c: &Cascade) -> Result<FeatureRow> {
        let cfg = &self.cfg;
        let prefix = c.prefix_at(cfg.t_i);
        let early_pop = c.popularity_at(cfg.t_i);
        let final_pop = c.popularity_at(cfg.t_r);
        let density = match link_density(self.graph, &prefix, cfg.density) {
            Ok(d) => Some(d),
            Err(Error::UndefinedDensity) => None,
            Err(e) => return Err(e),
        };
        let excluded = match early_pop {
            0 => Some(Exclusion::NoEarlyAdoption),
            p if p < cfg.min_early => Some(Exclusion::BelowMinEarly),
            _ => None,
        };
        Ok(FeatureRow::new(
            c.tweet_id.clone(),
            prefix.len(),
            early_pop,
            final_pop,
            density,
            diffusion_depth(&prefix),
            excluded,
            cfg.density_floor,
        ))
    }

    /// One row per cascade, in input order. Cascades are processed in parallel.
    pub fn extract(&self, cascades: &[Cascade]) -> Result<Vec<FeatureRow>> {
        cascades.par_iter().map(|c| self.row(c)).collect()
    }
}

/// Convenience wrapper over [`FeatureExtractor::extract`].
pub fn extract_features(
    g: &FollowerGraph,
    cascades: &[Cascade],
    cfg: FeatureConfig,
) -> Result<Vec<FeatureRow>> {
    FeatureExtractor::new(g, cfg)?.extract(cascades)
}

pub const FEATURE_MAGIC: &str = "# cascadepop-features";
const FEATURE_COLUMNS: &str =
    "tweet_id\tn_adopters\tearly_pop\tfinal_pop\tdensity\tdepth\texcluded_reason";

pub fn write_feature_header<W: Write>(out: &mut W, cfg: &FeatureConfig) -> std::io::Result<()> {
    writeln!(out, "{FEATURE_MAGIC} {}", cfg.fingerprint())?;
    writeln!(out, "{FEATURE_COLUMNS}")
}

pub fn write_feature_row<W: Write>(out: &mut W, row: &FeatureRow) -> std::io::Result<()> {
    let density = match row.density {
        Some(d) => d.to_string(),
        None => "-".into(),
    };
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        row.tweet_id,
        row.n_adopters,
        row.early_pop,
        row.final_pop,
        density,
        row.depth,
        row.excluded.map_or("-", |e| e.as_str())
    )
}

/// Reads a feature TSV and the configuration recorded in its header.
pub fn read_features(path: &Path) -> Result<(FeatureConfig, Vec<FeatureRow>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut next_line = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((i, l)) => Ok(Some((i + 1, l.map_err(|e| Error::io(path, e))?))),
            None => Ok(None),
        }
    };

    let header = match next_line()? {
        Some((_, l)) => l,
        None => return Err(Error::Data(format!("{}: empty feature file", path.display()))),
    };
    let fingerprint = header.strip_prefix(FEATURE_MAGIC).ok_or_else(|| {
        Error::parse(path, 1, "missing feature header (not a feature file?)")
    })?;
    let cfg = FeatureConfig::parse_fingerprint(fingerprint)?;
    match next_line()? {
        Some((_, l)) if l == FEATURE_COLUMNS => {}
        _ => return Err(Error::parse(path, 2, "missing column header")),
    }

    let mut rows = Vec::new();
    while let Some((lineno, line)) = next_line()? {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(Error::parse(path, lineno, format!("expected 7 fields, found {}", f.len())));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::parse(path, lineno, format!("bad count `{s}`")))
        };
        let density = match f[4] {
            "-" => None,
            s => Some(s.parse::<f64>().map_err(|_| {
                Error::parse(path, lineno, format!("bad density `{s}`"))
            })?),
        };
        let depth = f[5]
            .parse::<u32>()
            .map_err(|_| Error::parse(path, lineno, format!("bad depth `{}`", f[5])))?;
        let excluded = match f[6] {
            "-" => None,
            s => Some(Exclusion::parse(s).ok_or_else(|| {
                Error::parse(path, lineno, format!("unknown exclusion `{s}`"))
            })?),
        };
        rows.push(FeatureRow::new(
            f[0].to_owned(),
            num(f[1])?,
            num(f[2])?,
            num(f[3])?,
            density,
            depth,
            excluded,
            cfg.density_floor,
        ));
    }
    Ok((cfg, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::RetweetEvent;
    use crate::graph::IdMap;
    use std::collections::HashSet;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(n: u32, edges: &[(u32, u32)]) -> FollowerGraph {
        let mut ids = IdMap::new();
        for i in 0..n {
            ids.intern(&i.to_string(), 0);
        }
        FollowerGraph::from_edges(ids, edges.to_vec()).0
    }

    fn ev(user: u32, parent: u32, offset: u64) -> RetweetEvent {
        RetweetEvent {
            user: NodeId(user),
            parent: NodeId(parent),
            offset,
        }
    }

    fn cascade(events: Vec<RetweetEvent>) -> Cascade {
        Cascade {
            tweet_id: "t".into(),
            root: NodeId(0),
            post_time: 0,
            events,
        }
    }

    #[test]
    fn pair_density() {
        let g = graph(2, &[(1, 0)]);
        let p = cascade(vec![ev(1, 0, 5)]).prefix_at(10);
        assert_eq!(link_density(&g, &p, DensityOptions::default()).unwrap(), 0.5);
    }

    #[test]
    fn star_density() {
        let g = graph(4, &[(1, 0), (2, 0), (3, 0)]);
        let p = cascade(vec![ev(1, 0, 1), ev(2, 0, 2), ev(3, 0, 3)]).prefix_at(10);
        assert_eq!(link_density(&g, &p, DensityOptions::default()).unwrap(), 0.25);
        let unordered = DensityOptions {
            pairs: PairMode::Unordered,
            exclude_root: false,
        };
        assert_eq!(link_density(&g, &p, unordered).unwrap(), 0.5);
        let no_root = DensityOptions {
            pairs: PairMode::Ordered,
            exclude_root: true,
        };
        assert_eq!(link_density(&g, &p, no_root).unwrap(), 0.0);
    }

    #[test]
    fn lone_root_density_is_undefined() {
        let g = graph(2, &[]);
        let p = cascade(vec![]).prefix_at(10);
        assert!(matches!(
            link_density(&g, &p, DensityOptions::default()),
            Err(Error::UndefinedDensity)
        ));
        let p = cascade(vec![ev(1, 0, 1)]).prefix_at(10);
        let no_root = DensityOptions {
            exclude_root: true,
            ..Default::default()
        };
        assert!(link_density(&g, &p, no_root).is_err());
    }

    #[test]
    fn adopters_outside_graph_have_no_links() {
        let g = graph(2, &[(1, 0)]);
        let p = cascade(vec![ev(1, 0, 1), ev(5, 0, 2)]).prefix_at(10);
        assert_eq!(link_density(&g, &p, DensityOptions::default()).unwrap(), 1.0 / 6.0);
    }

    #[test]
    fn depth_examples() {
        assert_eq!(diffusion_depth(&cascade(vec![]).prefix_at(0)), 0);
        assert_eq!(diffusion_depth(&cascade(vec![ev(1, 0, 1)]).prefix_at(5)), 1);
        assert_eq!(
            diffusion_depth(&cascade(vec![ev(1, 0, 1), ev(2, 1, 2)]).prefix_at(5)),
            2
        );
        // branches of depth 1, 3 and 2
        let c = cascade(vec![
            ev(1, 0, 1),
            ev(2, 0, 2),
            ev(3, 0, 3),
            ev(4, 2, 4),
            ev(5, 4, 5),
            ev(6, 3, 6),
        ]);
        assert_eq!(diffusion_depth(&c.prefix_at(10)), 3);
        assert_eq!(diffusion_depth(&c.prefix_at(4)), 2);
    }

    #[test]
    fn chain_row() {
        // r <- a(600) <- b(7200), a follows r, b follows a
        let g = graph(3, &[(1, 0), (2, 1)]);
        let c = cascade(vec![ev(1, 0, 600), ev(2, 1, 7200)]);
        let cfg = FeatureConfig {
            t_i: 3600,
            t_r: 86_400,
            ..Default::default()
        };
        let row = FeatureExtractor::new(&g, cfg).unwrap().row(&c).unwrap();
        assert_eq!(row.early_pop, 1);
        assert_eq!(row.final_pop, 2);
        assert_eq!(row.depth, 1);
        assert_eq!(row.n_adopters, 2);
        assert_eq!(row.density, Some(0.5));
        assert!(row.is_included());
        assert_eq!(row.ln_final, 2f64.ln());
    }

    #[test]
    fn unadopted_cascade_is_excluded() {
        let g = graph(2, &[(1, 0)]);
        let c = cascade(vec![ev(1, 0, 7200)]);
        let row = FeatureExtractor::new(&g, FeatureConfig::default())
            .unwrap()
            .row(&c)
            .unwrap();
        assert_eq!(row.excluded, Some(Exclusion::NoEarlyAdoption));
        assert_eq!(row.excluded.unwrap().as_str(), "no early adoption");

        let cfg = FeatureConfig {
            min_early: 2,
            ..Default::default()
        };
        let c = cascade(vec![ev(1, 0, 10)]);
        let row = FeatureExtractor::new(&g, cfg).unwrap().row(&c).unwrap();
        assert_eq!(row.excluded, Some(Exclusion::BelowMinEarly));
    }

    #[test]
    fn zero_density_uses_floor() {
        let row = FeatureRow::new("x".into(), 3, 2, 2, Some(0.0), 1, None, 1e-6);
        assert_eq!(row.ln_density, Some(1e-6f64.ln()));
        let row = FeatureRow::new("x".into(), 3, 2, 2, Some(0.25), 1, None, 1e-6);
        assert_eq!(row.ln_density, Some(0.25f64.ln()));
    }

    #[test]
    fn config_validation() {
        let bad = FeatureConfig {
            t_i: 10,
            t_r: 10,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let g = graph(1, &[]);
        assert!(FeatureExtractor::new(&g, bad).is_err());
        let bad = FeatureConfig {
            density_floor: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = FeatureConfig {
            min_early: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fingerprint_round_trips() {
        let cfg = FeatureConfig {
            t_i: 1800,
            t_r: 99_999,
            min_early: 3,
            density: DensityOptions {
                pairs: PairMode::Unordered,
                exclude_root: true,
            },
            density_floor: 1e-9,
        };
        assert_eq!(FeatureConfig::parse_fingerprint(&cfg.fingerprint()).unwrap(), cfg);
        assert_eq!(
            FeatureConfig::default().fingerprint(),
            "ti=3600 tr=2592000 min_early=1 pairs=ordered exclude_root=false floor=0.000001"
        );
        assert!(FeatureConfig::parse_fingerprint("ti=3").is_err());
    }

    #[test]
    fn feature_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.tsv");
        let cfg = FeatureConfig::default();
        let rows = vec![
            FeatureRow::new("a".into(), 3, 2, 9, Some(1.0 / 3.0), 2, None, cfg.density_floor),
            FeatureRow::new("b".into(), 1, 0, 4, None, 0, Some(Exclusion::NoEarlyAdoption), cfg.density_floor),
        ];
        let mut out = Vec::new();
        write_feature_header(&mut out, &cfg).unwrap();
        for r in &rows {
            write_feature_row(&mut out, r).unwrap();
        }
        std::fs::write(&path, &out).unwrap();
        let (back_cfg, back) = read_features(&path).unwrap();
        assert_eq!(back_cfg, cfg);
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1].excluded, rows[1].excluded);
        assert_eq!(back[1].density, None);
    }

    /// Random graph plus a random prefix over at most `max_adopters` users.
    fn random_case(rng: &mut ChaCha8Rng, nodes: u32, max_adopters: usize) -> (FollowerGraph, Cascade) {
        let m = rng.random_range(0..nodes as usize * 8);
        let edges: Vec<(u32, u32)> = (0..m)
            .map(|_| (rng.random_range(0..nodes), rng.random_range(0..nodes)))
            .collect();
        let g = graph(nodes, &edges);
        let k = rng.random_range(1..max_adopters);
        let mut adopted = vec![0u32];
        let mut events = Vec::new();
        for t in 0..k as u64 {
            let user = rng.random_range(0..nodes);
            let parent = adopted[rng.random_range(0..adopted.len())];
            adopted.push(user);
            events.push(ev(user, parent, t));
        }
        (g, cascade(events))
    }

    #[test]
    fn density_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let (g, c) = random_case(&mut rng, 300, 60);
            let p = c.prefix_at(u64::MAX);
            let set: Vec<NodeId> = p.adopters().to_vec();
            let n = set.len();
            if n < 2 {
                continue;
            }
            let mut links = 0;
            for &u in &set {
                for &v in &set {
                    if u != v && g.has_edge(u, v).unwrap() {
                        links += 1;
                    }
                }
            }
            let expected = links as f64 / (n * (n - 1)) as f64;
            assert_eq!(link_density(&g, &p, DensityOptions::default()).unwrap(), expected);
        }
    }

    #[test]
    fn exclude_root_changes_n_by_one_and_links_by_root_links() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let (g, c) = random_case(&mut rng, 80, 30);
            let p = c.prefix_at(u64::MAX);
            let n = p.len() as u64;
            if n < 3 {
                continue;
            }
            let with = link_density(&g, &p, DensityOptions::default()).unwrap();
            let without = link_density(
                &g,
                &p,
                DensityOptions {
                    exclude_root: true,
                    ..Default::default()
                },
            )
            .unwrap();
            let l_with = (with * (n * (n - 1)) as f64).round() as u64;
            let l_without = (without * ((n - 1) * (n - 2)) as f64).round() as u64;
            let root = p.root();
            let root_links: u64 = p.adopters()[1..]
                .iter()
                .map(|&a| g.has_edge(root, a).unwrap() as u64 + g.has_edge(a, root).unwrap() as u64)
                .sum();
            assert_eq!(l_with - l_without, root_links);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn density_bounds_and_clique(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (g, c) = random_case(&mut rng, 20, 15);
                let p = c.prefix_at(u64::MAX);
                if p.len() >= 2 {
                    let d = link_density(&g, &p, DensityOptions::default()).unwrap();
                    prop_assert!((0.0..=1.0).contains(&d));
                    let set: HashSet<NodeId> = p.adopters().iter().copied().collect();
                    let clique = set.iter().all(|&u| set.iter().all(|&v| u == v || g.has_edge(u, v).unwrap()));
                    prop_assert_eq!(d == 1.0, clique);
                }
            }

            #[test]
            fn adding_an_adopter_edge_never_lowers_density(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (g, c) = random_case(&mut rng, 25, 12);
                let p = c.prefix_at(u64::MAX);
                prop_assume!(p.len() >= 2);
                let a = p.adopters();
                let (u, v) = (a[rng.random_range(0..a.len())], a[rng.random_range(0..a.len())]);
                let mut edges: Vec<(u32, u32)> = g.edges().map(|(x, y)| (x.0, y.0)).collect();
                edges.push((u.0, v.0));
                let g2 = graph(25, &edges);
                let before = link_density(&g, &p, DensityOptions::default()).unwrap();
                let after = link_density(&g2, &p, DensityOptions::default()).unwrap();
                prop_assert!(after >= before);
            }

            #[test]
            fn later_indicating_time_never_lowers_depth_or_popularity(
                seed in any::<u64>(), t1 in 0u64..20, t2 in 0u64..20,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (_, c) = random_case(&mut rng, 30, 20);
                let (lo, hi) = (t1.min(t2), t1.max(t2));
                let (d_lo, d_hi) = (diffusion_depth(&c.prefix_at(lo)), diffusion_depth(&c.prefix_at(hi)));
                prop_assert!(d_lo <= d_hi);
                prop_assert!(c.popularity_at(lo) <= c.popularity_at(hi));
                prop_assert!(d_lo as usize <= c.popularity_at(lo));
                prop_assert!((d_lo as usize) < c.prefix_at(lo).len());
            }
        }
    }
}
