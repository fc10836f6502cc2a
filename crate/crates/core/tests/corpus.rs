use std::collections::HashSet;
use std::path::Path;

use cascadepop::cascade::{load_cascades, CascadeFormat, OrphanPolicy};
use cascadepop::evaluation::{bin_summary, Axis};
use cascadepop::features::{
    diffusion_depth, extract_features, link_density, read_features, DensityOptions, FeatureConfig,
    PairMode,
};
use cascadepop::graph::EdgeFormat;
use cascadepop::synth::{gen_graph, simulate, write_corpus, SynthConfig, CASCADE_FILE, GRAPH_FILE, TRUTH_FILE};
use cascadepop::{Error, FollowerGraph};

fn synth(cascades: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_nodes: 800,
        n_communities: 8,
        p_in: 0.05,
        p_out: 0.003,
        cascade_count: cascades,
        lambda: 0.07,
        structure_boost: 3.0,
        mean_delay_s: 1200.0,
        seed,
        ..SynthConfig::bundled()
    }
}

fn load(dir: &Path) -> (FollowerGraph, Vec<cascadepop::Cascade>) {
    let (g, _) = FollowerGraph::load(&dir.join(GRAPH_FILE), &EdgeFormat::Canonical).unwrap();
    let (cascades, _, stats) =
        load_cascades(&dir.join(CASCADE_FILE), &CascadeFormat::Canonical, OrphanPolicy::Reparent, &g).unwrap();
    assert_eq!(stats.dropped_lines(), 0);
    assert_eq!(stats.repaired_parents, 0);
    assert_eq!(stats.clamped_events, 0);
    (g, cascades)
}

#[test]
fn serialized_corpus_loads_back_to_the_generated_structures() {
    let cfg = synth(500, 5);
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &cfg, &FeatureConfig::default()).unwrap();
    let truth_graph = gen_graph(&cfg).unwrap();
    let sims = simulate(&truth_graph, &cfg).unwrap();
    let (g, cascades) = load(dir.path());

    // Loading renumbers nodes in first-seen order, so compare external names.
    let name = |id| g.name(id).unwrap().to_string();
    let loaded_edges: HashSet<(String, String)> = g.edges().map(|(u, v)| (name(u), name(v))).collect();
    let generated_edges: HashSet<(String, String)> = truth_graph
        .graph
        .edges()
        .map(|(u, v)| (u.to_string(), v.to_string()))
        .collect();
    assert_eq!(loaded_edges, generated_edges);

    assert_eq!(cascades.len(), sims.len());
    for (c, s) in cascades.iter().zip(&sims) {
        let want = &s.cascade;
        assert_eq!(c.tweet_id, want.tweet_id);
        assert_eq!(c.post_time, want.post_time);
        assert_eq!(name(c.root), want.root.to_string(), "{}", c.tweet_id);
        assert_eq!(c.events.len(), want.events.len(), "{}", c.tweet_id);
        for (e, w) in c.events.iter().zip(&want.events) {
            assert_eq!(name(e.user), w.user.to_string());
            assert_eq!(name(e.parent), w.parent.to_string());
            assert_eq!(e.offset, w.offset);
        }
    }
}

#[test]
fn feature_rows_match_direct_recomputation() {
    let cfg = synth(1000, 9);
    let dir = tempfile::tempdir().unwrap();
    let fcfg = FeatureConfig::default();
    write_corpus(dir.path(), &cfg, &fcfg).unwrap();
    let (g, cascades) = load(dir.path());
    let rows = extract_features(&g, &cascades, fcfg).unwrap();
    let (truth_cfg, truth) = read_features(&dir.path().join(TRUTH_FILE)).unwrap();
    assert_eq!(truth_cfg, fcfg);
    assert_eq!(rows.len(), cascades.len());
    assert_eq!(truth.len(), cascades.len());

    let mut with_early = 0;
    for ((row, c), t) in rows.iter().zip(&cascades).zip(&truth) {
        let prefix = c.prefix_at(fcfg.t_i);
        assert_eq!(row.tweet_id, c.tweet_id);
        assert_eq!(row.early_pop, c.popularity_at(fcfg.t_i));
        assert_eq!(row.final_pop, c.popularity_at(fcfg.t_r));
        assert_eq!(row.n_adopters, prefix.len());
        assert_eq!(row.depth, diffusion_depth(&prefix));
        let direct = match link_density(&g, &prefix, fcfg.density) {
            Ok(d) => Some(d),
            Err(Error::UndefinedDensity) => None,
            Err(e) => panic!("{e}"),
        };
        assert_eq!(row.density, direct);
        assert_eq!(row.excluded.is_some(), row.early_pop == 0);
        assert_eq!(row, t, "{}", c.tweet_id);
        with_early += usize::from(row.early_pop > 0);
    }
    assert!(with_early > 100, "only {with_early} cascades with early adoption");
}

#[test]
fn truth_tracks_density_options() {
    let cfg = synth(300, 3);
    for density in [
        DensityOptions { pairs: PairMode::Unordered, exclude_root: false },
        DensityOptions { pairs: PairMode::Ordered, exclude_root: true },
    ] {
        let fcfg = FeatureConfig { density, ..FeatureConfig::default() };
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &cfg, &fcfg).unwrap();
        let (g, cascades) = load(dir.path());
        let rows = extract_features(&g, &cascades, fcfg).unwrap();
        let (_, truth) = read_features(&dir.path().join(TRUTH_FILE)).unwrap();
        assert_eq!(rows, truth, "{density:?}");
    }
}

#[test]
fn bin_means_match_a_flat_scan() {
    let cfg = synth(1000, 21);
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &cfg, &FeatureConfig::default()).unwrap();
    let (_, rows) = read_features(&dir.path().join(TRUTH_FILE)).unwrap();
    let rows: Vec<_> = rows.into_iter().filter(|r| r.is_included()).collect();

    for (axis, n_bins) in [(Axis::Density, 10), (Axis::Density, 7), (Axis::Depth, 0)] {
        let summary = bin_summary(&rows, axis, n_bins).unwrap();
        let last = summary.bins.len() - 1;
        let mut seen = 0;
        for (i, b) in summary.bins.iter().enumerate() {
            let mut sum = 0.0;
            let mut count = 0;
            for r in &rows {
                let v = match axis {
                    Axis::Density => r.density.unwrap(),
                    Axis::Depth => r.depth as f64,
                };
                let inside = v >= b.lo && (v < b.hi || (i == last && v <= b.hi));
                if inside {
                    sum += r.final_pop as f64;
                    count += 1;
                }
            }
            assert_eq!(b.count, count, "{axis:?} bin {i}");
            match b.mean_final_pop {
                None => assert_eq!(count, 0),
                Some(m) => {
                    let want = sum / count as f64;
                    assert!((m - want).abs() <= 1e-12 * want.abs(), "{axis:?} bin {i}: {m} vs {want}");
                }
            }
            seen += count;
        }
        assert_eq!(seen, rows.len(), "{axis:?}");
    }
}
