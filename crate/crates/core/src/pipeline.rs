//! End-to-end commands behind the `cascadepop` binary.
//!
//! Every command writes deterministic outputs into `out_dir` and logs its
//! resolved configuration before doing any work.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeAdapter, CascadeFormat, CascadeLoadStats, CascadeReader, OrphanPolicy};
use crate::error::{Error, Result};
use crate::evaluation::{
    bin_summary, score, spearman, split, write_report_row, Axis, EvalReport, SplitSpec,
    REPORT_COLUMNS,
};
use crate::features::{
    read_features, write_feature_header, write_feature_row, DensityOptions, FeatureConfig,
    FeatureExtractor, FeatureRow, PairMode,
};
use crate::graph::{EdgeAdapter, EdgeFormat, FollowerGraph, GraphLoadStats};
use crate::regression::{fit_ols, predict_clamped, usable, ModelCoefficients, ModelVariant};
use crate::synth::{write_corpus, CorpusSummary, SynthConfig};

pub const FEATURES_FILE: &str = "features.tsv";
pub const EVAL_FILE: &str = "eval.tsv";
const BATCH: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub graph: Option<PathBuf>,
    pub cascades: Option<PathBuf>,
    /// Feature TSV read by `fit`, `eval`, `fit-eval` and `bins`;
    /// defaults to `out_dir/features.tsv`.
    pub features: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub ti: u64,
    pub tr: u64,
    pub train_frac: f64,
    pub min_early: usize,
    pub seed: u64,
    pub density_pairs: PairMode,
    pub exclude_root: bool,
    pub density_floor: f64,
    pub variants: Vec<ModelVariant>,
    pub bins: usize,
    pub orphans: OrphanPolicy,
    /// Raise predictions below the observed early popularity.
    pub clamp: bool,
    pub graph_format: Option<EdgeAdapter>,
    pub cascade_format: Option<CascadeAdapter>,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let f = FeatureConfig::default();
        let s = SplitSpec::default();
        PipelineConfig {
            graph: None,
            cascades: None,
            features: None,
            out_dir: PathBuf::from("."),
            ti: f.t_i,
            tr: f.t_r,
            train_frac: s.train_frac,
            min_early: f.min_early,
            seed: s.seed,
            density_pairs: f.density.pairs,
            exclude_root: f.density.exclude_root,
            density_floor: f.density_floor,
            variants: ModelVariant::ALL.to_vec(),
            bins: 10,
            orphans: OrphanPolicy::default(),
            clamp: false,
            graph_format: None,
            cascade_format: None,
            synth: SynthConfig::bundled(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unprintable config: {e}\n"))
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            t_i: self.ti,
            t_r: self.tr,
            min_early: self.min_early,
            density: DensityOptions {
                pairs: self.density_pairs,
                exclude_root: self.exclude_root,
            },
            density_floor: self.density_floor,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_frac: self.train_frac,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_config().validate()?;
        self.split_spec().validate()?;
        if self.variants.is_empty() {
            return Err(Error::Config("no model variants requested".into()));
        }
        Ok(())
    }

    fn edge_format(&self) -> EdgeFormat {
        self.graph_format.clone().map_or(EdgeFormat::Canonical, EdgeFormat::Adapter)
    }

    fn cascade_format(&self) -> CascadeFormat {
        self.cascade_format
            .clone()
            .map_or(CascadeFormat::Canonical, CascadeFormat::Adapter)
    }

    fn require<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::Config(format!("no {what} file given")))
    }

    pub fn features_path(&self) -> PathBuf {
        self.features
            .clone()
            .unwrap_or_else(|| self.out_dir.join(FEATURES_FILE))
    }

    pub fn coeff_path(&self, v: ModelVariant) -> PathBuf {
        self.out_dir.join(format!("coeffs_{v}.txt"))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn log_config<L: Write>(log: &mut L, command: &str, cfg: &PipelineConfig) {
    let _ = writeln!(log, "# {command}: resolved configuration");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(log, "#   {line}");
    }
}

pub struct IngestReport {
    pub graph: GraphLoadStats,
    pub nodes: usize,
    pub edges: usize,
    pub cascades: CascadeLoadStats,
    pub extra_users: usize,
}

pub fn ingest_check<L: Write>(cfg: &PipelineConfig, log: &mut L) -> Result<IngestReport> {
    log_config(log, "ingest-check", cfg);
    cfg.validate()?;
    let graph_path = cfg.require(&cfg.graph, "graph")?;
    let (graph, gstats) = FollowerGraph::load(graph_path, &cfg.edge_format())?;
    let _ = writeln!(
        log,
        "graph: {} nodes, {} edges ({} lines, {} self-loops dropped, {} duplicates)",
        graph.node_count(),
        graph.edge_count(),
        gstats.lines,
        gstats.self_loops,
        gstats.duplicate_edges
    );
    let (cstats, extra_users) = match &cfg.cascades {
        Some(path) => {
            let mut reader = CascadeReader::open(path, &cfg.cascade_format(), cfg.orphans, &graph)?;
            for c in reader.by_ref() {
                c?.validate()?;
            }
            let extra = reader.users().extra_users();
            let (_, stats) = reader.into_parts();
            log_cascade_stats(log, &stats, extra);
            (stats, extra)
        }
        None => (CascadeLoadStats::default(), 0),
    };
    Ok(IngestReport {
        graph: gstats,
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        cascades: cstats,
        extra_users,
    })
}

fn log_cascade_stats<L: Write>(log: &mut L, s: &CascadeLoadStats, extra: usize) {
    let _ = writeln!(
        log,
        "cascades: {} ({} lines; {} clamped, {} parents repaired, {} events dropped, \
         {} duplicate roots, {} without root, {} self-retweets, {} users outside the graph)",
        s.cascades,
        s.lines,
        s.clamped_events,
        s.repaired_parents,
        s.dropped_events,
        s.duplicate_roots,
        s.skipped_no_root,
        s.self_retweets,
        extra
    );
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureSummary {
    pub cascades: usize,
    pub included: usize,
    pub excluded: usize,
    pub undefined_density: usize,
}

/// Streams cascades from disk and writes one feature row per cascade.
/// Only the graph and one batch of cascades are resident at a time.
pub fn cmd_features<L: Write>(cfg: &PipelineConfig, log: &mut L) -> Result<FeatureSummary> {
    log_config(log, "features", cfg);
    cfg.validate()?;
    let fcfg = cfg.feature_config();
    let graph_path = cfg.require(&cfg.graph, "graph")?;
    let cascade_path = cfg.require(&cfg.cascades, "cascade")?;

    let (graph, gstats) = FollowerGraph::load(graph_path, &cfg.edge_format())?;
    let _ = writeln!(
        log,
        "graph: {} nodes, {} edges, {} self-loops dropped",
        graph.node_count(),
        graph.edge_count(),
        gstats.self_loops
    );
    let extractor = FeatureExtractor::new(&graph, fcfg)?;
    let mut reader = CascadeReader::open(cascade_path, &cfg.cascade_format(), cfg.orphans, &graph)?;

    let out_path = cfg.out_dir.join(FEATURES_FILE);
    let mut out = create(&out_path)?;
    let io = |e| Error::io(&out_path, e);
    write_feature_header(&mut out, &fcfg).map_err(io)?;

    let mut summary = FeatureSummary::default();
    let mut batch = Vec::with_capacity(BATCH);
    loop {
        batch.clear();
        for c in reader.by_ref().take(BATCH) {
            batch.push(c?);
        }
        if batch.is_empty() {
            break;
        }
        let rows: Vec<FeatureRow> = batch
            .par_iter()
            .map(|c| extractor.row(c))
            .collect::<Result<_>>()?;
        for row in &rows {
            summary.cascades += 1;
            if row.is_included() {
                summary.included += 1;
                summary.undefined_density += row.density.is_none() as usize;
            } else {
                summary.excluded += 1;
            }
            write_feature_row(&mut out, row).map_err(io)?;
        }
    }
    out.flush().map_err(io)?;
    if summary.cascades == 0 {
        let _ = fs::remove_file(&out_path);
        return Err(Error::NoCascades);
    }

    let extra = reader.users().extra_users();
    let (_, stats) = reader.into_parts();
    log_cascade_stats(log, &stats, extra);
    let _ = writeln!(
        log,
        "features: {} cascades, {} included, {} excluded ({} with undefined density) -> {}",
        summary.cascades,
        summary.included,
        summary.excluded,
        summary.undefined_density,
        out_path.display()
    );
    Ok(summary)
}

fn load_included(cfg: &PipelineConfig) -> Result<(FeatureConfig, Vec<FeatureRow>)> {
    let path = cfg.features_path();
    let (fcfg, rows) = read_features(&path)?;
    if fcfg != cfg.feature_config() {
        return Err(Error::ConfigMismatch(format!(
            "{} was computed with [{}], this run uses [{}]",
            path.display(),
            fcfg.fingerprint(),
            cfg.feature_config().fingerprint()
        )));
    }
    let included: Vec<FeatureRow> = rows.into_iter().filter(FeatureRow::is_included).collect();
    if included.is_empty() {
        return Err(Error::Data(format!("{}: no included rows", path.display())));
    }
    Ok((fcfg, included))
}

#[derive(Debug)]
pub struct FitOutcome {
    pub models: Vec<ModelCoefficients>,
    pub failures: Vec<(ModelVariant, Error)>,
}

fn fit_variants(
    cfg: &PipelineConfig,
    fcfg: FeatureConfig,
    train: &[FeatureRow],
) -> FitOutcome {
    let mut outcome = FitOutcome {
        models: Vec::new(),
        failures: Vec::new(),
    };
    for &v in &cfg.variants {
        let rows: Vec<FeatureRow> = train.iter().filter(|r| usable(v, r)).cloned().collect();
        match fit_ols(v, &rows) {
            Ok(m) => outcome
                .models
                .push(m.with_features(fcfg).with_split(cfg.split_spec())),
            Err(e) => outcome.failures.push((v, e)),
        }
    }
    outcome
}

fn save_models<L: Write>(cfg: &PipelineConfig, models: &[ModelCoefficients], log: &mut L) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    for m in models {
        let path = cfg.coeff_path(m.variant);
        m.save(&path)?;
        let coeffs: Vec<String> = m.coeffs.iter().map(|c| format!("{c:.6}")).collect();
        let _ = writeln!(
            log,
            "{}: coefficients [{}] from {} rows -> {}",
            m.variant,
            coeffs.join(", "),
            m.n_train,
            path.display()
        );
    }
    Ok(())
}

/// Fits every requested variant on the training split.
pub fn cmd_fit<L: Write>(cfg: &PipelineConfig, log: &mut L) -> Result<FitOutcome> {
    log_config(log, "fit", cfg);
    cfg.validate()?;
    let (fcfg, rows) = load_included(cfg)?;
    let (train, _) = split(&rows, cfg.split_spec())?;
    let outcome = fit_variants(cfg, fcfg, &train);
    save_models(cfg, &outcome.models, log)?;
    for (v, e) in &outcome.failures {
        let _ = writeln!(log, "{v}: {e}");
    }
    Ok(outcome)
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub reports: Vec<EvalReport>,
    pub failures: Vec<(ModelVariant, Error)>,
}

fn score_models(
    cfg: &PipelineConfig,
    models: &[ModelCoefficients],
    test: &[FeatureRow],
) -> Result<Vec<EvalReport>> {
    models
        .iter()
        .map(|m| {
            let rows: Vec<FeatureRow> = test.iter().filter(|r| usable(m.variant, r)).cloned().collect();
            let seed = m.split.map_or(cfg.seed, |s| s.seed);
            if cfg.clamp {
                score_clamped(m, &rows, seed)
            } else {
                score(m, &rows, seed)
            }
        })
        .collect()
}

fn score_clamped(m: &ModelCoefficients, rows: &[FeatureRow], seed: u64) -> Result<EvalReport> {
    let residuals = rows
        .iter()
        .map(|r| Ok(predict_clamped(m, r)? - r.ln_final))
        .collect::<Result<Vec<f64>>>()?;
    let (rmse, mae) = crate::evaluation::rmse_mae(residuals.iter().copied())?;
    Ok(EvalReport {
        variant: m.variant,
        rmse,
        mae,
        n_test: residuals.len(),
        split_seed: seed,
    })
}

fn write_report<L: Write>(
    cfg: &PipelineConfig,
    fcfg: &FeatureConfig,
    reports: &[EvalReport],
    failures: &[(ModelVariant, Error)],
    log: &mut L,
) -> Result<()> {
    let path = cfg.out_dir.join(EVAL_FILE);
    let mut out = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(
        out,
        "# cascadepop-eval {} seed={} train_frac={} clamp={}",
        fcfg.fingerprint(),
        cfg.seed,
        cfg.train_frac,
        cfg.clamp
    )
    .map_err(io)?;
    writeln!(out, "{REPORT_COLUMNS}").map_err(io)?;
    for r in reports {
        write_report_row(&mut out, r).map_err(io)?;
        let _ = writeln!(
            log,
            "{:<13} rmse {:.4}  mae {:.4}  (n_test {})",
            r.variant.name(),
            r.rmse,
            r.mae,
            r.n_test
        );
    }
    for (v, e) in failures {
        writeln!(out, "# {v} failed: {e}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Scores previously fitted coefficient files on the test split.
pub fn cmd_eval<L: Write>(cfg: &PipelineConfig, log: &mut L) -> Result<EvalOutcome> {
    log_config(log, "eval", cfg);
    cfg.validate()?;
    let (fcfg, rows) = load_included(cfg)?;
    let mut models = Vec::new();
    for &v in &cfg.variants {
        let m = ModelCoefficients::load(&cfg.coeff_path(v))?;
        if m.variant != v {
            return Err(Error::Data(format!(
                "{} holds a {} model",
                cfg.coeff_path(v).display(),
                m.variant
            )));
        }
        m.check_features(&fcfg)?;
        if let Some(s) = m.split {
            if s != cfg.split_spec() {
                return Err(Error::ConfigMismatch(format!(
                    "{v} model was fitted on split seed={} train_frac={}, evaluation uses seed={} train_frac={}",
                    s.seed, s.train_frac, cfg.seed, cfg.train_frac
                )));
            }
        }
        models.push(m);
    }
    let (_, test) = split(&rows, cfg.split_spec())?;
    let reports = score_models(cfg, &models, &test)?;
    write_report(cfg, &fcfg, &reports, &[], log)?;
    Ok(EvalOutcome {
        reports,
        failures: Vec::new(),
    })
}

/// Fit on the training split, then score on the test split. A variant that
/// cannot be fitted is reported without stopping the others.
pub fn cmd_fit_eval<L: Write>(cfg: &PipelineConfig, log: &mut L) -> Result<EvalOutcome> {
    log_config(log, "fit-eval", cfg);
    cfg.validate()?;
    let (fcfg, rows) = load_included(cfg)?;
    let (train, test) = split(&rows, cfg.split_spec())?;
    let fit = fit_variants(cfg, fcfg, &train);
    save_models(cfg, &fit.models, log)?;
    let reports = score_models(cfg, &fit.models, &test)?;
    for (v, e) in &fit.failures {
        let _ = writeln!(log, "{v}: {e}");
    }
    write_report(cfg, &fcfg, &reports, &fit.failures, log)?;
    Ok(EvalOutcome {
        reports,
        failures: fit.failures,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinsOutcome {
    pub density_spearman: Result<f64, String>,
    pub depth_spearman: Result<f64, String>,
    pub density_path: PathBuf,
    pub depth_path: PathBuf,
}

/// Writes `bins_density.csv` and `bins_depth.csv` and reports Spearman
/// correlations of both axes with final popularity.
pub fn cmd_bins<L: Write>(cfg: &PipelineConfig, log: &mut L) -> Result<BinsOutcome> {
    log_config(log, "bins", cfg);
    cfg.validate()?;
    let (fcfg, rows) = load_included(cfg)?;
    let mut paths = Vec::new();
    for axis in [Axis::Density, Axis::Depth] {
        let summary = bin_summary(&rows, axis, cfg.bins)?;
        let path = cfg.out_dir.join(format!("bins_{axis}.csv"));
        let mut out = create(&path)?;
        let io = |e| Error::io(&path, e);
        writeln!(out, "# cascadepop-bins axis={axis} {}", fcfg.fingerprint()).map_err(io)?;
        summary.write_csv(&mut out).map_err(io)?;
        out.flush().map_err(io)?;
        paths.push(path);
    }
    let corr = |axis| spearman(&rows, axis).map_err(|e| e.to_string());
    let outcome = BinsOutcome {
        density_spearman: corr(Axis::Density),
        depth_spearman: corr(Axis::Depth),
        depth_path: paths.pop().unwrap(),
        density_path: paths.pop().unwrap(),
    };
    for (name, r) in [("density", &outcome.density_spearman), ("depth", &outcome.depth_spearman)] {
        let _ = match r {
            Ok(v) => writeln!(log, "spearman(final_pop, {name}) = {v:.4}"),
            Err(e) => writeln!(log, "spearman(final_pop, {name}) undefined: {e}"),
        };
    }
    Ok(outcome)
}

/// Generates a synthetic corpus into `out_dir`.
pub fn cmd_simulate<L: Write>(cfg: &PipelineConfig, log: &mut L) -> Result<CorpusSummary> {
    log_config(log, "simulate", cfg);
    cfg.validate()?;
    cfg.synth.validate()?;
    let summary = write_corpus(&cfg.out_dir, &cfg.synth, &cfg.feature_config())?;
    let _ = writeln!(
        log,
        "simulate: {} nodes, {} edges, {} cascades, {} retweets -> {}",
        summary.nodes,
        summary.edges,
        summary.cascades,
        summary.events,
        cfg.out_dir.display()
    );
    Ok(summary)
}
