use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cascadepop::cascade::OrphanPolicy;
use cascadepop::features::PairMode;
use cascadepop::pipeline::{self, PipelineConfig};
use cascadepop::synth::SynthConfig;
use cascadepop::{Error, ModelVariant};

#[derive(Parser)]
#[command(name = "cascadepop", version, about = "Retweet cascade popularity prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the graph (and cascades) and report ingestion statistics.
    IngestCheck(Common),
    /// Compute per-cascade feature rows.
    Features(Common),
    /// Fit the requested models on the training split.
    Fit(Common),
    /// Score fitted models on the test split.
    Eval(Common),
    /// Fit and score in one pass.
    FitEval(Common),
    /// Binned final popularity by density and depth, plus Spearman correlations.
    Bins(Common),
    /// Generate a synthetic graph, cascades and ground-truth features.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synth: SynthArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Pairs {
    Ordered,
    Unordered,
}

#[derive(Clone, Copy, ValueEnum)]
enum Orphans {
    Reparent,
    Drop,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    cascades: Option<PathBuf>,
    /// Feature TSV to read (defaults to OUT_DIR/features.tsv).
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Indicating time, seconds after the post.
    #[arg(long)]
    ti: Option<u64>,
    /// Reference time, seconds after the post.
    #[arg(long)]
    tr: Option<u64>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    min_early: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    density_pairs: Option<Pairs>,
    /// Leave the original poster out of the density.
    #[arg(long)]
    exclude_root: bool,
    /// Density substituted for prefixes without links before taking logs.
    #[arg(long)]
    density_floor: Option<f64>,
    /// Comma-separated: baseline, with_density, with_depth.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
    /// Number of density bins.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, value_enum)]
    orphans: Option<Orphans>,
    /// Never predict below the observed early popularity.
    #[arg(long)]
    clamp: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Bundled,
    Large,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    communities: Option<usize>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    #[arg(long)]
    cascade_count: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    structure_boost: Option<f64>,
    /// Mean exposure delay in seconds.
    #[arg(long)]
    mean_delay: Option<f64>,
    /// Seconds after the post during which new adopters raise the diversity.
    #[arg(long)]
    diversity_window: Option<u64>,
    #[arg(long)]
    max_sim_time: Option<u64>,
}

fn resolve(common: &Common) -> Result<PipelineConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($field:ident => $target:ident),* $(,)?) => {
            $(if let Some(v) = &common.$field { cfg.$target = v.clone().into(); })*
        };
    }
    set!(
        graph => graph,
        cascades => cascades,
        features => features,
        out_dir => out_dir,
        ti => ti,
        tr => tr,
        train_frac => train_frac,
        min_early => min_early,
        seed => seed,
        density_floor => density_floor,
        bins => bins,
    );
    if let Some(p) = common.density_pairs {
        cfg.density_pairs = match p {
            Pairs::Ordered => PairMode::Ordered,
            Pairs::Unordered => PairMode::Unordered,
        };
    }
    if let Some(o) = common.orphans {
        cfg.orphans = match o {
            Orphans::Reparent => OrphanPolicy::Reparent,
            Orphans::Drop => OrphanPolicy::Drop,
        };
    }
    if let Some(vs) = &common.variants {
        cfg.variants = vs
            .iter()
            .map(|v| v.trim().parse::<ModelVariant>())
            .collect::<Result<_, _>>()?;
    }
    cfg.exclude_root |= common.exclude_root;
    cfg.clamp |= common.clamp;
    Ok(cfg)
}

fn apply_synth(cfg: &mut PipelineConfig, args: &SynthArgs, seed: Option<u64>) {
    let s = &mut cfg.synth;
    match args.preset {
        Some(Preset::Bundled) => *s = SynthConfig::bundled(),
        Some(Preset::Large) => *s = SynthConfig::large(),
        None => {}
    }
    macro_rules! set {
        ($($field:ident => $target:ident),* $(,)?) => {
            $(if let Some(v) = args.$field { s.$target = v; })*
        };
    }
    set!(
        nodes => n_nodes,
        communities => n_communities,
        p_in => p_in,
        p_out => p_out,
        cascade_count => cascade_count,
        lambda => lambda,
        structure_boost => structure_boost,
        mean_delay => mean_delay_s,
        diversity_window => diversity_window_s,
        max_sim_time => max_sim_time,
    );
    if let Some(seed) = seed {
        s.seed = seed;
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let mut log = io::stderr().lock();
    let failed = |n: usize| if n > 0 { ExitCode::from(4) } else { ExitCode::SUCCESS };
    match cli.command {
        Command::IngestCheck(c) => {
            pipeline::ingest_check(&resolve(&c)?, &mut log)?;
        }
        Command::Features(c) => {
            let s = pipeline::cmd_features(&resolve(&c)?, &mut log)?;
            println!("cascades\t{}\nincluded\t{}\nexcluded\t{}", s.cascades, s.included, s.excluded);
        }
        Command::Fit(c) => {
            let outcome = pipeline::cmd_fit(&resolve(&c)?, &mut log)?;
            return Ok(failed(outcome.failures.len()));
        }
        Command::Eval(c) => {
            pipeline::cmd_eval(&resolve(&c)?, &mut log)?;
        }
        Command::FitEval(c) => {
            let outcome = pipeline::cmd_fit_eval(&resolve(&c)?, &mut log)?;
            for r in &outcome.reports {
                println!("{}\t{}\t{}", r.variant, r.rmse, r.mae);
            }
            return Ok(failed(outcome.failures.len()));
        }
        Command::Bins(c) => {
            let b = pipeline::cmd_bins(&resolve(&c)?, &mut log)?;
            for (axis, r) in [("density", b.density_spearman), ("depth", b.depth_spearman)] {
                match r {
                    Ok(v) => println!("spearman\t{axis}\t{v}"),
                    Err(_) => println!("spearman\t{axis}\tundefined"),
                }
            }
        }
        Command::Simulate { common, synth } => {
            let mut cfg = resolve(&common)?;
            apply_synth(&mut cfg, &synth, common.seed);
            pipeline::cmd_simulate(&cfg, &mut log)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
